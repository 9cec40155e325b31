//! Bayesian layer: priors, quadratic losses, the integrated Holevo bound
//! `E_pi C_G0`, the van Trees right-hand side and the prior information `J`.

pub mod prior;
pub mod quadrature;
mod vantrees;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use prior::{prior_taper, Prior, PriorSpec};
pub use quadrature::BallRule;
pub use vantrees::{
    canonical_c, j_functional, j_functional_with, van_trees_rhs, CFunction, JReport, VanTreesReport,
};

use crate::error::{Error, Result};
use crate::holevo::{solve_holevo_warm, HolevoProblem, HolevoSolution, SolverOptions};
use crate::linalg::{self, CMat, RMat, RVec};
use crate::quantum::{self, fidelity_embedding, Family, ParametricModel};
use crate::serial;
use quadrature::Ray;

/// Quadratic loss `(psi(a) - psi(b))^T G~ (psi(a) - psi(b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// `scale * (1 - Fid)`, exactly quadratic in the family's fidelity embedding.
    Fidelity {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Constant `G~` on the parameters themselves (`psi = theta`).
    Quadratic {
        #[serde(with = "serial::rmat")]
        gtilde: RMat,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec::Fidelity { scale: 1.0 }
    }
}

/// `psi`, its Jacobian and `G~` at one parameter value.
#[derive(Debug, Clone)]
pub struct LossPoint {
    pub psi: RVec,
    /// `q x p`.
    pub jacobian: RMat,
    pub gtilde: RMat,
}

impl LossPoint {
    /// `G0 = psi'^T G~ psi'`.
    pub fn g0(&self) -> RMat {
        linalg::symmetrize(&(self.jacobian.transpose() * &self.gtilde * &self.jacobian))
    }
}

impl LossSpec {
    pub fn fidelity() -> Self {
        LossSpec::Fidelity { scale: 1.0 }
    }

    /// The same loss with `G~` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            LossSpec::Fidelity { scale } => LossSpec::Fidelity { scale: scale * c },
            LossSpec::Quadratic { gtilde } => LossSpec::Quadratic { gtilde: gtilde * c },
        }
    }

    pub fn at(&self, model: &ParametricModel, theta: &[f64]) -> Result<LossPoint> {
        match self {
            LossSpec::Fidelity { scale } => {
                let e = fidelity_embedding(model, theta)?;
                let q = e.psi.len();
                Ok(LossPoint {
                    psi: e.psi,
                    jacobian: e.jacobian,
                    gtilde: RMat::identity(q, q) * (scale * e.loss_scale),
                })
            }
            LossSpec::Quadratic { gtilde } => {
                let p = model.num_params();
                if gtilde.nrows() != p || gtilde.ncols() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: gtilde.nrows(),
                    });
                }
                Ok(LossPoint {
                    psi: RVec::from_column_slice(theta),
                    jacobian: RMat::identity(p, p),
                    gtilde: gtilde.clone(),
                })
            }
        }
    }

    /// Loss of the estimate `est` when the truth is `truth`.
    pub fn value(&self, model: &ParametricModel, est: &[f64], truth: &[f64]) -> Result<f64> {
        match self {
            LossSpec::Fidelity { scale } => {
                if model.family() == Family::AffineCustom {
                    return Err(Error::Unsupported(
                        "fidelity loss needs a built-in family".into(),
                    ));
                }
                let a = model.rho(est)?;
                let b = model.rho(truth)?;
                Ok(scale * (1.0 - quantum::fidelity_matrices(&a, &b)?).max(0.0))
            }
            LossSpec::Quadratic { gtilde } => {
                let d = RVec::from_iterator(est.len(), est.iter().zip(truth).map(|(a, b)| a - b));
                Ok((d.transpose() * gtilde * &d)[(0, 0)])
            }
        }
    }
}

/// Quadrature settings shared by the integrated bound and `J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureOptions {
    /// Radial Gauss-Legendre nodes at the coarsest level.
    pub radial: usize,
    /// Azimuthal nodes at the coarsest level (polar angles use half as many).
    pub angular: usize,
    /// Number of grid levels; the error estimate compares the last two.
    pub levels: usize,
    /// Node-count growth per level.
    pub refine: f64,
    /// Parameter dimensions above this use Monte Carlo instead of a product grid.
    pub max_grid_dim: usize,
    /// Monte Carlo sample count.
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Central-difference step for `div C` in `J`.
    pub fd_step: f64,
    pub solver: SolverOptions,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            radial: 8,
            angular: 16,
            levels: 3,
            refine: 1.5,
            max_grid_dim: 3,
            samples: 4000,
            seed: 0,
            workers: None,
            fd_step: 1e-4,
            solver: SolverOptions::default(),
        }
    }
}

impl QuadratureOptions {
    pub(crate) fn uses_grid(&self, dim: usize) -> bool {
        dim <= self.max_grid_dim
    }

    /// Rule for level `level`; Monte Carlo rules carry weights `1 / (n pi)`.
    pub(crate) fn rule(&self, prior: &Prior, level: usize) -> BallRule {
        let dim = prior.dim();
        if self.uses_grid(dim) {
            let f = self.refine.powi(level as i32);
            let nr = ((self.radial as f64 * f).round() as usize).max(2) * prior.breakpoints().len();
            let na = ((self.angular as f64 * f).round() as usize).max(4);
            BallRule::product(dim, &prior.breakpoints(), nr, na)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(level as u64);
            let n = self.samples.max(2);
            let rays = (0..n)
                .map(|_| {
                    let theta = prior.sample(&mut rng);
                    let r = quantum::norm(&theta);
                    let direction = if r > 0.0 {
                        theta.iter().map(|t| t / r).collect()
                    } else {
                        let mut e = vec![0.0; dim];
                        e[0] = 1.0;
                        e
                    };
                    Ray {
                        direction,
                        nodes: vec![(r, 1.0 / (n as f64 * prior.density(&theta)))],
                    }
                })
                .collect();
            BallRule {
                dim,
                radius: prior.support_radius(),
                rays,
            }
        }
    }

    pub(crate) fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Holevo solution at one quadrature node.
#[derive(Debug, Clone)]
pub struct NodeSolution {
    pub theta: Vec<f64>,
    pub weight: f64,
    pub density: f64,
    pub loss: LossPoint,
    pub solution: HolevoSolution,
}

pub(crate) fn solve_at(
    model: &ParametricModel,
    loss: &LossSpec,
    theta: &[f64],
    warm: Option<&[CMat]>,
    opts: &SolverOptions,
) -> Result<(LossPoint, HolevoSolution)> {
    let lp = loss.at(model, theta)?;
    let problem = HolevoProblem::from_model(model, theta, lp.g0())?;
    let sol = solve_holevo_warm(&problem, opts, warm)?;
    Ok((lp, sol))
}

/// Solves at every node of `rule`, warm-starting outward along each ray.
pub(crate) fn solve_rule(
    model: &ParametricModel,
    loss: &LossSpec,
    prior: &Prior,
    rule: &BallRule,
    opts: &QuadratureOptions,
) -> Result<Vec<NodeSolution>> {
    let per_ray: Vec<Result<Vec<NodeSolution>>> = opts.run(|| {
        rule.rays
            .par_iter()
            .map(|ray| {
                let mut out: Vec<NodeSolution> = Vec::with_capacity(ray.nodes.len());
                for &(r, w) in &ray.nodes {
                    let theta: Vec<f64> = ray.direction.iter().map(|u| u * r).collect();
                    let warm = out.last().map(|n| n.solution.x_star.xs.as_slice());
                    let (lp, sol) = solve_at(model, loss, &theta, warm, &opts.solver).map_err(|e| {
                        Error::NodeFailure {
                            node: theta.clone(),
                            source: Box::new(e),
                        }
                    })?;
                    out.push(NodeSolution {
                        density: prior.density(&theta),
                        theta,
                        weight: w,
                        loss: lp,
                        solution: sol,
                    });
                }
                Ok(out)
            })
            .collect()
    })?;
    let mut nodes = Vec::with_capacity(rule.len());
    for r in per_ray {
        nodes.extend(r?);
    }
    Ok(nodes)
}

/// One grid level of [`integrated_holevo`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub nodes: usize,
    pub value: f64,
    /// Quadrature of the prior itself.
    pub mass: f64,
}

/// Integrated bound report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratedReport {
    pub value: f64,
    pub error_estimate: f64,
    /// Nodes on the finest level.
    pub nodes: usize,
    pub solver_failures: usize,
    pub levels: Vec<LevelEstimate>,
    /// `E ||theta||` by the finest rule.
    pub mean_radius: f64,
    /// Weighted variance of `C_G0` across the finest nodes.
    pub integrand_variance: f64,
}

/// Floor on error estimates: per-node values are only as accurate as the
/// solver's stage tolerance.
fn error_floor(opts: &QuadratureOptions, value: f64) -> f64 {
    opts.solver.stage_tol.max(64.0 * f64::EPSILON) * value.abs()
}

/// `E_pi C_G0(theta)` with `G0 = psi'^T G~ psi'` by refined quadrature.
pub fn integrated_holevo(
    model: &ParametricModel,
    loss: &LossSpec,
    prior: &Prior,
    opts: &QuadratureOptions,
) -> Result<IntegratedReport> {
    if prior.dim() != model.num_params() {
        return Err(Error::DimensionMismatch {
            expected: model.num_params(),
            found: prior.dim(),
        });
    }
    prior.check_boundary_zero()?;
    if !model.domain().contains(&vec_with_norm(prior.dim(), prior.support_radius())) {
        return Err(Error::InvalidPrior("prior support leaves the model domain".into()));
    }

    let grid = opts.uses_grid(prior.dim());
    let nlev = if grid { opts.levels.max(2) } else { 1 };
    let mut levels = Vec::with_capacity(nlev);
    let mut finest = None;
    for level in 0..nlev {
        let rule = opts.rule(prior, level);
        let nodes = solve_rule(model, loss, prior, &rule, opts)?;
        let (mut num, mut mass) = (0.0, 0.0);
        for n in &nodes {
            num += n.weight * n.density * n.solution.value;
            mass += n.weight * n.density;
        }
        levels.push(LevelEstimate {
            nodes: nodes.len(),
            value: num / mass,
            mass,
        });
        finest = Some(nodes);
    }
    let nodes = finest.expect("at least one level");
    let last = levels.last().expect("at least one level").clone();
    if (last.mass - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidPrior(format!(
            "prior integrates to {} under the quadrature",
            last.mass
        )));
    }

    let value = last.value;
    let (mut mean_radius, mut second) = (0.0, 0.0);
    for n in &nodes {
        let w = n.weight * n.density / last.mass;
        mean_radius += w * quantum::norm(&n.theta);
        second += w * (n.solution.value - value).powi(2);
    }
    let error = if grid {
        (levels[nlev - 1].value - levels[nlev - 2].value).abs()
    } else {
        // Self-normalized Monte Carlo: standard error of the sample mean.
        (second / nodes.len() as f64).sqrt()
    };
    Ok(IntegratedReport {
        value,
        error_estimate: error.max(error_floor(opts, value)),
        nodes: last.nodes,
        solver_failures: 0,
        levels,
        mean_radius,
        integrand_variance: second,
    })
}

fn vec_with_norm(dim: usize, r: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = r;
    v
}
