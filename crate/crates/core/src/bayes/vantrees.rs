//! van Trees right-hand side and the prior information `J(pi)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_at, BallRule, LossPoint, LossSpec, Prior, QuadratureOptions};
use crate::error::{Error, Result};
use crate::holevo::{HolevoSolution, SolverOptions};
use crate::linalg::{self, CMat, RMat, RVec};
use crate::quantum::{self, ParametricModel};

/// Info function `theta -> I_M(theta)` (per copy).
pub type InfoFn<'a> = dyn Fn(&[f64]) -> Result<RMat> + Sync + 'a;

/// User-supplied `C(theta)`.
pub type CustomC = Arc<dyn Fn(&[f64]) -> Result<RMat> + Send + Sync>;

/// The `q x p` matrix function `C` in the van Trees inequality.
#[derive(Clone)]
pub enum CFunction {
    /// `C = G~ psi' V0`, with `V0` from the Holevo solution at `theta`.
    Canonical,
    Custom(CustomC),
}

impl std::fmt::Debug for CFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CFunction::Canonical => write!(f, "Canonical"),
            CFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// `C = G~ psi' V0` at one point, with the solution it came from.
pub fn canonical_c(
    model: &ParametricModel,
    loss: &LossSpec,
    theta: &[f64],
    warm: Option<&[CMat]>,
    opts: &SolverOptions,
) -> Result<(RMat, LossPoint, HolevoSolution)> {
    let (lp, sol) = solve_at(model, loss, theta, warm, opts)?;
    let c = &lp.gtilde * &lp.jacobian * &sol.v0;
    Ok((c, lp, sol))
}

struct CEval {
    c: RMat,
    loss: LossPoint,
    warm: Option<Vec<CMat>>,
}

fn eval_c(
    model: &ParametricModel,
    loss: &LossSpec,
    cf: &CFunction,
    theta: &[f64],
    warm: Option<&[CMat]>,
    opts: &SolverOptions,
) -> Result<CEval> {
    match cf {
        CFunction::Canonical => {
            let (c, lp, sol) = canonical_c(model, loss, theta, warm, opts)?;
            Ok(CEval {
                c,
                loss: lp,
                warm: Some(sol.x_star.xs),
            })
        }
        CFunction::Custom(f) => {
            let lp = loss.at(model, theta)?;
            let c = f(theta)?;
            if c.nrows() != lp.jacobian.nrows() || c.ncols() != lp.jacobian.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: lp.jacobian.nrows(),
                    found: c.nrows(),
                });
            }
            Ok(CEval { c, loss: lp, warm: None })
        }
    }
}

/// Per-node contributions, already multiplied by the quadrature weight.
#[derive(Default, Clone, Copy)]
struct Terms {
    mass: f64,
    j: f64,
    numerator: f64,
    info: f64,
}

impl std::ops::AddAssign for Terms {
    fn add_assign(&mut self, o: Terms) {
        self.mass += o.mass;
        self.j += o.j;
        self.numerator += o.numerator;
        self.info += o.info;
    }
}

#[allow(clippy::too_many_arguments)]
fn node_terms(
    model: &ParametricModel,
    prior: &Prior,
    loss: &LossSpec,
    cf: &CFunction,
    info_fn: Option<&InfoFn>,
    theta: &[f64],
    weight: f64,
    radial_step: f64,
    warm: Option<&[CMat]>,
    opts: &QuadratureOptions,
) -> Result<(Terms, Option<Vec<CMat>>)> {
    let p = theta.len();
    let density = prior.density(theta);
    let here = eval_c(model, loss, cf, theta, warm, &opts.solver)?;

    // div C by central differences: sum_j d_j C[:, j].
    let h = opts.fd_step;
    let q = here.c.nrows();
    let mut div = RVec::zeros(q);
    for j in 0..p {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let w = here.warm.as_deref();
        let cp = eval_c(model, loss, cf, &plus, w, &opts.solver)?.c;
        let cm = eval_c(model, loss, cf, &minus, w, &opts.solver)?.c;
        div += (cp.column(j) - cm.column(j)) / (2.0 * h);
    }

    // Radial derivative of the density extended by zero outside its support.
    let r = quantum::norm(theta);
    let s = radial_step;
    let dpi = (prior.radial_density(r + s) - prior.radial_density(r - s)) / (2.0 * s);
    let mut grad_pi = RVec::zeros(p);
    if r > 0.0 {
        for k in 0..p {
            grad_pi[k] = dpi * theta[k] / r;
        }
    }

    let mut terms = Terms {
        mass: weight * density,
        ..Terms::default()
    };
    if density > 0.0 {
        let flux = &div * density + &here.c * grad_pi;
        let gt_inv = linalg::spd_inverse(&here.loss.gtilde, "G~", 0.0)?;
        terms.j = weight * (flux.transpose() * &gt_inv * &flux)[(0, 0)] / density;
        terms.numerator = weight * density * (&here.c * here.loss.jacobian.transpose()).trace();
        if let Some(f) = info_fn {
            let info = f(theta)?;
            let m = &gt_inv * &here.c * info * here.c.transpose();
            terms.info = weight * density * m.trace();
        }
    }
    Ok((terms, here.warm))
}

fn level_terms(
    model: &ParametricModel,
    prior: &Prior,
    loss: &LossSpec,
    cf: &CFunction,
    info_fn: Option<&InfoFn>,
    rule: &BallRule,
    opts: &QuadratureOptions,
) -> Result<Terms> {
    let step = 2.0 * rule.boundary_gap().max(1e-8);
    let per_ray: Vec<Result<Terms>> = opts.run(|| {
        rule.rays
            .par_iter()
            .map(|ray| {
                let mut total = Terms::default();
                let mut warm: Option<Vec<CMat>> = None;
                for &(r, w) in &ray.nodes {
                    let theta: Vec<f64> = ray.direction.iter().map(|u| u * r).collect();
                    let (t, next) = node_terms(
                        model,
                        prior,
                        loss,
                        cf,
                        info_fn,
                        &theta,
                        w,
                        step,
                        warm.as_deref(),
                        opts,
                    )
                    .map_err(|e| Error::NodeFailure {
                        node: theta.clone(),
                        source: Box::new(e),
                    })?;
                    total += t;
                    warm = next;
                }
                Ok(total)
            })
            .collect()
    })?;
    let mut total = Terms::default();
    for t in per_ray {
        total += t?;
    }
    Ok(total)
}

/// `J(pi)` with its per-level values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JReport {
    pub value: f64,
    pub levels: Vec<f64>,
    /// `|J_last - J_first| / J_last`.
    pub drift: f64,
}

const J_DRIFT_LIMIT: f64 = 0.05;

fn finish_j(levels: Vec<f64>) -> Result<JReport> {
    let last = *levels.last().expect("at least one level");
    let first = levels[0];
    let drift = if last != 0.0 {
        ((last - first) / last).abs()
    } else if first != 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !last.is_finite() || drift > J_DRIFT_LIMIT {
        return Err(Error::InfiniteJ { drift, levels });
    }
    Ok(JReport {
        value: last,
        levels,
        drift,
    })
}

fn levels_for(prior: &Prior, opts: &QuadratureOptions) -> usize {
    if opts.uses_grid(prior.dim()) {
        opts.levels.max(2)
    } else {
        1
    }
}

/// `J(pi) = E_pi[(C pi)'^T G~^-1 (C pi)' / pi^2]` for the canonical `C`.
pub fn j_functional(
    model: &ParametricModel,
    prior: &Prior,
    loss: &LossSpec,
    opts: &QuadratureOptions,
) -> Result<JReport> {
    j_functional_with(model, prior, loss, &CFunction::Canonical, opts)
}

/// [`j_functional`] for an arbitrary `C`.
pub fn j_functional_with(
    model: &ParametricModel,
    prior: &Prior,
    loss: &LossSpec,
    cf: &CFunction,
    opts: &QuadratureOptions,
) -> Result<JReport> {
    let mut levels = Vec::new();
    for level in 0..levels_for(prior, opts) {
        let rule = opts.rule(prior, level);
        let t = level_terms(model, prior, loss, cf, None, &rule, opts)?;
        levels.push(t.j / t.mass);
    }
    finish_j(levels)
}

/// van Trees bound on `N E_pi tr(G~ V)` for each requested `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanTreesReport {
    /// `E_pi tr(C psi'^T)`; equals `E_pi C_G0` for the canonical `C`.
    pub numerator_mean: f64,
    /// `E_pi tr(G~^-1 C I_M C^T)`.
    pub info_term: f64,
    pub j: JReport,
    /// `(N, bound)` pairs.
    pub rhs: Vec<(f64, f64)>,
}

/// `(E tr(C psi'^T))^2 / (E tr(G~^-1 C I_M C^T) + J / N)`.
pub fn van_trees_rhs(
    model: &ParametricModel,
    prior: &Prior,
    loss: &LossSpec,
    cf: &CFunction,
    n_copies: &[f64],
    info_fn: &InfoFn,
    opts: &QuadratureOptions,
) -> Result<VanTreesReport> {
    let mut jl = Vec::new();
    let mut finest = Terms::default();
    for level in 0..levels_for(prior, opts) {
        let rule = opts.rule(prior, level);
        let t = level_terms(model, prior, loss, cf, Some(info_fn), &rule, opts)?;
        jl.push(t.j / t.mass);
        finest = t;
    }
    let j = finish_j(jl)?;
    let numerator_mean = finest.numerator / finest.mass;
    let info_term = finest.info / finest.mass;
    let mut rhs = Vec::with_capacity(n_copies.len());
    for &n in n_copies {
        if !(n > 0.0) {
            return Err(Error::InvalidSpec(format!("number of copies {n} must be positive")));
        }
        let denom = info_term + j.value / n;
        if !(denom > 1e-300) {
            return Err(Error::DegenerateDenominator(format!(
                "E tr(G~^-1 C I C^T) = {info_term:.3e}, J/N = {:.3e}",
                j.value / n
            )));
        }
        rhs.push((n, numerator_mean * numerator_mean / denom));
    }
    Ok(VanTreesReport {
        numerator_mean,
        info_term,
        j,
        rhs,
    })
}
