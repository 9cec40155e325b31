//! Smoothed quasi-Newton minimization over feasible X collections.
//!
//! X_j is written in the orthonormal operator basis as a coordinate column
//! `x_j`. The constraints `tr(d_i rho X_j) = delta_ij`, `tr(rho X_j) = 0` are
//! linear in the columns, so `x = x0 + N y` with `x0` the SLD-based particular
//! solution and `N` an orthonormal null-space basis; the optimizer works on
//! the free coordinates `y`.
//!
//! With `Q_ab = tr(rho E_a E_b) = Q_R + i Q_I`, `Re Z = x^T Q_R x` and
//! `Im Z = x^T Q_I x`. The nonsmooth term `tr|A|` for the antisymmetric
//! `A = G^1/2 Im Z G^1/2` is replaced by `tr (A^T A + eps)^1/2`, and `eps` is
//! driven down a continuation schedule.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{z_matrix, Diagnostics, HolevoProblem, HolevoSolution, XCollection};
use crate::error::{Error, Result};
use crate::information;
use crate::linalg::{self, CMat, OperatorBasis, RMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub seed: u64,
    /// Iteration budget per start, summed over smoothing stages.
    pub max_iters: usize,
    /// Random restarts in addition to the SLD start.
    pub multistart: usize,
    /// Smoothing levels, relative to the squared objective scale. The
    /// schedule ends early once a stage changes the exact objective by less
    /// than `stage_tol` (relative).
    pub smoothing: Vec<f64>,
    pub stage_tol: f64,
    /// Stage stops when the objective improves by less than this (relative)
    /// over `stall_window` iterations.
    pub rel_tol: f64,
    pub stall_window: usize,
    /// Size of random restarts relative to the particular solution.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            seed: 0,
            max_iters: 20_000,
            multistart: 0,
            smoothing: (2..=16).map(|k| 10f64.powi(-k)).collect(),
            rel_tol: 1e-9,
            stall_window: 5,
            perturbation: 0.5,
            stage_tol: 1e-13,
        }
    }
}

pub fn solve_holevo(problem: &HolevoProblem, opts: &SolverOptions) -> Result<HolevoSolution> {
    solve_holevo_warm(problem, opts, None)
}

/// Like [`solve_holevo`], additionally trying `warm` (projected onto the
/// feasible set) as a starting point.
pub fn solve_holevo_warm(
    problem: &HolevoProblem,
    opts: &SolverOptions,
    warm: Option<&[CMat]>,
) -> Result<HolevoSolution> {
    let setup = Setup::new(problem)?;
    let scale = setup.exact(&setup.x_of(&RMat::zeros(setup.free_rows(), setup.p)));
    let scale = scale.max(1e-300);

    let mut start = RMat::zeros(setup.free_rows(), setup.p);
    if let Some(w) = warm {
        if w.len() == setup.p {
            let yw = setup.project(w);
            if setup.exact(&setup.x_of(&yw)) < scale {
                start = yw;
            }
        }
    }

    let mut starts = vec![start.clone()];
    if setup.free_dims() > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let spread = opts.perturbation * setup.x0.norm() / (setup.free_dims() as f64).sqrt();
        for _ in 0..opts.multistart {
            let noise = RMat::from_fn(setup.free_rows(), setup.p, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * spread
            });
            starts.push(&start + noise);
        }
    }

    let mut runs = Vec::with_capacity(starts.len());
    let mut last_failure = None;
    for y in starts {
        match setup.minimize(y, scale, opts) {
            Ok(run) => runs.push(run),
            Err(e) => last_failure = Some(e),
        }
    }
    if runs.is_empty() {
        return Err(last_failure.expect("at least one start"));
    }

    let v0s: Vec<RMat> = runs
        .iter()
        .map(|r| super::recover_v0(&setup.g, &setup.z_of(&setup.x_of(&r.y))))
        .collect::<Result<_>>()?;
    let mut v0_spread = 0.0f64;
    for a in 0..v0s.len() {
        for b in (a + 1)..v0s.len() {
            v0_spread = v0_spread.max((&v0s[a] - &v0s[b]).norm());
        }
    }
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.exact.total_cmp(&b.1.exact))
        .map(|(k, _)| k)
        .expect("non-empty");
    let run = &runs[best];

    let x = setup.x_of(&run.y);
    let xs: Vec<CMat> = (0..setup.p)
        .map(|j| linalg::hermitize(&setup.basis.from_coords(x.column(j).iter().copied())))
        .collect();
    let z_star = z_matrix(&problem.point.rho, &xs)?;
    let value = super::holevo_objective(&setup.g, &z_star)?;
    let v0 = super::recover_v0(&setup.g, &z_star)?;
    let x_star = XCollection { xs };
    let (smoothed, _, grad) = setup.eval(&x, run.final_eps, true);
    let gradient_norm = grad.map(|g| (setup.null.transpose() * g).norm()).unwrap_or(0.0);
    let diagnostics = Diagnostics {
        iterations: runs.iter().map(|r| r.iterations).sum(),
        final_eps: run.final_eps,
        constraint_residual: x_star.constraint_residual(&problem.point),
        smoothing_gap: smoothed - value,
        helstrom_gap: value - (&setup.g * &setup.h_inv).trace(),
        free_dims: setup.free_dims(),
        starts: runs.len(),
        v0_spread,
        gradient_norm,
    };
    Ok(HolevoSolution {
        value,
        x_star,
        z_star,
        v0,
        weight: setup.g.clone(),
        diagnostics,
    })
}

struct Run {
    y: RMat,
    exact: f64,
    iterations: usize,
    final_eps: f64,
}

pub(crate) struct Setup {
    pub(crate) basis: OperatorBasis,
    pub(crate) p: usize,
    q_r: RMat,
    q_i: RMat,
    pub(crate) x0: RMat,
    pub(crate) null: RMat,
    pub(crate) g: RMat,
    sqrt_g: RMat,
    h_inv: RMat,
}

impl Setup {
    pub(crate) fn new(problem: &HolevoProblem) -> Result<Self> {
        let point = &problem.point;
        let d = point.rho.nrows();
        let p = point.derivs.len();
        let basis = OperatorBasis::new(d);
        let n = basis.len();

        let slds = information::sld_at(point, problem.pure, &problem.numerics)?;
        let h = information::helstrom_from_slds(&point.rho, &slds.slds);
        let hmin = linalg::eigvalsh_real(&h)[0];
        let hscale = linalg::max_abs_real(&h).max(1e-300);
        if hmin <= 1e-10 * hscale {
            return Err(Error::SingularHelstrom(hmin));
        }
        let h_inv = linalg::spd_inverse(&h, "Helstrom matrix", 0.0)?;

        let mut x0 = RMat::zeros(n, p);
        let sld_coords: Vec<_> = slds.slds.iter().map(|l| basis.coords(l)).collect();
        for j in 0..p {
            for (k, lc) in sld_coords.iter().enumerate() {
                let w = h_inv[(j, k)];
                x0.column_mut(j).axpy(w, lc, 1.0);
            }
        }

        let mut constraints = RMat::zeros(p + 1, n);
        for (i, dv) in point.derivs.iter().enumerate() {
            constraints.set_row(i, &basis.coords(dv).transpose());
        }
        constraints.set_row(p, &basis.coords(&point.rho).transpose());
        let null = linalg::null_space(&constraints, 1e-12);
        if null.ncols() != n - p - 1 {
            return Err(Error::Numerical(format!(
                "constraint system has rank {} (expected {})",
                n - null.ncols(),
                p + 1
            )));
        }

        let q = basis.rho_gram(&point.rho);
        let q_r = linalg::symmetrize(&linalg::real_part(&q));
        let q_i = linalg::imag_part(&q);
        let q_i = (&q_i - q_i.transpose()) * 0.5;
        let g = problem.weight.clone();
        let (sqrt_g, _) = linalg::spd_sqrt_pair(&g, "weight G", 0.0)?;
        Ok(Setup {
            basis,
            p,
            q_r,
            q_i,
            x0,
            null,
            g,
            sqrt_g,
            h_inv,
        })
    }

    fn free_rows(&self) -> usize {
        self.null.ncols()
    }

    pub(crate) fn free_dims(&self) -> usize {
        self.null.ncols() * self.p
    }

    pub(crate) fn x_of(&self, y: &RMat) -> RMat {
        &self.x0 + &self.null * y
    }

    fn project(&self, xs: &[CMat]) -> RMat {
        let mut x = RMat::zeros(self.basis.len(), self.p);
        for (j, xm) in xs.iter().enumerate() {
            x.set_column(j, &self.basis.coords(xm));
        }
        self.null.transpose() * (x - &self.x0)
    }

    fn z_of(&self, x: &RMat) -> CMat {
        let re = x.transpose() * &self.q_r * x;
        let im = x.transpose() * &self.q_i * x;
        CMat::from_fn(self.p, self.p, |i, j| linalg::c(re[(i, j)], im[(i, j)]))
    }

    pub(crate) fn exact(&self, x: &RMat) -> f64 {
        let re = x.transpose() * &self.q_r * x;
        let im = x.transpose() * &self.q_i * x;
        let a = &self.sqrt_g * im * &self.sqrt_g;
        let a = (&a - a.transpose()) * 0.5;
        (&self.g * re).trace() + linalg::antisym_trace_abs(&a)
    }

    /// Smoothed value, exact value and (optionally) the gradient in `x`.
    pub(crate) fn eval(&self, x: &RMat, eps: f64, want_grad: bool) -> (f64, f64, Option<RMat>) {
        let qx_r = &self.q_r * x;
        let qx_i = &self.q_i * x;
        let re = x.transpose() * &qx_r;
        let im = x.transpose() * &qx_i;
        let a = &self.sqrt_g * im * &self.sqrt_g;
        let a = (&a - a.transpose()) * 0.5;
        let (vals, vecs) = linalg::eigh_real(&(a.transpose() * &a));
        let smooth: f64 = vals.iter().map(|v| (v.max(0.0) + eps).sqrt()).sum();
        let base = (&self.g * re).trace();
        let exact = base + linalg::antisym_trace_abs(&a);
        let grad = want_grad.then(|| {
            let mut scaled = vecs.clone();
            for (k, v) in vals.iter().enumerate() {
                scaled.column_mut(k).scale_mut(1.0 / (v.max(0.0) + eps).sqrt());
            }
            let s_inv = &scaled * vecs.transpose();
            let w = &a * s_inv;
            let wt = &self.sqrt_g * w * &self.sqrt_g;
            let wt = (&wt - wt.transpose()) * 0.5;
            qx_r * &self.g * 2.0 - qx_i * wt * 2.0
        });
        (base + smooth, exact, grad)
    }

    fn minimize(&self, y: RMat, scale: f64, opts: &SolverOptions) -> Result<Run> {
        let rows = self.free_rows();
        if self.free_dims() == 0 {
            return Ok(Run {
                exact: self.exact(&self.x0),
                y,
                iterations: 0,
                final_eps: 0.0,
            });
        }
        let to_y = |v: &DVector<f64>| RMat::from_column_slice(rows, self.p, v.as_slice());
        let mut v = DVector::from_column_slice(y.as_slice());
        let mut best = (self.exact(&self.x_of(&y)), v.clone(), 0.0);
        let mut iterations = 0;
        for (stage, &rel_eps) in opts.smoothing.iter().enumerate() {
            let eps = rel_eps * scale * scale;
            let f = |v: &DVector<f64>| -> (f64, DVector<f64>) {
                let (fs, _, g) = self.eval(&self.x_of(&to_y(v)), eps, true);
                let gy = self.null.transpose() * g.expect("gradient requested");
                (fs, DVector::from_column_slice(gy.as_slice()))
            };
            let budget = opts.max_iters.saturating_sub(iterations);
            let (next, used, converged) = bfgs(&f, v, budget, opts, scale);
            iterations += used;
            v = next;
            let exact = self.exact(&self.x_of(&to_y(&v)));
            if !converged {
                return Err(Error::NonConvergence {
                    iterations,
                    best_value: exact.min(best.0),
                });
            }
            let improvement = best.0 - exact;
            if exact <= best.0 {
                best = (exact, v.clone(), eps);
            }
            if stage > 0 && improvement <= opts.stage_tol * exact.abs() {
                break;
            }
        }
        let (exact, v, final_eps) = best;
        Ok(Run {
            exact,
            y: to_y(&v),
            iterations,
            final_eps,
        })
    }
}

/// Objective returning the value and gradient.
type ValueGrad<'a> = &'a dyn Fn(&DVector<f64>) -> (f64, DVector<f64>);

/// BFGS with Armijo backtracking. Returns the final point, iterations used
/// and whether a stopping rule fired within the budget.
fn bfgs(
    f: ValueGrad<'_>,
    mut x: DVector<f64>,
    budget: usize,
    opts: &SolverOptions,
    scale: f64,
) -> (DVector<f64>, usize, bool) {
    let n = x.len();
    let (mut fx, mut g) = f(&x);
    let mut hinv = RMat::identity(n, n);
    let mut fresh = true;
    let mut history = vec![fx];
    let gtol = 1e-13 * scale.max(1.0);
    for it in 0..budget {
        if g.norm() <= gtol {
            return (x, it, true);
        }
        if fresh {
            hinv = RMat::identity(n, n) * (0.1 * x.norm().max(1.0) / g.norm());
        }
        let mut dir = -(&hinv * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 {
            hinv = RMat::identity(n, n) * (0.1 * x.norm().max(1.0) / g.norm());
            dir = -(&hinv * &g);
            slope = dir.dot(&g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let trial = &x + &dir * t;
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if fresh {
                // No descent along the scaled gradient: numerically stationary.
                return (x, it + 1, true);
            }
            fresh = true;
            continue;
        };
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-16 * s.norm() * yv.norm() && sy > 0.0 {
            if fresh {
                hinv = RMat::identity(n, n) * (sy / yv.dot(&yv));
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (s (Hy)^T + (Hy) s^T) + (rho^2 y^T H y + rho) s s^T
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += &s * s.transpose() * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gn;
        history.push(fx);
        let w = opts.stall_window;
        if history.len() > w {
            let old = history[history.len() - 1 - w];
            if (old - fx).abs() <= opts.rel_tol * fx.abs().max(1e-300) {
                return (x, it + 1, true);
            }
        }
    }
    (x, budget, false)
}
