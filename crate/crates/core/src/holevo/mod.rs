//! The Holevo bound, its minimizer `V0` and the dual bounds.
//!
//! `C_G = inf { tr(G V) : V >= Z(X) }` over Hermitian collections `X` with
//! `tr(d_i rho X_j) = delta_ij`, where `Z_ij = tr(rho X_i X_j)`. For fixed `X`
//! the inner infimum is `tr(G Re Z) + tr|G^1/2 Im Z G^1/2|`.

mod embedding;
mod solver;

pub use embedding::{
    adapted_full_model, embedding_sequence, full_model_z, AdaptedFullModel, EmbeddingStep,
};
pub use solver::{solve_holevo, solve_holevo_warm, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::{self, InfoMatrix};
use crate::linalg::{self, CMat, RMat};
use crate::numerics::Numerics;
use crate::quantum::{ModelPoint, ParametricModel};
use crate::serial;

/// Model point data and weight matrix for one Holevo problem.
#[derive(Debug, Clone)]
pub struct HolevoProblem {
    pub point: ModelPoint,
    pub weight: RMat,
    pub pure: bool,
    pub numerics: Numerics,
}

impl HolevoProblem {
    pub fn new(point: ModelPoint, weight: RMat, pure: bool, numerics: Numerics) -> Result<Self> {
        let p = point.derivs.len();
        if weight.nrows() != p || weight.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: weight.nrows(),
            });
        }
        validate_weight(&weight, "weight G", &numerics)?;
        for d in &point.derivs {
            let tr = linalg::trace(d);
            if tr.norm() > numerics.trace_tol {
                return Err(Error::InvalidSpec(format!("derivative has trace {tr}")));
            }
        }
        Ok(HolevoProblem {
            point,
            weight: linalg::symmetrize(&weight),
            pure,
            numerics,
        })
    }

    pub fn from_model(model: &ParametricModel, theta: &[f64], weight: RMat) -> Result<Self> {
        Self::new(model.point(theta)?, weight, model.is_pure(), *model.numerics())
    }

    pub fn num_params(&self) -> usize {
        self.point.derivs.len()
    }
}

/// Checks that a weight matrix is symmetric positive definite.
pub fn validate_weight(g: &RMat, what: &str, numerics: &Numerics) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: g.ncols(),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec(format!("{what} has non-finite entries")));
    }
    let asym = linalg::max_abs_real(&(g - g.transpose()));
    if asym > 1e-9 * linalg::max_abs_real(g).max(1.0) {
        return Err(Error::InvalidSpec(format!("{what} is not symmetric ({asym:.3e})")));
    }
    let min = linalg::eigvalsh_real(g)[0];
    if min <= numerics.pd_tol {
        return Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            eigenvalue: min,
        });
    }
    Ok(())
}

/// Standard weight choices.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// `G = H / 4`, the local fidelity loss.
    HelstromQuarter,
    Identity,
    Matrix(RMat),
}

impl Weight {
    pub fn at(&self, model: &ParametricModel, theta: &[f64]) -> Result<RMat> {
        let p = model.num_params();
        Ok(match self {
            Weight::HelstromQuarter => information::helstrom_matrix(model, theta)?.matrix * 0.25,
            Weight::Identity => RMat::identity(p, p),
            Weight::Matrix(g) => g.clone(),
        })
    }
}

/// A collection `X_1..X_p` of Hermitian matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XCollection {
    #[serde(with = "serial::cmat_vec")]
    pub xs: Vec<CMat>,
}

impl XCollection {
    /// `max |tr(d_i X_j) - delta_ij|` together with `max |tr(rho X_j)|`.
    pub fn constraint_residual(&self, point: &ModelPoint) -> f64 {
        let mut worst = 0.0f64;
        for (i, d) in point.derivs.iter().enumerate() {
            for (j, x) in self.xs.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((linalg::trace_prod(d, x) - linalg::c(target, 0.0)).norm());
            }
        }
        for x in &self.xs {
            worst = worst.max(linalg::trace_prod(&point.rho, x).norm());
        }
        worst
    }
}

/// `Z_ij = tr(rho X_i X_j)`.
pub fn z_matrix(rho: &CMat, xs: &[CMat]) -> Result<CMat> {
    let d = rho.nrows();
    if let Some(bad) = xs.iter().find(|x| x.nrows() != d || x.ncols() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.nrows(),
        });
    }
    let p = xs.len();
    let rx: Vec<CMat> = xs.iter().map(|x| rho * x).collect();
    let mut z = CMat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = linalg::trace_prod(&rx[i], &xs[j]);
            z[(i, j)] = v;
            z[(j, i)] = v.conj();
        }
        z[(i, i)].im = 0.0;
    }
    Ok(z)
}

/// `tr(Re(G^1/2 Z G^1/2)) + tr|Im(G^1/2 Z G^1/2)|`.
pub fn holevo_objective(g: &RMat, z: &CMat) -> Result<f64> {
    check_square_pair(g, z)?;
    let (sqrt_g, _) = linalg::spd_sqrt_pair(g, "weight G", 0.0)?;
    let re = &sqrt_g * linalg::real_part(z) * &sqrt_g;
    let im = &sqrt_g * linalg::imag_part(z) * &sqrt_g;
    Ok(re.trace() + linalg::antisym_trace_abs(&antisymmetrize(&im)))
}

/// The minimizing `V0 = G^-1/2 (Re M + |Im M|) G^-1/2` with `M = G^1/2 Z G^1/2`.
pub fn recover_v0(g: &RMat, z: &CMat) -> Result<RMat> {
    check_square_pair(g, z)?;
    let (sqrt_g, inv_sqrt_g) = linalg::spd_sqrt_pair(g, "weight G", 0.0)?;
    let re = &sqrt_g * linalg::real_part(z) * &sqrt_g;
    let im = antisymmetrize(&(&sqrt_g * linalg::imag_part(z) * &sqrt_g));
    let inner = re + linalg::antisym_abs(&im);
    Ok(linalg::symmetrize(&(&inv_sqrt_g * inner * &inv_sqrt_g)))
}

fn check_square_pair(g: &RMat, z: &CMat) -> Result<()> {
    if g.nrows() != z.nrows() || g.ncols() != z.ncols() || g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: z.nrows(),
        });
    }
    Ok(())
}

fn antisymmetrize(m: &RMat) -> RMat {
    (m - m.transpose()) * 0.5
}

/// Solver bookkeeping reported with every solution.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub final_eps: f64,
    pub constraint_residual: f64,
    /// Smoothed minus exact objective at the returned point.
    pub smoothing_gap: f64,
    /// Exact objective minus the Helstrom lower bound `tr(G H^-1)`.
    pub helstrom_gap: f64,
    pub free_dims: usize,
    pub starts: usize,
    /// Largest pairwise `||V0_a - V0_b||` across multistart runs.
    pub v0_spread: f64,
    pub gradient_norm: f64,
}

/// Result of [`solve_holevo`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolevoSolution {
    pub value: f64,
    pub x_star: XCollection,
    #[serde(with = "serial::cmat")]
    pub z_star: CMat,
    #[serde(with = "serial::rmat")]
    pub v0: RMat,
    #[serde(with = "serial::rmat")]
    pub weight: RMat,
    pub diagnostics: Diagnostics,
}

/// Dual weight `K0 = V0 G V0` and its bound `C^K0 = C_G`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualBound {
    #[serde(with = "serial::rmat")]
    pub k0: RMat,
    /// `I0 = V0^-1`.
    #[serde(with = "serial::rmat")]
    pub i0: RMat,
    pub value: f64,
}

impl DualBound {
    /// `G' = I0 K0 I0`, which recovers the original weight.
    pub fn primal_weight(&self) -> RMat {
        linalg::symmetrize(&(&self.i0 * &self.k0 * &self.i0))
    }
}

pub fn dual_bound(solution: &HolevoSolution, g: &RMat) -> Result<DualBound> {
    let v0 = &solution.v0;
    let i0 = linalg::spd_inverse(v0, "V0", 1e-10)?;
    let k0 = linalg::symmetrize(&(v0 * g * v0));
    // C^K = sup over I in the attainable set of tr(K I); at K0 it is attained
    // by I0 and equals tr(K0 I0) = tr(G V0) = C_G.
    let value = (&k0 * &i0).trace();
    Ok(DualBound { k0, i0, value })
}

/// Outcome of [`check_dual`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualCheck {
    pub satisfied: bool,
    pub trace: f64,
    /// `c_k - tr(K I)`; negative means violated.
    pub slack: f64,
}

pub fn check_dual(k: &RMat, info: &InfoMatrix, c_k: f64) -> Result<DualCheck> {
    if k.nrows() != info.dim() || k.ncols() != info.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            found: info.dim(),
        });
    }
    let trace = (k * &info.matrix).trace();
    Ok(DualCheck {
        satisfied: trace <= c_k + 1e-7,
        trace,
        slack: c_k - trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, I};

    fn two_by_two() -> CMat {
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), I, -I, c(1.0, 0.0)])
    }

    #[test]
    fn z_matrix_at_bloch_center() {
        let rho = linalg::identity(2) * c(0.5, 0.0);
        let s = linalg::pauli();
        let z = z_matrix(&rho, &s).unwrap();
        // Z_ij = tr(sigma_i sigma_j)/2 = delta_ij + i eps_ijk tr(sigma_k)/2, and
        // tr(sigma_k) = 0, so Z is the identity at the centre.
        assert!(linalg::max_abs(&(z - linalg::identity(3))) < 1e-15);
        let rho_up = CMat::from_row_slice(2, 2, &[c(0.75, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.25, 0.0)]);
        let z = z_matrix(&rho_up, &s).unwrap();
        // sigma_1 sigma_2 = i sigma_3, so Z_12 = i tr(rho sigma_3) = 0.5 i.
        assert!((z[(0, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((z[(1, 0)] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn single_x_gives_real_nonnegative_z() {
        let rho = CMat::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let x = CMat::from_row_slice(2, 2, &[c(0.3, 0.0), c(-1.0, 0.5), c(-1.0, -0.5), c(-2.0, 0.0)]);
        let z = z_matrix(&rho, &[x]).unwrap();
        assert_eq!(z[(0, 0)].im, 0.0);
        assert!(z[(0, 0)].re > 0.0);
    }

    #[test]
    fn objective_examples() {
        let diag = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let g = RMat::identity(2, 2);
        assert!((holevo_objective(&g, &diag).unwrap() - 5.0).abs() < 1e-14);
        assert!((holevo_objective(&g, &two_by_two()).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn v0_examples() {
        let g = RMat::identity(2, 2);
        let v = recover_v0(&g, &two_by_two()).unwrap();
        assert!((v - RMat::identity(2, 2) * 2.0).amax() < 1e-14);
        let real = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(3.0, 0.0)]);
        let v = recover_v0(&g, &real).unwrap();
        assert!((v - linalg::real_part(&real)).amax() < 1e-14);
    }

    #[test]
    fn check_dual_with_zero_information() {
        let k = RMat::identity(2, 2);
        let zero = InfoMatrix::new(crate::information::InfoKind::PovmFisher, RMat::zeros(2, 2)).unwrap();
        let chk = check_dual(&k, &zero, 0.5).unwrap();
        assert!(chk.satisfied);
        assert_eq!(chk.slack, 0.5);
    }

    #[test]
    fn weight_validation() {
        let bad = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(validate_weight(&bad, "G", &Numerics::default()).is_err());
        let asym = RMat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(validate_weight(&asym, "G", &Numerics::default()).is_err());
    }
}
