//! Symmetric logarithmic derivatives, the Helstrom matrix and classical
//! Fisher information of measurement outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, OperatorBasis, RMat, RVec};
use crate::numerics::Numerics;
use crate::quantum::{ModelPoint, ParametricModel, Povm};
use crate::serial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    Helstrom,
    PovmFisher,
}

/// A real symmetric PSD information matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    #[serde(with = "serial::rmat")]
    pub matrix: RMat,
}

impl InfoMatrix {
    pub fn new(kind: InfoKind, matrix: RMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let scale = linalg::max_abs_real(&matrix).max(1.0);
        let asym = linalg::max_abs_real(&(&matrix - matrix.transpose()));
        if asym > 1e-9 * scale {
            return Err(Error::Numerical(format!(
                "information matrix asymmetric by {asym:.3e}"
            )));
        }
        let matrix = linalg::symmetrize(&matrix);
        let min = linalg::eigvalsh_real(&matrix).first().copied().unwrap_or(0.0);
        if min < -1e-9 * scale {
            return Err(Error::NotPsd(min));
        }
        Ok(InfoMatrix { kind, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh_real(&self.matrix)
    }
}

/// The SLDs `lambda_i` at one parameter value.
#[derive(Debug, Clone)]
pub struct SldSet {
    pub slds: Vec<CMat>,
}

impl SldSet {
    /// Largest entry of `rho L_i + L_i rho - 2 d_i rho` over all `i`.
    pub fn residual(&self, point: &ModelPoint) -> f64 {
        self.slds
            .iter()
            .zip(&point.derivs)
            .map(|(l, d)| {
                let r = &point.rho * l + l * &point.rho - d * linalg::c(2.0, 0.0);
                linalg::max_abs(&r)
            })
            .fold(0.0, f64::max)
    }
}

pub fn sld(model: &ParametricModel, theta: &[f64]) -> Result<SldSet> {
    let point = model.point(theta)?;
    sld_at(&point, model.is_pure(), model.numerics())
}

/// SLDs from a precomputed point.
///
/// Mixed states: the Lyapunov equation is solved as a `d^2 x d^2` real linear
/// system in the orthonormal operator basis. Pure models use `L = 2 d rho`,
/// valid because `rho^2 = rho` along the model.
pub fn sld_at(point: &ModelPoint, pure: bool, numerics: &Numerics) -> Result<SldSet> {
    if pure {
        let slds = point.derivs.iter().map(|d| d * linalg::c(2.0, 0.0)).collect();
        return Ok(SldSet { slds });
    }
    let min = linalg::eigvalsh(&point.rho)[0];
    if min <= numerics.rank_tol {
        return Err(Error::RankDeficient {
            eigenvalue: min,
            threshold: numerics.rank_tol,
        });
    }
    let d = point.rho.nrows();
    let basis = OperatorBasis::new(d);
    let gram = linalg::real_part(&basis.rho_gram(&point.rho)) * 2.0;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("Lyapunov system is not positive definite".into()))?;
    let slds = point
        .derivs
        .iter()
        .map(|deriv| {
            let rhs: RVec = basis.coords(deriv) * 2.0;
            let x = chol.solve(&rhs);
            linalg::hermitize(&basis.from_coords(x.iter().copied()))
        })
        .collect();
    Ok(SldSet { slds })
}

/// `H_ij = Re tr(rho L_i L_j)`.
pub fn helstrom_from_slds(rho: &CMat, slds: &[CMat]) -> RMat {
    let p = slds.len();
    let rl: Vec<CMat> = slds.iter().map(|l| rho * l).collect();
    let mut h = RMat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = linalg::trace_prod_re(&rl[i], &slds[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

pub fn helstrom_matrix(model: &ParametricModel, theta: &[f64]) -> Result<InfoMatrix> {
    let point = model.point(theta)?;
    let slds = sld_at(&point, model.is_pure(), model.numerics())?;
    InfoMatrix::new(InfoKind::Helstrom, helstrom_from_slds(&point.rho, &slds.slds))
}

pub fn povm_fisher(model: &ParametricModel, theta: &[f64], povm: &Povm) -> Result<InfoMatrix> {
    let point = model.point(theta)?;
    InfoMatrix::new(
        InfoKind::PovmFisher,
        povm_fisher_at(&point, povm, model.numerics())?,
    )
}

/// `I_ij = sum_x d_i p_x d_j p_x / p_x`, skipping outcomes whose probability
/// and gradient both vanish.
pub fn povm_fisher_at(point: &ModelPoint, povm: &Povm, numerics: &Numerics) -> Result<RMat> {
    if point.rho.nrows() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: point.rho.nrows(),
        });
    }
    let p = point.derivs.len();
    let mut info = RMat::zeros(p, p);
    let mut grad = RVec::zeros(p);
    for (x, m) in povm.elements().iter().enumerate() {
        let prob = linalg::trace_prod_re(&point.rho, m.matrix());
        for (i, d) in point.derivs.iter().enumerate() {
            grad[i] = linalg::trace_prod_re(d, m.matrix());
        }
        let gmax = grad.amax();
        if prob <= numerics.prob_floor {
            if gmax > numerics.irregular_deriv_tol {
                return Err(Error::IrregularModel {
                    outcome: x,
                    probability: prob,
                    derivative: gmax,
                });
            }
            continue;
        }
        info += &grad * grad.transpose() / prob;
    }
    Ok(linalg::symmetrize(&info))
}

/// Finite-difference Hessian of `2 (1 - Fid(rho(theta + h), rho(theta)))` in `h`,
/// which equals `H` because the fidelity deficit is `h^T H h / 4` to second order.
///
/// Independent of the SLD route; used to check [`helstrom_matrix`].
pub fn fidelity_hessian(model: &ParametricModel, theta: &[f64], step: f64) -> Result<RMat> {
    let p = theta.len();
    let base = model.rho(theta)?;
    let deficit = |shift: &[f64]| -> Result<f64> {
        let t: Vec<f64> = theta.iter().zip(shift).map(|(a, b)| a + b).collect();
        Ok(2.0 * (1.0 - crate::quantum::fidelity_matrices(&model.rho(&t)?, &base)?))
    };
    let f0 = deficit(&vec![0.0; p])?;
    let mut h = RMat::zeros(p, p);
    let mut e = vec![0.0; p];
    for i in 0..p {
        for j in i..p {
            let mut eval = |si: f64, sj: f64| -> Result<f64> {
                e.iter_mut().for_each(|x| *x = 0.0);
                e[i] += si * step;
                e[j] += sj * step;
                deficit(&e)
            };
            let v = if i == j {
                (eval(1.0, 0.0)? - 2.0 * f0 + eval(-1.0, 0.0)?) / (step * step)
            } else {
                (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                    / (4.0 * step * step)
            };
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::quantum::{pauli_basis, Povm};

    /// SLD via the eigenbasis of rho: `L_ab = 2 D_ab / (p_a + p_b)`.
    fn sld_eigen_oracle(rho: &CMat, deriv: &CMat) -> CMat {
        let (vals, vecs) = linalg::eigh(rho);
        let dv = vecs.adjoint() * deriv * &vecs;
        let n = vals.len();
        let l = CMat::from_fn(n, n, |a, b| dv[(a, b)] * c(2.0 / (vals[a] + vals[b]), 0.0));
        &vecs * l * vecs.adjoint()
    }

    #[test]
    fn sld_at_center_is_pauli() {
        let model = ParametricModel::bloch_full();
        let s = sld(&model, &[0.0, 0.0, 0.0]).unwrap();
        let pauli = linalg::pauli();
        for (l, p) in s.slds.iter().zip(&pauli) {
            assert!(linalg::max_abs(&(l - p)) < 1e-13);
        }
    }

    #[test]
    fn sld_matches_eigenbasis_oracle() {
        let model = ParametricModel::bloch_full();
        for theta in [[0.0, 0.0, 0.5], [0.3, -0.2, 0.4], [0.1, 0.7, -0.5]] {
            let point = model.point(&theta).unwrap();
            let s = sld(&model, &theta).unwrap();
            assert!(s.residual(&point) < 1e-10);
            for (l, d) in s.slds.iter().zip(&point.derivs) {
                let want = sld_eigen_oracle(&point.rho, d);
                assert!(linalg::max_abs(&(l - want)) < 1e-10);
                assert!(linalg::trace_prod_re(&point.rho, l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_sld_residual() {
        let model = ParametricModel::pure_qubit();
        let theta = [0.3, -0.4];
        let point = model.point(&theta).unwrap();
        let s = sld(&model, &theta).unwrap();
        assert!(s.residual(&point) < 1e-12);
    }

    #[test]
    fn sld_rejects_singular_mixed_state() {
        let model = ParametricModel::bloch_full();
        assert!(matches!(
            sld(&model, &[0.0, 0.0, 1.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn helstrom_examples() {
        let model = ParametricModel::bloch_full();
        let h0 = helstrom_matrix(&model, &[0.0, 0.0, 0.0]).unwrap();
        assert!((h0.matrix - RMat::identity(3, 3)).amax() < 1e-13);
        let h = helstrom_matrix(&model, &[0.0, 0.0, 0.6]).unwrap();
        let want = RMat::from_diagonal(&RVec::from_vec(vec![1.0, 1.0, 1.0 / 0.64]));
        assert!((h.matrix - want).amax() < 1e-12);
    }

    #[test]
    fn helstrom_matches_fidelity_hessian() {
        let model = ParametricModel::bloch_full();
        let theta = [0.0, 0.0, 0.6];
        let fd = fidelity_hessian(&model, &theta, 1e-3).unwrap();
        let h = helstrom_matrix(&model, &theta).unwrap();
        assert!((&fd - &h.matrix).amax() < 1e-4, "{fd} {}", h.matrix);
    }

    #[test]
    fn bernoulli_fisher() {
        let model = ParametricModel::bloch_full();
        let z = Povm::from_basis(&pauli_basis(2)).unwrap();
        let i0 = povm_fisher(&model, &[0.0, 0.0, 0.0], &z).unwrap();
        let want = RMat::from_diagonal(&RVec::from_vec(vec![0.0, 0.0, 1.0]));
        assert!((i0.matrix - want).amax() < 1e-14);

        let t = 0.5;
        let i = povm_fisher(&model, &[0.0, 0.0, t], &z).unwrap();
        // Outcomes (1 +- t)/2 with derivative +-1/2.
        let by_hand = 0.25 / ((1.0 + t) / 2.0) + 0.25 / ((1.0 - t) / 2.0);
        assert!((i.matrix[(2, 2)] - by_hand).abs() < 1e-12);
        assert!((i.matrix[(2, 2)] - 4.0 / 3.0).abs() < 1e-12);

        // Finite differences of the Bernoulli log-likelihood.
        let h = 1e-5;
        let p = |t: f64| (1.0 + t) / 2.0;
        let dp = (p(t + h) - p(t - h)) / (2.0 * h);
        let fd = dp * dp / p(t) + dp * dp / (1.0 - p(t));
        assert!((i.matrix[(2, 2)] - fd).abs() < 1e-8);
    }

    #[test]
    fn null_outcome_with_gradient_is_irregular() {
        // Full qubit on the sphere: outcome "1" has zero probability but moves.
        let s = linalg::pauli();
        let model = ParametricModel::affine(
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            vec![&s[2] * c(0.5, 0.0)],
            1.0,
        )
        .unwrap();
        let z = Povm::from_basis(&pauli_basis(2)).unwrap();
        assert!(matches!(
            povm_fisher(&model, &[0.0], &z),
            Err(Error::IrregularModel { outcome: 1, .. })
        ));
    }

    #[test]
    fn fisher_is_additive_over_independent_bases() {
        let model = ParametricModel::bloch_full();
        let theta = [0.2, -0.1, 0.3];
        let x = Povm::from_basis(&pauli_basis(0)).unwrap();
        let z = Povm::from_basis(&pauli_basis(2)).unwrap();
        // Product measurement on two copies: outcome pairs (a, b).
        let point = model.point(&theta).unwrap();
        let px = crate::quantum::born_probabilities(&point.rho, &x).unwrap();
        let pz = crate::quantum::born_probabilities(&point.rho, &z).unwrap();
        let dpx: Vec<Vec<f64>> = x
            .elements()
            .iter()
            .map(|m| point.derivs.iter().map(|d| linalg::trace_prod_re(d, m.matrix())).collect())
            .collect();
        let dpz: Vec<Vec<f64>> = z
            .elements()
            .iter()
            .map(|m| point.derivs.iter().map(|d| linalg::trace_prod_re(d, m.matrix())).collect())
            .collect();
        let mut joint = RMat::zeros(3, 3);
        for a in 0..2 {
            for b in 0..2 {
                let p = px[a] * pz[b];
                let g: Vec<f64> = (0..3).map(|i| dpx[a][i] * pz[b] + px[a] * dpz[b][i]).collect();
                for i in 0..3 {
                    for j in 0..3 {
                        joint[(i, j)] += g[i] * g[j] / p;
                    }
                }
            }
        }
        let sum = povm_fisher(&model, &theta, &x).unwrap().matrix
            + povm_fisher(&model, &theta, &z).unwrap().matrix;
        assert!((joint - sum).amax() < 1e-12);
    }
}
