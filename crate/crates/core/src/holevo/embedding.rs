//! A p-parameter model as a submodel of the full `(d^2 - 1)`-parameter model.
//!
//! In the full model the constraints fix the collection `Y` uniquely, so its
//! Holevo set is simply `{W >= Z_full}`. A solved submodel `(X*, V)` embeds
//! into it through `W_eps = D_eps^-1 (diag(V, 0) + delta 1) D_eps^-1` with
//! `D_eps = diag(1, eps 1)`: `W_eps > Z_full` and the interest block of
//! `W_eps^-1` tends to `V^-1`.

use serde::{Deserialize, Serialize};

use super::z_matrix;
use crate::error::{Error, Result};
use crate::information;
use crate::linalg::{self, c, CMat, OperatorBasis, RMat};
use crate::numerics::Numerics;
use crate::quantum::ModelPoint;

fn require_full_rank(rho: &CMat, numerics: &Numerics) -> Result<()> {
    let min = linalg::eigvalsh(rho)[0];
    if min <= numerics.rank_tol {
        return Err(Error::RankDeficient {
            eigenvalue: min,
            threshold: numerics.rank_tol,
        });
    }
    Ok(())
}

/// `Z(Y)` for the full model whose derivatives are `E_a / sqrt 2` (the
/// traceless operator basis in Bloch normalization, `sigma_a / 2` for d = 2).
///
/// The dual collection is `Y_a = sqrt 2 (E_a - tr(rho E_a) 1)`.
pub fn full_model_z(rho: &CMat, numerics: &Numerics) -> Result<CMat> {
    require_full_rank(rho, numerics)?;
    let d = rho.nrows();
    let basis = OperatorBasis::new(d);
    let ys: Vec<CMat> = basis
        .traceless()
        .iter()
        .map(|e| {
            let shift = linalg::trace_prod(rho, e);
            (e - linalg::identity(d) * shift) * c(std::f64::consts::SQRT_2, 0.0)
        })
        .collect();
    z_matrix(rho, &ys)
}

/// Full model re-parameterized around a solved submodel.
#[derive(Debug, Clone)]
pub struct AdaptedFullModel {
    /// Number of interest parameters.
    pub p: usize,
    /// SLDs: the submodel's `lambda`, then an orthonormal basis of the
    /// `rho`-orthocomplement of `X*`.
    pub mu: Vec<CMat>,
    /// Dual collection `<mu_i, Y_j>_rho = delta_ij`; `Y_j = X*_j` for `j < p`.
    pub y: Vec<CMat>,
    pub z_full: CMat,
}

pub fn adapted_full_model(
    point: &ModelPoint,
    x_star: &[CMat],
    numerics: &Numerics,
) -> Result<AdaptedFullModel> {
    require_full_rank(&point.rho, numerics)?;
    let p = x_star.len();
    if p != point.derivs.len() {
        return Err(Error::DimensionMismatch {
            expected: point.derivs.len(),
            found: p,
        });
    }
    let d = point.rho.nrows();
    let basis = OperatorBasis::new(d);
    let n = basis.len();
    let q_r = linalg::symmetrize(&linalg::real_part(&basis.rho_gram(&point.rho)));

    // Coordinates of the centred space L^2_0(rho).
    let rho_row = basis.coords(&point.rho).transpose();
    let centred = linalg::null_space(&RMat::from_row_slice(1, n, rho_row.as_slice()), 1e-12);

    let mut xc = RMat::zeros(n, p);
    for (j, x) in x_star.iter().enumerate() {
        xc.set_column(j, &basis.coords(x));
    }
    let inner = (&q_r * &xc).transpose() * &centred;
    let comp = &centred * linalg::null_space(&inner, 1e-12);
    if comp.ncols() != n - 1 - p {
        return Err(Error::Numerical(format!(
            "orthocomplement of X has dimension {} (expected {})",
            comp.ncols(),
            n - 1 - p
        )));
    }
    let comp = if comp.ncols() > 0 {
        let gram = comp.transpose() * &q_r * &comp;
        let (_, inv_sqrt) = linalg::spd_sqrt_pair(&gram, "orthocomplement Gram", 0.0)?;
        comp * inv_sqrt
    } else {
        comp
    };

    let slds = information::sld_at(point, false, numerics)?;
    let mut mu = RMat::zeros(n, n - 1);
    for (i, l) in slds.slds.iter().enumerate() {
        mu.set_column(i, &basis.coords(l));
    }
    for k in 0..comp.ncols() {
        mu.set_column(p + k, &comp.column(k));
    }
    let pairing = mu.transpose() * &q_r * &centred;
    let u = pairing
        .try_inverse()
        .ok_or_else(|| Error::Numerical("augmented SLDs are linearly dependent".into()))?;
    let yc = &centred * u;

    let to_mats = |m: &RMat| -> Vec<CMat> {
        (0..m.ncols())
            .map(|k| linalg::hermitize(&basis.from_coords(m.column(k).iter().copied())))
            .collect()
    };
    let y = to_mats(&yc);
    let z_full = z_matrix(&point.rho, &y)?;
    Ok(AdaptedFullModel {
        p,
        mu: to_mats(&mu),
        y,
        z_full,
    })
}

/// One step of [`embedding_sequence`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingStep {
    pub eps: f64,
    pub delta: f64,
    /// Smallest eigenvalue of `W_eps - Z_full` (Hermitian).
    pub min_eigenvalue: f64,
    /// `||(W_eps^-1)_11 - V^-1||_F`.
    pub gap: f64,
}

pub fn embedding_sequence(
    v: &RMat,
    full: &AdaptedFullModel,
    schedule: &[f64],
    delta_max: f64,
) -> Result<Vec<EmbeddingStep>> {
    let p = full.p;
    let m = full.z_full.nrows();
    if v.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: v.nrows(),
        });
    }
    let v_inv = linalg::spd_inverse(v, "V", 1e-12)?;
    let mut block_v = RMat::zeros(m, m);
    block_v.view_mut((0, 0), (p, p)).copy_from(v);
    let delta_floor = 1e-10 * linalg::max_abs_real(v).max(1.0);

    let mut steps = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let dvec: Vec<f64> = (0..m).map(|k| if k < p { 1.0 } else { eps }).collect();
        let dzd = CMat::from_fn(m, m, |i, j| full.z_full[(i, j)] * c(dvec[i] * dvec[j], 0.0));
        let violation = *linalg::eigvalsh(&(&dzd - linalg::complexify(&block_v)))
            .last()
            .expect("non-empty");
        let delta = (1.01 * violation.max(0.0)).max(delta_floor);
        if delta >= delta_max {
            return Err(Error::EmbeddingFailure {
                eps,
                eigenvalue: violation,
            });
        }
        let w = RMat::from_fn(m, m, |i, j| {
            let inner = block_v[(i, j)] + if i == j { delta } else { 0.0 };
            inner / (dvec[i] * dvec[j])
        });
        let min_eigenvalue = linalg::eigvalsh(&(linalg::complexify(&w) - &full.z_full))[0];
        if min_eigenvalue <= 0.0 {
            return Err(Error::EmbeddingFailure {
                eps,
                eigenvalue: min_eigenvalue,
            });
        }
        let w_inv = w
            .clone()
            .cholesky()
            .ok_or_else(|| Error::EmbeddingFailure {
                eps,
                eigenvalue: linalg::eigvalsh_real(&w)[0],
            })?
            .inverse();
        let block = w_inv.view((0, 0), (p, p)).clone_owned();
        steps.push(EmbeddingStep {
            eps,
            delta,
            min_eigenvalue,
            gap: (block - &v_inv).norm(),
        });
    }
    Ok(steps)
}
