//! Dense complex/real matrix helpers on top of `nalgebra`.
//!
//! Everything here works on small matrices (d <= 8, d^2 <= 64), so plain
//! dense eigendecompositions are used throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// The Pauli matrices `[sigma_1, sigma_2, sigma_3]`.
pub fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    [
        CMat::from_row_slice(2, 2, &[z, one, one, z]),
        CMat::from_row_slice(2, 2, &[z, -I, I, z]),
        CMat::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// `(A + A^*) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Largest absolute deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// `Re tr(A B)` without forming the product.
pub fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let z = a[(i, k)] * b[(k, i)];
            acc += z.re;
        }
    }
    acc
}

/// `tr(A B)`.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = nalgebra::SymmetricEigen::new(hermitize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &RMat) -> (Vec<f64>, RMat) {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = RMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigvalsh_real(m: &RMat) -> Vec<f64> {
    eigh_real(m).0
}

/// Apply a scalar function to the spectrum of a Hermitian matrix.
pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = c(f(v), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    &scaled * vecs.adjoint()
}

/// Apply a scalar function to the spectrum of a real symmetric matrix.
pub fn sym_fn(m: &RMat, f: impl Fn(f64) -> f64) -> RMat {
    let (vals, vecs) = eigh_real(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    symmetrize(&(&scaled * vecs.transpose()))
}

/// Square root of a PSD Hermitian matrix; eigenvalues are clipped at 0.
pub fn psd_sqrt(m: &CMat) -> CMat {
    herm_fn(m, |v| v.max(0.0).sqrt())
}

/// Symmetric square root of a positive-definite real matrix and its inverse.
pub fn spd_sqrt_pair(m: &RMat, what: &str, tol: f64) -> Result<(RMat, RMat)> {
    let (vals, _) = eigh_real(m);
    let min = vals.first().copied().unwrap_or(0.0);
    if min <= tol {
        return Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            eigenvalue: min,
        });
    }
    Ok((sym_fn(m, f64::sqrt), sym_fn(m, |v| 1.0 / v.sqrt())))
}

/// Inverse of a symmetric positive-definite matrix (symmetrized result).
pub fn spd_inverse(m: &RMat, what: &str, tol: f64) -> Result<RMat> {
    let (vals, _) = eigh_real(m);
    let min = vals.first().copied().unwrap_or(0.0);
    if min <= tol {
        return Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            eigenvalue: min,
        });
    }
    Ok(sym_fn(m, |v| 1.0 / v))
}

/// Matrix absolute value of a real antisymmetric matrix `A`, i.e. `sqrt(A^T A)`.
pub fn antisym_abs(a: &RMat) -> RMat {
    sym_fn(&(a.transpose() * a), |v| v.max(0.0).sqrt())
}

/// Sum of the absolute eigenvalues of the Hermitian matrix `iA` for real antisymmetric `A`.
pub fn antisym_trace_abs(a: &RMat) -> f64 {
    eigvalsh(&(complexify(a) * I)).iter().map(|v| v.abs()).sum()
}

/// Orthonormal basis (columns) of the null space of `a`, by eigendecomposition of `a^T a`.
pub fn null_space(a: &RMat, rel_tol: f64) -> RMat {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let (vals, vecs) = eigh_real(&gram);
    let scale = vals.last().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] <= rel_tol * scale).collect();
    let mut out = RMat::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        out.set_column(col, &vecs.column(k));
    }
    out
}

/// Orthonormal Hermitian basis of the d x d Hermitian matrices under the
/// Hilbert-Schmidt inner product `tr(AB)`.
///
/// Element 0 is `1/sqrt(d)`; then, for each pair `j < k` in lexicographic
/// order, the symmetric and antisymmetric off-diagonal generators; then the
/// diagonal generalized Gell-Mann matrices. For `d = 2` this is
/// `(1, sigma_1, sigma_2, sigma_3) / sqrt(2)`.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMat>,
}

impl OperatorBasis {
    pub fn new(dim: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = Vec::with_capacity(dim * dim);
        elements.push(identity(dim) * c(1.0 / (dim as f64).sqrt(), 0.0));
        for j in 0..dim {
            for k in (j + 1)..dim {
                let mut sym = CMat::zeros(dim, dim);
                sym[(j, k)] = c(s, 0.0);
                sym[(k, j)] = c(s, 0.0);
                elements.push(sym);
                let mut anti = CMat::zeros(dim, dim);
                anti[(j, k)] = c(0.0, -s);
                anti[(k, j)] = c(0.0, s);
                elements.push(anti);
            }
        }
        for l in 1..dim {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut diag = CMat::zeros(dim, dim);
            for m in 0..l {
                diag[(m, m)] = c(norm, 0.0);
            }
            diag[(l, l)] = c(-(l as f64) * norm, 0.0);
            elements.push(diag);
        }
        OperatorBasis { dim, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, `d^2`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    /// The traceless elements (all but the first).
    pub fn traceless(&self) -> &[CMat] {
        &self.elements[1..]
    }

    /// Real coordinates `tr(E_a X)` of a Hermitian matrix.
    pub fn coords(&self, x: &CMat) -> RVec {
        RVec::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|e| trace_prod_re(e, x)),
        )
    }

    /// `Q_ab = tr(rho E_a E_b)`, Hermitian and PSD for a state `rho`.
    pub fn rho_gram(&self, rho: &CMat) -> CMat {
        let n = self.elements.len();
        let left: Vec<CMat> = self.elements.iter().map(|e| rho * e).collect();
        let mut q = CMat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = trace_prod(&left[a], &self.elements[b]);
                q[(a, b)] = v;
                q[(b, a)] = v.conj();
            }
        }
        q
    }

    /// Hermitian matrix with the given coordinates.
    pub fn from_coords(&self, coords: impl IntoIterator<Item = f64>) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (e, x) in self.elements.iter().zip(coords) {
            out += e * c(x, 0.0);
        }
        out
    }
}
