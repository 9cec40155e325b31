//! States, measurements and parametric model families.
//!
//! A [`ParametricModel`] maps a real parameter vector to a density matrix and
//! its partial derivatives. Two kinds are supported: affine models
//! `rho(theta) = rho0 + sum_i theta_i B_i` (the Bloch families and user
//! supplied `affine_custom` models) and pure-state models in which
//! `theta` holds the real and imaginary parts of amplitudes `1..d` and the
//! first amplitude is fixed real-positive.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat, RVec, C64};
use crate::numerics::Numerics;
use crate::serial::{self, ComplexRows};

/// Square matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub fn new(m: CMat, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let dev = linalg::hermitian_deviation(&m);
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(HermitianMatrix(m))
    }

    /// Wraps `m` after symmetrizing away round-off.
    pub(crate) fn from_raw(m: CMat) -> Self {
        HermitianMatrix(linalg::hermitize(&m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.0)
    }
}

/// A PSD, trace-one Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: CMat, numerics: &Numerics) -> Result<Self> {
        let h = HermitianMatrix::new(m, numerics.hermitian_tol)?;
        let tr = linalg::trace(h.matrix());
        if (tr.re - 1.0).abs() > numerics.trace_tol || tr.im.abs() > numerics.trace_tol {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min = h.eigenvalues()[0];
        if min < -numerics.psd_tol {
            return Err(Error::NotPsd(min));
        }
        Ok(DensityMatrix(h))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.0.matrix()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_prod_re(self.matrix(), self.matrix())
    }
}

/// Finite-outcome positive-operator-valued measure.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    outcomes: Vec<String>,
    elements: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(outcomes: Vec<String>, elements: Vec<CMat>, numerics: &Numerics) -> Result<Self> {
        if outcomes.len() != elements.len() || elements.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "{} outcome labels for {} POVM elements",
                outcomes.len(),
                elements.len()
            )));
        }
        let dim = elements[0].nrows();
        let mut total = CMat::zeros(dim, dim);
        let mut checked = Vec::with_capacity(elements.len());
        for e in elements {
            if e.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.nrows(),
                });
            }
            let h = HermitianMatrix::new(e, numerics.hermitian_tol.max(1e-10))?;
            let min = h.eigenvalues()[0];
            if min < -numerics.psd_tol {
                return Err(Error::NotPsd(min));
            }
            total += h.matrix();
            checked.push(h);
        }
        let dev = linalg::max_abs(&(total - linalg::identity(dim)));
        if dev > numerics.trace_tol {
            return Err(Error::NotComplete(dev));
        }
        Ok(Povm {
            dim,
            outcomes,
            elements: checked,
        })
    }

    /// Projective measurement onto the columns of a unitary matrix.
    pub fn from_basis(basis: &CMat) -> Result<Self> {
        let d = basis.nrows();
        let elements = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k);
                v * v.adjoint()
            })
            .collect();
        let labels = (0..basis.ncols()).map(|k| k.to_string()).collect();
        Povm::new(labels, elements, &Numerics::default()).map_err(|e| match e {
            Error::NotComplete(dev) => Error::InvalidSpec(format!(
                "basis of dimension {d} is not orthonormal (completeness deviation {dev:.2e})"
            )),
            other => other,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }
}

/// Eigenbasis of a Pauli matrix as a unitary whose first column is the +1 eigenvector.
pub fn pauli_basis(axis: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match axis {
        0 => CMat::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]),
        1 => CMat::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(0.0, s), c(0.0, -s)]),
        _ => linalg::identity(2),
    }
}

/// Eigenbasis of `n . sigma` for a unit 3-vector `n`, +1 eigenvector first.
pub fn bloch_axis_basis(n: &[f64; 3]) -> CMat {
    let [s1, s2, s3] = linalg::pauli();
    let obs = s1 * c(n[0], 0.0) + s2 * c(n[1], 0.0) + s3 * c(n[2], 0.0);
    let (_, vecs) = linalg::eigh(&obs);
    let mut out = CMat::zeros(2, 2);
    out.set_column(0, &vecs.column(1));
    out.set_column(1, &vecs.column(0));
    out
}

/// Bloch vector `tr(rho sigma_k)` of a qubit operator.
pub fn bloch_vector(rho: &CMat) -> [f64; 3] {
    let s = linalg::pauli();
    [
        linalg::trace_prod_re(rho, &s[0]),
        linalg::trace_prod_re(rho, &s[1]),
        linalg::trace_prod_re(rho, &s[2]),
    ]
}

/// `(1 + theta . sigma) / 2`.
pub fn bloch_state(theta: &[f64; 3]) -> Result<DensityMatrix> {
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("Bloch vector norm {norm} exceeds 1")));
    }
    let s = linalg::pauli();
    let mut rho = linalg::identity(2) * c(0.5, 0.0);
    for k in 0..3 {
        rho += &s[k] * c(0.5 * theta[k], 0.0);
    }
    DensityMatrix::new(rho, &Numerics::default())
}

/// Outcome probabilities `tr(rho M_x)`, with round-off negatives clipped to 0.
pub fn born_distribution(rho: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    born_probabilities(rho.matrix(), povm)
}

pub(crate) fn born_probabilities(rho: &CMat, povm: &Povm) -> Result<Vec<f64>> {
    if rho.nrows() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: rho.nrows(),
        });
    }
    let mut probs = Vec::with_capacity(povm.len());
    for e in povm.elements() {
        let p = linalg::trace_prod_re(rho, e.matrix());
        if p < -1e-12 {
            return Err(Error::Numerical(format!("negative outcome probability {p:.3e}")));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!("probabilities sum to {total}")));
    }
    Ok(probs)
}

/// Fidelity `(tr sqrt(rho^1/2 sigma rho^1/2))^2`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    fidelity_matrices(a.matrix(), b.matrix())
}

pub(crate) fn fidelity_matrices(a: &CMat, b: &CMat) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let (va, vecs_a) = linalg::eigh(a);
    let (vb, _) = linalg::eigh(b);
    // For a rank-one argument the fidelity is exactly the overlap tr(a b);
    // this avoids square roots of round-off eigenvalues.
    let pure_cut = 1.0 - 1e-13;
    if va.last().copied().unwrap_or(0.0) >= pure_cut || vb.last().copied().unwrap_or(0.0) >= pure_cut
    {
        return Ok(linalg::trace_prod_re(a, b).clamp(0.0, 1.0));
    }
    let n = a.nrows();
    let mut scaled = vecs_a.clone();
    for (j, &v) in va.iter().enumerate() {
        let s = c(v.max(0.0).sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    let sqrt_a = &scaled * vecs_a.adjoint();
    let inner = &sqrt_a * b * &sqrt_a;
    let vals = linalg::eigvalsh(&inner);
    if vals[0] < -1e-9 {
        return Err(Error::Numerical(format!(
            "fidelity inner matrix not PSD (eigenvalue {:.3e})",
            vals[0]
        )));
    }
    let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BlochFull,
    BlochEquatorial,
    PureQubit,
    PureDimD,
    AffineCustom,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::BlochFull => "bloch_full",
            Family::BlochEquatorial => "bloch_equatorial",
            Family::PureQubit => "pure_qubit",
            Family::PureDimD => "pure_dim_d",
            Family::AffineCustom => "affine_custom",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Some(match s {
            "bloch_full" => Family::BlochFull,
            "bloch_equatorial" => Family::BlochEquatorial,
            "pure_qubit" => Family::PureQubit,
            "pure_dim_d" => Family::PureDimD,
            "affine_custom" => Family::AffineCustom,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Closed Euclidean ball centred at the origin.
    Ball { radius: f64 },
    /// Axis-aligned box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            Domain::Ball { radius } => norm(theta) <= radius + 1e-12,
            Domain::Box { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (lo, hi))| *x >= lo - 1e-12 && *x <= hi + 1e-12),
        }
    }

    pub fn reference_point(&self, p: usize) -> Vec<f64> {
        match self {
            Domain::Ball { .. } => vec![0.0; p],
            Domain::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, theta: &mut [f64]) {
        match self {
            Domain::Ball { radius } => {
                let n = norm(theta);
                if n > *radius {
                    theta.iter_mut().for_each(|x| *x *= radius / n);
                }
            }
            Domain::Box { lower, upper } => {
                for (x, (lo, hi)) in theta.iter_mut().zip(lower.iter().zip(upper)) {
                    *x = x.clamp(*lo, *hi);
                }
            }
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// State and derivatives at one parameter value.
#[derive(Debug, Clone)]
pub struct ModelPoint {
    pub rho: CMat,
    pub derivs: Vec<CMat>,
}

#[derive(Debug, Clone)]
enum ModelKind {
    Affine { rho0: CMat, basis: Vec<CMat> },
    Pure,
}

/// A finite-dimensional parametric quantum model `theta -> rho(theta)`.
#[derive(Debug, Clone)]
pub struct ParametricModel {
    family: Family,
    dim: usize,
    num_params: usize,
    domain: Domain,
    kind: ModelKind,
    numerics: Numerics,
}

impl ParametricModel {
    /// Completely unknown qubit, `theta` in the unit ball of R^3.
    pub fn bloch_full() -> Self {
        let s = linalg::pauli();
        Self::affine_unchecked(
            Family::BlochFull,
            linalg::identity(2) * c(0.5, 0.0),
            s.iter().map(|m| m * c(0.5, 0.0)).collect(),
            1.0,
        )
    }

    /// Qubit with `theta_3 = 0`, `theta` in the unit disc.
    pub fn bloch_equatorial() -> Self {
        let s = linalg::pauli();
        Self::affine_unchecked(
            Family::BlochEquatorial,
            linalg::identity(2) * c(0.5, 0.0),
            vec![&s[0] * c(0.5, 0.0), &s[1] * c(0.5, 0.0)],
            1.0,
        )
    }

    pub fn pure_qubit() -> Self {
        let mut m = Self::pure_dim(2).expect("d = 2 is supported");
        m.family = Family::PureQubit;
        m
    }

    /// Completely unknown pure state in dimension `d`, with `2(d-1)` parameters.
    pub fn pure_dim(d: usize) -> Result<Self> {
        if !(2..=8).contains(&d) {
            return Err(Error::Unsupported(format!("pure-state dimension {d} (supported 2..=8)")));
        }
        Ok(ParametricModel {
            family: Family::PureDimD,
            dim: d,
            num_params: 2 * (d - 1),
            domain: Domain::Ball { radius: 1.0 },
            kind: ModelKind::Pure,
            numerics: Numerics::default(),
        })
    }

    /// `rho(theta) = rho0 + sum_i theta_i B_i` on the ball of the given radius.
    ///
    /// `rho0` must be a density matrix and every `B_i` traceless Hermitian.
    pub fn affine(rho0: CMat, basis: Vec<CMat>, radius: f64) -> Result<Self> {
        let numerics = Numerics::default();
        DensityMatrix::new(rho0.clone(), &numerics)?;
        if basis.is_empty() {
            return Err(Error::InvalidSpec("affine model needs at least one basis matrix".into()));
        }
        let d = rho0.nrows();
        if d > 8 {
            return Err(Error::Unsupported(format!("dimension {d} (supported up to 8)")));
        }
        for (k, b) in basis.iter().enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.nrows(),
                });
            }
            HermitianMatrix::new(b.clone(), numerics.hermitian_tol.max(1e-10))?;
            let tr = linalg::trace(b);
            if tr.norm() > numerics.trace_tol {
                return Err(Error::InvalidSpec(format!(
                    "basis matrix {k} has trace {tr} (must be traceless)"
                )));
            }
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSpec(format!("domain radius {radius}")));
        }
        Ok(Self::affine_unchecked(Family::AffineCustom, rho0, basis, radius))
    }

    fn affine_unchecked(family: Family, rho0: CMat, basis: Vec<CMat>, radius: f64) -> Self {
        ParametricModel {
            family,
            dim: rho0.nrows(),
            num_params: basis.len(),
            domain: Domain::Ball { radius },
            kind: ModelKind::Affine {
                rho0: linalg::hermitize(&rho0),
                basis: basis.iter().map(linalg::hermitize).collect(),
            },
            numerics: Numerics::default(),
        }
    }

    pub fn with_numerics(mut self, numerics: Numerics) -> Self {
        self.numerics = numerics;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.kind, ModelKind::Pure)
    }

    /// `(rho0, [B_i])` for affine models.
    pub fn affine_parts(&self) -> Option<(&CMat, &[CMat])> {
        match &self.kind {
            ModelKind::Affine { rho0, basis } => Some((rho0, basis)),
            ModelKind::Pure => None,
        }
    }

    pub fn reference_point(&self) -> Vec<f64> {
        self.domain.reference_point(self.num_params)
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params {
            return Err(Error::DimensionMismatch {
                expected: self.num_params,
                found: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter {theta:?}")));
        }
        Ok(())
    }

    fn check_domain(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        if !self.domain.contains(theta) {
            return Err(Error::Domain(format!(
                "{theta:?} is outside the {} domain",
                self.family
            )));
        }
        Ok(())
    }

    /// Unit state vector of a pure model (first amplitude real, non-negative).
    pub fn pure_vector(&self, theta: &[f64]) -> Result<DVector<C64>> {
        if !self.is_pure() {
            return Err(Error::Unsupported(format!("{} is not a pure-state family", self.family)));
        }
        self.check_domain(theta)?;
        let r2: f64 = theta.iter().map(|x| x * x).sum();
        let mut phi = DVector::from_element(self.dim, c(0.0, 0.0));
        phi[0] = c((1.0 - r2).max(0.0).sqrt(), 0.0);
        for k in 1..self.dim {
            phi[k] = c(theta[2 * k - 2], theta[2 * k - 1]);
        }
        Ok(phi)
    }

    /// Density matrix without the PSD check (affine models may leave the state space).
    pub fn rho(&self, theta: &[f64]) -> Result<CMat> {
        self.check_domain(theta)?;
        Ok(match &self.kind {
            ModelKind::Affine { rho0, basis } => {
                let mut rho = rho0.clone();
                for (b, &t) in basis.iter().zip(theta) {
                    rho += b * c(t, 0.0);
                }
                rho
            }
            ModelKind::Pure => {
                let phi = self.pure_vector(theta)?;
                &phi * phi.adjoint()
            }
        })
    }

    pub fn state(&self, theta: &[f64]) -> Result<DensityMatrix> {
        DensityMatrix::new(self.rho(theta)?, &self.numerics)
    }

    /// State and all partial derivatives.
    pub fn point(&self, theta: &[f64]) -> Result<ModelPoint> {
        let rho = self.rho(theta)?;
        let derivs = match &self.kind {
            ModelKind::Affine { basis, .. } => basis.clone(),
            ModelKind::Pure => {
                let phi = self.pure_vector(theta)?;
                let a0 = phi[0].re;
                if a0 < 1e-9 {
                    return Err(Error::Domain(format!(
                        "{theta:?} is on the coordinate boundary of the pure-state chart"
                    )));
                }
                (0..self.num_params)
                    .map(|i| {
                        let mut dphi = DVector::from_element(self.dim, c(0.0, 0.0));
                        dphi[0] = c(-theta[i] / a0, 0.0);
                        let k = i / 2 + 1;
                        dphi[k] = if i % 2 == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
                        let m = &dphi * phi.adjoint();
                        &m + m.adjoint()
                    })
                    .collect()
            }
        };
        Ok(ModelPoint { rho, derivs })
    }

    pub fn derivatives(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        Ok(self
            .point(theta)?
            .derivs
            .into_iter()
            .map(HermitianMatrix::from_raw)
            .collect())
    }

    /// Affine model in new coordinates `eta` with `theta = A eta`.
    ///
    /// The new basis is `B'_k = sum_i A_ik B_i`; the domain becomes the ball of
    /// radius `radius / ||A||_2` so that it maps inside the original domain.
    pub fn reparameterized(&self, a: &RMat) -> Result<Self> {
        let (rho0, basis) = self
            .affine_parts()
            .ok_or_else(|| Error::Unsupported("reparameterization of pure families".into()))?;
        if a.nrows() != self.num_params || a.ncols() != self.num_params {
            return Err(Error::DimensionMismatch {
                expected: self.num_params,
                found: a.nrows(),
            });
        }
        let new_basis: Vec<CMat> = (0..a.ncols())
            .map(|k| {
                let mut m = CMat::zeros(self.dim, self.dim);
                for (i, b) in basis.iter().enumerate() {
                    m += b * c(a[(i, k)], 0.0);
                }
                m
            })
            .collect();
        let radius = match self.domain {
            Domain::Ball { radius } => radius,
            Domain::Box { .. } => 1.0,
        };
        let spectral = linalg::eigvalsh_real(&(a.transpose() * a))
            .last()
            .copied()
            .unwrap_or(1.0)
            .sqrt();
        let mut out = ParametricModel::affine(rho0.clone(), new_basis, radius / spectral)?;
        out.numerics = self.numerics;
        Ok(out)
    }
}

/// JSON form of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<ComplexRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<ComplexRows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl ModelSpec {
    pub fn builtin(family: Family, dim: Option<usize>) -> Self {
        ModelSpec {
            family,
            dim,
            rho0: None,
            basis: None,
            radius: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the model and validates it at the domain's reference point.
    pub fn build(&self) -> Result<ParametricModel> {
        let fixed_qubit = |name: &str| -> Result<()> {
            match self.dim {
                None | Some(2) => Ok(()),
                Some(d) => Err(Error::InvalidSpec(format!("{name} has dim 2, got {d}"))),
            }
        };
        let no_affine_fields = || -> Result<()> {
            if self.rho0.is_some() || self.basis.is_some() || self.radius.is_some() {
                return Err(Error::InvalidSpec(format!(
                    "rho0/basis/radius are only valid for affine_custom, not {}",
                    self.family
                )));
            }
            Ok(())
        };
        let model = match self.family {
            Family::BlochFull => {
                fixed_qubit("bloch_full")?;
                no_affine_fields()?;
                ParametricModel::bloch_full()
            }
            Family::BlochEquatorial => {
                fixed_qubit("bloch_equatorial")?;
                no_affine_fields()?;
                ParametricModel::bloch_equatorial()
            }
            Family::PureQubit => {
                fixed_qubit("pure_qubit")?;
                no_affine_fields()?;
                ParametricModel::pure_qubit()
            }
            Family::PureDimD => {
                no_affine_fields()?;
                let d = self
                    .dim
                    .ok_or_else(|| Error::InvalidSpec("pure_dim_d requires \"dim\"".into()))?;
                ParametricModel::pure_dim(d)?
            }
            Family::AffineCustom => {
                let rho0 = self
                    .rho0
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("affine_custom requires \"rho0\"".into()))?;
                let basis = self
                    .basis
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("affine_custom requires \"basis\"".into()))?;
                let rho0 = serial::cmat_from_rows(rho0)?;
                if let Some(d) = self.dim {
                    if d != rho0.nrows() {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            found: rho0.nrows(),
                        });
                    }
                }
                let basis = basis
                    .iter()
                    .map(serial::cmat_from_rows)
                    .collect::<Result<Vec<_>>>()?;
                ParametricModel::affine(rho0, basis, self.radius.unwrap_or(1.0))?
            }
        };
        let reference = model.reference_point();
        model.state(&reference)?;
        for d in model.point(&reference)?.derivs {
            let tr = linalg::trace(&d);
            if tr.norm() > model.numerics.trace_tol {
                return Err(Error::InvalidSpec(format!("derivative with trace {tr}")));
            }
        }
        Ok(model)
    }

    pub fn from_model(model: &ParametricModel) -> Self {
        match model.affine_parts() {
            Some((rho0, basis)) if model.family == Family::AffineCustom => ModelSpec {
                family: model.family,
                dim: Some(model.dim),
                rho0: Some(serial::cmat_to_rows(rho0)),
                basis: Some(basis.iter().map(serial::cmat_to_rows).collect()),
                radius: match model.domain {
                    Domain::Ball { radius } => Some(radius),
                    Domain::Box { .. } => None,
                },
            },
            _ => ModelSpec::builtin(model.family, Some(model.dim)),
        }
    }
}

/// Real vector `psi(theta)` in which the fidelity deficit is exactly quadratic:
/// `1 - Fid(rho(a), rho(b)) = loss_scale * ||psi(a) - psi(b)||^2`.
#[derive(Debug, Clone)]
pub struct FidelityEmbedding {
    pub psi: RVec,
    /// `q x p` Jacobian.
    pub jacobian: RMat,
    pub loss_scale: f64,
}

pub fn fidelity_embedding(model: &ParametricModel, theta: &[f64]) -> Result<FidelityEmbedding> {
    match model.family {
        Family::BlochFull | Family::BlochEquatorial => {
            model.check_domain(theta)?;
            let p = theta.len();
            let r2: f64 = theta.iter().map(|x| x * x).sum();
            let tail = (1.0 - r2).max(0.0).sqrt();
            let mut psi = RVec::zeros(p + 1);
            let mut jac = RMat::zeros(p + 1, p);
            for i in 0..p {
                psi[i] = theta[i];
                jac[(i, i)] = 1.0;
            }
            psi[p] = tail;
            if tail > 0.0 {
                for i in 0..p {
                    jac[(p, i)] = -theta[i] / tail;
                }
            } else {
                return Err(Error::Domain("embedding Jacobian undefined on the sphere".into()));
            }
            Ok(FidelityEmbedding {
                psi,
                jacobian: jac,
                loss_scale: 0.25,
            })
        }
        Family::PureQubit | Family::PureDimD => {
            let point = model.point(theta)?;
            let d = model.dim;
            let flatten = |m: &CMat| {
                let mut v = RVec::zeros(2 * d * d);
                for i in 0..d {
                    for j in 0..d {
                        v[2 * (i * d + j)] = m[(i, j)].re;
                        v[2 * (i * d + j) + 1] = m[(i, j)].im;
                    }
                }
                v
            };
            let psi = flatten(&point.rho);
            let mut jac = RMat::zeros(2 * d * d, model.num_params);
            for (k, dk) in point.derivs.iter().enumerate() {
                jac.set_column(k, &flatten(dk));
            }
            Ok(FidelityEmbedding {
                psi,
                jacobian: jac,
                loss_scale: 0.5,
            })
        }
        Family::AffineCustom => Err(Error::Unsupported(
            "affine_custom models have no quadratic fidelity embedding".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        linalg::max_abs(&(a - b)) < tol
    }

    #[test]
    fn bloch_state_examples() {
        let center = bloch_state(&[0.0, 0.0, 0.0]).unwrap();
        assert!(close(center.matrix(), &(linalg::identity(2) * c(0.5, 0.0)), 1e-15));

        let north = bloch_state(&[0.0, 0.0, 1.0]).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(close(north.matrix(), &want, 1e-15));

        let x = bloch_state(&[1.0, 0.0, 0.0]).unwrap();
        let half = c(0.5, 0.0);
        let want = CMat::from_row_slice(2, 2, &[half, half, half, half]);
        assert!(close(x.matrix(), &want, 1e-15));

        assert!(matches!(bloch_state(&[0.8, 0.8, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn born_examples() {
        let north = bloch_state(&[0.0, 0.0, 1.0]).unwrap();
        let z = Povm::from_basis(&pauli_basis(2)).unwrap();
        let p = born_distribution(&north, &z).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);

        let mixed = bloch_state(&[0.0, 0.0, 0.0]).unwrap();
        for axis in 0..3 {
            let m = Povm::from_basis(&pauli_basis(axis)).unwrap();
            let p = born_distribution(&mixed, &m).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn born_pure_state_overlap() {
        let model = ParametricModel::pure_dim(3).unwrap();
        let theta = [0.2, -0.1, 0.3, 0.25];
        let phi = model.pure_vector(&theta).unwrap();
        let rho = model.state(&theta).unwrap();
        let basis = crate::simulate::haar::fourier_basis(3);
        let p = born_distribution(&rho, &Povm::from_basis(&basis).unwrap()).unwrap();
        for (x, px) in p.iter().enumerate() {
            let overlap = basis.column(x).dotc(&phi).norm_sqr();
            assert!((px - overlap).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rho = bloch_state(&[0.0, 0.0, 0.0]).unwrap();
        let m = Povm::from_basis(&linalg::identity(3)).unwrap();
        assert!(matches!(
            born_distribution(&rho, &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn povm_rejects_incomplete_sets() {
        let e0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let err = Povm::new(vec!["0".into()], vec![e0], &Numerics::default());
        assert!(matches!(err, Err(Error::NotComplete(_))));
    }

    #[test]
    fn fidelity_examples() {
        let a = bloch_state(&[0.1, 0.2, 0.3]).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let up = bloch_state(&[0.0, 0.0, 1.0]).unwrap();
        let down = bloch_state(&[0.0, 0.0, -1.0]).unwrap();
        assert!(fidelity(&up, &down).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bloch_fidelity_closed_form() {
        let pairs = [
            ([0.1, 0.2, 0.3], [-0.4, 0.1, 0.5]),
            ([0.0, 0.9, 0.0], [0.3, 0.3, 0.3]),
            ([0.6, 0.0, -0.7], [0.6, 0.0, -0.7]),
        ];
        for (a, b) in pairs {
            let fa = bloch_state(&a).unwrap();
            let fb = bloch_state(&b).unwrap();
            let na: f64 = a.iter().map(|x| x * x).sum();
            let nb: f64 = b.iter().map(|x| x * x).sum();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let want = 0.5 * (1.0 + dot + (1.0 - na).sqrt() * (1.0 - nb).sqrt());
            assert!((fidelity(&fa, &fb).unwrap() - want).abs() < 1e-12);
            assert!((fidelity(&fb, &fa).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_at_center() {
        let e = fidelity_embedding(&ParametricModel::bloch_full(), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.psi.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn affine_custom_rejects_traced_basis() {
        let rho0 = linalg::identity(2) * c(0.5, 0.0);
        let err = ParametricModel::affine(rho0, vec![linalg::identity(2)], 1.0);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn model_spec_roundtrip_and_validation() {
        let s = linalg::pauli();
        let model = ParametricModel::affine(
            linalg::identity(2) * c(0.5, 0.0),
            vec![&s[2] * c(0.5, 0.0)],
            1.0,
        )
        .unwrap();
        let spec = ModelSpec::from_model(&model);
        let text = serde_json::to_string(&spec).unwrap();
        let back = ModelSpec::from_json(&text).unwrap().build().unwrap();
        assert_eq!(back.num_params(), 1);
        assert_eq!(back.family(), Family::AffineCustom);

        let bad = r#"{"family":"bloch_full","dim":2,"colour":"red"}"#;
        assert!(ModelSpec::from_json(bad).is_err());
        let bad_dim = r#"{"family":"bloch_full","dim":3}"#;
        assert!(ModelSpec::from_json(bad_dim).unwrap().build().is_err());
        let missing = r#"{"family":"pure_dim_d"}"#;
        assert!(ModelSpec::from_json(missing).unwrap().build().is_err());
    }
}
