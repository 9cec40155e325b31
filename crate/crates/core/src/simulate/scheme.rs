//! Separable measurement schemes and outcome sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::estimate::{mle, MleOptions};
use super::haar::{fourier_basis, haar_unitary};
use crate::error::{Error, Result};
use crate::information::{povm_fisher, InfoKind, InfoMatrix};
use crate::linalg::{self, CMat, RMat};
use crate::quantum::{bloch_axis_basis, bloch_vector, pauli_basis, Family, ParametricModel, Povm};
use crate::serial;

/// An orthonormal measurement basis (columns are the outcome vectors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    /// Eigenbasis of a Pauli matrix, `axis` 0, 1, 2 for x, y, z; qubits only.
    Pauli { axis: usize },
    Computational,
    Fourier,
    Unitary {
        #[serde(with = "serial::cmat")]
        matrix: CMat,
    },
}

impl BasisSpec {
    /// Parses `x`, `y`, `z`, `computational` or `fourier`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "x" => Ok(BasisSpec::Pauli { axis: 0 }),
            "y" => Ok(BasisSpec::Pauli { axis: 1 }),
            "z" => Ok(BasisSpec::Pauli { axis: 2 }),
            "computational" => Ok(BasisSpec::Computational),
            "fourier" => Ok(BasisSpec::Fourier),
            other => Err(Error::InvalidSpec(format!("unknown basis {other:?}"))),
        }
    }

    pub fn matrix(&self, d: usize) -> Result<CMat> {
        match self {
            BasisSpec::Pauli { axis } => {
                if d != 2 || *axis > 2 {
                    return Err(Error::InvalidSpec(format!("Pauli basis {axis} in dimension {d}")));
                }
                Ok(pauli_basis(*axis))
            }
            BasisSpec::Computational => Ok(linalg::identity(d)),
            BasisSpec::Fourier => Ok(fourier_basis(d)),
            BasisSpec::Unitary { matrix } => {
                if matrix.nrows() != d || matrix.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: matrix.nrows(),
                    });
                }
                let dev = linalg::max_abs(&(matrix.adjoint() * matrix - linalg::identity(d)));
                if dev > 1e-9 {
                    return Err(Error::InvalidSpec(format!("basis is not unitary ({dev:.2e})")));
                }
                Ok(matrix.clone())
            }
        }
    }
}

/// How each copy is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementScheme {
    FixedBasis { basis: BasisSpec },
    /// Copy `k` is measured in `bases[k mod len]`.
    AlternatingBases { bases: Vec<BasisSpec> },
    /// An independent Haar-random basis for every copy.
    RandomBasisCovariant,
    /// A fixed informationally complete stage on `ceil(f N)` copies, then
    /// bases adapted to the stage-one estimate.
    TwoStepAdaptive { first_fraction: f64 },
}

/// Two-stage scheme using the fraction `first_fraction` for the first stage.
pub fn two_step_scheme(first_fraction: f64) -> Result<MeasurementScheme> {
    if !(first_fraction > 0.0 && first_fraction < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "first-stage fraction {first_fraction} outside (0, 1)"
        )));
    }
    Ok(MeasurementScheme::TwoStepAdaptive { first_fraction })
}

impl MeasurementScheme {
    pub fn name(&self) -> &'static str {
        match self {
            MeasurementScheme::FixedBasis { .. } => "fixed_basis",
            MeasurementScheme::AlternatingBases { .. } => "alternating_bases",
            MeasurementScheme::RandomBasisCovariant => "random_basis_covariant",
            MeasurementScheme::TwoStepAdaptive { .. } => "two_step_adaptive",
        }
    }

    /// The Pauli x/y(/z) cycle used as a default alternating scheme.
    pub fn pauli_cycle(model: &ParametricModel) -> Self {
        let axes = if model.family() == Family::BlochEquatorial { 2 } else { 3 };
        MeasurementScheme::AlternatingBases {
            bases: (0..axes).map(|axis| BasisSpec::Pauli { axis }).collect(),
        }
    }
}

/// One measured copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    /// Index into [`Sample::bases`].
    pub basis: usize,
    pub outcome: usize,
}

/// Measurement data for `N` copies.
#[derive(Debug, Clone)]
pub struct Sample {
    pub bases: Vec<CMat>,
    pub records: Vec<Record>,
    /// Number of leading records that belong to the first stage.
    pub stage_one: usize,
    /// Parameter the data were drawn from (diagnostics and oracle tests only).
    pub truth: Vec<f64>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The first `stage_one` records as a sample of their own.
    pub fn stage_one_sample(&self) -> Sample {
        Sample {
            bases: self.bases.clone(),
            records: self.records[..self.stage_one].to_vec(),
            stage_one: self.stage_one,
            truth: self.truth.clone(),
        }
    }

    /// Outcome counts per basis, `counts[basis][outcome]`.
    pub fn counts(&self, d: usize) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; d]; self.bases.len()];
        for r in &self.records {
            counts[r.basis][r.outcome] += 1;
        }
        counts
    }
}

/// Born probabilities of each column of `basis`.
pub(crate) fn basis_probabilities(rho: &CMat, basis: &CMat) -> Vec<f64> {
    (0..basis.ncols())
        .map(|k| {
            let u = basis.column(k);
            (u.adjoint() * rho * u)[(0, 0)].re.max(0.0)
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    // Round-off: the last outcome with positive probability.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn is_bloch_qubit(model: &ParametricModel) -> bool {
    model.dim() == 2 && model.affine_parts().is_some()
}

/// Fixed first-stage bases of a two-step scheme: the Pauli bases that are
/// informative for the family, or none (Haar bases) above dimension 2.
fn stage_one_bases(model: &ParametricModel) -> Vec<CMat> {
    if model.dim() != 2 {
        return Vec::new();
    }
    let axes = if model.family() == Family::BlochEquatorial { 2 } else { 3 };
    (0..axes).map(pauli_basis).collect()
}

/// Stage-two bases adapted to an estimate, or `None` to use Haar bases.
///
/// For qubit mixed-state families these are the eigenbasis along the
/// estimated Bloch direction and the tangential axes (one in the equatorial
/// plane, two for the full ball).
pub fn adapted_bases(model: &ParametricModel, estimate: &[f64]) -> Result<Option<Vec<CMat>>> {
    if !is_bloch_qubit(model) {
        return Ok(None);
    }
    let n = bloch_vector(&model.rho(estimate)?);
    let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if r < 1e-6 {
        return Ok(None);
    }
    let radial = [n[0] / r, n[1] / r, n[2] / r];
    if model.family() == Family::BlochEquatorial {
        let tangent = [-radial[1], radial[0], 0.0];
        let norm = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        let tangent = [tangent[0] / norm, tangent[1] / norm, 0.0];
        return Ok(Some(vec![bloch_axis_basis(&radial), bloch_axis_basis(&tangent)]));
    }
    // Two unit vectors completing radial to an orthonormal frame.
    let helper = if radial[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let t1 = cross(radial, helper);
    let n1 = (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt();
    let t1 = [t1[0] / n1, t1[1] / n1, t1[2] / n1];
    let t2 = cross(radial, t1);
    Ok(Some(vec![
        bloch_axis_basis(&radial),
        bloch_axis_basis(&t1),
        bloch_axis_basis(&t2),
    ]))
}

/// Stage-two bases of a two-step run, computed from the first stage alone.
pub fn stage_two_bases(model: &ParametricModel, stage_one: &Sample) -> Result<Option<Vec<CMat>>> {
    let est = mle(model, stage_one, &MleOptions::default(), None)?;
    adapted_bases(model, &est.theta)
}

/// Draws `n` copies from `rho(theta)` with a seeded generator.
pub fn sample_outcomes(
    model: &ParametricModel,
    theta: &[f64],
    scheme: &MeasurementScheme,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(model, theta, scheme, n, &mut rng)
}

pub fn sample_with_rng<R: Rng + ?Sized>(
    model: &ParametricModel,
    theta: &[f64],
    scheme: &MeasurementScheme,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidSpec("number of copies must be at least 1".into()));
    }
    let rho = model.rho(theta)?;
    let d = model.dim();
    let mut sample = Sample {
        bases: Vec::new(),
        records: Vec::with_capacity(n),
        stage_one: n,
        truth: theta.to_vec(),
    };
    let measure = |sample: &mut Sample, basis: usize, rng: &mut R| {
        let probs = basis_probabilities(&rho, &sample.bases[basis]);
        let outcome = draw(&probs, rng);
        sample.records.push(Record { basis, outcome });
    };
    match scheme {
        MeasurementScheme::FixedBasis { basis } => {
            sample.bases.push(basis.matrix(d)?);
            for _ in 0..n {
                measure(&mut sample, 0, rng);
            }
        }
        MeasurementScheme::AlternatingBases { bases } => {
            if bases.is_empty() {
                return Err(Error::InvalidSpec("alternating scheme without bases".into()));
            }
            for b in bases {
                sample.bases.push(b.matrix(d)?);
            }
            for k in 0..n {
                measure(&mut sample, k % bases.len(), rng);
            }
        }
        MeasurementScheme::RandomBasisCovariant => {
            for k in 0..n {
                sample.bases.push(haar_unitary(d, rng));
                measure(&mut sample, k, rng);
            }
        }
        MeasurementScheme::TwoStepAdaptive { first_fraction } => {
            two_step_scheme(*first_fraction)?;
            let n1 = ((first_fraction * n as f64).ceil() as usize).clamp(1, n);
            let fixed = stage_one_bases(model);
            for k in 0..n1 {
                if fixed.is_empty() {
                    sample.bases.push(haar_unitary(d, rng));
                    let idx = sample.bases.len() - 1;
                    measure(&mut sample, idx, rng);
                } else {
                    if k < fixed.len() {
                        sample.bases.push(fixed[k].clone());
                    }
                    measure(&mut sample, k % fixed.len(), rng);
                }
            }
            sample.stage_one = n1;
            if n1 < n {
                let adapted = stage_two_bases(model, &sample)?;
                match adapted {
                    Some(list) => {
                        let offset = sample.bases.len();
                        sample.bases.extend(list.iter().cloned());
                        for k in 0..(n - n1) {
                            measure(&mut sample, offset + k % list.len(), rng);
                        }
                    }
                    None => {
                        for _ in n1..n {
                            sample.bases.push(haar_unitary(d, rng));
                            let idx = sample.bases.len() - 1;
                            measure(&mut sample, idx, rng);
                        }
                    }
                }
            }
        }
    }
    Ok(sample)
}

/// Average per-copy Fisher information of a scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalFisher {
    pub info: InfoMatrix,
    /// Entrywise Monte Carlo standard error (zero for deterministic schemes).
    #[serde(with = "serial::rmat")]
    pub std_error: RMat,
    /// Number of bases averaged.
    pub n_bases: usize,
    /// Per-basis information matrices with their averaging weights.
    #[serde(skip)]
    pub per_basis: Vec<(f64, RMat)>,
}

impl EmpiricalFisher {
    /// Mean and standard error of a scalar functional of the per-basis matrices.
    pub fn scalar(&self, f: impl Fn(&RMat) -> f64) -> (f64, f64) {
        let vals: Vec<(f64, f64)> = self.per_basis.iter().map(|(w, m)| (*w, f(m))).collect();
        let mean: f64 = vals.iter().map(|(w, v)| w * v).sum();
        if self.std_error.iter().all(|x| *x == 0.0) || vals.len() < 2 {
            return (mean, 0.0);
        }
        let n = vals.len() as f64;
        let var = vals.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    /// Frobenius norm of the standard-error matrix.
    pub fn sigma(&self) -> f64 {
        self.std_error.norm()
    }
}

fn fisher_of(model: &ParametricModel, theta: &[f64], basis: &CMat) -> Result<RMat> {
    Ok(povm_fisher(model, theta, &Povm::from_basis(basis)?)?.matrix)
}

fn deterministic(list: Vec<(f64, RMat)>) -> Result<EmpiricalFisher> {
    let p = list[0].1.nrows();
    let mut mean = RMat::zeros(p, p);
    for (w, m) in &list {
        mean += m * *w;
    }
    Ok(EmpiricalFisher {
        info: InfoMatrix::new(InfoKind::PovmFisher, linalg::symmetrize(&mean))?,
        std_error: RMat::zeros(p, p),
        n_bases: list.len(),
        per_basis: list,
    })
}

fn haar_average(
    model: &ParametricModel,
    theta: &[f64],
    n_bases: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EmpiricalFisher> {
    let n = n_bases.max(1);
    let p = model.num_params();
    let mut list = Vec::with_capacity(n);
    for _ in 0..n {
        let u = haar_unitary(model.dim(), rng);
        list.push((1.0 / n as f64, fisher_of(model, theta, &u)?));
    }
    let mut mean = RMat::zeros(p, p);
    for (w, m) in &list {
        mean += m * *w;
    }
    let mut se = RMat::zeros(p, p);
    if n > 1 {
        for (_, m) in &list {
            se += (m - &mean).map(|x| x * x);
        }
        se = se.map(|v| (v / ((n - 1) as f64 * n as f64)).sqrt());
    }
    Ok(EmpiricalFisher {
        info: InfoMatrix::new(InfoKind::PovmFisher, linalg::symmetrize(&mean))?,
        std_error: se,
        n_bases: n,
        per_basis: list,
    })
}

/// Average `povm_fisher` of the per-copy measurements of `scheme` at `theta`.
///
/// Fixed and alternating schemes are averaged exactly; the random scheme
/// uses `n_bases` Haar bases. The two-step scheme is evaluated with its
/// second stage adapted to `theta` itself, its large-`N` behaviour.
pub fn empirical_fisher(
    model: &ParametricModel,
    theta: &[f64],
    scheme: &MeasurementScheme,
    n_bases: usize,
    seed: u64,
) -> Result<EmpiricalFisher> {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match scheme {
        MeasurementScheme::FixedBasis { basis } => {
            deterministic(vec![(1.0, fisher_of(model, theta, &basis.matrix(d)?)?)])
        }
        MeasurementScheme::AlternatingBases { bases } => {
            if bases.is_empty() {
                return Err(Error::InvalidSpec("alternating scheme without bases".into()));
            }
            let w = 1.0 / bases.len() as f64;
            let list = bases
                .iter()
                .map(|b| Ok((w, fisher_of(model, theta, &b.matrix(d)?)?)))
                .collect::<Result<Vec<_>>>()?;
            deterministic(list)
        }
        MeasurementScheme::RandomBasisCovariant => haar_average(model, theta, n_bases, &mut rng),
        MeasurementScheme::TwoStepAdaptive { first_fraction } => {
            let f = *first_fraction;
            two_step_scheme(f)?;
            match adapted_bases(model, theta)? {
                Some(stage2) => {
                    let stage1 = stage_one_bases(model);
                    let mut list = Vec::new();
                    for b in &stage1 {
                        list.push((f / stage1.len() as f64, fisher_of(model, theta, b)?));
                    }
                    let w2 = (1.0 - f) / stage2.len() as f64;
                    for b in &stage2 {
                        list.push((w2, fisher_of(model, theta, b)?));
                    }
                    deterministic(list)
                }
                // Both stages are Haar-random outside the qubit families.
                None => haar_average(model, theta, n_bases, &mut rng),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn north_pole_in_z_gives_only_zero() {
        let model = ParametricModel::bloch_full();
        let scheme = MeasurementScheme::FixedBasis {
            basis: BasisSpec::Pauli { axis: 2 },
        };
        let s = sample_outcomes(&model, &[0.0, 0.0, 1.0], &scheme, 500, 1).unwrap();
        assert!(s.records.iter().all(|r| r.outcome == 0));
    }

    #[test]
    fn centre_in_z_is_fair() {
        let model = ParametricModel::bloch_full();
        let scheme = MeasurementScheme::FixedBasis {
            basis: BasisSpec::Pauli { axis: 2 },
        };
        let n = 10_000;
        let s = sample_outcomes(&model, &[0.0, 0.0, 0.0], &scheme, n, 2).unwrap();
        let zeros = s.records.iter().filter(|r| r.outcome == 0).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((zeros - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn sampling_is_reproducible() {
        let model = ParametricModel::pure_qubit();
        let scheme = MeasurementScheme::RandomBasisCovariant;
        let a = sample_outcomes(&model, &[0.3, 0.1], &scheme, 200, 9).unwrap();
        let b = sample_outcomes(&model, &[0.3, 0.1], &scheme, 200, 9).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.bases, b.bases);
    }

    #[test]
    fn two_step_split_and_bases() {
        let model = ParametricModel::bloch_equatorial();
        let scheme = two_step_scheme(0.1).unwrap();
        let s = sample_outcomes(&model, &[0.5, 0.2], &scheme, 1000, 4).unwrap();
        assert_eq!(s.stage_one, 100);
        assert_eq!(s.len(), 1000);
        assert_eq!(s.bases.len(), 4);
        assert!(two_step_scheme(0.0).is_err());
        assert!(two_step_scheme(1.0).is_err());
    }

    #[test]
    fn fixed_basis_fisher_is_exact() {
        let model = ParametricModel::bloch_full();
        let basis = BasisSpec::Pauli { axis: 0 };
        let scheme = MeasurementScheme::FixedBasis { basis: basis.clone() };
        let theta = [0.3, 0.1, -0.2];
        let e = empirical_fisher(&model, &theta, &scheme, 10, 0).unwrap();
        let direct = fisher_of(&model, &theta, &basis.matrix(2).unwrap()).unwrap();
        assert_eq!(e.info.matrix, direct);
        assert_eq!(e.sigma(), 0.0);
    }

    #[test]
    fn basis_spec_json() {
        let s = MeasurementScheme::AlternatingBases {
            bases: vec![BasisSpec::Pauli { axis: 0 }, BasisSpec::Fourier],
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<MeasurementScheme>(&text).unwrap(), s);
        assert!(BasisSpec::parse("w").is_err());
    }
}
