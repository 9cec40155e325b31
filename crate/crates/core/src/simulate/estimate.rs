//! Maximum likelihood and posterior-mean estimators.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::haar::haar_unitary;
use super::scheme::Sample;
use crate::bayes::{Prior, PriorSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat, RVec, C64};
use crate::quantum::{Domain, ParametricModel};

/// An estimate together with optimizer bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub theta: Vec<f64>,
    /// Set when the estimate sits on the boundary of the domain (or of the
    /// pure-state chart).
    pub boundary: bool,
    pub log_likelihood: f64,
    /// Norm of the (boundary-projected) log-likelihood gradient.
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Anything that maps data to a parameter estimate.
pub trait Estimator: Sync {
    fn name(&self) -> &str;
    fn estimate(&self, model: &ParametricModel, sample: &Sample, rng: &mut ChaCha8Rng) -> Result<Estimate>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleOptions {
    /// Stop once the gradient norm falls below `tol * N`.
    pub tol: f64,
    pub max_iters: usize,
    /// Starts for pure-state models: the data-driven start plus random ones.
    pub multistart: usize,
    /// Seed for the random starts; fixed so the MLE is a function of the data.
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tol: 1e-8,
            max_iters: 200,
            multistart: 3,
            seed: 0x5eed,
        }
    }
}

/// Log-likelihood of grouped records.
enum Likelihood {
    /// `p_g(theta) = a_g + b_g . theta` with count `n_g`.
    Affine { groups: Vec<(f64, f64, RVec)>, p: usize },
    /// `p_g(psi) = |<u_g|psi>|^2`; `u_g` stored conjugated as a row.
    Pure { groups: Vec<(f64, DVector<C64>)>, d: usize },
}

impl Likelihood {
    fn new(model: &ParametricModel, sample: &Sample) -> Result<Self> {
        let d = model.dim();
        let counts = sample.counts(d);
        if let Some((rho0, basis)) = model.affine_parts() {
            let p = basis.len();
            let mut groups = Vec::new();
            for (bi, row) in counts.iter().enumerate() {
                for (k, &n) in row.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let u = sample.bases[bi].column(k);
                    let proj = u * u.adjoint();
                    let a = linalg::trace_prod_re(rho0, &proj);
                    let b = RVec::from_iterator(p, basis.iter().map(|m| linalg::trace_prod_re(m, &proj)));
                    groups.push((n as f64, a, b));
                }
            }
            Ok(Likelihood::Affine { groups, p })
        } else {
            let mut groups = Vec::new();
            for (bi, row) in counts.iter().enumerate() {
                for (k, &n) in row.iter().enumerate() {
                    if n > 0 {
                        groups.push((n as f64, sample.bases[bi].column(k).clone_owned()));
                    }
                }
            }
            Ok(Likelihood::Pure { groups, d })
        }
    }

    fn total(&self) -> f64 {
        match self {
            Likelihood::Affine { groups, .. } => groups.iter().map(|g| g.0).sum(),
            Likelihood::Pure { groups, .. } => groups.iter().map(|g| g.0).sum(),
        }
    }

    fn affine_value(groups: &[(f64, f64, RVec)], theta: &RVec) -> f64 {
        let mut total = 0.0;
        for (n, a, b) in groups {
            let p = a + b.dot(theta);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += n * p.ln();
        }
        total
    }

    fn pure_value(groups: &[(f64, DVector<C64>)], psi: &DVector<C64>) -> f64 {
        let norm2 = psi.norm_squared();
        let mut total = 0.0;
        for (n, u) in groups {
            let p = u.dotc(psi).norm_sqr() / norm2;
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += n * p.ln();
        }
        total
    }

    /// Log-likelihood at a model parameter.
    fn value(&self, model: &ParametricModel, theta: &[f64]) -> f64 {
        match self {
            Likelihood::Affine { groups, .. } => {
                Self::affine_value(groups, &RVec::from_column_slice(theta))
            }
            Likelihood::Pure { groups, .. } => match model.pure_vector(theta) {
                Ok(psi) => Self::pure_value(groups, &psi),
                Err(_) => f64::NEG_INFINITY,
            },
        }
    }
}

/// Log-likelihood of `sample` at `theta`.
pub fn log_likelihood(model: &ParametricModel, sample: &Sample, theta: &[f64]) -> Result<f64> {
    Ok(Likelihood::new(model, sample)?.value(model, theta))
}

fn domain_radius(domain: &Domain) -> Option<f64> {
    match domain {
        Domain::Ball { radius } => Some(*radius),
        Domain::Box { .. } => None,
    }
}

fn on_boundary(domain: &Domain, theta: &RVec) -> bool {
    match domain {
        Domain::Ball { radius } => theta.norm() >= radius - 1e-9,
        Domain::Box { lower, upper } => theta
            .iter()
            .zip(lower.iter().zip(upper))
            .any(|(x, (lo, hi))| *x <= lo + 1e-9 || *x >= hi - 1e-9),
    }
}

/// Gradient with the outward normal component removed when it points out.
fn projected_gradient(domain: &Domain, theta: &RVec, g: &RVec) -> RVec {
    if !on_boundary(domain, theta) {
        return g.clone();
    }
    match domain {
        Domain::Ball { .. } => {
            let n = theta / theta.norm();
            let out = g.dot(&n);
            if out > 0.0 {
                g - n * out
            } else {
                g.clone()
            }
        }
        Domain::Box { lower, upper } => RVec::from_iterator(
            g.len(),
            g.iter().enumerate().map(|(i, gi)| {
                if (theta[i] >= upper[i] - 1e-9 && *gi > 0.0) || (theta[i] <= lower[i] + 1e-9 && *gi < 0.0) {
                    0.0
                } else {
                    *gi
                }
            }),
        ),
    }
}

fn project(domain: &Domain, theta: &RVec) -> RVec {
    let mut v: Vec<f64> = theta.iter().copied().collect();
    domain.project(&mut v);
    RVec::from_vec(v)
}

/// Projected damped Newton ascent of a concave affine log-likelihood.
fn affine_mle(
    groups: &[(f64, f64, RVec)],
    p: usize,
    domain: &Domain,
    start: &[f64],
    opts: &MleOptions,
) -> Estimate {
    let n_total: f64 = groups.iter().map(|g| g.0).sum();
    let mut theta = RVec::from_column_slice(start);
    let mut value = Likelihood::affine_value(groups, &theta);
    let mut iterations = 0;
    let mut grad = RVec::zeros(p);
    for it in 0..opts.max_iters {
        iterations = it + 1;
        let mut g = RVec::zeros(p);
        let mut hn = RMat::zeros(p, p);
        for (n, a, b) in groups {
            let pr = a + b.dot(&theta);
            g += b * (n / pr);
            hn += b * b.transpose() * (n / (pr * pr));
        }
        grad = g.clone();
        if projected_gradient(domain, &theta, &g).norm() <= opts.tol * n_total.max(1.0) {
            break;
        }
        let scale = hn.trace() / p as f64 + 1.0;
        let damped = &hn + RMat::identity(p, p) * (1e-10 * scale);
        let newton = damped.cholesky().map(|ch| ch.solve(&g));
        let lmax = linalg::eigvalsh_real(&hn).last().copied().unwrap_or(1.0).max(1e-12);
        let mut accepted = false;
        for dir in newton.into_iter().chain(std::iter::once(&g / lmax)) {
            let mut t = 1.0;
            for _ in 0..60 {
                let cand = project(domain, &(&theta + &dir * t));
                let v = Likelihood::affine_value(groups, &cand);
                let gain = g.dot(&(&cand - &theta));
                if v.is_finite() && v >= value + 1e-4 * gain - 1e-13 * value.abs() && v >= value {
                    let step = (&cand - &theta).norm();
                    theta = cand;
                    value = v;
                    accepted = step > 1e-15;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Estimate {
        boundary: on_boundary(domain, &theta),
        gradient_norm: projected_gradient(domain, &theta, &grad).norm(),
        theta: theta.iter().copied().collect(),
        log_likelihood: value,
        iterations,
    }
}

/// Orthonormal complement of `psi` as real tangent directions `v_k`, `i v_k`.
fn tangent_basis(psi: &DVector<C64>) -> Vec<DVector<C64>> {
    let d = psi.len();
    let mut basis: Vec<DVector<C64>> = vec![psi.clone()];
    for e in 0..d {
        let mut v = DVector::from_element(d, c(0.0, 0.0));
        v[e] = c(1.0, 0.0);
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / c(n, 0.0));
        }
        if basis.len() == d {
            break;
        }
    }
    let mut out = Vec::with_capacity(2 * (d - 1));
    for v in basis.into_iter().skip(1) {
        let iv = &v * c(0.0, 1.0);
        out.push(v);
        out.push(iv);
    }
    out
}

/// Newton ascent on the unit sphere for a pure-state likelihood.
fn pure_ascent(groups: &[(f64, DVector<C64>)], start: DVector<C64>, opts: &MleOptions) -> (DVector<C64>, f64, f64, usize) {
    let n_total: f64 = groups.iter().map(|g| g.0).sum();
    let mut psi = &start / c(start.norm(), 0.0);
    let mut value = Likelihood::pure_value(groups, &psi);
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iters {
        iterations = it + 1;
        let t = tangent_basis(&psi);
        let m = t.len();
        let mut g = RVec::zeros(m);
        let mut hess = RMat::identity(m, m) * (-2.0 * n_total);
        for (n, u) in groups {
            let a = u.dotc(&psi);
            let b: Vec<C64> = t.iter().map(|tj| u.dotc(tj)).collect();
            let f = a.norm_sqr();
            if f <= 0.0 {
                continue;
            }
            let gi: Vec<f64> = b.iter().map(|bj| 2.0 * (a.conj() * bj).re / f).collect();
            for i in 0..m {
                g[i] += n * gi[i];
                for j in 0..m {
                    hess[(i, j)] += n * (2.0 * (b[i].conj() * b[j]).re / f - gi[i] * gi[j]);
                }
            }
        }
        gnorm = g.norm();
        if gnorm <= opts.tol * n_total.max(1.0) {
            break;
        }
        // Newton on -hess with eigenvalues floored to stay an ascent direction.
        let (vals, vecs) = linalg::eigh_real(&(-&hess));
        let floor = 1e-8 * vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut dir = RVec::zeros(m);
        for (k, val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            dir += v * (v.dot(&g) / val.abs().max(floor));
        }
        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..60 {
            let mut cand = psi.clone();
            for (j, tj) in t.iter().enumerate() {
                cand += tj * c(step * dir[j], 0.0);
            }
            cand /= c(cand.norm(), 0.0);
            let v = Likelihood::pure_value(groups, &cand);
            if v.is_finite() && v >= value {
                let moved = (&cand - &psi).norm();
                psi = cand;
                value = v;
                accepted = moved > 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (psi, value, gnorm, iterations)
}

/// Chart coordinates of a unit vector: first amplitude made real and
/// non-negative, then `(Re psi_k, Im psi_k)` for `k >= 1`.
pub fn pure_chart(psi: &DVector<C64>) -> (Vec<f64>, f64) {
    let a0 = psi[0].norm();
    let phase = if a0 > 0.0 { psi[0].conj() / a0 } else { c(1.0, 0.0) };
    let v = psi * phase / c(psi.norm(), 0.0);
    let mut theta = Vec::with_capacity(2 * (psi.len() - 1));
    for k in 1..psi.len() {
        theta.push(v[k].re);
        theta.push(v[k].im);
    }
    // Keep ||theta|| <= 1 despite round-off.
    let r = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > 1.0 {
        theta.iter_mut().for_each(|x| *x /= r);
    }
    (theta, v[0].re)
}

fn pure_mle(groups: &[(f64, DVector<C64>)], d: usize, start: Option<&DVector<C64>>, opts: &MleOptions) -> Estimate {
    let mut starts = Vec::new();
    if let Some(s) = start {
        starts.push(s.clone());
    }
    // Leading eigenvector of sum_g n_g |u_g><u_g|.
    let mut m = CMat::zeros(d, d);
    for (n, u) in groups {
        m += u * u.adjoint() * c(*n, 0.0);
    }
    let (_, vecs) = linalg::eigh(&linalg::hermitize(&m));
    starts.push(vecs.column(d - 1).clone_owned());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.multistart.max(1) {
        starts.push(haar_unitary(d, &mut rng).column(0).clone_owned());
    }
    let mut best: Option<(DVector<C64>, f64, f64, usize)> = None;
    let mut total_iters = 0;
    for s in starts {
        let run = pure_ascent(groups, s, opts);
        total_iters += run.3;
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (psi, value, gnorm, _) = best.expect("at least one start");
    let (theta, a0) = pure_chart(&psi);
    Estimate {
        theta,
        boundary: a0 < 1e-9,
        log_likelihood: value,
        gradient_norm: gnorm,
        iterations: total_iters,
    }
}

/// Maximum likelihood estimate; `start` optionally adds a starting point.
pub fn mle(
    model: &ParametricModel,
    sample: &Sample,
    opts: &MleOptions,
    start: Option<&[f64]>,
) -> Result<Estimate> {
    if sample.is_empty() {
        return Err(Error::InvalidSpec("no data".into()));
    }
    let lik = Likelihood::new(model, sample)?;
    match &lik {
        Likelihood::Affine { groups, p } => {
            let mut s = start.map(|s| s.to_vec()).unwrap_or_else(|| model.reference_point());
            if !Likelihood::affine_value(groups, &RVec::from_column_slice(&s)).is_finite() {
                s = model.reference_point();
            }
            if !Likelihood::affine_value(groups, &RVec::from_column_slice(&s)).is_finite() {
                return Err(Error::Numerical(
                    "likelihood vanishes at the reference point".into(),
                ));
            }
            Ok(affine_mle(groups, *p, model.domain(), &s, opts))
        }
        Likelihood::Pure { groups, d } => {
            let psi = match start {
                Some(s) => Some(model.pure_vector(s)?),
                None => None,
            };
            let est = pure_mle(groups, *d, psi.as_ref(), opts);
            if !est.log_likelihood.is_finite() {
                return Err(Error::Numerical("likelihood vanishes at every start".into()));
            }
            Ok(est)
        }
    }
}

/// Maximum likelihood.
#[derive(Debug, Clone, Default)]
pub struct Mle {
    pub options: MleOptions,
}

impl Estimator for Mle {
    fn name(&self) -> &str {
        "mle"
    }

    fn estimate(&self, model: &ParametricModel, sample: &Sample, _rng: &mut ChaCha8Rng) -> Result<Estimate> {
        mle(model, sample, &self.options, None)
    }
}

/// Posterior mean of `theta` by importance sampling from a Gaussian centred
/// at the MLE with twice the inverse observed information as covariance.
#[derive(Debug, Clone)]
pub struct BayesMean {
    pub prior: Prior,
    pub samples: usize,
    pub mle: MleOptions,
}

impl BayesMean {
    pub fn new(prior: Prior, samples: usize) -> Self {
        BayesMean {
            prior,
            samples,
            mle: MleOptions::default(),
        }
    }
}

fn observed_information(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], domain: &Domain) -> RMat {
    let p = theta.len();
    let h = 1e-5;
    // Pull the centre inside so that the stencil stays in the domain.
    let mut centre = theta.to_vec();
    if let Some(r) = domain_radius(domain) {
        let n = centre.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > r - 4.0 * h {
            centre.iter_mut().for_each(|x| *x *= (r - 4.0 * h) / n);
        }
    }
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut t = centre.clone();
        t[di] += si * h;
        t[dj] += sj * h;
        f(&t)
    };
    let mut m = RMat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            m[(i, j)] = -v;
            m[(j, i)] = -v;
        }
    }
    m
}

impl Estimator for BayesMean {
    fn name(&self) -> &str {
        "bayes_mean"
    }

    fn estimate(&self, model: &ParametricModel, sample: &Sample, rng: &mut ChaCha8Rng) -> Result<Estimate> {
        let p = model.num_params();
        if self.prior.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.prior.dim(),
            });
        }
        let lik = Likelihood::new(model, sample)?;
        let centre = mle(model, sample, &self.mle, None)?;
        let f = |t: &[f64]| lik.value(model, t);
        let info = observed_information(&f, &centre.theta, model.domain());
        let info = if info.iter().all(|x| x.is_finite()) {
            info
        } else {
            RMat::identity(p, p) * lik.total()
        };
        // Proposal covariance 2 I^-1 with eigenvalues of I floored at 1.
        let (vals, vecs) = linalg::eigh_real(&linalg::symmetrize(&info));
        let sd: Vec<f64> = vals.iter().map(|v| (2.0 / v.max(1.0)).sqrt()).collect();
        let lmax = centre.log_likelihood;

        let n = self.samples.max(1);
        let mut num = RVec::zeros(p);
        let mut den = 0.0;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let mut t = RVec::from_column_slice(&centre.theta);
            let mut log_q = 0.0;
            for k in 0..p {
                t += vecs.column(k) * (sd[k] * z[k]);
                log_q += -0.5 * z[k] * z[k] - sd[k].ln();
            }
            draws.push((t, log_q));
        }
        for (t, log_q) in draws {
            let tv: Vec<f64> = t.iter().copied().collect();
            if !model.domain().contains(&tv) {
                continue;
            }
            let prior = self.prior.density(&tv);
            if prior <= 0.0 {
                continue;
            }
            let ll = lik.value(model, &tv);
            if !ll.is_finite() {
                continue;
            }
            let w = prior * (ll - lmax - log_q).exp();
            num += t * w;
            den += w;
        }
        if !(den > 0.0 && den.is_finite()) {
            return Err(Error::Numerical(
                "no importance sample inside the prior support".into(),
            ));
        }
        let theta: Vec<f64> = (num / den).iter().copied().collect();
        Ok(Estimate {
            log_likelihood: lik.value(model, &theta),
            boundary: false,
            gradient_norm: f64::NAN,
            iterations: centre.iterations,
            theta,
        })
    }
}

/// JSON form of an estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Mle {
        #[serde(default)]
        options: MleOptions,
    },
    BayesMean {
        prior: PriorSpec,
        #[serde(default = "default_is_samples")]
        samples: usize,
    },
}

fn default_is_samples() -> usize {
    2000
}

impl EstimatorSpec {
    pub fn build(&self, model: &ParametricModel) -> Result<Box<dyn Estimator>> {
        Ok(match self {
            EstimatorSpec::Mle { options } => Box::new(Mle { options: *options }),
            EstimatorSpec::BayesMean { prior, samples } => {
                Box::new(BayesMean::new(prior.build(model.num_params())?, *samples))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::pauli_basis;
    use crate::simulate::scheme::{sample_outcomes, BasisSpec, MeasurementScheme, Record};

    fn z_counts(zeros: usize, ones: usize) -> Sample {
        let mut records = vec![Record { basis: 0, outcome: 0 }; zeros];
        records.extend(vec![Record { basis: 0, outcome: 1 }; ones]);
        Sample {
            bases: vec![pauli_basis(2)],
            stage_one: zeros + ones,
            records,
            truth: vec![],
        }
    }

    #[test]
    fn bernoulli_mle_closed_form() {
        let s = linalg::pauli();
        let model = ParametricModel::affine(
            linalg::identity(2) * c(0.5, 0.0),
            vec![&s[2] * c(0.5, 0.0)],
            1.0,
        )
        .unwrap();
        for (zeros, ones) in [(70, 30), (12, 88), (50, 50)] {
            let est = mle(&model, &z_counts(zeros, ones), &MleOptions::default(), None).unwrap();
            let want = 2.0 * zeros as f64 / (zeros + ones) as f64 - 1.0;
            assert!((est.theta[0] - want).abs() < 1e-9, "{} vs {want}", est.theta[0]);
            assert!(!est.boundary);
            assert!(est.gradient_norm < 1e-6);
        }
        let est = mle(&model, &z_counts(40, 0), &MleOptions::default(), None).unwrap();
        assert!((est.theta[0] - 1.0).abs() < 1e-9, "{est:?}");
        assert!(est.boundary);
    }

    #[test]
    fn north_pole_is_a_boundary_estimate() {
        let model = ParametricModel::bloch_full();
        let scheme = MeasurementScheme::FixedBasis {
            basis: BasisSpec::Pauli { axis: 2 },
        };
        let sample = sample_outcomes(&model, &[0.0, 0.0, 1.0], &scheme, 200, 5).unwrap();
        let est = mle(&model, &sample, &MleOptions::default(), None).unwrap();
        assert!(est.boundary);
        assert!((est.theta[2] - 1.0).abs() < 1e-9, "{:?}", est.theta);
    }

    #[test]
    fn pure_mle_is_a_stationary_point() {
        let model = ParametricModel::pure_qubit();
        let sample = sample_outcomes(&model, &[0.4, -0.3], &MeasurementScheme::RandomBasisCovariant, 500, 3).unwrap();
        let est = mle(&model, &sample, &MleOptions::default(), None).unwrap();
        assert!(est.gradient_norm < 1e-6 * 500.0, "{}", est.gradient_norm);
        // No nearby chart point does better.
        let l0 = log_likelihood(&model, &sample, &est.theta).unwrap();
        assert!((l0 - est.log_likelihood).abs() < 1e-8 * l0.abs());
        for k in 0..2 {
            for s in [-1e-3, 1e-3] {
                let mut t = est.theta.clone();
                t[k] += s;
                assert!(log_likelihood(&model, &sample, &t).unwrap() <= l0 + 1e-9);
            }
        }
    }

    #[test]
    fn pure_chart_roundtrip() {
        let model = ParametricModel::pure_dim(3).unwrap();
        let theta = [0.1, -0.2, 0.3, 0.05];
        let psi = model.pure_vector(&theta).unwrap() * C64::from_polar(1.0, 0.7);
        let (back, a0) = pure_chart(&psi);
        assert!(a0 > 0.0);
        for (a, b) in back.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bayes_mean_stays_in_the_domain() {
        let model = ParametricModel::bloch_equatorial();
        let prior = Prior::bump(2, 0.8).unwrap();
        let est = BayesMean::new(prior, 500);
        let scheme = MeasurementScheme::pauli_cycle(&model);
        let sample = sample_outcomes(&model, &[0.5, 0.3], &scheme, 400, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = est.estimate(&model, &sample, &mut rng).unwrap();
        assert!(model.domain().contains(&e.theta));
        assert!((e.theta[0] - 0.5).abs() < 0.2 && (e.theta[1] - 0.3).abs() < 0.2);
    }
}
