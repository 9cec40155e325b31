//! Rotation-invariant priors on balls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre_on, random_direction, sphere_area};
use crate::error::{Error, Result};
use crate::quantum::norm;

/// JSON form of a prior: a family tag plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// `(1 - (r/radius)^2)^2` on `r <= radius`.
    Bump { radius: f64 },
    /// Constant on `r <= radius`. Not zero on the boundary, so it fails the
    /// regularity requirements; kept for tapering and as a negative example.
    Uniform { radius: f64 },
    /// `base` times a smootherstep cutoff from `R - 2 delta` to `R - delta`.
    Tapered {
        base: Box<PriorSpec>,
        eps: f64,
        delta: f64,
    },
}

impl PriorSpec {
    /// Parses `bump:0.8`, `uniform:1` or a JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            return Ok(serde_json::from_str(t)?);
        }
        let (name, arg) = t.split_once(':').unwrap_or((t, "0.9"));
        let radius: f64 = arg
            .parse()
            .map_err(|_| Error::InvalidPrior(format!("bad radius in {text:?}")))?;
        match name {
            "bump" => Ok(PriorSpec::Bump { radius }),
            "uniform" => Ok(PriorSpec::Uniform { radius }),
            _ => Err(Error::InvalidPrior(format!("unknown prior family {name:?}"))),
        }
    }

    pub fn build(&self, dim: usize) -> Result<Prior> {
        match self {
            PriorSpec::Bump { radius } => Prior::bump(dim, *radius),
            PriorSpec::Uniform { radius } => Prior::uniform(dim, *radius),
            PriorSpec::Tapered { base, eps, delta } => prior_taper(&base.build(dim)?, *eps, *delta),
        }
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Bump { r0: f64 },
    Uniform { r0: f64 },
    Tapered { base: Box<Profile>, start: f64, width: f64 },
}

impl Profile {
    fn value(&self, r: f64) -> f64 {
        match self {
            Profile::Bump { r0 } => {
                if r >= *r0 {
                    0.0
                } else {
                    let u = 1.0 - (r / r0).powi(2);
                    u * u
                }
            }
            Profile::Uniform { r0 } => {
                if r > *r0 {
                    0.0
                } else {
                    1.0
                }
            }
            Profile::Tapered { base, start, width } => base.value(r) * cutoff((r - start) / width),
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        match self {
            Profile::Bump { r0 } => {
                if r >= *r0 {
                    0.0
                } else {
                    -4.0 * r / (r0 * r0) * (1.0 - (r / r0).powi(2))
                }
            }
            Profile::Uniform { .. } => 0.0,
            Profile::Tapered { base, start, width } => {
                let t = (r - start) / width;
                base.derivative(r) * cutoff(t) + base.value(r) * cutoff_derivative(t) / width
            }
        }
    }

    fn support(&self) -> f64 {
        match self {
            Profile::Bump { r0 } | Profile::Uniform { r0 } => *r0,
            Profile::Tapered { start, width, .. } => start + width,
        }
    }

    /// Radii where the profile is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Bump { r0 } | Profile::Uniform { r0 } => vec![*r0],
            Profile::Tapered { base, start, width } => {
                let mut b: Vec<f64> = base.breakpoints().into_iter().filter(|x| x < start).collect();
                b.push(*start);
                b.push(start + width);
                b
            }
        }
    }
}

/// `1 - smootherstep(t)` clamped to `[0, 1]`.
fn cutoff(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

fn cutoff_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        -30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// A normalized rotation-invariant density on a ball in `R^dim`.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    dim: usize,
    profile: Profile,
    norm: f64,
}

impl Prior {
    fn from_profile(spec: PriorSpec, dim: usize, profile: Profile) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPrior("dimension must be positive".into()));
        }
        let mut prior = Prior {
            spec,
            dim,
            profile,
            norm: 1.0,
        };
        let mass = prior.radial_integral(|_| 1.0);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidPrior(format!("total mass {mass}")));
        }
        prior.norm = 1.0 / mass;
        Ok(prior)
    }

    /// The default smooth prior `(1 - (r/r0)^2)^2` on `r <= r0`.
    pub fn bump(dim: usize, r0: f64) -> Result<Self> {
        check_radius(r0)?;
        Self::from_profile(PriorSpec::Bump { radius: r0 }, dim, Profile::Bump { r0 })
    }

    pub fn uniform(dim: usize, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 <= 1.0) {
            return Err(Error::InvalidPrior(format!("radius {r0} outside (0, 1]")));
        }
        Self::from_profile(PriorSpec::Uniform { radius: r0 }, dim, Profile::Uniform { r0 })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius of the support.
    pub fn support_radius(&self) -> f64 {
        self.profile.support()
    }

    /// Radii at which quadrature rules should be split.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints()
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        self.norm * self.profile.value(norm(theta))
    }

    /// Density as a function of the radius.
    pub fn radial_density(&self, r: f64) -> f64 {
        self.norm * self.profile.value(r.abs())
    }

    /// Analytic gradient of the density; zero on the uniform plateau.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let r = norm(theta);
        if r == 0.0 {
            return vec![0.0; theta.len()];
        }
        let dr = self.norm * self.profile.derivative(r);
        theta.iter().map(|t| dr * t / r).collect()
    }

    /// Gradient of the log-density (inside the support).
    pub fn log_density_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.density(theta);
        self.gradient(theta).into_iter().map(|g| g / p).collect()
    }

    /// `E ||theta||^k` by one-dimensional Gauss-Legendre quadrature.
    pub fn radial_moment(&self, k: i32) -> f64 {
        self.radial_integral(|r| r.powi(k)) * self.norm
    }

    fn radial_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut lo = 0.0;
        let mut total = 0.0;
        for hi in self.breakpoints() {
            let (r, w) = gauss_legendre_on(64, lo, hi);
            total += r
                .iter()
                .zip(&w)
                .map(|(r, w)| w * self.profile.value(*r) * r.powi(self.dim as i32 - 1) * f(*r))
                .sum::<f64>();
            lo = hi;
        }
        total * sphere_area(self.dim)
    }

    /// Checks that the density vanishes on the boundary of its support.
    pub fn check_boundary_zero(&self) -> Result<()> {
        let r = self.support_radius();
        let v = self.radial_density(r);
        if v >= 1e-9 {
            return Err(Error::InvalidPrior(format!(
                "density {v:.3e} on the support boundary r = {r}"
            )));
        }
        Ok(())
    }

    /// Draws from the prior: uniform direction, radius by rejection.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let support = self.support_radius();
        let g = |r: f64| self.profile.value(r) * r.powi(self.dim as i32 - 1);
        let bound = (0..=400)
            .map(|k| g(support * k as f64 / 400.0))
            .fold(0.0f64, f64::max)
            * 1.1;
        let radius = loop {
            let r = support * rng.random::<f64>();
            if rng.random::<f64>() * bound <= g(r) {
                break r;
            }
        };
        random_direction(self.dim, rng)
            .into_iter()
            .map(|u| u * radius)
            .collect()
    }
}

fn check_radius(r0: f64) -> Result<()> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidPrior(format!("radius {r0} outside (0, 1)")));
    }
    Ok(())
}

/// Tapers `base` to zero by `R - delta` (`R` its support radius) so that
/// the result is at most `(1 + eps)` times `base` everywhere.
///
/// The cutoff runs from `R - 2 delta` to `R - delta`; renormalizing inflates
/// the density by `1 / (1 - deficit)`, so the taper is infeasible when the
/// removed mass exceeds `eps / (1 + eps)`.
pub fn prior_taper(base: &Prior, eps: f64, delta: f64) -> Result<Prior> {
    let support = base.support_radius();
    if !(delta > 0.0) {
        return Err(Error::InvalidPrior(format!(
            "taper width delta = {delta} must be positive"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidPrior(format!("taper slack eps = {eps} must be positive")));
    }
    if 2.0 * delta >= support {
        return Err(Error::InvalidPrior(format!(
            "taper width 2 delta = {} exceeds the support radius {support}",
            2.0 * delta
        )));
    }
    let profile = Profile::Tapered {
        base: Box::new(base.profile.clone()),
        start: support - 2.0 * delta,
        width: delta,
    };
    let spec = PriorSpec::Tapered {
        base: Box::new(base.spec.clone()),
        eps,
        delta,
    };
    let tapered = Prior::from_profile(spec, base.dim, profile)?;
    // Mass kept relative to the base, both as unnormalized profile integrals.
    let kept = base.norm / tapered.norm;
    let deficit = 1.0 - kept;
    let allowance = eps / (1.0 + eps);
    if deficit > allowance {
        return Err(Error::InfeasibleTaper { deficit, allowance });
    }
    Ok(tapered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_normalization_matches_closed_form() {
        for dim in 1..=4 {
            let r0 = 0.9;
            let prior = Prior::bump(dim, r0).unwrap();
            let p = dim as f64;
            let mass = sphere_area(dim) * r0.powi(dim as i32) * (1.0 / p - 2.0 / (p + 2.0) + 1.0 / (p + 4.0));
            assert!((prior.norm * mass - 1.0).abs() < 1e-12, "dim {dim}");
            assert!((prior.radial_moment(0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_mean_radius_in_3d() {
        // E r = int r^3 (1-r^2/r0^2)^2 / int r^2 (1-r^2/r0^2)^2 = r0 (1/4-1/3+1/8)/(1/3-2/5+1/7).
        let prior = Prior::bump(3, 0.9).unwrap();
        let want = 0.9 * (0.25 - 1.0 / 3.0 + 0.125) / (1.0 / 3.0 - 0.4 + 1.0 / 7.0);
        assert!((prior.radial_moment(1) - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prior = Prior::bump(2, 0.8).unwrap();
        let theta = [0.3, -0.2];
        let g = prior.gradient(&theta);
        for k in 0..2 {
            let mut a = theta;
            let mut b = theta;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (prior.density(&a) - prior.density(&b)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0));
        }
    }

    #[test]
    fn boundary_zero() {
        assert!(Prior::bump(3, 0.9).unwrap().check_boundary_zero().is_ok());
        assert!(Prior::uniform(3, 1.0).unwrap().check_boundary_zero().is_err());
    }

    #[test]
    fn taper_is_feasible_for_small_width() {
        let base = Prior::uniform(3, 1.0).unwrap();
        let eps = 0.1;
        let t = prior_taper(&base, eps, 0.01).unwrap();
        assert!(t.check_boundary_zero().is_ok());
        assert!((t.radial_moment(0) - 1.0).abs() < 1e-10);
        for k in 0..=1000 {
            let r = k as f64 / 1000.0;
            assert!(t.radial_density(r) <= (1.0 + eps) * base.radial_density(r) + 1e-12);
        }
    }

    #[test]
    fn taper_rejects_infeasible_and_degenerate() {
        let base = Prior::uniform(3, 1.0).unwrap();
        // More than 14% of the uniform mass lies beyond r = 0.95.
        assert!(matches!(
            prior_taper(&base, 0.1, 0.05),
            Err(Error::InfeasibleTaper { .. })
        ));
        assert!(prior_taper(&base, 0.1, 0.0).is_err());
    }

    #[test]
    fn spec_roundtrip_and_parse() {
        let spec = PriorSpec::Tapered {
            base: Box::new(PriorSpec::Uniform { radius: 1.0 }),
            eps: 0.1,
            delta: 0.01,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<PriorSpec>(&text).unwrap(), spec);
        assert_eq!(PriorSpec::parse("bump:0.8").unwrap(), PriorSpec::Bump { radius: 0.8 });
        assert!(PriorSpec::parse("gauss:1").is_err());
        assert!(serde_json::from_str::<PriorSpec>(r#"{"family":"bump","radius":0.5,"x":1}"#).is_err());
    }

    #[test]
    fn samples_follow_the_radial_law() {
        let prior = Prior::bump(3, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20000;
        let rs: Vec<f64> = (0..n).map(|_| norm(&prior.sample(&mut rng))).collect();
        let mean = rs.iter().sum::<f64>() / n as f64;
        let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - prior.radial_moment(1)).abs() < 4.0 * (var / n as f64).sqrt());
    }
}
