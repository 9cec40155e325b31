//! Product rules on balls: Gauss-Legendre in the radius, Gauss-Legendre in
//! polar angles and uniform azimuth. A seeded Monte Carlo rule covers p >= 4.

use rand::Rng;
use rand_distr::StandardNormal;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(weights).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| a + half * (t + 1.0)).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Nodes along one ray from the origin, innermost first.
#[derive(Debug, Clone)]
pub struct Ray {
    pub direction: Vec<f64>,
    /// `(radius, weight)`; the weight includes `r^(p-1)` and the angular weight.
    pub nodes: Vec<(f64, f64)>,
}

/// A quadrature rule on a ball, grouped into rays so that solutions can be
/// warm-started outward along each ray.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub dim: usize,
    pub radius: f64,
    pub rays: Vec<Ray>,
}

impl BallRule {
    /// Product rule with `n_radial` radial nodes (split over the given
    /// radial breakpoints) and `n_angular` azimuthal nodes.
    pub fn product(dim: usize, breakpoints: &[f64], n_radial: usize, n_angular: usize) -> Self {
        let radius = *breakpoints.last().expect("at least one breakpoint");
        let mut radial = Vec::new();
        let mut lo = 0.0;
        let segments = breakpoints.len();
        for &hi in breakpoints {
            let n = (n_radial / segments).max(2);
            let (r, w) = gauss_legendre_on(n, lo, hi);
            for (ri, wi) in r.into_iter().zip(w) {
                radial.push((ri, wi * ri.powi(dim as i32 - 1)));
            }
            lo = hi;
        }
        let directions = sphere_rule(dim, n_angular);
        let rays = directions
            .into_iter()
            .map(|(direction, aw)| Ray {
                direction,
                nodes: radial.iter().map(|&(r, w)| (r, w * aw)).collect(),
            })
            .collect();
        BallRule { dim, radius, rays }
    }

    pub fn len(&self) -> usize {
        self.rays.iter().map(|r| r.nodes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest distance from a node to the outer boundary.
    pub fn boundary_gap(&self) -> f64 {
        self.rays
            .iter()
            .flat_map(|ray| ray.nodes.iter().map(|n| self.radius - n.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Every node as `(theta, weight)`.
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        self.rays
            .iter()
            .flat_map(|ray| {
                ray.nodes
                    .iter()
                    .map(move |&(r, w)| (ray.direction.iter().map(|u| u * r).collect(), w))
            })
            .collect()
    }
}

/// Directions and weights integrating over the unit sphere `S^(p-1)`.
fn sphere_rule(dim: usize, n_angular: usize) -> Vec<(Vec<f64>, f64)> {
    use std::f64::consts::PI;
    match dim {
        0 => vec![(vec![], 1.0)],
        1 => vec![(vec![-1.0], 1.0), (vec![1.0], 1.0)],
        2 => (0..n_angular)
            .map(|k| {
                let phi = 2.0 * PI * (k as f64 + 0.5) / n_angular as f64;
                (vec![phi.cos(), phi.sin()], 2.0 * PI / n_angular as f64)
            })
            .collect(),
        _ => {
            // Polar angle chi with measure sin^(p-2) chi, times S^(p-2). For
            // p = 3 the rule runs in x = cos(chi), exact for polynomials;
            // above that in chi itself, where sin^(p-2) is smooth.
            let n_polar = (n_angular / 2).max(2);
            let (xs, w) = if dim == 3 {
                gauss_legendre(n_polar)
            } else {
                let (chi, w) = gauss_legendre_on(n_polar, 0.0, PI);
                let w = chi.iter().zip(&w).map(|(c, w)| w * c.sin()).collect();
                (chi.iter().map(|c| c.cos()).collect(), w)
            };
            let lower = sphere_rule(dim - 1, n_angular);
            let mut out = Vec::with_capacity(n_polar * lower.len());
            for (x, wx) in xs.iter().zip(&w) {
                let sin = (1.0 - x * x).sqrt();
                let weight = wx * sin.powi(dim as i32 - 3);
                for (dir, wl) in &lower {
                    let mut v = Vec::with_capacity(dim);
                    v.push(*x);
                    v.extend(dir.iter().map(|d| d * sin));
                    out.push((v, weight * wl));
                }
            }
            out
        }
    }
}

/// Surface area of the unit sphere in `R^p`.
pub fn sphere_area(p: usize) -> f64 {
    use std::f64::consts::PI;
    // 2 pi^(p/2) / Gamma(p/2), Gamma by recursion from Gamma(1/2) or Gamma(1).
    let mut gamma = if p.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if p.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < p as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(p as f64 / 2.0) / gamma
}

/// Uniform direction on `S^(p-1)`.
pub fn random_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
