//! Haar-random orthonormal bases.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMat, C64};

/// Haar-distributed unitary: Gram-Schmidt applied to a complex Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let mut g = CMat::from_fn(d, d, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    for k in 0..d {
        for j in 0..k {
            let proj: C64 = g.column(j).dotc(&g.column(k));
            let qj = g.column(j).clone_owned();
            let mut col = g.column_mut(k);
            col -= qj * proj;
        }
        let norm = g.column(k).norm();
        g.column_mut(k).scale_mut(1.0 / norm);
    }
    g
}

/// Discrete Fourier basis, columns `exp(2 pi i jk/d)/sqrt(d)`.
pub fn fourier_basis(d: usize) -> CMat {
    let s = 1.0 / (d as f64).sqrt();
    CMat::from_fn(d, d, |j, k| {
        let a = 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64;
        c(s * a.cos(), s * a.sin())
    })
}
