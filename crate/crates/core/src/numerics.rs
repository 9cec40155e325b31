//! Tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Numerical tolerances. One record is threaded through models, solvers and
/// validators so a caller can tighten or loosen everything in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Absolute per-entry tolerance for `A = A^*`.
    pub hermitian_tol: f64,
    /// Eigenvalues above `-psd_tol` count as non-negative.
    pub psd_tol: f64,
    /// Trace-one and POVM completeness tolerance.
    pub trace_tol: f64,
    /// Smallest eigenvalue of a mixed state for the SLD solve.
    pub rank_tol: f64,
    /// Probabilities at or below this are treated as zero.
    pub prob_floor: f64,
    /// Derivative magnitude separating "skip" from "irregular" for null outcomes.
    pub irregular_deriv_tol: f64,
    /// Smallest admissible eigenvalue of weight matrices G, K, V.
    pub pd_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            hermitian_tol: 1e-12,
            psd_tol: 1e-9,
            trace_tol: 1e-9,
            rank_tol: 1e-8,
            prob_floor: 1e-12,
            irregular_deriv_tol: 1e-8,
            pd_tol: 1e-10,
        }
    }
}
