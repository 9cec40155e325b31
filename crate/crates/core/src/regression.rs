//! Regression table of published closed-form values.
//!
//! Every row pairs a known constant with the value this crate computes for
//! it. Rows pass when `|computed - expected| <= tolerance`.

use serde::{Deserialize, Serialize};

use crate::bayes::{integrated_holevo, LossSpec, Prior, QuadratureOptions};
use crate::error::Result;
use crate::holevo::{dual_bound, solve_holevo, HolevoProblem, SolverOptions, Weight};
use crate::information::helstrom_matrix;
use crate::linalg;
use crate::quantum::ParametricModel;
use crate::simulate::{empirical_fisher, MeasurementScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub claim: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl RegressionRow {
    fn new(claim: impl Into<String>, expected: f64, computed: f64, tolerance: f64) -> Self {
        RegressionRow {
            claim: claim.into(),
            expected,
            computed,
            tolerance,
            pass: (computed - expected).abs() <= tolerance,
        }
    }
}

/// Options for [`regression_table`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionOptions {
    /// Seed for the sampled-basis rows.
    pub seed: u64,
    /// Haar bases averaged in the sampled-basis rows.
    pub n_bases: usize,
    /// Relative tolerance of the closed-form Holevo rows.
    pub holevo_rel_tol: f64,
    /// Relative tolerance of the dual roundtrip rows.
    pub dual_rel_tol: f64,
    pub solver: SolverOptions,
    pub quadrature: QuadratureOptions,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            seed: 0,
            n_bases: 2000,
            holevo_rel_tol: 1e-3,
            dual_rel_tol: 1e-5,
            solver: SolverOptions::default(),
            quadrature: QuadratureOptions::default(),
        }
    }
}

fn quarter_helstrom_value(model: &ParametricModel, theta: &[f64], opts: &RegressionOptions) -> Result<(f64, f64)> {
    let g = Weight::HelstromQuarter.at(model, theta)?;
    let sol = solve_holevo(&HolevoProblem::from_model(model, theta, g.clone())?, &opts.solver)?;
    // Dual roundtrip: C^K0 and the primal value at G' = I0 K0 I0.
    let dual = dual_bound(&sol, &g)?;
    let again = solve_holevo(
        &HolevoProblem::from_model(model, theta, dual.primal_weight())?,
        &opts.solver,
    )?;
    Ok((sol.value, again.value))
}

fn fmt_theta(theta: &[f64]) -> String {
    let parts: Vec<String> = theta.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(","))
}

pub fn regression_table(opts: &RegressionOptions) -> Result<Vec<RegressionRow>> {
    let mut rows = Vec::new();
    let rel = opts.holevo_rel_tol;

    let full = ParametricModel::bloch_full();
    for r in [0.0, 0.3, 0.5, 0.8] {
        let theta = [0.0, 0.0, r];
        let want = (3.0 + 2.0 * r) / 4.0;
        let (value, _) = quarter_helstrom_value(&full, &theta, opts)?;
        rows.push(RegressionRow::new(
            format!("full qubit C_(H/4) at r={r}: (3+2r)/4"),
            want,
            value,
            rel * want,
        ));
    }

    let eq = ParametricModel::bloch_equatorial();
    for theta in [[0.0, 0.0], [0.5, 0.0], [0.3, -0.6]] {
        let (value, roundtrip) = quarter_helstrom_value(&eq, &theta, opts)?;
        rows.push(RegressionRow::new(
            format!("equatorial qubit C_(H/4) at {}", fmt_theta(&theta)),
            0.5,
            value,
            rel * 0.5,
        ));
        rows.push(RegressionRow::new(
            format!("dual roundtrip equatorial at {}", fmt_theta(&theta)),
            value,
            roundtrip,
            opts.dual_rel_tol * value,
        ));
    }

    for (model, theta) in [
        (ParametricModel::pure_qubit(), vec![0.3, 0.4]),
        (ParametricModel::pure_dim(3)?, vec![0.2, -0.1, 0.3, 0.1]),
    ] {
        let d = model.dim();
        let want = (d - 1) as f64;
        let (value, _) = quarter_helstrom_value(&model, &theta, opts)?;
        rows.push(RegressionRow::new(
            format!("pure state d={d} C_(H/4) = d-1"),
            want,
            value,
            rel * want,
        ));
    }

    // Sampled Haar bases: tolerance is three standard errors.
    for (k, (model, theta)) in [
        (ParametricModel::pure_qubit(), vec![0.2, 0.5]),
        (ParametricModel::pure_dim(3)?, vec![0.1, -0.3, 0.25, 0.2]),
    ]
    .into_iter()
    .enumerate()
    {
        let d = model.dim();
        let ef = empirical_fisher(
            &model,
            &theta,
            &MeasurementScheme::RandomBasisCovariant,
            opts.n_bases,
            opts.seed.wrapping_add(k as u64),
        )?;
        let h = helstrom_matrix(&model, &theta)?.matrix;
        let h_inv = linalg::spd_inverse(&h, "H", 0.0)?;
        let (mean, se) = ef.scalar(|m| (&h_inv * m).trace());
        rows.push(RegressionRow::new(
            format!("Gill-Massar equality, pure d={d} random exhaustive bases"),
            (d - 1) as f64,
            mean,
            (3.0 * se).max(1e-9),
        ));
        if d == 2 {
            let dev = (&ef.info.matrix - &h * 0.5).norm();
            rows.push(RegressionRow::new(
                "covariant information ||I - H/2||, pure qubit",
                0.0,
                dev,
                3.0 * ef.sigma(),
            ));
        }
    }

    let loss = LossSpec::fidelity();
    let eq_prior = Prior::bump(2, 0.8)?;
    let rep = integrated_holevo(&eq, &loss, &eq_prior, &opts.quadrature)?;
    rows.push(RegressionRow::new(
        "equatorial E_pi C_(H/4), bump prior r0=0.8",
        0.5,
        rep.value,
        (2.0 * rep.error_estimate).max(1e-9),
    ));

    // Bump radius whose mean radius is 1/2, so (3 + 2 E r)/4 = 1.
    let ratio = (0.25 - 1.0 / 3.0 + 0.125) / (1.0 / 3.0 - 0.4 + 1.0 / 7.0);
    let full_prior = Prior::bump(3, 0.5 / ratio)?;
    let rep = integrated_holevo(&full, &loss, &full_prior, &opts.quadrature)?;
    rows.push(RegressionRow::new(
        "full qubit E_pi C_(H/4) with E||theta|| = 1/2",
        1.0,
        rep.value,
        (2.0 * rep.error_estimate).max(1e-9),
    ));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_tolerance_is_inclusive() {
        assert!(RegressionRow::new("x", 1.0, 1.5, 0.5).pass);
        assert!(!RegressionRow::new("x", 1.0, 1.6, 0.5).pass);
    }
}
