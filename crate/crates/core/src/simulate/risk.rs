//! Monte Carlo Bayes risk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::Estimator;
use super::scheme::{sample_with_rng, MeasurementScheme};
use crate::bayes::{LossSpec, Prior};
use crate::error::{Error, Result};
use crate::quantum::ParametricModel;

/// Size and seeding of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub n_copies: usize,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// `N` times the mean loss, with its standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub n_copies: usize,
    pub trials: usize,
    pub value: f64,
    pub std_error: f64,
    pub failures: usize,
    pub boundary_estimates: usize,
    /// Per-trial loss (not multiplied by `N`).
    pub loss: LossSummary,
}

/// Largest tolerated estimator failure rate.
const MAX_FAILURE_RATE: f64 = 0.01;

/// Trial `k` uses ChaCha8 seeded with `seed` on stream `k`, so results do
/// not depend on how trials are spread over workers.
pub fn bayes_risk_mc(
    model: &ParametricModel,
    prior: &Prior,
    scheme: &MeasurementScheme,
    estimator: &dyn Estimator,
    loss: &LossSpec,
    mc: &MonteCarlo,
) -> Result<RiskEstimate> {
    if mc.trials < 2 {
        return Err(Error::InvalidSpec("at least two trials are needed".into()));
    }
    if prior.dim() != model.num_params() {
        return Err(Error::DimensionMismatch {
            expected: model.num_params(),
            found: prior.dim(),
        });
    }
    let trial = |k: usize| -> Result<Option<(f64, bool)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(k as u64);
        let theta = prior.sample(&mut rng);
        let sample = sample_with_rng(model, &theta, scheme, mc.n_copies, &mut rng)?;
        match estimator.estimate(model, &sample, &mut rng) {
            Ok(est) => Ok(Some((loss.value(model, &est.theta, &theta)?, est.boundary))),
            Err(_) => Ok(None),
        }
    };
    let run = || (0..mc.trials).into_par_iter().map(trial).collect::<Vec<_>>();
    let outcomes = match mc.workers {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
    };

    let mut losses = Vec::with_capacity(mc.trials);
    let mut failures = 0;
    let mut boundary = 0;
    for o in outcomes {
        match o? {
            Some((l, b)) => {
                losses.push(l);
                boundary += b as usize;
            }
            None => failures += 1,
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * mc.trials as f64 {
        return Err(Error::EstimatorFailures {
            failures,
            trials: mc.trials,
        });
    }
    let m = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / m;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let std = var.sqrt();
    let mut sorted = losses.clone();
    sorted.sort_by(f64::total_cmp);
    let n = mc.n_copies as f64;
    Ok(RiskEstimate {
        n_copies: mc.n_copies,
        trials: mc.trials,
        value: n * mean,
        std_error: n * std / m.sqrt(),
        failures,
        boundary_estimates: boundary,
        loss: LossSummary {
            mean,
            std,
            min: sorted[0],
            median: sorted[sorted.len() / 2],
            max: sorted[sorted.len() - 1],
        },
    })
}
