//! Flag values: model, weight, prior, scheme and estimator specs.
//!
//! Every spec accepts a short form, inline JSON, or `file:<path>` holding JSON.

use std::fs;

use serde::de::DeserializeOwned;

use qbound::bayes::{LossSpec, PriorSpec};
use qbound::holevo::Weight;
use qbound::quantum::{Family, ModelSpec, ParametricModel};
use qbound::serial::{self, RealRows};
use qbound::simulate::{two_step_scheme, BasisSpec, EstimatorSpec, MeasurementScheme, MleOptions};

use crate::{usage, CliError};

/// Reads JSON inline (`{...}`, `[...]`) or from `file:<path>`; `None` for short forms.
pub fn json_arg<T: DeserializeOwned>(text: &str) -> Result<Option<T>, CliError> {
    let t = text.trim();
    let body = if let Some(path) = t.strip_prefix("file:") {
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?
    } else if t.starts_with('{') || t.starts_with('[') {
        t.to_string()
    } else {
        return Ok(None);
    };
    serde_json::from_str(&body)
        .map(Some)
        .map_err(|e| CliError::Usage(format!("invalid JSON in {text:?}: {e}")))
}

pub fn model(name: &str, dim: Option<usize>) -> Result<(ModelSpec, ParametricModel), CliError> {
    let spec = match json_arg::<ModelSpec>(name)? {
        Some(spec) => spec,
        None => {
            let family = Family::parse(name.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown model {name:?}")))?;
            ModelSpec::builtin(family, dim)
        }
    };
    let model = spec.build().map_err(usage)?;
    Ok((spec, model))
}

pub fn theta(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number {s:?} in --theta")))
        })
        .collect()
}

/// `--theta` or the model's reference point.
pub fn theta_or_reference(text: Option<&str>, model: &ParametricModel) -> Result<Vec<f64>, CliError> {
    match text {
        Some(t) => theta(t),
        None => Ok(model.reference_point()),
    }
}

pub fn weight(text: &str) -> Result<Weight, CliError> {
    match text.trim() {
        "helstrom_quarter" => Ok(Weight::HelstromQuarter),
        "identity" => Ok(Weight::Identity),
        other => match json_arg::<RealRows>(other)? {
            Some(rows) => Ok(Weight::Matrix(serial::rmat_from_rows(&rows).map_err(usage)?)),
            None => Err(CliError::Usage(format!(
                "unknown weight {other:?} (helstrom_quarter, identity, file:<path>)"
            ))),
        },
    }
}

pub fn prior(text: &str) -> Result<PriorSpec, CliError> {
    match json_arg::<PriorSpec>(text)? {
        Some(p) => Ok(p),
        None => PriorSpec::parse(text).map_err(usage),
    }
}

pub fn loss(text: &str) -> Result<LossSpec, CliError> {
    match json_arg::<LossSpec>(text)? {
        Some(l) => Ok(l),
        None if text.trim() == "fidelity" => Ok(LossSpec::fidelity()),
        None => Err(CliError::Usage(format!("unknown loss {text:?}"))),
    }
}

pub fn basis(text: &str) -> Result<BasisSpec, CliError> {
    match json_arg::<BasisSpec>(text)? {
        Some(b) => Ok(b),
        None => BasisSpec::parse(text).map_err(usage),
    }
}

/// `random-basis`, `pauli`, `fixed:<basis>`, `alternating:<b1>,<b2>`,
/// `two-step[:fraction]` or JSON.
pub fn scheme(text: &str, model: &ParametricModel) -> Result<MeasurementScheme, CliError> {
    if let Some(s) = json_arg::<MeasurementScheme>(text)? {
        return Ok(s);
    }
    let t = text.trim();
    let (name, arg) = match t.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (t, None),
    };
    Ok(match (name.replace('_', "-").as_str(), arg) {
        ("random-basis" | "random" | "random-basis-covariant", None) => {
            MeasurementScheme::RandomBasisCovariant
        }
        ("pauli", None) => MeasurementScheme::pauli_cycle(model),
        ("fixed", Some(b)) => MeasurementScheme::FixedBasis { basis: basis(b)? },
        ("alternating", Some(list)) => MeasurementScheme::AlternatingBases {
            bases: list.split(',').map(basis).collect::<Result<_, _>>()?,
        },
        ("two-step" | "two-step-adaptive", f) => {
            let f = match f {
                Some(v) => v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad fraction in {text:?}")))?,
                None => 0.1,
            };
            two_step_scheme(f).map_err(usage)?
        }
        _ => return Err(CliError::Usage(format!("unknown scheme {text:?}"))),
    })
}

/// `mle`, `bayes-mean[:samples]` (posterior under `prior`) or JSON.
pub fn estimator(text: &str, prior: &PriorSpec) -> Result<EstimatorSpec, CliError> {
    if let Some(e) = json_arg::<EstimatorSpec>(text)? {
        return Ok(e);
    }
    let t = text.trim().replace('_', "-");
    let (name, arg) = match t.split_once(':') {
        Some((n, a)) => (n.to_string(), Some(a.to_string())),
        None => (t.clone(), None),
    };
    match (name.as_str(), arg) {
        ("mle", None) => Ok(EstimatorSpec::Mle {
            options: MleOptions::default(),
        }),
        ("bayes-mean", n) => {
            let samples = match n {
                Some(v) => v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad sample count in {text:?}")))?,
                None => 2000,
            };
            Ok(EstimatorSpec::BayesMean {
                prior: prior.clone(),
                samples,
            })
        }
        _ => Err(CliError::Usage(format!("unknown estimator {text:?}"))),
    }
}

pub fn list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad value {s:?} in {what}")))
        })
        .collect()
}
