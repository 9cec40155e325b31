use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use qbound::bayes::{
    integrated_holevo, j_functional, van_trees_rhs, CFunction, LossSpec, PriorSpec, QuadratureOptions,
};
use qbound::holevo::{
    check_dual, dual_bound, solve_holevo, validate_weight, Diagnostics, HolevoProblem, SolverOptions,
};
use qbound::information::{helstrom_matrix, povm_fisher, InfoKind, InfoMatrix};
use qbound::linalg::{CMat, RMat};
use qbound::quantum::{ModelSpec, ParametricModel, Povm};
use qbound::regression::{regression_table, RegressionOptions};
use qbound::serial;
use qbound::simulate::{bayes_risk_mc, empirical_fisher, EstimatorSpec, MeasurementScheme, MonteCarlo};

use crate::output::{emit, num, Rendered, Table};
use crate::{parse, usage, CliError, Command, Format, ModelArgs, QuadArgs};

pub fn run(command: Command, format: Option<Format>, path: Option<&Path>, out: &mut String) -> Result<(), CliError> {
    let tabular = matches!(command, Command::Simulate { .. } | Command::VerifyPaper { .. });
    let default = if matches!(command, Command::VerifyPaper { .. }) { Format::Table } else { Format::Json };
    let format = format.unwrap_or(default);
    if !tabular && format != Format::Json {
        return Err(CliError::Usage(format!(
            "--format {format:?} is only available for simulate and verify-paper"
        )));
    }
    match command {
        Command::Helstrom { model, theta } => emit(helstrom(&model, &theta)?, format, path, out),
        Command::Holevo {
            model,
            theta,
            weight,
            basis,
            multistart,
        } => emit(holevo(&model, theta.as_deref(), &weight, basis.as_deref(), multistart)?, format, path, out),
        Command::CheckDual { solution, basis, info } => {
            let (rendered, check) = check_dual_cmd(&solution, basis.as_deref(), info.as_deref())?;
            emit(rendered, format, path, out)?;
            if !check.satisfied {
                return Err(CliError::Verification(format!("tr(K I) exceeds C^K by {:.3e}", -check.slack)));
            }
            Ok(())
        }
        Command::Bayes {
            model,
            prior,
            loss,
            j,
            scheme,
            n_copies,
            n_bases,
            quad,
            seed,
            workers,
        } => {
            let req = BayesRequest {
                prior: &prior,
                loss: &loss,
                j,
                scheme: scheme.as_deref(),
                n_copies: n_copies.as_deref(),
                n_bases,
                quad: quadrature(&quad, seed, workers),
            };
            emit(bayes(&model, &req)?, format, path, out)
        }
        Command::Simulate {
            config,
            model,
            dim,
            prior,
            scheme,
            estimator,
            loss,
            n_copies,
            trials,
            seed,
            workers,
            no_bound,
            quad,
        } => {
            let run = match config {
                Some(p) => SimulateRun::from_config(&p, seed, workers, n_copies.as_deref(), trials)?,
                None => SimulateRun::from_flags(SimulateFlags {
                    model: model.as_deref().expect("clap requires --model without --config"),
                    dim,
                    prior: prior.as_deref(),
                    scheme: scheme.as_deref(),
                    estimator: estimator.as_deref(),
                    loss: loss.as_deref(),
                    n_copies: n_copies.as_deref(),
                    trials,
                    seed,
                    workers,
                })?,
            };
            emit(simulate(&run, no_bound, &quadrature(&quad, seed, workers))?, format, path, out)
        }
        Command::VerifyPaper {
            seed,
            n_bases,
            holevo_tol,
            dual_tol,
            workers,
        } => {
            let mut opts = RegressionOptions {
                seed,
                n_bases,
                holevo_rel_tol: holevo_tol,
                dual_rel_tol: dual_tol,
                ..RegressionOptions::default()
            };
            opts.quadrature.workers = workers;
            let (rendered, failed) = verify_paper(&opts)?;
            emit(rendered, format, path, out)?;
            if failed > 0 {
                return Err(CliError::Verification(format!("{failed} row(s) failed")));
            }
            Ok(())
        }
    }
}

fn quadrature(q: &QuadArgs, seed: u64, workers: Option<usize>) -> QuadratureOptions {
    QuadratureOptions {
        radial: q.radial,
        angular: q.angular,
        levels: q.levels,
        samples: q.samples,
        seed,
        workers,
        ..QuadratureOptions::default()
    }
}

fn rows(m: &RMat) -> Vec<Vec<f64>> {
    serial::rmat_to_rows(m)
}

/// Rejects parameter values the model cannot evaluate.
fn checked_theta(model: &ParametricModel, theta: Vec<f64>) -> Result<Vec<f64>, CliError> {
    model.point(&theta).map_err(usage)?;
    model.state(&theta).map_err(usage)?;
    Ok(theta)
}

fn helstrom(args: &ModelArgs, theta: &str) -> Result<Rendered, CliError> {
    let (_, model) = parse::model(&args.model, args.dim)?;
    let theta = checked_theta(&model, parse::theta(theta)?)?;
    let h = helstrom_matrix(&model, &theta)?;
    Ok(Rendered::Json(json!({
        "theta": theta,
        "H": rows(&h.matrix),
        "eigenvalues": h.eigenvalues(),
    })))
}

/// Output of `qbound holevo`, and the input of `qbound check-dual`.
#[derive(Debug, Serialize, Deserialize)]
struct HolevoOutput {
    model: ModelSpec,
    theta: Vec<f64>,
    #[serde(with = "serial::rmat")]
    weight: RMat,
    value: f64,
    #[serde(rename = "V0", with = "serial::rmat")]
    v0: RMat,
    #[serde(rename = "K0", with = "serial::rmat")]
    k0: RMat,
    #[serde(rename = "I0", with = "serial::rmat")]
    i0: RMat,
    /// `C^K0`.
    dual_value: f64,
    diagnostics: Diagnostics,
    #[serde(with = "serial::cmat_vec")]
    x_star: Vec<CMat>,
    #[serde(with = "serial::cmat")]
    z_star: CMat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dual_check: Option<BasisCheck>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisCheck {
    basis: String,
    trace: f64,
    c_k: f64,
    slack: f64,
    satisfied: bool,
}

fn basis_fisher(model: &ParametricModel, theta: &[f64], basis: &str) -> Result<InfoMatrix, CliError> {
    let spec = parse::basis(basis)?;
    let u = spec.matrix(model.dim()).map_err(usage)?;
    Ok(povm_fisher(model, theta, &Povm::from_basis(&u).map_err(usage)?)?)
}

fn holevo(
    args: &ModelArgs,
    theta: Option<&str>,
    weight: &str,
    basis: Option<&str>,
    multistart: usize,
) -> Result<Rendered, CliError> {
    let (spec, model) = parse::model(&args.model, args.dim)?;
    let theta = checked_theta(&model, parse::theta_or_reference(theta, &model)?)?;
    let w = parse::weight(weight)?;
    let g = w.at(&model, &theta)?;
    let p = model.num_params();
    if g.nrows() != p || g.ncols() != p {
        return Err(CliError::Usage(format!("weight is {}x{}, model has {p} parameters", g.nrows(), g.ncols())));
    }
    validate_weight(&g, "weight", model.numerics()).map_err(usage)?;
    let opts = SolverOptions {
        multistart,
        ..SolverOptions::default()
    };
    let sol = solve_holevo(&HolevoProblem::from_model(&model, &theta, g.clone())?, &opts)?;
    let dual = dual_bound(&sol, &g)?;
    let dual_check = match basis {
        Some(b) => {
            let info = basis_fisher(&model, &theta, b)?;
            let c = check_dual(&dual.k0, &info, dual.value)?;
            Some(BasisCheck {
                basis: b.to_string(),
                trace: c.trace,
                c_k: dual.value,
                slack: c.slack,
                satisfied: c.satisfied,
            })
        }
        None => None,
    };
    let out = HolevoOutput {
        model: spec,
        theta,
        weight: g,
        value: sol.value,
        v0: sol.v0,
        k0: dual.k0,
        i0: dual.i0,
        dual_value: dual.value,
        diagnostics: sol.diagnostics,
        x_star: sol.x_star.xs,
        z_star: sol.z_star,
        dual_check,
    };
    Ok(Rendered::Json(serde_json::to_value(out).expect("solution serializes")))
}

fn check_dual_cmd(
    solution: &Path,
    basis: Option<&str>,
    info: Option<&str>,
) -> Result<(Rendered, BasisCheck), CliError> {
    let text = fs::read_to_string(solution)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", solution.display())))?;
    let sol: HolevoOutput = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not a holevo solution: {e}", solution.display())))?;
    let model = sol.model.build().map_err(usage)?;
    let (label, info) = match (basis, info) {
        (Some(b), _) => (b.to_string(), basis_fisher(&model, &sol.theta, b)?),
        (None, Some(i)) => {
            let rows: Vec<Vec<f64>> = parse::json_arg(i)?
                .ok_or_else(|| CliError::Usage("--info must be JSON rows or file:<path>".into()))?;
            let m = serial::rmat_from_rows(&rows).map_err(usage)?;
            (i.to_string(), InfoMatrix::new(InfoKind::PovmFisher, m).map_err(usage)?)
        }
        (None, None) => return Err(CliError::Usage("need --basis or --info".into())),
    };
    let c = check_dual(&sol.k0, &info, sol.dual_value).map_err(usage)?;
    let check = BasisCheck {
        basis: label,
        trace: c.trace,
        c_k: sol.dual_value,
        slack: c.slack,
        satisfied: c.satisfied,
    };
    let rendered = Rendered::Json(serde_json::to_value(&check).expect("check serializes"));
    Ok((rendered, check))
}

struct BayesRequest<'a> {
    prior: &'a str,
    loss: &'a str,
    j: bool,
    scheme: Option<&'a str>,
    n_copies: Option<&'a str>,
    n_bases: usize,
    quad: QuadratureOptions,
}

fn bayes(args: &ModelArgs, req: &BayesRequest) -> Result<Rendered, CliError> {
    let (spec, model) = parse::model(&args.model, args.dim)?;
    let prior_spec = parse::prior(req.prior)?;
    let prior = prior_spec.build(model.num_params()).map_err(usage)?;
    let loss = parse::loss(req.loss)?;
    let integrated = integrated_holevo(&model, &loss, &prior, &req.quad)?;
    let mut out = json!({
        "model": spec,
        "prior": prior_spec,
        "loss": loss,
        "value": integrated.value,
        "error_estimate": integrated.error_estimate,
        "integrated": integrated,
    });
    if req.j {
        out["j"] = serde_json::to_value(j_functional(&model, &prior, &loss, &req.quad)?).expect("serializes");
    }
    if let Some(s) = req.scheme {
        let scheme = parse::scheme(s, &model)?;
        let ns: Vec<f64> = parse::list(req.n_copies.expect("clap enforces --n-copies"), "--n-copies")?;
        let seed = req.quad.seed;
        let info = |t: &[f64]| Ok(empirical_fisher(&model, t, &scheme, req.n_bases, seed)?.info.matrix);
        let vt = van_trees_rhs(&model, &prior, &loss, &CFunction::Canonical, &ns, &info, &req.quad)?;
        out["scheme"] = serde_json::to_value(&scheme).expect("serializes");
        out["van_trees"] = serde_json::to_value(vt).expect("serializes");
    }
    Ok(Rendered::Json(out))
}

/// Run config for `qbound simulate --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    model: ModelSpec,
    prior: PriorSpec,
    scheme: MeasurementScheme,
    estimator: EstimatorSpec,
    #[serde(default)]
    loss: LossSpec,
    n_copies: Vec<usize>,
    trials: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    workers: Option<usize>,
}

struct SimulateRun {
    config: SimulateConfig,
    model: ParametricModel,
    seed: u64,
}

struct SimulateFlags<'a> {
    model: &'a str,
    dim: Option<usize>,
    prior: Option<&'a str>,
    scheme: Option<&'a str>,
    estimator: Option<&'a str>,
    loss: Option<&'a str>,
    n_copies: Option<&'a str>,
    trials: Option<usize>,
    seed: u64,
    workers: Option<usize>,
}

impl SimulateRun {
    /// Flags given alongside the config override its copies, trials and workers.
    fn from_config(
        path: &Path,
        seed: u64,
        workers: Option<usize>,
        n_copies: Option<&str>,
        trials: Option<usize>,
    ) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut config: SimulateConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid run config {}: {e}", path.display())))?;
        if let Some(n) = n_copies {
            config.n_copies = parse::list(n, "--n-copies")?;
        }
        if let Some(t) = trials {
            config.trials = t;
        }
        if workers.is_some() {
            config.workers = workers;
        }
        let model = config.model.build().map_err(usage)?;
        let seed = config.seed.unwrap_or(seed);
        Ok(SimulateRun { config, model, seed })
    }

    fn from_flags(f: SimulateFlags) -> Result<Self, CliError> {
        let (spec, model) = parse::model(f.model, f.dim)?;
        let prior = parse::prior(f.prior.unwrap_or("bump:0.9"))?;
        let scheme = parse::scheme(f.scheme.unwrap_or("random-basis"), &model)?;
        let estimator = parse::estimator(f.estimator.unwrap_or("mle"), &prior)?;
        let loss = parse::loss(f.loss.unwrap_or("fidelity"))?;
        let config = SimulateConfig {
            model: spec,
            prior,
            scheme,
            estimator,
            loss,
            n_copies: parse::list(f.n_copies.unwrap_or("1000"), "--n-copies")?,
            trials: f.trials.unwrap_or(1000),
            seed: Some(f.seed),
            workers: f.workers,
        };
        Ok(SimulateRun {
            config,
            model,
            seed: f.seed,
        })
    }
}

#[derive(Debug, Serialize)]
struct SimRow {
    family: String,
    scheme: String,
    estimator: String,
    #[serde(rename = "N")]
    n: usize,
    trials: usize,
    value: f64,
    std_error: f64,
    bound: Option<f64>,
    slack: Option<f64>,
    failures: usize,
    boundary_estimates: usize,
}

fn estimator_name(e: &EstimatorSpec) -> &'static str {
    match e {
        EstimatorSpec::Mle { .. } => "mle",
        EstimatorSpec::BayesMean { .. } => "bayes_mean",
    }
}

fn simulate(run: &SimulateRun, no_bound: bool, quad: &QuadratureOptions) -> Result<Rendered, CliError> {
    let cfg = &run.config;
    let model = &run.model;
    let prior = cfg.prior.build(model.num_params()).map_err(usage)?;
    let estimator = cfg.estimator.build(model).map_err(usage)?;
    if cfg.trials < 2 || cfg.n_copies.contains(&0) {
        return Err(CliError::Usage("need at least 2 trials and 1 copy".into()));
    }
    let bound = if no_bound {
        None
    } else {
        let q = QuadratureOptions {
            workers: cfg.workers,
            ..quad.clone()
        };
        Some(integrated_holevo(model, &cfg.loss, &prior, &q)?)
    };
    let mut sim_rows = Vec::new();
    for &n in &cfg.n_copies {
        let mc = MonteCarlo {
            n_copies: n,
            trials: cfg.trials,
            seed: run.seed,
            workers: cfg.workers,
        };
        let r = bayes_risk_mc(model, &prior, &cfg.scheme, estimator.as_ref(), &cfg.loss, &mc)?;
        let b = bound.as_ref().map(|b| b.value);
        sim_rows.push(SimRow {
            family: model.family().to_string(),
            scheme: cfg.scheme.name().to_string(),
            estimator: estimator_name(&cfg.estimator).to_string(),
            n,
            trials: r.trials,
            value: r.value,
            std_error: r.std_error,
            bound: b,
            slack: b.map(|b| r.value - b),
            failures: r.failures,
            boundary_estimates: r.boundary_estimates,
        });
    }
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let table = Table {
        headers: vec!["family", "scheme", "estimator", "N", "trials", "value", "std_error", "bound", "slack"],
        rows: sim_rows
            .iter()
            .map(|r| {
                vec![
                    r.family.clone(),
                    r.scheme.clone(),
                    r.estimator.clone(),
                    r.n.to_string(),
                    r.trials.to_string(),
                    r.value.to_string(),
                    r.std_error.to_string(),
                    opt(r.bound),
                    opt(r.slack),
                ]
            })
            .collect(),
    };
    let json = json!({
        "config": cfg,
        "seed": run.seed,
        "bound": bound,
        "rows": sim_rows,
    });
    Ok(Rendered::Tabular { json, table })
}

fn verify_paper(opts: &RegressionOptions) -> Result<(Rendered, usize), CliError> {
    let table_rows = regression_table(opts)?;
    let failed = table_rows.iter().filter(|r| !r.pass).count();
    let table = Table {
        headers: vec!["claim", "expected", "computed", "tolerance", "result"],
        rows: table_rows
            .iter()
            .map(|r| {
                vec![
                    r.claim.clone(),
                    num(r.expected),
                    num(r.computed),
                    format!("{:.2e}", r.tolerance),
                    if r.pass { "PASS" } else { "FAIL" }.to_string(),
                ]
            })
            .collect(),
    };
    let json = json!({ "rows": table_rows, "all_pass": failed == 0 });
    Ok((Rendered::Tabular { json, table }, failed))
}
