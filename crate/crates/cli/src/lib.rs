//! Command-line front end for `qbound`.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage, 3 numerical failure,
//! 4 solver non-convergence.

mod commands;
mod output;
mod parse;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qbound", version, about = "Quantum information bounds and Monte Carlo risk")]
pub struct Cli {
    /// Output format; tabular commands (simulate, verify-paper) also accept csv and table.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model family (bloch_full, bloch_equatorial, pure_qubit, pure_dim_d,
    /// affine_custom) or a JSON model spec, inline or as file:<path>.
    #[arg(long)]
    model: String,
    /// Hilbert-space dimension for pure_dim_d.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct QuadArgs {
    /// Radial Gauss-Legendre nodes per prior segment on the coarsest level.
    #[arg(long, default_value_t = 8)]
    radial: usize,
    /// Angular nodes on the coarsest level.
    #[arg(long, default_value_t = 16)]
    angular: usize,
    /// Refinement levels.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Monte Carlo nodes when the parameter dimension exceeds 3.
    #[arg(long, default_value_t = 4000)]
    samples: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Helstrom matrix H at theta.
    Helstrom {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated parameter values.
        #[arg(long)]
        theta: String,
    },
    /// Holevo bound, V0 and the dual weight K0 at theta.
    Holevo {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated parameter values (default: the domain's reference point).
        #[arg(long)]
        theta: Option<String>,
        /// helstrom_quarter, identity, or a JSON matrix (inline or file:<path>).
        #[arg(long, default_value = "helstrom_quarter")]
        weight: String,
        /// Also check the dual bound against this measurement basis.
        #[arg(long)]
        basis: Option<String>,
        /// Solver random restarts.
        #[arg(long, default_value_t = 0)]
        multistart: usize,
    },
    /// Checks tr(K0 I) <= C^K0 for a saved holevo solution.
    CheckDual {
        /// JSON written by `qbound holevo`.
        #[arg(long)]
        solution: PathBuf,
        /// Measurement basis whose Fisher information is checked.
        #[arg(long, conflicts_with = "info")]
        basis: Option<String>,
        /// Information matrix as JSON rows (inline or file:<path>).
        #[arg(long, required_unless_present = "basis")]
        info: Option<String>,
    },
    /// Prior-integrated Holevo bound, J(pi) and the van Trees bound.
    Bayes {
        #[command(flatten)]
        model: ModelArgs,
        /// Prior: bump:<r0>, uniform:<r0> or JSON.
        #[arg(long, default_value = "bump:0.9")]
        prior: String,
        /// fidelity or a JSON loss spec.
        #[arg(long, default_value = "fidelity")]
        loss: String,
        /// Also compute the prior information J(pi).
        #[arg(long)]
        j: bool,
        /// Compute the van Trees bound for this scheme (needs --n-copies).
        #[arg(long, requires = "n_copies")]
        scheme: Option<String>,
        /// Comma-separated numbers of copies for the van Trees bound.
        #[arg(long)]
        n_copies: Option<String>,
        /// Haar bases per node for randomized schemes.
        #[arg(long, default_value_t = 200)]
        n_bases: usize,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, env = "QBOUND_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Monte Carlo Bayes risk N * E[loss] against the integrated bound.
    Simulate {
        /// Run config JSON (model, prior, scheme, estimator, loss, n_copies, trials).
        #[arg(long, conflicts_with_all = ["model", "prior", "scheme", "estimator", "loss"])]
        config: Option<PathBuf>,
        /// Model family or JSON model spec.
        #[arg(long, required_unless_present = "config")]
        model: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        prior: Option<String>,
        /// random-basis, pauli, fixed:<basis>, alternating:<b>,<b>, two-step[:fraction] or JSON.
        #[arg(long)]
        scheme: Option<String>,
        /// mle, bayes-mean[:samples] or JSON.
        #[arg(long)]
        estimator: Option<String>,
        #[arg(long)]
        loss: Option<String>,
        /// Comma-separated numbers of copies.
        #[arg(long)]
        n_copies: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, env = "QBOUND_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// Skip the integrated bound column.
        #[arg(long)]
        no_bound: bool,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Regression table of published closed-form values.
    VerifyPaper {
        #[arg(long, env = "QBOUND_SEED", default_value_t = 0)]
        seed: u64,
        /// Haar bases in the sampled-basis rows.
        #[arg(long, default_value_t = 2000)]
        n_bases: usize,
        /// Relative tolerance of the closed-form Holevo rows.
        #[arg(long, default_value_t = 1e-3)]
        holevo_tol: f64,
        /// Relative tolerance of the dual roundtrip rows.
        #[arg(long, default_value_t = 1e-5)]
        dual_tol: f64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(qbound::Error),
    Verification(String),
    Io(std::io::Error),
}

impl From<qbound::Error> for CliError {
    fn from(e: qbound::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Marks a library error as caused by the user's input.
pub fn usage(e: qbound::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn non_convergence(e: &qbound::Error) -> Option<f64> {
    match e {
        qbound::Error::NonConvergence { best_value, .. } => Some(*best_value),
        qbound::Error::NodeFailure { source, .. } => non_convergence(source),
        _ => None,
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) if non_convergence(e).is_some() => 4,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => format!("usage error: {m}"),
            CliError::Core(e) => format!("error: {e}"),
            CliError::Verification(m) => format!("verification failed: {m}"),
            CliError::Io(e) => format!("i/o error: {e}"),
        }
    }
}

/// Captured result of one invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn execute<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code() as u8;
            return if e.use_stderr() {
                Invocation { code, stdout: String::new(), stderr: text }
            } else {
                Invocation { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let mut stdout = String::new();
    match commands::run(cli.command, cli.format, cli.output.as_deref(), &mut stdout) {
        Ok(()) => Invocation { code: 0, stdout, stderr: String::new() },
        Err(e) => {
            if let CliError::Core(inner) = &e {
                if let Some(best) = non_convergence(inner) {
                    stdout += &format!("{}\n", serde_json::json!({ "status": "non_convergence", "best_value": best }));
                }
            }
            Invocation {
                code: e.exit_code(),
                stdout,
                stderr: e.message() + "\n",
            }
        }
    }
}
