// SPDX-License-Identifier: Apache-2.0

//! `fpdisj` command-line harness.
//!
//! Exit codes: 0 when every check passed, 1 when a Strict-regime invariant
//! failed, 2 on usage or input errors.

pub mod bench;
pub mod bounds;
pub mod config;
pub mod gen;
pub mod report;
pub mod stats;
pub mod trials;
pub mod verify;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fpdisj_core::{make_parameters, Epsilon, Parameters, RegimeMode};

use report::{Format, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fpdisj", version, about = "Multiparty disjointness via F_p sketches")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random promise instance.
    GenInstance(gen::GenArgs),
    /// Sweep the case bounds and decision corners over a parameter grid.
    VerifyInequalities(verify::VerifyArgs),
    /// Monte-Carlo protocol trials.
    RunProtocol(trials::RunArgs),
    /// Space lower bound next to the earlier bound's terms.
    BoundTable(bounds_cmd::BoundArgs),
    /// Empirical accuracy of the sketches and calibration of the AMS constant.
    SketchBench(bench::BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` file mirroring the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Domain root: n = m^p.
    #[arg(long, conflicts_with = "n")]
    pub m: Option<u64>,
    /// Domain size.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 3.0)]
    pub p: f64,
    /// Accuracy as `num/den`.
    #[arg(long, default_value = "9/10")]
    pub eps: Epsilon,
    #[arg(long, default_value = "relaxed")]
    pub mode: RegimeMode,
    /// Force the party count (Relaxed only).
    #[arg(long)]
    pub t: Option<u64>,
}

/// Desk default domain root.
pub const DEFAULT_ROOT: u64 = 16;

impl ParamArgs {
    pub fn resolve(&self) -> Result<Parameters, CliError> {
        let n = match (self.m, self.n) {
            (_, Some(n)) => n,
            (m, None) => {
                let m = m.unwrap_or(DEFAULT_ROOT);
                if self.p.fract() == 0.0 && self.p >= 1.0 && self.p <= 64.0 {
                    if self.t.is_none() {
                        return Ok(Parameters::from_root(m, self.p as u32, self.eps, self.mode)?);
                    }
                    m.checked_pow(self.p as u32)
                        .ok_or_else(|| CliError::Usage(format!("{m}^{} overflows", self.p)))?
                } else {
                    return Err(CliError::Usage("--m needs an integral --p".into()));
                }
            }
        };
        match self.t {
            Some(_) if self.mode == RegimeMode::Strict => Err(CliError::Usage(
                "--t cannot be combined with --mode strict".into(),
            )),
            Some(t) => Ok(Parameters::with_forced_parties(n, self.p, self.eps, t)?),
            None => Ok(make_parameters(n, self.p, self.eps, self.mode)?),
        }
    }

    pub fn describe(&self, cfg: &mut BTreeMap<String, String>) {
        if let Some(m) = self.m {
            cfg.insert("m".into(), m.to_string());
        }
        if let Some(n) = self.n {
            cfg.insert("n".into(), n.to_string());
        }
        if self.m.is_none() && self.n.is_none() {
            cfg.insert("m".into(), DEFAULT_ROOT.to_string());
        }
        cfg.insert("p".into(), self.p.to_string());
        cfg.insert("eps".into(), self.eps.to_string());
        cfg.insert("mode".into(), self.mode.to_string());
        if let Some(t) = self.t {
            cfg.insert("t".into(), t.to_string());
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(fpdisj_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "{s}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fpdisj_core::Error> for CliError {
    fn from(e: fpdisj_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// A finished command: its report and exit code.
pub struct Outcome {
    pub report: Report,
    pub exit: i32,
}

pub fn execute(cli: &Cli) -> Result<(Outcome, OutputArgs), CliError> {
    Ok(match &cli.command {
        Command::GenInstance(a) => (gen::run(a)?, a.output.clone()),
        Command::VerifyInequalities(a) => (verify::run(a)?, a.output.clone()),
        Command::RunProtocol(a) => (trials::run(a)?, a.output.clone()),
        Command::BoundTable(a) => (bounds_cmd::run(a)?, a.output.clone()),
        Command::SketchBench(a) => (bench::run(a)?, a.output.clone()),
    })
}

/// Full entry point; returns the process exit code.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let args = match config::expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((outcome, out)) => match outcome.report.write(out.format, out.out.as_deref()) {
            Ok(()) => outcome.exit,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub mod bounds_cmd {
    use clap::Args;
    use fpdisj_core::Epsilon;
    use serde_json::json;

    use crate::bounds::bound_row;
    use crate::report::{num, Header, Report};
    use crate::{CliError, Outcome, OutputArgs, EXIT_OK};

    #[derive(Debug, Clone, Args)]
    pub struct BoundArgs {
        #[arg(long, value_delimiter = ',', default_values_t = [1u64 << 10, 1 << 15, 1 << 20, 1 << 25, 1 << 30])]
        pub n: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = [3.0, 4.0, 6.0])]
        pub p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["1", "1/2", "1/10", "1/100"])]
        pub eps: Vec<Epsilon>,
        #[command(flatten)]
        pub output: OutputArgs,
    }

    pub fn run(a: &BoundArgs) -> Result<Outcome, CliError> {
        if a.n.iter().any(|&n| n < 2) || a.p.iter().any(|&p| p.is_nan() || p <= 2.0) {
            return Err(CliError::Usage("bound table needs n >= 2 and p > 2".into()));
        }
        if a.eps.iter().any(|e| e.num() == 0) {
            return Err(CliError::Usage("eps must be positive".into()));
        }
        let join = |v: Vec<String>| v.join(",");
        let mut cfg = std::collections::BTreeMap::new();
        cfg.insert("n".into(), join(a.n.iter().map(|x| x.to_string()).collect()));
        cfg.insert("p".into(), join(a.p.iter().map(|x| x.to_string()).collect()));
        cfg.insert("eps".into(), join(a.eps.iter().map(|x| x.to_string()).collect()));
        let mut report = Report::new(
            Header::new("bound-table", 0, cfg),
            &[
                "n",
                "p",
                "eps",
                "lower_bound",
                "prior_root_term",
                "prior_polylog_term",
                "prior_eps_term",
                "prior_log_term",
                "ratio",
                "crossover_eps",
            ],
        );
        for &n in &a.n {
            for &p in &a.p {
                for &eps in &a.eps {
                    let r = bound_row(n, p, eps);
                    report.push(vec![
                        json!(r.n),
                        num(r.p),
                        json!(eps.to_string()),
                        num(r.lower_bound),
                        num(r.prior_root_term),
                        num(r.prior_polylog_term),
                        num(r.prior_eps_term),
                        num(r.prior_log_term),
                        num(r.ratio),
                        num(r.crossover_eps),
                    ]);
                }
            }
        }
        report.set("rows", report.rows.len());
        Ok(Outcome {
            report,
            exit: EXIT_OK,
        })
    }
}
