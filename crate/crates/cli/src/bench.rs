// SPDX-License-Identifier: Apache-2.0

//! Empirical accuracy of the estimators and calibration of the AMS column
//! constant `C` in `cols = ceil(C / eps^2)`.
//!
//! A single AMS row with `c` columns has relative error close to `K / sqrt(c)`
//! at its 75th percentile once `c` is large enough, so `c * q75(c)^2`
//! estimates `K^2`. The calibrated `C` is that product at the widest `c` of
//! the sweep; narrower rows are still dominated by whether a heavy coordinate
//! gets sampled at all.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fpdisj_core::sketch::hash::derive_seed;
use fpdisj_core::sketch::{AmsFpSketch, ExactEstimator, KmvSketch, Sketch, StreamUpdate};
use rayon::prelude::*;
use serde_json::json;

use crate::report::{num, Header, Report};
use crate::stats::{mean, quantile, slope};
use crate::{CliError, Outcome, OutputArgs, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchEstimator {
    All,
    Kmv,
    Exact,
    Ams,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchEstimator::All)]
    pub estimator: BenchEstimator,
    #[arg(long, default_value_t = 400)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Distinct counts for the KMV and exact runs.
    #[arg(long, value_delimiter = ',', default_values_t = [100u64, 1000, 5000])]
    pub truth: Vec<u64>,
    #[arg(long, default_value_t = 1024)]
    pub kmv_k: usize,
    /// Relative error counted as "within" for KMV and AMS rows.
    #[arg(long, default_value_t = 0.1)]
    pub target: f64,
    /// AMS column counts of the single-row sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256, 512])]
    pub cols: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub p: u32,
    /// AMS workload: this many unit coordinates...
    #[arg(long, default_value_t = 1024)]
    pub ams_support: u64,
    /// ...plus one coordinate of this weight.
    #[arg(long, default_value_t = 16)]
    pub ams_heavy: u64,
    /// Write `ams_c=<C>` here; usable as `run-protocol --config`.
    #[arg(long)]
    pub calibration_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub const COLUMNS: [&str; 10] = [
    "estimator",
    "truth",
    "size",
    "seeds",
    "mean_ratio",
    "target",
    "within_target_frac",
    "q75_rel_err",
    "rmse_rel_err",
    "c_q75_sq",
];

/// Accuracy summary of repeated estimates of one true value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub mean_ratio: f64,
    pub within_frac: f64,
    pub q75_rel_err: f64,
    pub rmse_rel_err: f64,
}

pub fn accuracy(estimates: &[f64], truth: f64, target: f64) -> Accuracy {
    let rel: Vec<f64> = estimates.iter().map(|e| (e - truth).abs() / truth).collect();
    Accuracy {
        mean_ratio: mean(&estimates.iter().map(|e| e / truth).collect::<Vec<_>>()),
        within_frac: rel.iter().filter(|&&r| r <= target).count() as f64 / rel.len() as f64,
        q75_rel_err: quantile(&rel, 0.75),
        rmse_rel_err: mean(&rel.iter().map(|r| r * r).collect::<Vec<_>>()).sqrt(),
    }
}

fn arrivals(count: u64) -> Vec<StreamUpdate> {
    (1..=count)
        .map(|i| StreamUpdate::arrival(i).expect("unit weight"))
        .collect()
}

/// KMV estimates of `truth` distinct items over `seeds` seeds.
pub fn kmv_estimates(k: usize, truth: u64, seed: u64, seeds: u64) -> Result<Vec<f64>, CliError> {
    let stream = arrivals(truth);
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut kmv = KmvSketch::new(k, derive_seed(seed, s), 0.0, 0.0)?;
            kmv.insert_all(&stream)?;
            Ok(kmv.estimate())
        })
        .collect::<fpdisj_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

/// The AMS bench stream: `support` unit arrivals, then one block of weight
/// `heavy` on a fresh coordinate.
pub fn ams_stream(support: u64, heavy: u64) -> Vec<StreamUpdate> {
    let mut s = arrivals(support);
    if heavy > 0 {
        s.push(StreamUpdate::new(support + 1, heavy as f64).expect("integral weight"));
    }
    s
}

pub fn ams_estimates(
    p: u32,
    cols: usize,
    stream: &[StreamUpdate],
    seed: u64,
    seeds: u64,
) -> Result<Vec<f64>, CliError> {
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut ams = AmsFpSketch::new(p, 1, cols, derive_seed(seed, s), 0.0, 0.0)?;
            ams.insert_all(stream)?;
            Ok(ams.estimate())
        })
        .collect::<fpdisj_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub fn run(a: &BenchArgs) -> Result<Outcome, CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let mut cfg = BTreeMap::new();
    cfg.insert("estimator".into(), a.estimator.to_possible_value().unwrap().get_name().into());
    cfg.insert("seeds".into(), a.seeds.to_string());
    let list = |v: Vec<String>| v.join(",");
    cfg.insert("truth".into(), list(a.truth.iter().map(|x| x.to_string()).collect()));
    cfg.insert("kmv-k".into(), a.kmv_k.to_string());
    cfg.insert("target".into(), a.target.to_string());
    cfg.insert("cols".into(), list(a.cols.iter().map(|x| x.to_string()).collect()));
    cfg.insert("p".into(), a.p.to_string());
    cfg.insert("ams-support".into(), a.ams_support.to_string());
    cfg.insert("ams-heavy".into(), a.ams_heavy.to_string());
    let mut report = Report::new(Header::new("sketch-bench", a.seed, cfg), &COLUMNS);
    let want = |e: BenchEstimator| a.estimator == BenchEstimator::All || a.estimator == e;

    let row = |name: &str, truth: f64, size: u64, target: f64, acc: Accuracy, cq: Option<f64>| {
        vec![
            json!(name),
            num(truth),
            json!(size),
            json!(a.seeds),
            num(acc.mean_ratio),
            num(target),
            num(acc.within_frac),
            num(acc.q75_rel_err),
            num(acc.rmse_rel_err),
            cq.map_or(serde_json::Value::Null, num),
        ]
    };

    if want(BenchEstimator::Kmv) {
        for &truth in &a.truth {
            let est = kmv_estimates(a.kmv_k, truth, a.seed, a.seeds)?;
            let acc = accuracy(&est, truth as f64, a.target);
            report.set(&format!("kmv_within_frac_{truth}"), num(acc.within_frac));
            report.push(row("kmv", truth as f64, a.kmv_k as u64, a.target, acc, None));
        }
    }
    if want(BenchEstimator::Exact) {
        for &truth in &a.truth {
            let mut ex = ExactEstimator::distinct();
            ex.insert_all(&arrivals(truth))?;
            let acc = accuracy(&[ex.estimate()], truth as f64, 0.0);
            report.set(&format!("exact_within_frac_{truth}"), num(acc.within_frac));
            report.push(row("exact", truth as f64, 0, 0.0, acc, None));
        }
    }
    if want(BenchEstimator::Ams) && !a.cols.is_empty() {
        let stream = ams_stream(a.ams_support, a.ams_heavy);
        let truth = a.ams_support as f64 + (a.ams_heavy as f64).powi(a.p as i32);
        let (mut xs, mut ys, mut calibrated) = (Vec::new(), Vec::new(), (0usize, f64::NAN));
        for &c in &a.cols {
            let est = ams_estimates(a.p, c, &stream, a.seed, a.seeds)?;
            let acc = accuracy(&est, truth, a.target);
            let cq = c as f64 * acc.q75_rel_err * acc.q75_rel_err;
            if c >= calibrated.0 {
                calibrated = (c, cq);
            }
            xs.push((c as f64).ln());
            ys.push(acc.rmse_rel_err.ln());
            report.push(row("ams", truth, c as u64, a.target, acc, Some(cq)));
        }
        let s = if xs.len() >= 2 { slope(&xs, &ys) } else { f64::NAN };
        report.set("ams_error_slope", num(s));
        report.set("ams_slope_ok", (s + 0.5).abs() <= 0.1);
        let calibrated = calibrated.1;
        report.set("ams_calibrated_c", num(calibrated));
        if let Some(path) = &a.calibration_out {
            std::fs::write(path, format!("# from sketch-bench, seed {}\nams_c={calibrated}\n", a.seed))?;
        }
    }
    Ok(Outcome {
        report,
        exit: EXIT_OK,
    })
}
