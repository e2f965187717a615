// SPDX-License-Identifier: Apache-2.0

//! Scalar sweep of the case bounds and the four error corners of the
//! decision predicate. Each row is a probe shape; no vector of length `n` is
//! ever materialized.

use std::collections::BTreeMap;

use clap::{Args, ValueEnum};
use fpdisj_core::oracle::{case_bounds_for, decision_corners_for, ProbeCase, ProbeShape, ThresholdRule};
use fpdisj_core::{make_parameters, Epsilon, Parameters, RegimeMode};
use serde_json::json;

use crate::report::{num, Header, Report};
use crate::{CliError, Outcome, OutputArgs, EXIT_INVARIANT, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// Strict when the point is in the regime, Relaxed otherwise.
    Auto,
    Strict,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Paper,
    Relaxed,
}

impl From<RuleArg> for ThresholdRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Paper => ThresholdRule::Paper,
            RuleArg::Relaxed => ThresholdRule::MidGap,
        }
    }
}

/// `P:M:EPS` with `n = M^P`, or `P:n=N:EPS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p: f64,
    pub n: u64,
    pub root: Option<u64>,
    pub eps: Epsilon,
}

impl std::str::FromStr for GridPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [p, size, eps] = parts[..] else {
            return Err(format!("grid point {s:?}: expected P:M:EPS or P:n=N:EPS"));
        };
        let p: f64 = p.parse().map_err(|_| format!("grid point {s:?}: bad p"))?;
        let eps: Epsilon = eps.parse().map_err(|e| format!("grid point {s:?}: {e}"))?;
        if let Some(n) = size.strip_prefix("n=") {
            let n = n.parse().map_err(|_| format!("grid point {s:?}: bad n"))?;
            return Ok(GridPoint { p, n, root: None, eps });
        }
        let m: u64 = size.parse().map_err(|_| format!("grid point {s:?}: bad m"))?;
        if p.fract() != 0.0 || !(1.0..=64.0).contains(&p) {
            return Err(format!("grid point {s:?}: a root needs an integral p"));
        }
        let n = m
            .checked_pow(p as u32)
            .ok_or_else(|| format!("grid point {s:?}: m^p overflows"))?;
        Ok(GridPoint { p, n, root: Some(m), eps })
    }
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.root {
            Some(m) => write!(f, "{}:{}:{}", self.p, m, self.eps),
            None => write!(f, "{}:n={}:{}", self.p, self.n, self.eps),
        }
    }
}

pub const DEFAULT_POINTS: [&str; 2] = ["3:960:1/4", "4:1280:1/4"];

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Grid point `P:M:EPS` (n = M^P) or `P:n=N:EPS`; repeatable.
    #[arg(long = "point", default_values = DEFAULT_POINTS)]
    pub points: Vec<GridPoint>,
    #[arg(long, value_enum, default_value_t = SweepMode::Auto)]
    pub mode: SweepMode,
    /// Number of `||x||_0` grid points; 0 gives an empty sweep.
    #[arg(long, default_value_t = 20)]
    pub x0_points: u64,
    /// Upper end of the `||x||_0` grid as a fraction of n.
    #[arg(long, default_value = "1/4")]
    pub x0_max_frac: Epsilon,
    #[arg(long, value_enum, default_value_t = RuleArg::Paper)]
    pub threshold: RuleArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// `count` evenly spaced supports in `[0, floor(frac n)]`, deduplicated.
pub fn support_grid(n: u64, frac: Epsilon, count: u64) -> Vec<u64> {
    let hi = ((n as u128 * frac.num() as u128) / frac.den() as u128) as u64;
    let mut out: Vec<u64> = (0..count)
        .map(|k| {
            if count == 1 {
                hi
            } else {
                (hi as u128 * k as u128 / (count - 1) as u128) as u64
            }
        })
        .collect();
    out.dedup();
    out
}

/// Every realizable shape at support `s`.
pub fn shapes_at(s: u64, params: &Parameters) -> Vec<ProbeShape> {
    let t = params.t();
    [
        (ProbeCase::NoHeavy, 0),
        (ProbeCase::NoHeavy, 1),
        (ProbeCase::HeavyElsewhere, 0),
        (ProbeCase::HeavyElsewhere, 1),
        (ProbeCase::HeavyAtProbe, t),
    ]
    .into_iter()
    .map(|(case, probe_count)| ProbeShape {
        support: s,
        probe_count,
        case,
    })
    .filter(|shape| shape.validate(params).is_ok())
    .collect()
}

pub fn resolve_point(pt: &GridPoint, mode: SweepMode) -> Result<Parameters, CliError> {
    let build = |m: RegimeMode| -> fpdisj_core::Result<Parameters> {
        match pt.root {
            Some(root) => Parameters::from_root(root, pt.p as u32, pt.eps, m),
            None => make_parameters(pt.n, pt.p, pt.eps, m),
        }
    };
    Ok(match mode {
        SweepMode::Strict => build(RegimeMode::Strict)?,
        SweepMode::Relaxed => build(RegimeMode::Relaxed)?,
        SweepMode::Auto => match build(RegimeMode::Strict) {
            Ok(p) => p,
            Err(_) => build(RegimeMode::Relaxed)?,
        },
    })
}

pub const COLUMNS: [&str; 17] = [
    "point",
    "n",
    "p",
    "eps",
    "t",
    "mode",
    "case",
    "support",
    "probe_count",
    "exact",
    "bound",
    "satisfied",
    "slack",
    "slack_frac",
    "threshold_offset",
    "corners_fired",
    "corners_correct",
];

pub fn run(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let mut cfg = BTreeMap::new();
    cfg.insert(
        "point".into(),
        a.points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
    );
    cfg.insert("mode".into(), format!("{:?}", a.mode).to_lowercase());
    cfg.insert("x0-points".into(), a.x0_points.to_string());
    cfg.insert("x0-max-frac".into(), a.x0_max_frac.to_string());
    cfg.insert("threshold".into(), format!("{:?}", a.threshold).to_lowercase());
    let mut report = Report::new(Header::new("verify-inequalities", 0, cfg), &COLUMNS);

    let rule = ThresholdRule::from(a.threshold);
    let mut strict_failures = 0u64;
    let mut bound_failures = 0u64;
    let mut corner_failures = 0u64;
    for pt in &a.points {
        let params = resolve_point(pt, a.mode)?;
        let strict = params.mode() == RegimeMode::Strict;
        for s in support_grid(params.n(), a.x0_max_frac, a.x0_points) {
            for shape in shapes_at(s, &params) {
                let b = case_bounds_for(shape, &params)?;
                let c = decision_corners_for(shape, &params, rule)?;
                if !b.satisfied {
                    bound_failures += 1;
                }
                if !c.correct {
                    corner_failures += 1;
                }
                if strict && !(b.satisfied && c.correct) {
                    strict_failures += 1;
                }
                report.push(vec![
                    json!(pt.to_string()),
                    json!(params.n()),
                    num(params.p()),
                    json!(params.eps().to_string()),
                    json!(params.t()),
                    json!(params.mode().to_string()),
                    json!(shape.case.to_string()),
                    json!(shape.support),
                    json!(shape.probe_count),
                    num(b.exact),
                    num(b.bound),
                    json!(b.satisfied),
                    num(b.slack),
                    num(b.slack_frac),
                    num(c.threshold_offset),
                    json!(c.corners.map(|k| k.fired)),
                    json!(c.correct),
                ]);
            }
        }
    }
    report.set("rows", report.rows.len());
    report.set("bound_failures", bound_failures);
    report.set("corner_failures", corner_failures);
    report.set("strict_failures", strict_failures);
    Ok(Outcome {
        report,
        exit: if strict_failures > 0 { EXIT_INVARIANT } else { EXIT_OK },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let q: Epsilon = "1/4".parse().unwrap();
        assert_eq!(support_grid(100, q, 0), Vec::<u64>::new());
        assert_eq!(support_grid(100, q, 1), vec![25]);
        let g = support_grid(100, q, 5);
        assert_eq!(g, vec![0, 6, 12, 18, 25]);
        assert_eq!(support_grid(8, q, 20), vec![0, 1, 2]);
    }

    #[test]
    fn parses_points() {
        let pt: GridPoint = "3:960:1/4".parse().unwrap();
        assert_eq!(pt.n, 960u64.pow(3));
        assert_eq!(pt.root, Some(960));
        let pt: GridPoint = "2.5:n=1000:9/10".parse().unwrap();
        assert_eq!((pt.n, pt.root), (1000, None));
        assert!("3:960".parse::<GridPoint>().is_err());
        assert!("2.5:10:1/4".parse::<GridPoint>().is_err());
    }
}
