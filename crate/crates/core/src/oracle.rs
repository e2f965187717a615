// SPDX-License-Identifier: Apache-2.0

//! Exact moments and the three-case analysis of the boosted moment
//! `||x + n^(1/p) e_i||_p^p`, plus the four-corner check of the decision
//! predicate under `(1 +- eps/10)` estimator error.
//!
//! Every quantity here depends on `(x, i)` only through a [`ProbeShape`]:
//! the support size `||x||_0`, the probed count `x(i)` and where the heavy
//! coordinate (if any) sits. The scalar entry points therefore work at domain
//! sizes far beyond what could be materialized.
//!
//! Bounds are the final per-case constants: `eps/64` when no coordinate is
//! heavy, `eps/32` when the heavy coordinate is elsewhere, and the lower
//! bound `eps/2` when the probe hits the heavy coordinate. The two
//! intermediate chains are kept in [`bound_trace`] for debugging only; the
//! `n e^{x(i) p / n^(1/p)}` step there is the exponential reading of
//! `(1 + x(i)/n^(1/p))^p <= e^{x(i) p / n^(1/p)}`.
//!
//! The decision threshold in the write-ups is stated twice with different
//! ceilings for the non-firing cases (`eps/8` and `eps/7`). Corners are
//! checked directly against the firing threshold `n(1 + 2 eps/5)`, which
//! both ceilings sit below.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::vector::FrequencyVector;

/// Relative guard applied when comparing float evaluations with bounds.
pub const FLOAT_GUARD: f64 = 1e-9;

/// Number of nonzero coordinates.
pub fn f0(x: &FrequencyVector) -> u64 {
    x.support_size()
}

/// `sum_i x(i)^p`, summed in descending magnitude order.
pub fn fp(x: &FrequencyVector, p: f64) -> f64 {
    sum_descending(x.iter().map(|(_, c)| (c as f64).powf(p)).collect())
}

/// `||x + boost e_i||_p^p` for an arbitrary vector.
pub fn boosted_moment(x: &FrequencyVector, i: u64, params: &Parameters) -> f64 {
    let p = params.p();
    let boost = params.boost();
    let mut terms: Vec<f64> = x
        .iter()
        .map(|(j, c)| {
            let c = c as f64;
            if j == i {
                (c + boost).powf(p)
            } else {
                c.powf(p)
            }
        })
        .collect();
    if x.get(i) == 0 {
        terms.push(boost.powf(p));
    }
    sum_descending(terms)
}

fn sum_descending(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(|a, b| b.total_cmp(a));
    terms.into_iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeCase {
    /// `x` is a 0/1 vector.
    NoHeavy,
    /// The coordinate equal to `t` is not the probed one.
    HeavyElsewhere,
    /// The probe hits the coordinate equal to `t`.
    HeavyAtProbe,
}

impl fmt::Display for ProbeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeCase::NoHeavy => "no_heavy",
            ProbeCase::HeavyElsewhere => "heavy_elsewhere",
            ProbeCase::HeavyAtProbe => "heavy_at_probe",
        })
    }
}

/// Scalar summary of a promise vector `x` together with a probe index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbeShape {
    /// `||x||_0`
    pub support: u64,
    /// `x(i)`
    pub probe_count: u64,
    pub case: ProbeCase,
}

impl ProbeShape {
    /// Classifies `(x, i)`; fails when `x` fits neither promise shape.
    pub fn classify(x: &FrequencyVector, i: u64, params: &Parameters) -> Result<ProbeShape> {
        if i == 0 || i > params.n() {
            return Err(Error::invalid(format!("probe index {i} outside [1, {}]", params.n())));
        }
        let t = params.t();
        let mut heavy = None;
        for (j, c) in x.iter() {
            if c == t {
                if heavy.replace(j).is_some() {
                    return Err(Error::PromiseViolation(format!(
                        "more than one coordinate equals t = {t}"
                    )));
                }
            } else if c != 1 {
                return Err(Error::PromiseViolation(format!(
                    "x({j}) = {c} is neither 0, 1 nor t = {t}"
                )));
            }
        }
        let case = match heavy {
            None => ProbeCase::NoHeavy,
            Some(j) if j == i => ProbeCase::HeavyAtProbe,
            Some(_) => ProbeCase::HeavyElsewhere,
        };
        Ok(ProbeShape {
            support: x.support_size(),
            probe_count: x.get(i),
            case,
        })
    }

    /// Checks that some promise vector realizes this shape.
    pub fn validate(&self, params: &Parameters) -> Result<()> {
        let ok = match self.case {
            ProbeCase::NoHeavy => self.probe_count <= 1 && self.support >= self.probe_count,
            ProbeCase::HeavyElsewhere => {
                self.probe_count <= 1 && self.support > self.probe_count
            }
            ProbeCase::HeavyAtProbe => self.probe_count == params.t() && self.support >= 1,
        };
        if ok && self.support <= params.n() {
            Ok(())
        } else {
            Err(Error::PromiseViolation(format!("unrealizable shape {self:?}")))
        }
    }

    /// Exact `||x + boost e_i||_p^p` from the shape alone.
    pub fn boosted_moment(&self, params: &Parameters) -> f64 {
        let p = params.p();
        let boost = params.boost();
        let t = params.t() as f64;
        let s = self.support as f64;
        let c = self.probe_count as f64;
        match self.case {
            ProbeCase::NoHeavy => (s - c) + (boost + c).powf(p),
            ProbeCase::HeavyElsewhere => (s - 1.0 - c) + t.powf(p) + (boost + c).powf(p),
            ProbeCase::HeavyAtProbe => (s - 1.0) + (boost + t).powf(p),
        }
    }

    /// The per-case bound: an upper bound for the two non-firing cases and a
    /// lower bound when the probe hits the heavy coordinate.
    pub fn bound(&self, params: &Parameters) -> f64 {
        let n = params.n() as f64;
        let eps = params.eps_value();
        let s = self.support as f64;
        match self.case {
            ProbeCase::NoHeavy => s + n * (1.0 + eps / 64.0),
            ProbeCase::HeavyElsewhere => s + n * (1.0 + eps / 32.0),
            ProbeCase::HeavyAtProbe => s + n * (1.0 + eps / 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBoundsReport {
    pub case: ProbeCase,
    pub support: u64,
    pub probe_count: u64,
    pub exact: f64,
    pub bound: f64,
    pub satisfied: bool,
    /// Signed distance to the bound; positive means satisfied.
    pub slack: f64,
    /// `slack / (n eps)`.
    pub slack_frac: f64,
}

/// Evaluates the case bound for a shape.
pub fn case_bounds_for(shape: ProbeShape, params: &Parameters) -> Result<CaseBoundsReport> {
    shape.validate(params)?;
    let exact = shape.boosted_moment(params);
    let bound = shape.bound(params);
    let slack = match shape.case {
        ProbeCase::HeavyAtProbe => exact - bound,
        _ => bound - exact,
    };
    let satisfied = slack >= -FLOAT_GUARD * bound.abs();
    Ok(CaseBoundsReport {
        case: shape.case,
        support: shape.support,
        probe_count: shape.probe_count,
        exact,
        bound,
        satisfied,
        slack,
        slack_frac: slack / (params.n() as f64 * params.eps_value()),
    })
}

/// Classifies `(x, i)` and evaluates its case bound.
pub fn case_bounds(x: &FrequencyVector, i: u64, params: &Parameters) -> Result<CaseBoundsReport> {
    let shape = ProbeShape::classify(x, i, params)?;
    let mut report = case_bounds_for(shape, params)?;
    // use the vector-level evaluation as the reported value
    report.exact = boosted_moment(x, i, params);
    report.slack = match shape.case {
        ProbeCase::HeavyAtProbe => report.exact - report.bound,
        _ => report.bound - report.exact,
    };
    report.satisfied = report.slack >= -FLOAT_GUARD * report.bound.abs();
    report.slack_frac = report.slack / (params.n() as f64 * params.eps_value());
    Ok(report)
}

/// Named intermediate values of the bound chains, for debugging.
pub fn bound_trace(shape: ProbeShape, params: &Parameters) -> Vec<(&'static str, f64)> {
    let n = params.n() as f64;
    let p = params.p();
    let eps = params.eps_value();
    let boost = params.boost();
    let t = params.t() as f64;
    let s = shape.support as f64;
    let c = shape.probe_count as f64;
    match shape.case {
        ProbeCase::NoHeavy => vec![
            ("exact", shape.boosted_moment(params)),
            ("exp_step", s + n * (c * p / boost).exp() - c),
            ("linear_step", s + n * (1.0 + 5.0 * p / (4.0 * boost))),
            ("final", shape.bound(params)),
        ],
        ProbeCase::HeavyElsewhere => vec![
            ("exact", shape.boosted_moment(params)),
            ("heavy_term", t.powf(p)),
            ("heavy_term_bound", eps * n / 4f64.powf(2.0 * p - 1.0)),
            ("exp_step", s - 1.0 + t.powf(p) + n * (c * p / boost).exp() - c),
            ("final", shape.bound(params)),
        ],
        ProbeCase::HeavyAtProbe => {
            let alpha = eps / (2.0 * p);
            vec![
                ("exact", shape.boosted_moment(params)),
                ("power_growth", (1.0 + alpha).powf(p)),
                ("taylor_two_term", 1.0 + p * alpha + p * (p - 1.0) * alpha * alpha / 2.0),
                ("final", shape.bound(params)),
            ]
        }
    }
}

/// How the firing threshold of the decision predicate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Fire when `F_p^i >= F_0 + n(1 + 2 eps/5)`.
    Paper,
    /// Fire when `F_p^i >= F_0 + n(1 + g)` with `g` the midpoint of the exact
    /// gap between the non-firing and firing cases at these parameters.
    MidGap,
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(ThresholdRule::Paper),
            "relaxed" | "mid-gap" | "midgap" => Ok(ThresholdRule::MidGap),
            other => Err(Error::invalid(format!("unknown threshold rule {other:?}"))),
        }
    }
}

/// Exact separation between the cases, in units of `n` above `||x||_0 + n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionGap {
    /// Largest `(exact - ||x||_0)/n - 1` over the non-firing shapes.
    pub no_fire_max: f64,
    /// `(exact - ||x||_0)/n - 1` when the probe hits the heavy coordinate.
    pub fire_min: f64,
}

impl DecisionGap {
    pub fn midpoint(&self) -> f64 {
        (self.no_fire_max + self.fire_min) / 2.0
    }

    pub fn is_open(&self) -> bool {
        self.fire_min > self.no_fire_max
    }
}

/// The exact gap. The offset `exact - ||x||_0` does not depend on the support
/// size, so it is evaluated at a fixed small support.
pub fn decision_gap(params: &Parameters) -> DecisionGap {
    let n = params.n() as f64;
    let rel = |case, probe_count| {
        let shape = ProbeShape {
            support: 2,
            probe_count,
            case,
        };
        (shape.boosted_moment(params) - 2.0) / n - 1.0
    };
    let no_fire_max = [
        rel(ProbeCase::NoHeavy, 0),
        rel(ProbeCase::NoHeavy, 1),
        rel(ProbeCase::HeavyElsewhere, 0),
        rel(ProbeCase::HeavyElsewhere, 1),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    DecisionGap {
        no_fire_max,
        fire_min: rel(ProbeCase::HeavyAtProbe, params.t()),
    }
}

/// The additive offset `c` of the predicate `F_p^i >= F_0 + c`.
pub fn threshold_offset(rule: ThresholdRule, params: &Parameters) -> f64 {
    let n = params.n() as f64;
    match rule {
        ThresholdRule::Paper => n * (1.0 + 2.0 * params.eps_value() / 5.0),
        ThresholdRule::MidGap => n * (1.0 + decision_gap(params).midpoint()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub f0_factor: f64,
    pub fp_factor: f64,
    pub f0_estimate: f64,
    pub fp_estimate: f64,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCornerReport {
    pub case: ProbeCase,
    pub threshold_offset: f64,
    pub corners: [Corner; 4],
    /// The predicate fires at every corner exactly when the probe hits the
    /// heavy coordinate.
    pub correct: bool,
}

/// Evaluates the predicate at all four `(1 +- eps/10)` error corners.
pub fn decision_corners_for(
    shape: ProbeShape,
    params: &Parameters,
    rule: ThresholdRule,
) -> Result<DecisionCornerReport> {
    shape.validate(params)?;
    let exact = shape.boosted_moment(params);
    let support = shape.support as f64;
    let offset = threshold_offset(rule, params);
    let err = params.eps_value() / 10.0;
    let lo = 1.0 - err;
    let hi = 1.0 + err;
    let corners = [(lo, lo), (lo, hi), (hi, lo), (hi, hi)].map(|(f0_factor, fp_factor)| {
        let f0_estimate = support * f0_factor;
        let fp_estimate = exact * fp_factor;
        Corner {
            f0_factor,
            fp_factor,
            f0_estimate,
            fp_estimate,
            fired: fp_estimate >= f0_estimate + offset,
        }
    });
    let should_fire = shape.case == ProbeCase::HeavyAtProbe;
    let correct = corners.iter().all(|c| c.fired == should_fire);
    Ok(DecisionCornerReport {
        case: shape.case,
        threshold_offset: offset,
        corners,
        correct,
    })
}

/// Four-corner check of the `Paper` threshold for a vector and probe index.
pub fn decision_corners(
    x: &FrequencyVector,
    i: u64,
    params: &Parameters,
) -> Result<DecisionCornerReport> {
    let shape = ProbeShape::classify(x, i, params)?;
    decision_corners_for(shape, params, ThresholdRule::Paper)
}

/// One serialized row: bound check plus corner outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub case: ProbeCase,
    pub support: u64,
    pub probe_count: u64,
    pub exact: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub slack: f64,
    pub slack_frac: f64,
    pub corners: [bool; 4],
    pub correct: bool,
}

pub fn probe_report(shape: ProbeShape, params: &Parameters) -> Result<ProbeReport> {
    let bounds = case_bounds_for(shape, params)?;
    let corners = decision_corners_for(shape, params, ThresholdRule::Paper)?;
    Ok(ProbeReport {
        case: bounds.case,
        support: bounds.support,
        probe_count: bounds.probe_count,
        exact: bounds.exact,
        bound: bounds.bound,
        satisfied: bounds.satisfied,
        slack: bounds.slack,
        slack_frac: bounds.slack_frac,
        corners: corners.corners.map(|c| c.fired),
        correct: corners.correct,
    })
}
