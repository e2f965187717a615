// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo protocol trials. Trial `k` draws its instance and its sketch
//! seeds from `derive_seed(seed, k)`, so results do not depend on the number
//! of worker threads.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fpdisj_core::instance::DEFAULT_DENSITY;
use fpdisj_core::oracle::ThresholdRule;
use fpdisj_core::protocol::{
    run_protocol_traced, write_trace, AmsKmvFactory, Decision, ExactFactory, NoisyFactory,
    ProtocolTranscript, SketchFactory, SketchMessage, FRAME_BYTES,
};
use fpdisj_core::sketch::hash::derive_seed;
use fpdisj_core::sketch::{NoiseMode, PlanConfig};
use fpdisj_core::{gen_instance, CaseLabel, Parameters, RegimeMode, Truth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::report::{num, Header, Report};
use crate::stats::{mean, wilson_interval};
use crate::verify::RuleArg;
use crate::{CliError, Outcome, OutputArgs, ParamArgs, EXIT_INVARIANT, EXIT_OK};

/// Per-hop framing allowance in bytes.
pub const FRAMING_ALLOWANCE_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Exact,
    NoisyAdversarial,
    NoisyRandom,
    AmsKmv,
}

impl Estimator {
    fn deterministic(self) -> bool {
        !matches!(self, Estimator::AmsKmv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    /// Even trials disjoint, odd trials with a common element.
    Alternate,
    Disjoint,
    Common,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Estimator::AmsKmv)]
    pub estimator: Estimator,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DENSITY)]
    pub density: f64,
    #[arg(long, value_enum, default_value_t = TruthArg::Alternate)]
    pub truth: TruthArg,
    /// Decision rule; Paper in Strict mode and Relaxed otherwise by default.
    #[arg(long, value_enum)]
    pub threshold: Option<RuleArg>,
    /// AMS sizing constant (see `sketch-bench`).
    #[arg(long, default_value_t = PlanConfig::default().ams_constant)]
    pub ams_c: f64,
    #[arg(long, default_value_t = PlanConfig::default().kmv_constant)]
    pub kmv_c: f64,
    /// Write the relayed messages of trial 0 to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl RunArgs {
    pub fn rule(&self, params: &Parameters) -> ThresholdRule {
        match self.threshold {
            Some(r) => r.into(),
            None if params.mode() == RegimeMode::Strict => ThresholdRule::Paper,
            None => ThresholdRule::MidGap,
        }
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            ams_constant: self.ams_c,
            kmv_constant: self.kmv_c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: u64,
    pub truth: Truth,
    pub transcript: ProtocolTranscript,
    pub messages: Option<Vec<SketchMessage>>,
}

impl TrialOutcome {
    pub fn success(&self) -> bool {
        match (self.truth, self.transcript.decision) {
            (Truth::Disjoint, Decision::Disjoint) => true,
            (Truth::CommonElement(i), Decision::CommonElement(j)) => i == j,
            _ => false,
        }
    }
}

fn label_for(truth: TruthArg, trial: u64) -> CaseLabel {
    match truth {
        TruthArg::Disjoint => CaseLabel::Disjoint,
        TruthArg::Common => CaseLabel::CommonElement,
        TruthArg::Alternate if trial.is_multiple_of(2) => CaseLabel::Disjoint,
        TruthArg::Alternate => CaseLabel::CommonElement,
    }
}

/// Runs every trial; the result is ordered by trial index.
pub fn run_trials<F, M>(
    params: &Parameters,
    a: &RunArgs,
    make: M,
) -> Result<Vec<TrialOutcome>, CliError>
where
    F: SketchFactory,
    M: Fn(u64) -> fpdisj_core::Result<F> + Sync,
{
    let rule = a.rule(params);
    (0..a.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(a.seed, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let inst = gen_instance(params, label_for(a.truth, trial), a.density, &mut rng)?;
            let factory = make(derive_seed(trial_seed, 1))?;
            let (transcript, messages) = run_protocol_traced(&inst, &factory, rule)?;
            Ok(TrialOutcome {
                trial,
                truth: inst.truth(),
                transcript,
                messages: (trial == 0).then_some(messages),
            })
        })
        .collect::<fpdisj_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub const COLUMNS: [&str; 14] = [
    "trial",
    "truth",
    "common_index",
    "decision",
    "decided_index",
    "success",
    "total_bits",
    "gross_total_bits",
    "per_hop_bits",
    "f0_payload_bytes",
    "fp_payload_bytes",
    "probe_count",
    "f0_estimate",
    "threshold_used",
];

fn decision_cells(d: Decision) -> (&'static str, serde_json::Value) {
    match d {
        Decision::Disjoint => ("disjoint", serde_json::Value::Null),
        Decision::CommonElement(i) => ("common_element", json!(i)),
    }
}

pub fn run(a: &RunArgs) -> Result<Outcome, CliError> {
    let params = a.params.resolve()?;
    let rule = a.rule(&params);
    let mut plan = None;
    let outcomes = match a.estimator {
        Estimator::Exact => run_trials(&params, a, |_| Ok(ExactFactory::new(params.p())))?,
        Estimator::NoisyAdversarial => run_trials(&params, a, |s| {
            Ok(NoisyFactory::for_params(&params, NoiseMode::AdversarialWorst, s))
        })?,
        Estimator::NoisyRandom => run_trials(&params, a, |s| {
            Ok(NoisyFactory::for_params(&params, NoiseMode::RandomUniform, s))
        })?,
        Estimator::AmsKmv => {
            let probe = AmsKmvFactory::for_params(&params, 0, a.plan_config())?;
            plan = Some((probe.fp_plan(), probe.f0_plan()));
            run_trials(&params, a, |s| AmsKmvFactory::for_params(&params, s, a.plan_config()))?
        }
    };

    if let Some(path) = &a.trace {
        let messages = outcomes[0].messages.as_deref().unwrap_or(&[]);
        std::fs::write(path, write_trace(messages))?;
    }

    let mut cfg = BTreeMap::new();
    a.params.describe(&mut cfg);
    cfg.insert("estimator".into(), a.estimator.to_possible_value().unwrap().get_name().to_string());
    cfg.insert("trials".into(), a.trials.to_string());
    cfg.insert("density".into(), a.density.to_string());
    cfg.insert("truth".into(), a.truth.to_possible_value().unwrap().get_name().to_string());
    cfg.insert("threshold".into(), match rule {
        ThresholdRule::Paper => "paper".into(),
        ThresholdRule::MidGap => "relaxed".into(),
    });
    if a.estimator == Estimator::AmsKmv {
        cfg.insert("ams-c".into(), a.ams_c.to_string());
        cfg.insert("kmv-c".into(), a.kmv_c.to_string());
    }
    let mut report = Report::new(Header::new("run-protocol", a.seed, cfg), &COLUMNS);

    for o in &outcomes {
        let tr = &o.transcript;
        let (truth, common) = match o.truth {
            Truth::Disjoint => ("disjoint", serde_json::Value::Null),
            Truth::CommonElement(i) => ("common_element", json!(i)),
        };
        let (decision, decided) = decision_cells(tr.decision);
        report.push(vec![
            json!(o.trial),
            json!(truth),
            common,
            json!(decision),
            decided,
            json!(o.success()),
            json!(tr.total_bits),
            json!(tr.gross_total_bits),
            json!(tr.per_hop_bits),
            json!(tr.f0_payload_bytes),
            json!(tr.fp_payload_bytes),
            json!(tr.probe_count),
            num(tr.f0_estimate),
            num(tr.threshold_used),
        ]);
    }

    let summary = summarize(&params, &outcomes);
    for (k, v) in summary.entries() {
        report.set(&k, v);
    }
    if let Some((fp_plan, f0_plan)) = plan {
        report.set("ams_rows", fp_plan.rows);
        report.set("ams_cols", fp_plan.cols);
        report.set("kmv_k", f0_plan.k);
    }
    let failed = summary.successes < summary.trials;
    let strict_failure =
        params.mode() == RegimeMode::Strict && a.estimator.deterministic() && failed;
    Ok(Outcome {
        report,
        exit: if strict_failure { EXIT_INVARIANT } else { EXIT_OK },
    })
}

/// Aggregates over trials, including the communication checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub n: u64,
    pub t: u64,
    pub trials: u64,
    pub successes: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_total_bits: f64,
    pub mean_gross_total_bits: f64,
    pub mean_per_hop_bits: f64,
    pub mean_f0_payload_bytes: f64,
    pub mean_fp_payload_bytes: f64,
    /// Every transcript has `t - 1` hops and `total_bits = sum(per_hop_bits)`.
    pub bits_consistent: bool,
    /// Largest per-hop `gross - net`, in bits.
    pub max_framing_bits: u64,
    /// `max_framing_bits <= 16 * 8`.
    pub framing_within_allowance: bool,
    /// The `F_p` payload has the same size on every hop of every trial.
    pub fp_payload_constant: bool,
    pub mean_probe_count: f64,
    pub declared_joint_success: f64,
}

impl TrialSummary {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn n_over_t(&self) -> f64 {
        self.n as f64 / self.t as f64
    }

    pub fn entries(&self) -> Vec<(String, serde_json::Value)> {
        vec![
            ("n".into(), json!(self.n)),
            ("t".into(), json!(self.t)),
            ("trials".into(), json!(self.trials)),
            ("successes".into(), json!(self.successes)),
            ("success_rate".into(), num(self.success_rate())),
            ("ci95_low".into(), num(self.ci_low)),
            ("ci95_high".into(), num(self.ci_high)),
            ("mean_total_bits".into(), num(self.mean_total_bits)),
            ("mean_gross_total_bits".into(), num(self.mean_gross_total_bits)),
            ("mean_per_hop_bits".into(), num(self.mean_per_hop_bits)),
            ("mean_f0_payload_bytes".into(), num(self.mean_f0_payload_bytes)),
            ("mean_fp_payload_bytes".into(), num(self.mean_fp_payload_bytes)),
            ("bits_consistent".into(), json!(self.bits_consistent)),
            ("frame_bytes".into(), json!(FRAME_BYTES)),
            ("framing_allowance_bytes".into(), json!(FRAMING_ALLOWANCE_BYTES)),
            ("max_framing_bits_per_hop".into(), json!(self.max_framing_bits)),
            ("framing_within_allowance".into(), json!(self.framing_within_allowance)),
            ("fp_payload_constant".into(), json!(self.fp_payload_constant)),
            ("n_over_t".into(), num(self.n_over_t())),
            ("mean_probe_count".into(), num(self.mean_probe_count)),
            ("declared_joint_success".into(), num(self.declared_joint_success)),
        ]
    }
}

pub fn summarize(params: &Parameters, outcomes: &[TrialOutcome]) -> TrialSummary {
    let trials = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|o| o.success()).count() as u64;
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    let f = |g: &dyn Fn(&ProtocolTranscript) -> f64| -> f64 {
        mean(&outcomes.iter().map(|o| g(&o.transcript)).collect::<Vec<_>>())
    };
    let hops = params.t().saturating_sub(1) as usize;
    let bits_consistent = outcomes.iter().all(|o| {
        let tr = &o.transcript;
        tr.per_hop_bits.len() == hops
            && tr.total_bits == tr.per_hop_bits.iter().sum::<u64>()
            && tr.gross_total_bits == tr.per_hop_gross_bits.iter().sum::<u64>()
    });
    let max_framing_bits = outcomes
        .iter()
        .flat_map(|o| {
            let tr = &o.transcript;
            tr.per_hop_gross_bits.iter().zip(&tr.per_hop_bits).map(|(g, n)| g - n)
        })
        .max()
        .unwrap_or(0);
    let mut fp_sizes = outcomes.iter().flat_map(|o| o.transcript.fp_payload_bytes.iter());
    let first = fp_sizes.next().copied();
    let fp_payload_constant = fp_sizes.all(|&s| Some(s) == first);
    let all_hops = |g: &dyn Fn(&ProtocolTranscript) -> Vec<f64>| -> f64 {
        mean(&outcomes.iter().flat_map(|o| g(&o.transcript)).collect::<Vec<_>>())
    };
    TrialSummary {
        n: params.n(),
        t: params.t(),
        trials,
        successes,
        ci_low,
        ci_high,
        mean_total_bits: f(&|tr| tr.total_bits as f64),
        mean_gross_total_bits: f(&|tr| tr.gross_total_bits as f64),
        mean_per_hop_bits: all_hops(&|tr| tr.per_hop_bits.iter().map(|&b| b as f64).collect()),
        mean_f0_payload_bytes: all_hops(&|tr| {
            tr.f0_payload_bytes.iter().map(|&b| b as f64).collect()
        }),
        mean_fp_payload_bytes: all_hops(&|tr| {
            tr.fp_payload_bytes.iter().map(|&b| b as f64).collect()
        }),
        bits_consistent,
        max_framing_bits,
        framing_within_allowance: max_framing_bits <= FRAMING_ALLOWANCE_BYTES * 8,
        fp_payload_constant,
        mean_probe_count: f(&|tr| tr.probe_count as f64),
        declared_joint_success: outcomes
            .first()
            .map_or(f64::NAN, |o| o.transcript.confidence.joint_success),
    }
}
