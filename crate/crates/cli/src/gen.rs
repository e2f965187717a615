// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use clap::{Args, ValueEnum};
use fpdisj_core::instance::DEFAULT_DENSITY;
use fpdisj_core::sketch::hash::derive_seed;
use fpdisj_core::{gen_instance, CaseLabel, Truth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::{Header, Report};
use crate::{CliError, Outcome, OutputArgs, ParamArgs, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Disjoint,
    Common,
}

impl From<CaseArg> for CaseLabel {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Disjoint => CaseLabel::Disjoint,
            CaseArg::Common => CaseLabel::CommonElement,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = CaseArg::Common)]
    pub case: CaseArg,
    /// Fraction of the domain covered by the private sets.
    #[arg(long, default_value_t = DEFAULT_DENSITY)]
    pub density: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// One row per `(party, index)` membership; the summary carries the truth.
pub fn run(a: &GenArgs) -> Result<Outcome, CliError> {
    let params = a.params.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, 0));
    let inst = gen_instance(&params, a.case.into(), a.density, &mut rng)?;

    let mut cfg = BTreeMap::new();
    a.params.describe(&mut cfg);
    cfg.insert("case".into(), format!("{:?}", a.case).to_lowercase());
    cfg.insert("density".into(), a.density.to_string());
    let mut report = Report::new(Header::new("gen-instance", a.seed, cfg), &["party", "index"]);
    for (r, share) in inst.shares().iter().enumerate() {
        for i in share.support() {
            report.push(vec![json!(r + 1), json!(i)]);
        }
    }
    report.set("n", params.n());
    report.set("t", params.t());
    report.set("p", params.p());
    report.set("eps", params.eps().to_string());
    match inst.truth() {
        Truth::Disjoint => report.set("truth", "disjoint"),
        Truth::CommonElement(i) => {
            report.set("truth", "common_element");
            report.set("common_index", i);
        }
    }
    report.set(
        "instance",
        serde_json::to_value(inst.to_document()).expect("instance document serializes"),
    );
    Ok(Outcome {
        report,
        exit: EXIT_OK,
    })
}
