// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::sketch::hash::derive_seed;
use crate::sketch::{
    amplification_plan, AmplificationPlan, AmsFpSketch, ExactEstimator, FpSketch, KmvSketch, Moment,
    NoiseMode, NoisyOracleEstimator, PlanConfig, Sketch,
};

/// Builds the fresh sketch pair party 1 starts from. Every party must use the
/// same factory so that payloads agree on seeds and shapes.
pub trait SketchFactory: Sync {
    type F0: Sketch;
    type Fp: FpSketch;

    fn make_f0(&self) -> Result<Self::F0>;
    fn make_fp(&self) -> Result<Self::Fp>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactFactory {
    p: f64,
}

impl ExactFactory {
    pub fn new(p: f64) -> Self {
        ExactFactory { p }
    }
}

impl SketchFactory for ExactFactory {
    type F0 = ExactEstimator;
    type Fp = ExactEstimator;

    fn make_f0(&self) -> Result<ExactEstimator> {
        Ok(ExactEstimator::distinct())
    }

    fn make_fp(&self) -> Result<ExactEstimator> {
        Ok(ExactEstimator::power(self.p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyFactory {
    p: f64,
    mode: NoiseMode,
    eps: f64,
    seed: u64,
}

impl NoisyFactory {
    pub fn new(p: f64, mode: NoiseMode, eps: f64, seed: u64) -> Self {
        NoisyFactory { p, mode, eps, seed }
    }

    /// Noise at the protocol's working accuracy `eps / 10`.
    pub fn for_params(params: &Parameters, mode: NoiseMode, seed: u64) -> Self {
        Self::new(params.p(), mode, params.eps_value() / 10.0, seed)
    }
}

impl SketchFactory for NoisyFactory {
    type F0 = NoisyOracleEstimator;
    type Fp = NoisyOracleEstimator;

    fn make_f0(&self) -> Result<NoisyOracleEstimator> {
        NoisyOracleEstimator::new(Moment::Distinct, self.mode, self.eps, derive_seed(self.seed, 0))
    }

    fn make_fp(&self) -> Result<NoisyOracleEstimator> {
        NoisyOracleEstimator::new(Moment::Power(self.p), self.mode, self.eps, derive_seed(self.seed, 1))
    }
}

/// KMV for `F_0`, AMS for `F_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmsKmvFactory {
    p: u32,
    seed: u64,
    fp_eps: f64,
    fp_delta: f64,
    fp_plan: AmplificationPlan,
    f0_eps: f64,
    f0_delta: f64,
    f0_plan: AmplificationPlan,
}

impl AmsKmvFactory {
    /// Sizes both sketches for accuracy `eps / 10`, with failure probability
    /// `1 / (20 n)` per `F_p` estimate and `1 / 20` for `F_0`.
    pub fn for_params(params: &Parameters, seed: u64, cfg: PlanConfig) -> Result<Self> {
        let p = params
            .integral_order()
            .ok_or_else(|| Error::invalid(format!("AMS needs an integer p, got {}", params.p())))?;
        let eps = params.eps_value() / 10.0;
        let fp_delta = 1.0 / (20.0 * params.n() as f64);
        let f0_delta = 1.0 / 20.0;
        Ok(AmsKmvFactory {
            p,
            seed,
            fp_eps: eps,
            fp_delta,
            fp_plan: amplification_plan(eps, fp_delta, cfg)?,
            f0_eps: eps,
            f0_delta,
            f0_plan: amplification_plan(eps, f0_delta, cfg)?,
        })
    }

    pub fn fp_plan(&self) -> AmplificationPlan {
        self.fp_plan
    }

    pub fn f0_plan(&self) -> AmplificationPlan {
        self.f0_plan
    }
}

impl SketchFactory for AmsKmvFactory {
    type F0 = KmvSketch;
    type Fp = AmsFpSketch;

    fn make_f0(&self) -> Result<KmvSketch> {
        KmvSketch::new(self.f0_plan.k, derive_seed(self.seed, 0), self.f0_eps, self.f0_delta)
    }

    fn make_fp(&self) -> Result<AmsFpSketch> {
        AmsFpSketch::new(
            self.p,
            self.fp_plan.rows,
            self.fp_plan.cols,
            derive_seed(self.seed, 1),
            self.fp_eps,
            self.fp_delta,
        )
    }
}
