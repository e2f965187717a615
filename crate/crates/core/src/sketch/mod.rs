// SPDX-License-Identifier: Apache-2.0

//! Insert-only streaming estimators behind one interface.
//!
//! Every sketch is cloneable (`fork`), byte-serializable, and deterministic:
//! all randomness is a pure function of its seed and the stream positions it
//! has seen, so two forks fed identical updates stay identical.
//!
//! | sketch                    | estimates        | weights        |
//! |---------------------------|------------------|----------------|
//! | [`ExactEstimator`]        | `F_0` or `F_p`   | any positive   |
//! | [`NoisyOracleEstimator`]  | `F_0` or `F_p`   | any positive   |
//! | [`KmvSketch`]             | `F_0`            | ignored        |
//! | [`AmsFpSketch`]           | `F_p`, integer p | integral only  |

mod ams;
pub(crate) mod codec;
mod exact;
pub mod hash;
mod kmv;
mod noisy;
mod plan;

pub use ams::{next_jump, AmsCell, AmsFpSketch, AMS_HEADER_BYTES, AMS_RECORD_BYTES};
pub use exact::{ExactEstimator, Moment};
pub use kmv::{KmvSketch, KMV_HEADER_BYTES, KMV_VALUE_BYTES};
pub use noisy::{NoiseMode, NoisyOracleEstimator};
pub use plan::{amplification_plan, AmplificationPlan, PlanConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x(index) += weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamUpdate {
    index: u64,
    weight: f64,
}

impl StreamUpdate {
    pub fn new(index: u64, weight: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::invalid("stream indices start at 1"));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::invalid(format!("weight {weight} must be positive")));
        }
        Ok(StreamUpdate { index, weight })
    }

    /// A single arrival of `index`.
    pub fn arrival(index: u64) -> Result<Self> {
        Self::new(index, 1.0)
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Declared accuracy: `|estimate - truth| <= eps * truth` except with
/// probability `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guarantee {
    pub eps: f64,
    pub delta: f64,
}

impl Guarantee {
    pub const EXACT: Guarantee = Guarantee {
        eps: 0.0,
        delta: 0.0,
    };
}

pub trait Sketch: Clone + Send + Sync + Sized {
    fn insert(&mut self, update: StreamUpdate) -> Result<()>;

    fn insert_all(&mut self, updates: &[StreamUpdate]) -> Result<()> {
        updates.iter().try_for_each(|&u| self.insert(u))
    }

    fn estimate(&self) -> f64;

    /// Independent copy; later updates to either side do not affect the other.
    fn fork(&self) -> Self {
        self.clone()
    }

    fn to_bytes(&self) -> Vec<u8>;

    fn from_bytes(bytes: &[u8]) -> Result<Self>;

    fn declared(&self) -> Guarantee;
}

/// Evaluates "insert `(index, weight)` into a fork, then estimate" for many
/// indices against one fixed sketch state.
pub trait Prober {
    fn estimate_at(&self, index: u64) -> Result<f64>;

    /// Largest `j >= index` such that every index in `[index, j]` is known to
    /// produce the same estimate as `index`. `u64::MAX` when unbounded.
    fn run_end(&self, index: u64) -> u64 {
        index
    }
}

/// A sketch that can answer the weighted probes of the decision procedure.
pub trait FpSketch: Sketch {
    /// Default: literally fork, insert and estimate for every probe.
    fn prober(&self, weight: f64) -> Result<Box<dyn Prober + '_>> {
        Ok(Box::new(ForkProber::new(self, weight)?))
    }
}

pub struct ForkProber<'a, S> {
    base: &'a S,
    weight: f64,
}

impl<'a, S: Sketch> ForkProber<'a, S> {
    pub fn new(base: &'a S, weight: f64) -> Result<Self> {
        StreamUpdate::new(1, weight)?;
        Ok(ForkProber { base, weight })
    }
}

impl<S: Sketch> Prober for ForkProber<'_, S> {
    fn estimate_at(&self, index: u64) -> Result<f64> {
        let mut fork = self.base.fork();
        fork.insert(StreamUpdate::new(index, self.weight)?)?;
        Ok(fork.estimate())
    }
}
