// SPDX-License-Identifier: Apache-2.0

//! An estimator that meets the `(1 +- eps)` contract with probability one by
//! perturbing the exact value inside the band. It isolates the decision
//! logic from the behaviour of any particular sketch.
//!
//! `AdversarialWorst` always returns a band endpoint, chosen to push the
//! decision procedure toward the wrong answer:
//!
//! * `F_0` reads high when some coordinate is heavy (count >= 2), which
//!   raises the firing threshold for the heavy probe, and low otherwise,
//!   which lowers it for a disjoint instance.
//! * `F_p` reads low right after a probe that landed on a heavy coordinate
//!   and high in every other state.

use std::str::FromStr;

use super::codec::{Decoder, Encoder};
use super::exact::{ExactEstimator, Moment};
use super::hash::{seeded_hash, unit_open};
use super::{FpSketch, Guarantee, Prober, Sketch, StreamUpdate};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NOIS";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    RandomUniform,
    AdversarialWorst,
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random-uniform" => Ok(NoiseMode::RandomUniform),
            "adversarial" | "adversarial-worst" => Ok(NoiseMode::AdversarialWorst),
            other => Err(Error::invalid(format!("unknown noise mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LastUpdate {
    index: u64,
    weight: f64,
    /// `x(index)` before the update.
    prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOracleEstimator {
    mode: NoiseMode,
    eps: f64,
    seed: u64,
    inner: ExactEstimator,
    updates: u64,
    last: Option<LastUpdate>,
}

impl NoisyOracleEstimator {
    pub fn new(moment: Moment, mode: NoiseMode, eps: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::invalid(format!("noise level {eps} must lie in [0, 1)")));
        }
        Ok(NoisyOracleEstimator {
            mode,
            eps,
            seed,
            inner: ExactEstimator::new(moment),
            updates: 0,
            last: None,
        })
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    /// The exact value the estimate is perturbed from.
    pub fn exact(&self) -> f64 {
        self.inner.estimate()
    }

    fn factor(&self, updates: u64, last: Option<LastUpdate>, heavy_present: bool) -> f64 {
        match self.mode {
            NoiseMode::RandomUniform => {
                let (i, w) = last.map_or((0, 0), |l| (l.index, l.weight.to_bits()));
                let h = seeded_hash(seeded_hash(seeded_hash(self.seed, updates), i), w);
                1.0 + self.eps * (2.0 * unit_open(h) - 1.0)
            }
            NoiseMode::AdversarialWorst => {
                let low = match self.inner.moment() {
                    Moment::Distinct => !heavy_present,
                    Moment::Power(_) => {
                        last.is_some_and(|l| l.weight > 1.0 && l.prior >= 2.0)
                    }
                };
                if low {
                    1.0 - self.eps
                } else {
                    1.0 + self.eps
                }
            }
        }
    }
}

impl Sketch for NoisyOracleEstimator {
    fn insert(&mut self, update: StreamUpdate) -> Result<()> {
        let prior = self.inner.count(update.index());
        self.inner.insert(update)?;
        self.updates += 1;
        self.last = Some(LastUpdate {
            index: update.index(),
            weight: update.weight(),
            prior,
        });
        Ok(())
    }

    fn estimate(&self) -> f64 {
        let heavy = self.inner.max_count() >= 2.0;
        self.exact() * self.factor(self.updates, self.last, heavy)
    }

    fn to_bytes(&self) -> Vec<u8> {
        let inner = self.inner.to_bytes();
        let mut enc = Encoder::new(MAGIC, VERSION, 64 + inner.len());
        enc.u8(match self.mode {
            NoiseMode::RandomUniform => 0,
            NoiseMode::AdversarialWorst => 1,
        })
        .f64(self.eps)
        .u64(self.seed)
        .u64(self.updates);
        match self.last {
            Some(l) => enc.u8(1).u64(l.index).f64(l.weight).f64(l.prior),
            None => enc.u8(0).u64(0).f64(0.0).f64(0.0),
        };
        enc.u64(inner.len() as u64).bytes(&inner);
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
        let mode = match dec.u8()? {
            0 => NoiseMode::RandomUniform,
            1 => NoiseMode::AdversarialWorst,
            m => return Err(Error::corrupt(format!("bad noise mode {m}"))),
        };
        let eps = dec.f64()?;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::corrupt(format!("bad noise level {eps}")));
        }
        let seed = dec.u64()?;
        let updates = dec.u64()?;
        let has_last = dec.u8()?;
        let (index, weight, prior) = (dec.u64()?, dec.f64()?, dec.f64()?);
        let last = match has_last {
            0 => None,
            1 => Some(LastUpdate {
                index,
                weight,
                prior,
            }),
            b => return Err(Error::corrupt(format!("bad flag {b}"))),
        };
        let len = dec.u64()? as usize;
        if len > dec.remaining() {
            return Err(Error::corrupt("inner payload truncated"));
        }
        let inner = ExactEstimator::from_bytes(dec.bytes(len)?)?;
        dec.finish()?;
        Ok(NoisyOracleEstimator {
            mode,
            eps,
            seed,
            inner,
            updates,
            last,
        })
    }

    fn declared(&self) -> Guarantee {
        Guarantee {
            eps: self.eps,
            delta: 0.0,
        }
    }
}

struct NoisyProber<'a> {
    sketch: &'a NoisyOracleEstimator,
    base: f64,
    weight: f64,
    heavy: bool,
}

impl Prober for NoisyProber<'_> {
    fn estimate_at(&self, index: u64) -> Result<f64> {
        let s = self.sketch;
        let prior = s.inner.count(index);
        let exact = s.inner.value_after(self.base, index, self.weight);
        let last = Some(LastUpdate {
            index,
            weight: self.weight,
            prior,
        });
        let heavy = self.heavy || prior + self.weight >= 2.0;
        Ok(exact * s.factor(s.updates + 1, last, heavy))
    }

    fn run_end(&self, index: u64) -> u64 {
        match self.sketch.mode {
            NoiseMode::RandomUniform => index,
            NoiseMode::AdversarialWorst => self.sketch.inner.untouched_run_end(index),
        }
    }
}

impl FpSketch for NoisyOracleEstimator {
    fn prober(&self, weight: f64) -> Result<Box<dyn Prober + '_>> {
        StreamUpdate::new(1, weight)?;
        Ok(Box::new(NoisyProber {
            sketch: self,
            base: self.exact(),
            weight,
            heavy: self.inner.max_count() >= 2.0,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::ForkProber;
    use proptest::prelude::*;

    fn up(i: u64, w: f64) -> StreamUpdate {
        StreamUpdate::new(i, w).unwrap()
    }

    #[test]
    fn adversarial_endpoints() {
        // fp = 1000 from a single coordinate of weight 10
        let mut e =
            NoisyOracleEstimator::new(Moment::Power(3.0), NoiseMode::AdversarialWorst, 0.025, 0)
                .unwrap();
        e.insert(up(1, 10.0)).unwrap();
        assert_eq!(e.exact(), 1000.0);
        // last update was not a probe onto a heavy coordinate
        assert_eq!(e.estimate(), 1025.0);

        let mut heavy =
            NoisyOracleEstimator::new(Moment::Power(3.0), NoiseMode::AdversarialWorst, 0.025, 0)
                .unwrap();
        heavy.insert(up(2, 1.0)).unwrap();
        heavy.insert(up(2, 1.0)).unwrap();
        heavy.insert(up(2, 8.0)).unwrap();
        assert_eq!(heavy.exact(), 1000.0);
        assert_eq!(heavy.estimate(), 975.0);
    }

    #[test]
    fn adversarial_distinct_reads_high_when_heavy() {
        let mut e =
            NoisyOracleEstimator::new(Moment::Distinct, NoiseMode::AdversarialWorst, 0.1, 0)
                .unwrap();
        for i in 1..=10 {
            e.insert(up(i, 1.0)).unwrap();
        }
        assert!((e.estimate() - 9.0).abs() < 1e-12);
        e.insert(up(3, 1.0)).unwrap();
        assert!((e.estimate() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn prober_matches_fork_path() {
        for mode in [NoiseMode::AdversarialWorst, NoiseMode::RandomUniform] {
            let mut e = NoisyOracleEstimator::new(Moment::Power(3.0), mode, 0.09, 42).unwrap();
            for i in [1, 4, 4, 7] {
                e.insert(up(i, 1.0)).unwrap();
            }
            let fast = e.prober(16.0).unwrap();
            let slow = ForkProber::new(&e, 16.0).unwrap();
            for i in 1..=10 {
                let (a, b) = (fast.estimate_at(i).unwrap(), slow.estimate_at(i).unwrap());
                assert!((a - b).abs() <= 1e-12 * b, "{mode:?} i={i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn round_trip() {
        let mut e =
            NoisyOracleEstimator::new(Moment::Power(3.0), NoiseMode::RandomUniform, 0.2, 9).unwrap();
        e.insert(up(3, 1.0)).unwrap();
        let back = NoisyOracleEstimator::from_bytes(&e.to_bytes()).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.estimate().to_bits(), e.estimate().to_bits());
        assert!(NoisyOracleEstimator::from_bytes(&e.to_bytes()[..20]).is_err());
    }

    proptest! {
        #[test]
        fn never_leaves_band(
            updates in proptest::collection::vec((1u64..50, 1u32..20), 1..40),
            eps in 0.0f64..0.5,
            seed in any::<u64>(),
            adversarial in any::<bool>(),
            distinct in any::<bool>(),
        ) {
            let mode = if adversarial { NoiseMode::AdversarialWorst } else { NoiseMode::RandomUniform };
            let moment = if distinct { Moment::Distinct } else { Moment::Power(3.0) };
            let mut e = NoisyOracleEstimator::new(moment, mode, eps, seed).unwrap();
            for (i, w) in updates {
                e.insert(up(i, w as f64)).unwrap();
                let exact = e.exact();
                let est = e.estimate();
                prop_assert!(est >= (1.0 - eps) * exact * (1.0 - 1e-12));
                prop_assert!(est <= (1.0 + eps) * exact * (1.0 + 1e-12));
            }
        }
    }
}
