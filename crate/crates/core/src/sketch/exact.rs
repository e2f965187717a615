// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::codec::{Decoder, Encoder};
use super::{FpSketch, Guarantee, Prober, Sketch, StreamUpdate};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EXCT";
const VERSION: u8 = 1;

/// Which moment an estimator reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Distinct,
    Power(f64),
}

/// Reference estimator: keeps the whole frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactEstimator {
    moment: Moment,
    counts: BTreeMap<u64, f64>,
}

impl ExactEstimator {
    pub fn new(moment: Moment) -> Self {
        ExactEstimator {
            moment,
            counts: BTreeMap::new(),
        }
    }

    pub fn distinct() -> Self {
        Self::new(Moment::Distinct)
    }

    pub fn power(p: f64) -> Self {
        Self::new(Moment::Power(p))
    }

    pub fn moment(&self) -> Moment {
        self.moment
    }

    pub fn count(&self, index: u64) -> f64 {
        self.counts.get(&index).copied().unwrap_or(0.0)
    }

    pub fn max_count(&self) -> f64 {
        self.counts.values().copied().fold(0.0, f64::max)
    }

    /// Value of the moment after `x(index) += weight`, without mutating.
    pub(crate) fn value_after(&self, base: f64, index: u64, weight: f64) -> f64 {
        let c = self.count(index);
        match self.moment {
            Moment::Distinct => base + if c == 0.0 { 1.0 } else { 0.0 },
            Moment::Power(p) => base - c.powf(p) + (c + weight).powf(p),
        }
    }

    /// Last index of the run of untouched coordinates starting at `index`.
    pub(crate) fn untouched_run_end(&self, index: u64) -> u64 {
        if self.counts.contains_key(&index) {
            return index;
        }
        match self.counts.range(index..).next() {
            Some((&next, _)) => next - 1,
            None => u64::MAX,
        }
    }
}

impl Sketch for ExactEstimator {
    fn insert(&mut self, update: StreamUpdate) -> Result<()> {
        *self.counts.entry(update.index()).or_insert(0.0) += update.weight();
        Ok(())
    }

    fn estimate(&self) -> f64 {
        match self.moment {
            Moment::Distinct => self.counts.len() as f64,
            Moment::Power(p) => {
                let mut terms: Vec<f64> = self.counts.values().map(|c| c.powf(p)).collect();
                terms.sort_unstable_by(|a, b| b.total_cmp(a));
                terms.into_iter().sum()
            }
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, VERSION, 22 + 16 * self.counts.len());
        match self.moment {
            Moment::Distinct => enc.u8(0).f64(0.0),
            Moment::Power(p) => enc.u8(1).f64(p),
        };
        enc.u64(self.counts.len() as u64);
        for (&i, &c) in &self.counts {
            enc.u64(i).f64(c);
        }
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
        let tag = dec.u8()?;
        let p = dec.f64()?;
        let moment = match tag {
            0 => Moment::Distinct,
            1 if p.is_finite() && p > 0.0 => Moment::Power(p),
            _ => return Err(Error::corrupt(format!("bad moment tag {tag} / p {p}"))),
        };
        let len = dec.u64()?;
        if len > (dec.remaining() / 16) as u64 {
            return Err(Error::corrupt("entry count exceeds payload"));
        }
        let mut counts = BTreeMap::new();
        let mut prev = 0;
        for _ in 0..len {
            let i = dec.u64()?;
            let c = dec.f64()?;
            if i <= prev || !(c.is_finite() && c > 0.0) {
                return Err(Error::corrupt(format!("bad entry ({i}, {c})")));
            }
            prev = i;
            counts.insert(i, c);
        }
        dec.finish()?;
        Ok(ExactEstimator { moment, counts })
    }

    fn declared(&self) -> Guarantee {
        Guarantee::EXACT
    }
}

struct ExactProber<'a> {
    sketch: &'a ExactEstimator,
    base: f64,
    weight: f64,
}

impl Prober for ExactProber<'_> {
    fn estimate_at(&self, index: u64) -> Result<f64> {
        Ok(self.sketch.value_after(self.base, index, self.weight))
    }

    fn run_end(&self, index: u64) -> u64 {
        self.sketch.untouched_run_end(index)
    }
}

impl FpSketch for ExactEstimator {
    fn prober(&self, weight: f64) -> Result<Box<dyn Prober + '_>> {
        StreamUpdate::new(1, weight)?;
        Ok(Box::new(ExactProber {
            sketch: self,
            base: self.estimate(),
            weight,
        }))
    }
}
