// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::codec::{Decoder, Encoder};
use super::hash::seeded_hash;
use super::{Guarantee, Sketch, StreamUpdate};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KMVS";
const VERSION: u8 = 1;

/// Fixed part of a serialized [`KmvSketch`].
pub const KMV_HEADER_BYTES: usize = 4 + 1 + 4 + 8 + 8 + 8 + 4;
/// Bytes per retained hash value.
pub const KMV_VALUE_BYTES: usize = 8;

/// Distinct-elements sketch keeping the `k` smallest 64-bit hashes.
#[derive(Debug, Clone, PartialEq)]
pub struct KmvSketch {
    k: usize,
    seed: u64,
    eps: f64,
    delta: f64,
    values: BTreeSet<u64>,
}

impl KmvSketch {
    pub fn new(k: usize, seed: u64, eps: f64, delta: f64) -> Result<Self> {
        if k < 2 || k > u32::MAX as usize {
            return Err(Error::invalid(format!("KMV needs 2 <= k < 2^32, got {k}")));
        }
        Ok(KmvSketch {
            k,
            seed,
            eps,
            delta,
            values: BTreeSet::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn retained(&self) -> usize {
        self.values.len()
    }

    pub fn payload_len(&self) -> usize {
        KMV_HEADER_BYTES + KMV_VALUE_BYTES * self.values.len()
    }
}

impl Sketch for KmvSketch {
    fn insert(&mut self, update: StreamUpdate) -> Result<()> {
        let h = seeded_hash(self.seed, update.index());
        if self.values.len() < self.k {
            self.values.insert(h);
        } else if let Some(&max) = self.values.last() {
            if h < max && self.values.insert(h) {
                self.values.pop_last();
            }
        }
        Ok(())
    }

    fn estimate(&self) -> f64 {
        if self.values.len() < self.k {
            return self.values.len() as f64;
        }
        let max = *self.values.last().expect("k >= 2 values retained");
        // normalise to (0, 1]; `max + 1` keeps a zero hash from dividing by 0
        let u = (max as f64 + 1.0) / 2f64.powi(64);
        (self.k - 1) as f64 / u
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, VERSION, self.payload_len());
        enc.u32(self.k as u32)
            .u64(self.seed)
            .f64(self.eps)
            .f64(self.delta)
            .u32(self.values.len() as u32);
        for &v in &self.values {
            enc.u64(v);
        }
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
        let k = dec.u32()? as usize;
        let seed = dec.u64()?;
        let eps = dec.f64()?;
        let delta = dec.f64()?;
        let count = dec.u32()? as usize;
        if k < 2 || count > k {
            return Err(Error::corrupt(format!("KMV count {count} with k {k}")));
        }
        if count * KMV_VALUE_BYTES != dec.remaining() {
            return Err(Error::corrupt("KMV value block has the wrong length"));
        }
        let mut values = BTreeSet::new();
        let mut prev: Option<u64> = None;
        for _ in 0..count {
            let v = dec.u64()?;
            if prev.is_some_and(|p| v <= p) {
                return Err(Error::corrupt("KMV values not strictly increasing"));
            }
            prev = Some(v);
            values.insert(v);
        }
        dec.finish()?;
        Ok(KmvSketch {
            k,
            seed,
            eps,
            delta,
            values,
        })
    }

    fn declared(&self) -> Guarantee {
        Guarantee {
            eps: self.eps,
            delta: self.delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_below_k() {
        let mut s = KmvSketch::new(64, 1, 0.1, 0.05).unwrap();
        for i in 1..=40 {
            s.insert(StreamUpdate::arrival(i).unwrap()).unwrap();
            s.insert(StreamUpdate::new(i, 3.0).unwrap()).unwrap();
        }
        assert_eq!(s.estimate(), 40.0);
    }

    #[test]
    fn rough_accuracy_above_k() {
        let mut s = KmvSketch::new(1024, 7, 0.1, 0.05).unwrap();
        for i in 1..=100_000 {
            s.insert(StreamUpdate::arrival(i).unwrap()).unwrap();
        }
        let rel = (s.estimate() - 100_000.0).abs() / 100_000.0;
        assert!(rel < 0.15, "relative error {rel}");
        assert_eq!(s.retained(), 1024);
    }

    #[test]
    fn payload_layout() {
        let mut s = KmvSketch::new(8, 3, 0.1, 0.05).unwrap();
        for i in 1..=5 {
            s.insert(StreamUpdate::arrival(i).unwrap()).unwrap();
        }
        let b = s.to_bytes();
        assert_eq!(b.len(), KMV_HEADER_BYTES + 5 * KMV_VALUE_BYTES);
        assert_eq!(KmvSketch::from_bytes(&b).unwrap(), s);

        let mut trailing = b.clone();
        trailing.push(0);
        assert!(KmvSketch::from_bytes(&trailing).is_err());

        // swap two values so they are out of order
        let mut swapped = b.clone();
        let v0 = KMV_HEADER_BYTES;
        let (a, rest) = swapped[v0..].split_at_mut(8);
        a.swap_with_slice(&mut rest[..8]);
        assert!(KmvSketch::from_bytes(&swapped).is_err());
    }
}
