// SPDX-License-Identifier: Apache-2.0

//! AMS frequency-moment sketch with a median-of-means estimator.
//!
//! Each cell samples a uniform stream position by reservoir sampling and
//! counts how often the sampled item occurs from there on. Reservoir
//! replacements are generated by geometric jumps: from a replacement at
//! position `pos`, the next one is at `floor(pos / U) + 1` with `U` uniform
//! in `(0, 1]`, which has `P(next > j) = pos / j` as required. `U` is a hash
//! of `(seed, cell, pos)`, so a weight-`w` update costs `O(log)` jumps rather
//! than `w` coin flips, and forks fed the same updates stay identical.

use std::collections::HashMap;

use super::codec::{Decoder, Encoder};
use super::hash::{seeded_hash, unit_open};
use super::{FpSketch, Guarantee, Prober, Sketch, StreamUpdate};
use crate::error::{Error, Result};
use crate::util::median_in_place;

const MAGIC: &[u8; 4] = b"AMSF";
const VERSION: u8 = 1;
/// Weights are kept exact in `u64`; larger values lose integrality in `f64`.
const MAX_WEIGHT: f64 = 9_007_199_254_740_992.0;

/// Fixed part of a serialized [`AmsFpSketch`].
pub const AMS_HEADER_BYTES: usize = 4 + 1 + 4 + 4 + 4 + 8 + 8 + 8 + 8;
/// Bytes per cell: item, count, next replacement position.
pub const AMS_RECORD_BYTES: usize = 24;

/// Next reservoir replacement after one at `pos`, given `u` in `(0, 1]`.
#[inline]
pub fn next_jump(pos: u64, u: f64) -> u64 {
    // `as` saturates, which is the right answer for astronomically far jumps
    ((pos as f64 / u).floor() as u64).saturating_add(1)
}

/// One estimator cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AmsCell {
    /// Sampled item, 0 while the stream is empty.
    item: u64,
    /// Occurrences of `item` at or after the sampled position.
    count: u64,
    /// Position of the next reservoir replacement.
    next: u64,
}

impl Default for AmsCell {
    fn default() -> Self {
        Self::new()
    }
}

impl AmsCell {
    pub const fn new() -> Self {
        AmsCell {
            item: 0,
            count: 0,
            next: 1,
        }
    }

    pub fn item(&self) -> u64 {
        self.item
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    /// Feeds `weight` arrivals of `index` at positions `len + 1 ..= len +
    /// weight`. `draw(pos)` supplies the uniform for the jump out of `pos`.
    pub fn advance(&mut self, len: u64, index: u64, weight: u64, draw: &mut impl FnMut(u64) -> f64) {
        let end = len + weight;
        if self.next > end {
            if self.item == index {
                self.count += weight;
            }
            return;
        }
        let mut last = self.next;
        let mut next = next_jump(last, draw(last));
        while next <= end {
            last = next;
            next = next_jump(last, draw(last));
        }
        self.item = index;
        self.count = end - last + 1;
        self.next = next;
    }

    /// Unbiased single-cell estimate `len * (c^p - (c-1)^p)`.
    pub fn value(&self, len: u64, p: u32) -> u128 {
        increment_value(len, self.count, p)
    }
}

fn increment_value(len: u64, count: u64, p: u32) -> u128 {
    if count == 0 {
        return 0;
    }
    let hi = (count as u128).saturating_pow(p);
    let lo = (count as u128 - 1).saturating_pow(p);
    (len as u128).saturating_mul(hi - lo)
}

fn integral_weight(weight: f64) -> Result<u64> {
    if weight.fract() != 0.0 || weight > MAX_WEIGHT {
        return Err(Error::NonIntegerWeight(weight));
    }
    Ok(weight as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmsFpSketch {
    p: u32,
    rows: usize,
    cols: usize,
    seed: u64,
    eps: f64,
    delta: f64,
    len: u64,
    cells: Vec<AmsCell>,
}

impl AmsFpSketch {
    pub fn new(p: u32, rows: usize, cols: usize, seed: u64, eps: f64, delta: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("AMS needs an integer order p >= 1"));
        }
        if rows == 0 || cols == 0 || rows > u32::MAX as usize || cols > u32::MAX as usize {
            return Err(Error::invalid(format!("bad AMS shape {rows} x {cols}")));
        }
        Ok(AmsFpSketch {
            p,
            rows,
            cols,
            seed,
            eps,
            delta,
            len: 0,
            cells: vec![AmsCell::new(); rows * cols],
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total inserted weight.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cells(&self) -> &[AmsCell] {
        &self.cells
    }

    pub fn payload_len(&self) -> usize {
        AMS_HEADER_BYTES + AMS_RECORD_BYTES * self.cells.len()
    }

    fn drawer(seed: u64, cell: usize) -> impl FnMut(u64) -> f64 {
        let cell_seed = seeded_hash(seed, cell as u64);
        move |pos| unit_open(seeded_hash(cell_seed, pos))
    }

    fn median_of_rows(&self, row_sums: &[u128]) -> f64 {
        let mut means: Vec<f64> = row_sums
            .iter()
            .map(|&s| s as f64 / self.cols as f64)
            .collect();
        median_in_place(&mut means)
    }

    fn row_sums_at(&self, len: u64) -> Vec<u128> {
        self.cells
            .chunks(self.cols)
            .map(|row| {
                row.iter()
                    .fold(0u128, |acc, c| acc.saturating_add(c.value(len, self.p)))
            })
            .collect()
    }
}

impl Sketch for AmsFpSketch {
    fn insert(&mut self, update: StreamUpdate) -> Result<()> {
        let w = integral_weight(update.weight())?;
        let len = self.len;
        for (idx, cell) in self.cells.iter_mut().enumerate() {
            cell.advance(len, update.index(), w, &mut Self::drawer(self.seed, idx));
        }
        self.len += w;
        Ok(())
    }

    /// Same result as inserting one by one, but each cell only visits the
    /// updates where its reservoir actually jumps.
    fn insert_all(&mut self, updates: &[StreamUpdate]) -> Result<()> {
        if updates.is_empty() {
            return Ok(());
        }
        let weights = updates
            .iter()
            .map(|u| integral_weight(u.weight()))
            .collect::<Result<Vec<u64>>>()?;
        // ends[k]: stream position of the last arrival of update k
        let mut ends = Vec::with_capacity(updates.len());
        let mut pos = self.len;
        for &w in &weights {
            pos += w;
            ends.push(pos);
        }
        let end = pos;
        // later[k]: weight of the same index in updates after k
        let mut later = vec![0u64; updates.len()];
        let mut totals: HashMap<u64, u64> = HashMap::new();
        for k in (0..updates.len()).rev() {
            let t = totals.entry(updates[k].index()).or_insert(0);
            later[k] = *t;
            *t += weights[k];
        }

        for (idx, cell) in self.cells.iter_mut().enumerate() {
            if cell.next > end {
                if let Some(&t) = totals.get(&cell.item) {
                    cell.count += t;
                }
                continue;
            }
            let mut draw = Self::drawer(self.seed, idx);
            let mut last = cell.next;
            let mut next = next_jump(last, draw(last));
            while next <= end {
                last = next;
                next = next_jump(last, draw(last));
            }
            let k = ends.partition_point(|&e| e < last);
            cell.item = updates[k].index();
            cell.count = ends[k] - last + 1 + later[k];
            cell.next = next;
        }
        self.len = end;
        Ok(())
    }

    fn estimate(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        self.median_of_rows(&self.row_sums_at(self.len))
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, VERSION, self.payload_len());
        enc.u32(self.p)
            .u32(self.rows as u32)
            .u32(self.cols as u32)
            .u64(self.seed)
            .f64(self.eps)
            .f64(self.delta)
            .u64(self.len);
        for c in &self.cells {
            enc.u64(c.item).u64(c.count).u64(c.next);
        }
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
        let p = dec.u32()?;
        let rows = dec.u32()? as usize;
        let cols = dec.u32()? as usize;
        let seed = dec.u64()?;
        let eps = dec.f64()?;
        let delta = dec.f64()?;
        let len = dec.u64()?;
        if p == 0 || rows == 0 || cols == 0 {
            return Err(Error::corrupt(format!("bad AMS header p={p} {rows}x{cols}")));
        }
        let n_cells = rows
            .checked_mul(cols)
            .filter(|&c| c.checked_mul(AMS_RECORD_BYTES) == Some(dec.remaining()))
            .ok_or_else(|| Error::corrupt("AMS cell block has the wrong length"))?;
        let mut cells = Vec::with_capacity(n_cells);
        for _ in 0..n_cells {
            let cell = AmsCell {
                item: dec.u64()?,
                count: dec.u64()?,
                next: dec.u64()?,
            };
            let empty = cell.item == 0;
            if empty != (len == 0) || empty != (cell.count == 0) || cell.count > len || cell.next <= len {
                return Err(Error::corrupt(format!("inconsistent AMS cell {cell:?} at len {len}")));
            }
            cells.push(cell);
        }
        dec.finish()?;
        Ok(AmsFpSketch {
            p,
            rows,
            cols,
            seed,
            eps,
            delta,
            len,
            cells,
        })
    }

    fn declared(&self) -> Guarantee {
        Guarantee {
            eps: self.eps,
            delta: self.delta,
        }
    }
}

/// A row whose sum changes when the probe lands on `item`.
#[derive(Debug, Clone, Copy)]
struct Patch {
    item: u64,
    row: usize,
    delta: u128,
}

/// Answers every probe of one weight from a single pass over the cells.
///
/// A cell whose reservoir jumps inside the probe block ends up sampling the
/// probe item whatever it is, so its value is the same for every probe.
/// Otherwise its value only changes if the probe hits its sampled item.
struct AmsProber {
    base_rows: Vec<u128>,
    base_estimate: f64,
    patches: Vec<Patch>,
    cols: usize,
}

impl AmsProber {
    fn new(sketch: &AmsFpSketch, weight: u64) -> Self {
        let len = sketch.len + weight;
        let p = sketch.p;
        let mut base_rows = vec![0u128; sketch.rows];
        let mut patches = Vec::new();
        for (idx, cell) in sketch.cells.iter().enumerate() {
            let row = idx / sketch.cols;
            let value = if cell.next <= len {
                let mut moved = *cell;
                moved.advance(sketch.len, u64::MAX, weight, &mut AmsFpSketch::drawer(sketch.seed, idx));
                moved.value(len, p)
            } else {
                let here = increment_value(len, cell.count, p);
                if cell.item != 0 {
                    let hit = increment_value(len, cell.count + weight, p);
                    patches.push(Patch {
                        item: cell.item,
                        row,
                        delta: hit - here,
                    });
                }
                here
            };
            base_rows[row] = base_rows[row].saturating_add(value);
        }
        patches.sort_unstable_by_key(|pt| (pt.item, pt.row));
        let mut prober = AmsProber {
            base_rows,
            base_estimate: 0.0,
            patches,
            cols: sketch.cols,
        };
        prober.base_estimate = prober.median(&prober.base_rows);
        prober
    }

    fn median(&self, rows: &[u128]) -> f64 {
        let mut means: Vec<f64> = rows.iter().map(|&s| s as f64 / self.cols as f64).collect();
        median_in_place(&mut means)
    }
}

impl Prober for AmsProber {
    fn estimate_at(&self, index: u64) -> Result<f64> {
        if index == 0 {
            return Err(Error::invalid("stream indices start at 1"));
        }
        let start = self.patches.partition_point(|pt| pt.item < index);
        let hits = self.patches[start..]
            .iter()
            .take_while(|pt| pt.item == index);
        let mut rows = None;
        for pt in hits {
            let r = rows.get_or_insert_with(|| self.base_rows.clone());
            r[pt.row] = r[pt.row].saturating_add(pt.delta);
        }
        Ok(match rows {
            Some(r) => self.median(&r),
            None => self.base_estimate,
        })
    }

    fn run_end(&self, index: u64) -> u64 {
        let start = self.patches.partition_point(|pt| pt.item < index);
        match self.patches.get(start) {
            Some(pt) if pt.item == index => index,
            Some(pt) => pt.item - 1,
            None => u64::MAX,
        }
    }
}

impl FpSketch for AmsFpSketch {
    fn prober(&self, weight: f64) -> Result<Box<dyn Prober + '_>> {
        StreamUpdate::new(1, weight)?;
        let w = integral_weight(weight)?;
        Ok(Box::new(AmsProber::new(self, w)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::ForkProber;

    fn up(i: u64, w: f64) -> StreamUpdate {
        StreamUpdate::new(i, w).unwrap()
    }

    #[test]
    fn jump_distribution_edges() {
        assert_eq!(next_jump(1, 1.0), 2);
        assert_eq!(next_jump(10, 0.5), 21);
        assert_eq!(next_jump(u64::MAX / 2, 1e-300), u64::MAX);
    }

    #[test]
    fn first_arrival_is_always_sampled() {
        let mut c = AmsCell::new();
        c.advance(0, 7, 1, &mut |_| 1.0);
        assert_eq!((c.item(), c.count(), c.next()), (7, 1, 2));
        // U = 1 replaces at every position
        c.advance(1, 9, 3, &mut |_| 1.0);
        assert_eq!((c.item(), c.count(), c.next()), (9, 1, 5));
        // the pending replacement at 5 still happens, then U tiny pushes the
        // next one out of reach and the count keeps growing
        c.advance(4, 9, 2, &mut |_| 1e-9);
        assert_eq!((c.item(), c.count()), (9, 2));
        c.advance(6, 9, 3, &mut |_| 1e-9);
        assert_eq!((c.item(), c.count()), (9, 5));
    }

    #[test]
    fn value_is_telescoping_increment() {
        let c = AmsCell {
            item: 3,
            count: 4,
            next: 100,
        };
        assert_eq!(c.value(10, 3), 10 * (64 - 27));
    }

    #[test]
    fn rejects_fractional_weights() {
        let mut s = AmsFpSketch::new(3, 3, 4, 0, 0.1, 0.1).unwrap();
        assert_eq!(s.insert(up(1, 1.5)), Err(Error::NonIntegerWeight(1.5)));
        assert!(s.prober(2.5).is_err());
    }

    #[test]
    fn batched_insert_matches_sequential() {
        let stream: Vec<StreamUpdate> = [(3, 1.0), (5, 2.0), (3, 4.0), (9, 1.0), (5, 1.0), (2, 16.0), (3, 1.0)]
            .iter()
            .map(|&(i, w)| up(i, w))
            .collect();
        let mut a = AmsFpSketch::new(3, 5, 40, 11, 0.1, 0.1).unwrap();
        let mut b = a.clone();
        a.insert(stream[0]).unwrap();
        b.insert(stream[0]).unwrap();
        for u in &stream[1..] {
            a.insert(*u).unwrap();
        }
        b.insert_all(&stream[1..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prober_is_bit_identical_to_fork_path() {
        let mut s = AmsFpSketch::new(3, 7, 25, 5, 0.1, 0.1).unwrap();
        let stream: Vec<StreamUpdate> = (1..=30).map(|i| up(1 + (i * 7) % 13, 1.0)).collect();
        s.insert_all(&stream).unwrap();
        let fast = s.prober(8.0).unwrap();
        let slow = ForkProber::new(&s, 8.0).unwrap();
        for i in 1..=20 {
            let (a, b) = (fast.estimate_at(i).unwrap(), slow.estimate_at(i).unwrap());
            assert_eq!(a.to_bits(), b.to_bits(), "i={i}: {a} vs {b}");
        }
        let mut i = 1;
        while i <= 20 {
            let end = fast.run_end(i).min(20);
            let v = fast.estimate_at(i).unwrap();
            for j in i..=end {
                assert_eq!(slow.estimate_at(j).unwrap().to_bits(), v.to_bits());
            }
            i = end + 1;
        }
    }

    #[test]
    fn payload_round_trip_and_validation() {
        let mut s = AmsFpSketch::new(4, 3, 5, 9, 0.1, 0.01).unwrap();
        s.insert_all(&[up(1, 1.0), up(2, 3.0), up(1, 2.0)]).unwrap();
        let b = s.to_bytes();
        assert_eq!(b.len(), AMS_HEADER_BYTES + 15 * AMS_RECORD_BYTES);
        assert_eq!(AmsFpSketch::from_bytes(&b).unwrap(), s);
        assert!(AmsFpSketch::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        // zero the first cell's item while len > 0
        bad[AMS_HEADER_BYTES..AMS_HEADER_BYTES + 8].fill(0);
        assert!(matches!(AmsFpSketch::from_bytes(&bad), Err(Error::CorruptPayload(_))));
    }
}
