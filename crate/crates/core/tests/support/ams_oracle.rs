// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

//! Brute-force expectation of a single AMS cell.
//!
//! Every reservoir draw is replaced by a scripted uniform chosen to land the
//! next replacement on a specific position `k`, weighted by its exact
//! probability `L / (k (k - 1))` (or `L / H` for "after the stream ends").
//! Enumerating all scripts, with identical cell states merged, gives the
//! exact distribution of the cell after a stream, so its expectation can be
//! compared against `sum x_i^p` with rational arithmetic.

use std::collections::{BTreeMap, HashMap};

use fpdisj_core::sketch::AmsCell;
use num::{BigInt, BigRational, One, Zero};

fn ratio(a: u64, b: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// All outcomes of feeding `(index, weight)` to `cell` at stream length `len`,
/// for a stream of total length `horizon`.
pub fn transitions(cell: AmsCell, len: u64, index: u64, weight: u64, horizon: u64) -> Vec<(AmsCell, BigRational)> {
    let mut out = Vec::new();
    // (choice, number of options) per draw, in call order
    let mut path: Vec<(u64, u64)> = Vec::new();
    loop {
        let mut c = cell;
        let mut depth = 0;
        let mut prob = BigRational::one();
        let mut expected_pos: Option<u64> = None;
        c.advance(len, index, weight, &mut |pos| {
            if let Some(e) = expected_pos {
                assert_eq!(pos, e, "jump chain did not follow the scripted draw");
            }
            let options = horizon - pos + 1;
            if depth == path.len() {
                path.push((0, options));
            }
            let choice = path[depth].0;
            assert_eq!(path[depth].1, options);
            depth += 1;
            let l = pos as f64;
            if choice < horizon - pos {
                let k = pos + 1 + choice;
                prob *= ratio(pos, k * (k - 1));
                expected_pos = Some(k);
                // strictly inside (L/k, L/(k-1)] so that floor(L/U) = k - 1
                (l / k as f64 + l / (k - 1) as f64) / 2.0
            } else {
                prob *= ratio(pos, horizon);
                expected_pos = None;
                l / (2.0 * horizon as f64)
            }
        });
        assert_eq!(depth, path.len(), "draw script not fully consumed");
        out.push((c, prob));
        while let Some(last) = path.last_mut() {
            if last.0 + 1 < last.1 {
                last.0 += 1;
                break;
            }
            path.pop();
        }
        if path.is_empty() {
            return out;
        }
    }
}

/// Exact `E[value]` of one cell after `stream`, and the total probability.
pub fn expectation(stream: &[(u64, u64)], p: u32) -> (BigRational, BigRational) {
    let horizon: u64 = stream.iter().map(|&(_, w)| w).sum();
    let mut states: HashMap<AmsCell, BigRational> = HashMap::new();
    states.insert(AmsCell::new(), BigRational::one());
    let mut len = 0;
    for &(index, weight) in stream {
        let mut next: HashMap<AmsCell, BigRational> = HashMap::new();
        for (cell, prob) in &states {
            for (c, q) in transitions(*cell, len, index, weight, horizon) {
                *next.entry(c).or_insert_with(BigRational::zero) += prob * q;
            }
        }
        states = next;
        len += weight;
    }
    let mut mean = BigRational::zero();
    let mut mass = BigRational::zero();
    for (cell, prob) in states {
        mean += &prob * BigRational::from_integer(BigInt::from(cell.value(horizon, p)));
        mass += prob;
    }
    (mean, mass)
}

pub fn moment(stream: &[(u64, u64)], p: u32) -> BigRational {
    let mut x: BTreeMap<u64, u64> = BTreeMap::new();
    for &(i, w) in stream {
        *x.entry(i).or_insert(0) += w;
    }
    let total: u128 = x.values().map(|&c| (c as u128).pow(p)).sum();
    BigRational::from_integer(BigInt::from(total))
}

/// True when the cell distribution is a probability distribution whose mean
/// is exactly `sum x_i^p`.
pub fn expectation_matches(stream: &[(u64, u64)], p: u32) -> bool {
    let (mean, mass) = expectation(stream, p);
    mass == BigRational::one() && mean == moment(stream, p)
}
