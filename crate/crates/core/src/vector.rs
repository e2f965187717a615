// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse non-negative integer vector over the domain `[1, dim]`.
///
/// Zero coordinates are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyVector {
    dim: u64,
    entries: BTreeMap<u64, u64>,
}

impl FrequencyVector {
    pub fn zeros(dim: u64) -> Self {
        FrequencyVector {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// The standard basis vector `e_i`.
    pub fn unit(dim: u64, i: u64) -> Result<Self> {
        let mut v = Self::zeros(dim);
        v.add(i, 1)?;
        Ok(v)
    }

    /// Characteristic vector of a set of indices. Repeated indices are
    /// counted once.
    pub fn indicator<I: IntoIterator<Item = u64>>(dim: u64, indices: I) -> Result<Self> {
        let mut v = Self::zeros(dim);
        for i in indices {
            v.check_index(i)?;
            v.entries.insert(i, 1);
        }
        Ok(v)
    }

    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(dim: u64, counts: I) -> Result<Self> {
        let mut v = Self::zeros(dim);
        for (i, c) in counts {
            v.add(i, c)?;
        }
        Ok(v)
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn get(&self, i: u64) -> u64 {
        self.entries.get(&i).copied().unwrap_or(0)
    }

    /// `x(i) += count`.
    pub fn add(&mut self, i: u64, count: u64) -> Result<()> {
        self.check_index(i)?;
        if count > 0 {
            let slot = self.entries.entry(i).or_insert(0);
            *slot = slot
                .checked_add(count)
                .ok_or_else(|| Error::invalid(format!("count overflow at index {i}")))?;
        }
        Ok(())
    }

    /// Number of nonzero coordinates.
    pub fn support_size(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Nonzero `(index, count)` pairs in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries.iter().map(|(&i, &c)| (i, c))
    }

    /// Indices of the nonzero coordinates, ascending.
    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn is_binary(&self) -> bool {
        self.entries.values().all(|&c| c == 1)
    }

    pub fn max_count(&self) -> u64 {
        self.entries.values().copied().max().unwrap_or(0)
    }

    /// Coordinate-wise sum. Both vectors must share a dimension.
    pub fn plus(&self, other: &FrequencyVector) -> Result<FrequencyVector> {
        if self.dim != other.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let mut out = self.clone();
        for (i, c) in other.iter() {
            out.add(i, c)?;
        }
        Ok(out)
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i == 0 || i > self.dim {
            return Err(Error::invalid(format!(
                "index {i} outside [1, {}]",
                self.dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counts_are_not_stored() {
        let mut v = FrequencyVector::zeros(10);
        v.add(3, 0).unwrap();
        assert_eq!(v.support_size(), 0);
        v.add(3, 2).unwrap();
        v.add(3, 1).unwrap();
        assert_eq!(v.get(3), 3);
        assert_eq!(v.support_size(), 1);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut v = FrequencyVector::zeros(10);
        assert!(v.add(0, 1).is_err());
        assert!(v.add(11, 1).is_err());
        assert!(FrequencyVector::unit(10, 10).is_ok());
    }

    #[test]
    fn sum_of_units() {
        let a = FrequencyVector::unit(5, 1).unwrap();
        let b = FrequencyVector::unit(5, 2).unwrap();
        let s = a.plus(&b).unwrap();
        assert!(s.is_binary());
        assert_eq!(s.support().collect::<Vec<_>>(), vec![1, 2]);
        assert!(a.plus(&FrequencyVector::zeros(6)).is_err());
    }
}
