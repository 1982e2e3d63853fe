//! Multiwavelet indices and sparse coefficient sequences.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Index of an order-`p` multiwavelet basis function on [0,1].
///
/// Scaling-layer functions come first, then wavelets ordered by
/// (level, translation, slot).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WaveletIndex {
    wavelet: bool,
    level: u8,
    translation: u64,
    slot: u8,
}

impl WaveletIndex {
    pub fn scaling(slot: usize) -> Self {
        WaveletIndex { wavelet: false, level: 0, translation: 0, slot: slot as u8 }
    }

    /// Wavelet-layer index; panics if `translation >= 2^level` or `level > 63`.
    pub fn wavelet(level: u32, translation: u64, slot: usize) -> Self {
        assert!(level < 64, "level {level} out of range");
        assert!(translation >> level == 0, "translation {translation} out of range at level {level}");
        WaveletIndex { wavelet: true, level: level as u8, translation, slot: slot as u8 }
    }

    pub fn is_scaling(&self) -> bool {
        !self.wavelet
    }

    pub fn level(&self) -> u32 {
        self.level as u32
    }

    pub fn translation(&self) -> u64 {
        self.translation
    }

    pub fn slot(&self) -> usize {
        self.slot as usize
    }

    /// Support interval as (left end, width).
    pub fn interval(&self) -> (f64, f64) {
        let h = (-(self.level as f64)).exp2();
        (self.translation as f64 * h, h)
    }

    /// Position in the natural enumeration of an order-`p` basis, if it fits in an `i64`.
    pub fn linear(&self, p: usize) -> Option<i64> {
        if !self.wavelet {
            return Some(self.slot as i64);
        }
        let base = 1i64.checked_shl(self.level as u32)?;
        if base <= 0 {
            return None;
        }
        let block = base.checked_add(self.translation as i64)?;
        (p as i64).checked_mul(block)?.checked_add(self.slot as i64)
    }

    /// Inverse of [`WaveletIndex::linear`].
    pub fn from_linear(p: usize, n: u64) -> Self {
        let p64 = p as u64;
        if n < p64 {
            return Self::scaling(n as usize);
        }
        let block = n / p64;
        let slot = (n % p64) as usize;
        let level = 63 - block.leading_zeros();
        Self::wavelet(level, block - (1u64 << level), slot)
    }
}

/// Sorted sparse sequence over one physical mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseModeVector {
    entries: Vec<(WaveletIndex, f64)>,
}

impl SparseModeVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from unsorted pairs; duplicates are summed and exact zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(WaveletIndex, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut entries: Vec<(WaveletIndex, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        SparseModeVector { entries }
    }

    /// Drops entries with magnitude not exceeding `tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.entries.retain(|e| e.1.abs() > tol);
        self
    }

    pub fn entries(&self) -> &[(WaveletIndex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: &WaveletIndex) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.cmp(idx))
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseModeVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn indices(&self) -> Vec<WaveletIndex> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

/// Sorted union of two sorted index lists.
pub fn merge_indices(a: &[WaveletIndex], b: &[WaveletIndex]) -> Vec<WaveletIndex> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Positions of every element of `sub` inside the sorted superset `sup`.
pub fn positions_in(sub: &[WaveletIndex], sup: &[WaveletIndex]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sub.len());
    let mut j = 0;
    for s in sub {
        while sup[j] < *s {
            j += 1;
        }
        debug_assert_eq!(sup[j], *s);
        out.push(j);
    }
    out
}
