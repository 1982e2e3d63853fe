//! Rank recompression, contractions and product-set coarsening.

use crate::error::{HtError, Result};
use crate::ht::{HtRep, ModeFrame, RankVector, RepKind};
use crate::index::WaveletIndex;
use crate::opcount::OpCounter;
use serde::{Deserialize, Serialize};

/// Per-mode contraction sequences π⁽ⁱ⁾ of a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionSet {
    pub modes: Vec<Vec<(WaveletIndex, f64)>>,
}

impl ContractionSet {
    pub fn mode_norm(&self, i: usize) -> f64 {
        self.modes[i].iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn total_support(&self) -> usize {
        self.modes.iter().map(|m| m.len()).sum()
    }

    pub fn get(&self, i: usize, idx: &WaveletIndex) -> f64 {
        self.modes[i].binary_search_by(|e| e.0.cmp(idx)).map(|k| self.modes[i][k].1).unwrap_or(0.0)
    }
}

/// Per-mode index sets, each sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSet {
    pub modes: Vec<Vec<WaveletIndex>>,
}

impl ProductSet {
    pub fn size(&self) -> usize {
        self.modes.iter().map(|m| m.len()).sum()
    }

    pub fn contains(&self, i: usize, idx: &WaveletIndex) -> bool {
        self.modes[i].binary_search(idx).is_ok()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortMode {
    #[default]
    ExactSort,
    BinaryBinning,
}

/// Growth sequence γ(n) = exp(d · n^{1/b}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSequence {
    pub d: f64,
    pub b: f64,
}

impl GrowthSequence {
    pub fn new(d: f64, b: f64) -> Result<Self> {
        if !(d > 0.0) || !(b >= 1.0) {
            return Err(HtError::InvalidArgument(format!("growth sequence needs d > 0 and b >= 1, got d={d}, b={b}")));
        }
        Ok(GrowthSequence { d, b })
    }

    pub fn gamma(&self, n: usize) -> f64 {
        (self.d * (n as f64).powf(1.0 / self.b)).exp()
    }

    /// sup γ(n)/γ(n−1), attained at n = 1.
    pub fn rho(&self) -> f64 {
        self.gamma(1)
    }
}

pub fn contractions(v: &HtRep) -> Result<ContractionSet> {
    if v.kind() != RepKind::Hsvd {
        return Err(HtError::WrongForm("hsvd"));
    }
    let t = v.tree();
    let modes = (0..v.order())
        .map(|i| {
            let s = v.sigma(t.leaf(i)).unwrap();
            let f = v.frame(i);
            f.index
                .iter()
                .enumerate()
                .map(|(r, &idx)| {
                    let q: f64 = (0..f.rank()).map(|k| (f.values[(r, k)] * s[k]).powi(2)).sum();
                    (idx, q.sqrt())
                })
                .collect()
        })
        .collect();
    Ok(ContractionSet { modes })
}

/// All contraction entries sorted by decreasing value, ties by (mode, index).
fn sorted_entries(c: &ContractionSet) -> Vec<(usize, WaveletIndex, f64)> {
    let mut all: Vec<(usize, WaveletIndex, f64)> =
        c.modes.iter().enumerate().flat_map(|(i, m)| m.iter().map(move |e| (i, e.0, e.1))).collect();
    all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    all
}

/// Entries grouped into bins of value ratio 2; bins in decreasing order, (mode, index) order inside.
fn binned_entries(c: &ContractionSet) -> Vec<(usize, WaveletIndex, f64)> {
    let max = c.modes.iter().flat_map(|m| m.iter().map(|e| e.1)).fold(0.0, f64::max);
    let mut all: Vec<(i64, usize, WaveletIndex, f64)> = c
        .modes
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            m.iter().map(move |e| {
                let bin = if e.1 > 0.0 { (max / e.1).log2().floor() as i64 } else { i64::MAX };
                (bin, i, e.0, e.1)
            })
        })
        .collect();
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().map(|e| (e.1, e.2, e.3)).collect()
}

pub(crate) fn ordered(c: &ContractionSet, mode: SortMode) -> Vec<(usize, WaveletIndex, f64)> {
    match mode {
        SortMode::ExactSort => sorted_entries(c),
        SortMode::BinaryBinning => binned_entries(c),
    }
}

fn product_set_from(m: usize, picked: &[(usize, WaveletIndex, f64)]) -> ProductSet {
    let mut modes = vec![vec![]; m];
    for e in picked {
        modes[e.0].push(e.1);
    }
    for s in modes.iter_mut() {
        s.sort();
    }
    ProductSet { modes }
}

/// Keeps the `n` largest contraction entries across all modes.
pub fn select_product_set(c: &ContractionSet, n: usize, mode: SortMode) -> ProductSet {
    let all = ordered(c, mode);
    product_set_from(c.modes.len(), &all[..n.min(all.len())])
}

/// (Σᵢ Σ_{ν∉Λ⁽ⁱ⁾} π⁽ⁱ⁾_ν²)^{1/2}.
pub fn mu_estimate(c: &ContractionSet, s: &ProductSet) -> f64 {
    c.modes
        .iter()
        .enumerate()
        .map(|(i, m)| m.iter().filter(|e| !s.contains(i, &e.0)).map(|e| e.1 * e.1).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Zeroes (drops) leaf-frame rows outside the product set.
pub fn restrict(v: &HtRep, s: &ProductSet) -> HtRep {
    v.map_frames(|i, f| {
        let keep: Vec<usize> = (0..f.index.len()).filter(|&r| s.contains(i, &f.index[r])).collect();
        ModeFrame { index: keep.iter().map(|&r| f.index[r]).collect(), values: f.values.select_rows(keep.iter()) }
    })
}

/// Rank vector with every node capped at `cap`.
fn capped(ranks: &RankVector, cap: usize) -> RankVector {
    RankVector(ranks.0.iter().enumerate().map(|(a, &r)| if a == 0 { r } else { r.min(cap) }).collect())
}

/// Rank vector chosen by recompression of an hsvd representation.
pub fn recompress_ranks(h: &HtRep, eta: f64) -> RankVector {
    let full = h.ranks();
    let eta2 = eta * eta;
    let fits = |r: &RankVector| {
        let l = h.lambda_unchecked(r);
        l * l <= eta2
    };
    let (mut lo, mut hi) = (0usize, full.max());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if fits(&capped(&full, mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut r = capped(&full, lo);
    let t = h.tree();
    loop {
        let mut best: Option<(f64, usize)> = None;
        for a in 1..t.len() {
            if r.0[a] == 0 {
                continue;
            }
            let mut trial = r.clone();
            trial.0[a] -= 1;
            if !trial.is_admissible(t) {
                continue;
            }
            let l = h.lambda_unchecked(&trial);
            let l2 = l * l;
            if l2 <= eta2 && best.is_none_or(|(b, _)| l2 < b) {
                best = Some((l2, a));
            }
        }
        match best {
            Some((_, a)) => r.0[a] -= 1,
            None => break,
        }
    }
    r
}

pub fn recompress(v: &HtRep, eta: f64) -> Result<HtRep> {
    recompress_with(v, eta, &OpCounter::new())
}

/// HSVD truncation to the smallest max-rank whose error estimate is at most `eta`.
pub fn recompress_with(v: &HtRep, eta: f64, ops: &OpCounter) -> Result<HtRep> {
    if !(eta >= 0.0) {
        return Err(HtError::InvalidArgument(format!("negative tolerance {eta}")));
    }
    let h = v.hsvd_with(ops);
    if h.is_zero() || h.norm() <= eta {
        return Ok(HtRep::zero(h.tree().clone()));
    }
    let r = recompress_ranks(&h, eta);
    h.truncate_with(&r, ops)
}

pub fn coarsen(v: &HtRep, eta: f64, mode: SortMode) -> Result<HtRep> {
    coarsen_with(v, eta, mode, &OpCounter::new())
}

/// Smallest budget N with μ_N ≤ η for the given ordering.
pub fn coarsening_budget(c: &ContractionSet, eta: f64, mode: SortMode) -> usize {
    let all = ordered(c, mode);
    let mut rest: Vec<f64> = vec![0.0; all.len() + 1];
    for k in (0..all.len()).rev() {
        rest[k] = rest[k + 1] + all[k].2 * all[k].2;
    }
    let eta2 = eta * eta;
    (0..=all.len()).find(|&n| rest[n] <= eta2).unwrap_or(all.len())
}

/// Restriction to the product set of the N largest contractions, N minimal with μ_N ≤ η.
pub fn coarsen_with(v: &HtRep, eta: f64, mode: SortMode, ops: &OpCounter) -> Result<HtRep> {
    if !(eta >= 0.0) {
        return Err(HtError::InvalidArgument(format!("negative tolerance {eta}")));
    }
    let h = v.hsvd_with(ops);
    if h.is_zero() || h.norm() <= eta {
        return Ok(HtRep::zero(h.tree().clone()));
    }
    let c = contractions(&h)?;
    let n = coarsening_budget(&c, eta, mode);
    if n == c.total_support() {
        return Ok(h);
    }
    Ok(restrict(&h, &select_product_set(&c, n, mode)))
}

/// Tolerances (recompression, coarsening) used by [`combined_reduce`].
pub fn combined_tolerances(eta: f64, alpha: f64, kp: f64, kc: f64) -> (f64, f64) {
    (kp * (1.0 + alpha) * eta, kc * (kp + 1.0) * (1.0 + alpha) * eta)
}

pub fn combined_reduce(v: &HtRep, eta: f64, alpha: f64, kp: f64, kc: f64, mode: SortMode) -> Result<HtRep> {
    if !(eta > 0.0) || !(alpha > 0.0) {
        return Err(HtError::InvalidArgument(format!("need eta > 0 and alpha > 0, got {eta}, {alpha}")));
    }
    let (e1, e2) = combined_tolerances(eta, alpha, kp, kc);
    coarsen(&recompress(v, e1)?, e2, mode)
}

/// κ_P = √(2m−3) and κ_C = √m (doubled for binary binning).
pub fn kappas(m: usize, mode: SortMode) -> (f64, f64) {
    let kp = ((2 * m - 3) as f64).sqrt();
    let kc = (m as f64).sqrt() * if mode == SortMode::BinaryBinning { 2.0 } else { 1.0 };
    (kp, kc)
}
