#![allow(dead_code)]

pub mod volterra;

use htwave::{DenseTensor, DimensionTree, HtRep, ModeFrame, TreeShape, WaveletIndex};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tree(m: usize, shape: TreeShape) -> Arc<DimensionTree> {
    Arc::new(DimensionTree::new(m, shape).unwrap())
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(1e-12..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_dense(shape: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let n = shape.iter().product();
    DenseTensor::from_shape(shape, (0..n).map(|_| gauss(rng)).collect())
}

/// Sum of `terms` random elementary tensors with geometrically decaying weights.
pub fn random_low_rank_dense(shape: &[usize], terms: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
    let n: usize = shape.iter().product();
    let mut data = vec![0.0; n];
    for t in 0..terms {
        let w = 0.5f64.powi(t as i32);
        let vecs: Vec<Vec<f64>> = shape.iter().map(|&k| (0..k).map(|_| gauss(rng)).collect()).collect();
        for (lin, x) in data.iter_mut().enumerate() {
            let mut rem = lin;
            let mut p = w;
            for (i, &k) in shape.iter().enumerate() {
                p *= vecs[i][rem % k];
                rem /= k;
            }
            *x += p;
        }
    }
    DenseTensor::from_shape(shape, data)
}

/// Matricization with modes lo..hi as rows, built directly from the multi-index definition.
pub fn unfold(data: &[f64], shape: &[usize], lo: usize, hi: usize) -> DMatrix<f64> {
    let rows: usize = shape[lo..hi].iter().product();
    let cols: usize = shape.iter().product::<usize>() / rows.max(1);
    let mut m = DMatrix::zeros(rows, cols);
    let mut multi = vec![0usize; shape.len()];
    for (lin, &x) in data.iter().enumerate() {
        let mut rem = lin;
        for (i, &k) in shape.iter().enumerate() {
            multi[i] = rem % k;
            rem /= k;
        }
        let (mut r, mut sr) = (0, 1);
        let (mut c, mut sc) = (0, 1);
        for i in 0..shape.len() {
            if (lo..hi).contains(&i) {
                r += multi[i] * sr;
                sr *= shape[i];
            } else {
                c += multi[i] * sc;
                sc *= shape[i];
            }
        }
        m[(r, c)] = x;
    }
    m
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// ‖a − b‖ over the union of both index sets.
pub fn dense_dist(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let idx: Vec<Vec<WaveletIndex>> = a
        .indices
        .iter()
        .zip(&b.indices)
        .map(|(x, y)| {
            let mut u: Vec<WaveletIndex> = x.iter().chain(y.iter()).copied().collect();
            u.sort();
            u.dedup();
            u
        })
        .collect();
    let (ra, rb) = (a.reindex(&idx), b.reindex(&idx));
    ra.data.iter().zip(&rb.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dense_dot(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let rb = b.reindex(&a.indices);
    a.data.iter().zip(&rb.data).map(|(x, y)| x * y).sum()
}

/// Random raw representation with given ranks and per-mode support sizes.
pub fn random_ht(t: &Arc<DimensionTree>, rank: usize, support: usize, rng: &mut ChaCha8Rng) -> HtRep {
    let frames = (0..t.order())
        .map(|_| ModeFrame {
            index: (0..support as u64).map(|k| WaveletIndex::from_linear(1, k)).collect(),
            values: DMatrix::from_fn(support, rank, |_, _| gauss(rng)),
        })
        .collect();
    let transfers = (0..t.len())
        .map(|id| {
            if t.is_leaf(id) {
                DMatrix::zeros(0, 0)
            } else if id == t.root() {
                DMatrix::from_fn(rank * rank, 1, |_, _| gauss(rng))
            } else {
                DMatrix::from_fn(rank * rank, rank, |_, _| gauss(rng))
            }
        })
        .collect();
    HtRep::from_parts(t.clone(), frames, transfers).unwrap()
}

/// Random raw representation with random sparse supports drawn from the first `pool` indices.
pub fn random_sparse_ht(t: &Arc<DimensionTree>, rank: usize, nnz: usize, pool: u64, p: usize, rng: &mut ChaCha8Rng) -> HtRep {
    let frames = (0..t.order())
        .map(|_| {
            let mut idx: Vec<WaveletIndex> = Vec::new();
            while idx.len() < nnz {
                let w = WaveletIndex::from_linear(p, rng.gen_range(0..pool));
                if !idx.contains(&w) {
                    idx.push(w);
                }
            }
            idx.sort();
            ModeFrame { values: DMatrix::from_fn(idx.len(), rank, |_, _| gauss(rng)), index: idx }
        })
        .collect();
    let transfers = (0..t.len())
        .map(|id| {
            if t.is_leaf(id) {
                DMatrix::zeros(0, 0)
            } else if id == t.root() {
                DMatrix::from_fn(rank * rank, 1, |_, _| gauss(rng))
            } else {
                DMatrix::from_fn(rank * rank, rank, |_, _| gauss(rng))
            }
        })
        .collect();
    HtRep::from_parts(t.clone(), frames, transfers).unwrap()
}

/// Random admissible rank vector bounded by `cap`.
pub fn random_admissible(t: &DimensionTree, cap: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut r = vec![1; t.len()];
    for id in (1..t.len()).rev() {
        let hi = match t.children(id) {
            Some((c1, c2)) => cap[id].min(r[c1] * r[c2]),
            None => cap[id],
        };
        r[id] = if hi == 0 { 0 } else { rng.gen_range(1..=hi) };
    }
    r
}
pub mod neumann;
