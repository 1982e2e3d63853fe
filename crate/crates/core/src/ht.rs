//! Hierarchical Tucker representation: algebra, orthonormalization, HSVD and truncation.

use crate::error::{HtError, Result};
use crate::index::{merge_indices, positions_in, SparseModeVector, WaveletIndex};
use crate::linalg::{numerical_rank, orth_factor, scale_cols, svd};
use crate::opcount::OpCounter;
use crate::tree::DimensionTree;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Largest dense array handled by [`HtRep::from_dense`] and [`HtRep::to_dense`].
pub const DENSE_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Raw,
    Orthonormal,
    Hsvd,
}

/// Leaf mode frame: rows are the sorted support indices, columns the frame vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeFrame {
    pub index: Vec<WaveletIndex>,
    pub values: DMatrix<f64>,
}

impl ModeFrame {
    pub fn empty(rank: usize) -> Self {
        ModeFrame { index: vec![], values: DMatrix::zeros(0, rank) }
    }

    pub fn rank(&self) -> usize {
        self.values.ncols()
    }

    pub fn support(&self) -> usize {
        self.index.len()
    }

    pub fn from_columns(cols: &[SparseModeVector]) -> Self {
        let mut index: Vec<WaveletIndex> = vec![];
        for c in cols {
            index = merge_indices(&index, &c.indices());
        }
        let mut values = DMatrix::zeros(index.len(), cols.len());
        for (k, c) in cols.iter().enumerate() {
            let pos = positions_in(&c.indices(), &index);
            for (e, p) in c.entries().iter().zip(pos) {
                values[(p, k)] = e.1;
            }
        }
        ModeFrame { index, values }
    }

    pub fn column(&self, k: usize) -> SparseModeVector {
        SparseModeVector::from_pairs(self.index.iter().copied().zip(self.values.column(k).iter().copied()).collect())
    }

    /// Frame values on a sorted superset of the support.
    pub fn embed(&self, sup: &[WaveletIndex]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(sup.len(), self.rank());
        for (r, p) in positions_in(&self.index, sup).into_iter().enumerate() {
            out.row_mut(p).copy_from(&self.values.row(r));
        }
        out
    }

    /// Values on an arbitrary sorted index list (missing rows are zero).
    pub fn gather(&self, idx: &[WaveletIndex]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(idx.len(), self.rank());
        let mut j = 0;
        for (r, i) in idx.iter().enumerate() {
            while j < self.index.len() && self.index[j] < *i {
                j += 1;
            }
            if j < self.index.len() && self.index[j] == *i {
                out.row_mut(r).copy_from(&self.values.row(j));
            }
        }
        out
    }

    pub fn without_zero_rows(self) -> Self {
        let keep: Vec<usize> = (0..self.index.len())
            .filter(|&r| self.values.row(r).iter().any(|&x| x != 0.0))
            .collect();
        if keep.len() == self.index.len() {
            return self;
        }
        let index = keep.iter().map(|&r| self.index[r]).collect();
        let values = self.values.select_rows(keep.iter());
        ModeFrame { index, values }
    }
}

/// Per-node ranks indexed by node id; the root entry is ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankVector(pub Vec<usize>);

impl RankVector {
    pub fn max(&self) -> usize {
        self.0.iter().skip(1).copied().max().unwrap_or(0)
    }

    pub fn sum(&self) -> usize {
        self.0.iter().skip(1).sum()
    }

    pub fn is_admissible(&self, tree: &DimensionTree) -> bool {
        self.0.len() == tree.len()
            && tree.interior().filter(|&a| a != tree.root()).all(|a| {
                let (c1, c2) = tree.children(a).unwrap();
                self.0[a] <= self.0[c1] * self.0[c2]
            })
    }
}

/// Dense array over explicit per-mode index lists, first mode fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    pub indices: Vec<Vec<WaveletIndex>>,
    pub data: Vec<f64>,
}

impl DenseTensor {
    /// Array over the first `n_i` indices of the natural enumeration in each mode.
    pub fn from_shape(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let indices = shape
            .iter()
            .map(|&n| (0..n as u64).map(|k| WaveletIndex::from_linear(1, k)).collect())
            .collect();
        DenseTensor { indices, data }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.indices.iter().map(|v| v.len()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Same tensor on other index lists; entries outside the support are zero.
    pub fn reindex(&self, idx: &[Vec<WaveletIndex>]) -> DenseTensor {
        let maps: Vec<Vec<Option<usize>>> = idx
            .iter()
            .zip(&self.indices)
            .map(|(new, old)| new.iter().map(|i| old.binary_search(i).ok()).collect())
            .collect();
        let shape_old = self.shape();
        let n: usize = idx.iter().map(|v| v.len()).product();
        let mut data = vec![0.0; n];
        let mut multi = vec![0usize; idx.len()];
        for (lin, slot) in data.iter_mut().enumerate() {
            let mut rem = lin;
            for (i, v) in idx.iter().enumerate() {
                multi[i] = rem % v.len();
                rem /= v.len();
            }
            let mut pos = 0;
            let mut stride = 1;
            let mut ok = true;
            for i in 0..idx.len() {
                match maps[i][multi[i]] {
                    Some(q) => pos += q * stride,
                    None => {
                        ok = false;
                        break;
                    }
                }
                stride *= shape_old[i];
            }
            if ok {
                *slot = self.data[pos];
            }
        }
        DenseTensor { indices: idx.to_vec(), data }
    }

    /// Matricization with the modes in `lo..hi` as rows.
    pub fn unfold(&self, lo: usize, hi: usize) -> DMatrix<f64> {
        let shape = self.shape();
        let pre: usize = shape[..lo].iter().product();
        let mid: usize = shape[lo..hi].iter().product();
        let post: usize = shape[hi..].iter().product();
        DMatrix::from_fn(mid, pre * post, |r, c| {
            let (a, b) = (c % pre.max(1), c / pre.max(1));
            self.data[a + pre * (r + mid * b)]
        })
    }
}

/// A tensor in hierarchical Tucker form.
#[derive(Clone, Debug)]
pub struct HtRep {
    tree: Arc<DimensionTree>,
    frames: Vec<ModeFrame>,
    transfers: Vec<DMatrix<f64>>,
    kind: RepKind,
    sigma: Vec<Vec<f64>>,
}

fn block(m: &DMatrix<f64>, r1: usize, r2: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(r1, r2, m.column(k).as_slice())
}

/// Applies `B -> left * B * right^T` to every transfer matrix stored in the columns of `m`.
fn transform_transfer(
    m: &DMatrix<f64>,
    r1: usize,
    r2: usize,
    left: Option<&DMatrix<f64>>,
    right: Option<&DMatrix<f64>>,
    ops: &OpCounter,
) -> DMatrix<f64> {
    let n1 = left.map_or(r1, |l| l.nrows());
    let n2 = right.map_or(r2, |r| r.nrows());
    let mut out = DMatrix::zeros(n1 * n2, m.ncols());
    for k in 0..m.ncols() {
        let mut b = block(m, r1, r2, k);
        if let Some(l) = left {
            ops.matmul(n1, r1, r2);
            b = l * b;
        }
        if let Some(r) = right {
            ops.matmul(n1, r2, n2);
            b *= r.transpose();
        }
        out.column_mut(k).copy_from_slice(b.as_slice());
    }
    out
}

impl HtRep {
    /// Zero tensor with all ranks 0.
    pub fn zero(tree: Arc<DimensionTree>) -> Self {
        let n = tree.len();
        let frames = (0..tree.order()).map(|_| ModeFrame::empty(0)).collect();
        let transfers = (0..n)
            .map(|id| {
                if tree.is_leaf(id) {
                    DMatrix::zeros(0, 0)
                } else if id == tree.root() {
                    DMatrix::zeros(0, 1)
                } else {
                    DMatrix::zeros(0, 0)
                }
            })
            .collect();
        HtRep { tree, frames, transfers, kind: RepKind::Hsvd, sigma: vec![vec![]; n] }
    }

    /// Builds a raw representation after validating all shapes.
    pub fn from_parts(tree: Arc<DimensionTree>, frames: Vec<ModeFrame>, transfers: Vec<DMatrix<f64>>) -> Result<Self> {
        if frames.len() != tree.order() || transfers.len() != tree.len() {
            return Err(HtError::TreeMismatch("component counts do not match the tree".into()));
        }
        for f in &frames {
            if f.index.len() != f.values.nrows() || f.index.windows(2).any(|w| w[0] >= w[1]) {
                return Err(HtError::InvalidArgument("frame rows must match strictly sorted indices".into()));
            }
        }
        let v = HtRep { tree, frames, transfers, kind: RepKind::Raw, sigma: vec![] };
        for a in v.tree.interior() {
            let (c1, c2) = v.tree.children(a).unwrap();
            let rows = v.rank(c1) * v.rank(c2);
            if v.transfers[a].nrows() != rows {
                return Err(HtError::InvalidArgument(format!("transfer at node {a} has {} rows, expected {rows}", v.transfers[a].nrows())));
            }
        }
        if v.transfers[v.tree.root()].ncols() != 1 {
            return Err(HtError::InvalidArgument("root transfer must have one column".into()));
        }
        Ok(v)
    }

    /// Σ_t c_t ⊗_i v_{t,i} with diagonal transfer tensors.
    pub fn from_terms(tree: Arc<DimensionTree>, terms: &[(f64, Vec<SparseModeVector>)]) -> Result<Self> {
        let m = tree.order();
        if terms.iter().any(|t| t.1.len() != m) {
            return Err(HtError::TreeMismatch("term order differs from tree order".into()));
        }
        let r = terms.len();
        if r == 0 {
            return Ok(HtRep::zero(tree));
        }
        let frames = (0..m)
            .map(|i| ModeFrame::from_columns(&terms.iter().map(|t| t.1[i].clone()).collect::<Vec<_>>()))
            .collect();
        let transfers = (0..tree.len())
            .map(|id| {
                if tree.is_leaf(id) {
                    DMatrix::zeros(0, 0)
                } else if id == tree.root() {
                    DMatrix::from_fn(r * r, 1, |row, _| if row % (r + 1) == 0 { terms[row / (r + 1)].0 } else { 0.0 })
                } else {
                    DMatrix::from_fn(r * r, r, |row, k| if row == k * (r + 1) { 1.0 } else { 0.0 })
                }
            })
            .collect();
        HtRep::from_parts(tree, frames, transfers)
    }

    pub fn rank_one(tree: Arc<DimensionTree>, vectors: Vec<SparseModeVector>) -> Result<Self> {
        HtRep::from_terms(tree, &[(1.0, vectors)])
    }

    pub fn tree(&self) -> &Arc<DimensionTree> {
        &self.tree
    }

    pub fn order(&self) -> usize {
        self.tree.order()
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn frames(&self) -> &[ModeFrame] {
        &self.frames
    }

    pub fn frame(&self, mode: usize) -> &ModeFrame {
        &self.frames[mode]
    }

    /// Matricized transfer tensor of an interior node: column k holds vec(B^(α,k)).
    pub fn transfer(&self, node: usize) -> &DMatrix<f64> {
        &self.transfers[node]
    }

    /// B^(α,k) as an r_{c1} × r_{c2} matrix.
    pub fn transfer_block(&self, node: usize, k: usize) -> DMatrix<f64> {
        let (c1, c2) = self.tree.children(node).expect("interior node");
        block(&self.transfers[node], self.rank(c1), self.rank(c2), k)
    }

    /// Singular values of a non-root node (hsvd form only).
    pub fn sigma(&self, node: usize) -> Option<&[f64]> {
        (self.kind == RepKind::Hsvd).then(|| self.sigma[node].as_slice())
    }

    pub fn rank(&self, node: usize) -> usize {
        match self.tree.leaf_mode(node) {
            Some(i) => self.frames[i].rank(),
            None => self.transfers[node].ncols(),
        }
    }

    pub fn ranks(&self) -> RankVector {
        RankVector((0..self.tree.len()).map(|a| self.rank(a)).collect())
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().max()
    }

    pub fn supports(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.support()).collect()
    }

    pub fn is_zero(&self) -> bool {
        let (c1, c2) = self.tree.children(self.tree.root()).unwrap();
        self.rank(c1) == 0 || self.rank(c2) == 0
    }

    fn check_tree(&self, other: &HtRep) -> Result<()> {
        if *self.tree != *other.tree {
            return Err(HtError::TreeMismatch(format!(
                "{:?}({}) vs {:?}({})",
                self.tree.shape(),
                self.order(),
                other.tree.shape(),
                other.order()
            )));
        }
        Ok(())
    }

    /// Rank-additive sum.
    pub fn add(&self, other: &HtRep) -> Result<HtRep> {
        self.check_tree(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| {
                let index = merge_indices(&a.index, &b.index);
                let (ea, eb) = (a.embed(&index), b.embed(&index));
                let mut values = DMatrix::zeros(index.len(), a.rank() + b.rank());
                values.columns_mut(0, a.rank()).copy_from(&ea);
                values.columns_mut(a.rank(), b.rank()).copy_from(&eb);
                ModeFrame { index, values }
            })
            .collect();
        let mut transfers = vec![DMatrix::zeros(0, 0); self.tree.len()];
        for a in self.tree.interior() {
            let (c1, c2) = self.tree.children(a).unwrap();
            let (a1, a2, b1, b2) = (self.rank(c1), self.rank(c2), other.rank(c1), other.rank(c2));
            let n1 = a1 + b1;
            let root = a == self.tree.root();
            let (ka, kb) = (self.rank(a), other.rank(a));
            let cols = if root { 1 } else { ka + kb };
            let mut m = DMatrix::zeros(n1 * (a2 + b2), cols);
            for k in 0..ka {
                for l2 in 0..a2 {
                    for l1 in 0..a1 {
                        m[(l1 + n1 * l2, k)] = self.transfers[a][(l1 + a1 * l2, k)];
                    }
                }
            }
            for k in 0..kb {
                let col = if root { 0 } else { ka + k };
                for l2 in 0..b2 {
                    for l1 in 0..b1 {
                        m[(a1 + l1 + n1 * (a2 + l2), col)] = other.transfers[a][(l1 + b1 * l2, k)];
                    }
                }
            }
            transfers[a] = m;
        }
        Ok(HtRep { tree: self.tree.clone(), frames, transfers, kind: RepKind::Raw, sigma: vec![] })
    }

    pub fn scale(&self, c: f64) -> HtRep {
        let mut out = self.clone();
        let root = self.tree.root();
        out.transfers[root] *= c;
        if out.kind == RepKind::Hsvd {
            if c == 0.0 {
                return HtRep::zero(self.tree.clone());
            }
            for s in out.sigma.iter_mut() {
                for x in s.iter_mut() {
                    *x *= c.abs();
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &HtRep) -> Result<HtRep> {
        self.add(&other.scale(-1.0))
    }

    /// Euclidean inner product via bottom-up Gram matrices.
    pub fn inner(&self, other: &HtRep) -> Result<f64> {
        self.check_tree(other)?;
        let n = self.tree.len();
        let mut gram: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n];
        for id in (0..n).rev() {
            if let Some(i) = self.tree.leaf_mode(id) {
                let (a, b) = (&self.frames[i], &other.frames[i]);
                let idx = merge_indices(&a.index, &b.index);
                gram[id] = a.gather(&idx).transpose() * b.gather(&idx);
            } else {
                let (c1, c2) = self.tree.children(id).unwrap();
                let (g1, g2) = (&gram[c1], &gram[c2]);
                let ka = self.transfers[id].ncols();
                let kb = other.transfers[id].ncols();
                let mut g = DMatrix::zeros(ka, kb);
                for kk in 0..kb {
                    let y = g1 * other.transfer_block_raw(id, kk) * g2.transpose();
                    for k in 0..ka {
                        g[(k, kk)] = self.transfer_block_raw(id, k).dot(&y);
                    }
                }
                gram[id] = g;
            }
        }
        let g = &gram[self.tree.root()];
        Ok(if g.is_empty() { 0.0 } else { g[(0, 0)] })
    }

    fn transfer_block_raw(&self, node: usize, k: usize) -> DMatrix<f64> {
        let (c1, c2) = self.tree.children(node).unwrap();
        block(&self.transfers[node], self.rank(c1), self.rank(c2), k)
    }

    /// Euclidean norm; raw inputs are orthonormalized first for stability.
    pub fn norm(&self) -> f64 {
        self.norm_with(&OpCounter::new())
    }

    pub fn norm_with(&self, ops: &OpCounter) -> f64 {
        match self.kind {
            RepKind::Raw => self.orthonormalize_with(ops).root_norm(),
            _ => self.root_norm(),
        }
    }

    fn root_norm(&self) -> f64 {
        self.transfers[self.tree.root()].norm()
    }

    pub fn orthonormalize(&self) -> HtRep {
        self.orthonormalize_with(&OpCounter::new())
    }

    /// Bottom-up QR with rank reveal; leaf frames and interior transfers become orthonormal.
    pub fn orthonormalize_with(&self, ops: &OpCounter) -> HtRep {
        if self.kind != RepKind::Raw {
            return self.clone();
        }
        let n = self.tree.len();
        let mut frames = self.frames.clone();
        let mut transfers = self.transfers.clone();
        let mut rfac: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n];
        for id in (0..n).rev() {
            if let Some(i) = self.tree.leaf_mode(id) {
                let (q, r) = orth_factor(&frames[i].values, ops);
                frames[i].values = q;
                rfac[id] = r;
            } else {
                let (c1, c2) = self.tree.children(id).unwrap();
                let m = transform_transfer(
                    &transfers[id],
                    rfac[c1].ncols(),
                    rfac[c2].ncols(),
                    Some(&rfac[c1]),
                    Some(&rfac[c2]),
                    ops,
                );
                if id == self.tree.root() {
                    transfers[id] = m;
                } else {
                    let (q, r) = orth_factor(&m, ops);
                    transfers[id] = q;
                    rfac[id] = r;
                }
            }
        }
        let frames = frames.into_iter().map(|f| f.without_zero_rows()).collect();
        HtRep { tree: self.tree.clone(), frames, transfers, kind: RepKind::Orthonormal, sigma: vec![] }
    }

    pub fn hsvd(&self) -> HtRep {
        self.hsvd_with(&OpCounter::new())
    }

    /// Hierarchical SVD: orthonormalize, then rotate every frame top-down onto
    /// the left singular vectors of its matricization.
    pub fn hsvd_with(&self, ops: &OpCounter) -> HtRep {
        if self.kind == RepKind::Hsvd {
            return self.clone();
        }
        let mut v = self.orthonormalize_with(ops);
        let n = v.tree.len();
        let mut sigma = vec![vec![]; n];
        let tree = v.tree.clone();
        for id in tree.interior() {
            let (c1, c2) = tree.children(id).unwrap();
            let (r1, r2) = (v.rank(c1), v.rank(c2));
            let z = if id == tree.root() { vec![1.0] } else { sigma[id].clone() };
            let w = scale_cols(&v.transfers[id], &z);
            let r = w.ncols();
            let x1 = DMatrix::from_column_slice(r1, r2 * r, w.as_slice());
            let x2 = DMatrix::from_fn(r2, r1 * r, |l2, c| w[(c % r1.max(1) + r1 * l2, c / r1.max(1))]);
            let d1 = svd(&x1, ops);
            let d2 = svd(&x2, ops);
            let k1 = numerical_rank(&d1.s);
            let k2 = numerical_rank(&d2.s);
            let u1 = d1.u.columns(0, k1).into_owned();
            let u2 = d2.u.columns(0, k2).into_owned();
            for (c, u) in [(c1, &u1), (c2, &u2)] {
                if let Some(i) = tree.leaf_mode(c) {
                    ops.matmul(v.frames[i].support(), u.nrows(), u.ncols());
                    v.frames[i].values = &v.frames[i].values * u;
                } else {
                    ops.matmul(v.transfers[c].nrows(), u.nrows(), u.ncols());
                    v.transfers[c] = &v.transfers[c] * u;
                }
            }
            v.transfers[id] =
                transform_transfer(&v.transfers[id], r1, r2, Some(&u1.transpose()), Some(&u2.transpose()), ops);
            sigma[c1] = d1.s[..k1].to_vec();
            sigma[c2] = d2.s[..k2].to_vec();
        }
        v.frames = v.frames.into_iter().map(|f| f.without_zero_rows()).collect();
        v.kind = RepKind::Hsvd;
        v.sigma = sigma;
        v
    }

    fn check_truncation_ranks(&self, r: &RankVector) -> Result<()> {
        if self.kind != RepKind::Hsvd {
            return Err(HtError::WrongForm("hsvd"));
        }
        if !r.is_admissible(&self.tree) {
            return Err(HtError::InadmissibleRanks(format!("{:?}", r.0)));
        }
        let own = self.ranks();
        if let Some(a) = (1..self.tree.len()).find(|&a| r.0[a] > own.0[a]) {
            return Err(HtError::InadmissibleRanks(format!("rank {} at node {a} exceeds {}", r.0[a], own.0[a])));
        }
        Ok(())
    }

    /// Per-node discarded singular value mass (Σ_{k>r_α} σ_k²)^{1/2}; root entry 0.
    pub fn tails(&self, r: &RankVector) -> Vec<f64> {
        (0..self.tree.len())
            .map(|a| if a == self.tree.root() { 0.0 } else { tail(&self.sigma[a], r.0[a]) })
            .collect()
    }

    /// Computable truncation error estimate λ for ranks `r`.
    pub fn lambda(&self, r: &RankVector) -> Result<f64> {
        self.check_truncation_ranks(r)?;
        Ok(self.lambda_unchecked(r))
    }

    pub(crate) fn lambda_unchecked(&self, r: &RankVector) -> f64 {
        let (c1, c2) = self.tree.children(self.tree.root()).unwrap();
        let excluded = if r.0[c1] <= r.0[c2] { c2 } else { c1 };
        (1..self.tree.len())
            .filter(|&a| a != excluded)
            .map(|a| {
                let t = tail(&self.sigma[a], r.0[a]);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn truncate(&self, r: &RankVector) -> Result<HtRep> {
        self.truncate_with(r, &OpCounter::new())
    }

    /// Projection onto the leading HSVD frames (root-near levels first), followed by a fresh HSVD.
    pub fn truncate_with(&self, r: &RankVector, ops: &OpCounter) -> Result<HtRep> {
        self.check_truncation_ranks(r)?;
        if r.0[1..] == self.ranks().0[1..] {
            return Ok(self.clone());
        }
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let k = r.0[self.tree.leaf(i)];
                ModeFrame { index: f.index.clone(), values: f.values.columns(0, k).into_owned() }
            })
            .collect();
        let mut transfers = vec![DMatrix::zeros(0, 0); self.tree.len()];
        for a in self.tree.interior() {
            let (c1, c2) = self.tree.children(a).unwrap();
            let o1 = self.rank(c1);
            let (n1, n2) = (r.0[c1], r.0[c2]);
            let cols = if a == self.tree.root() { 1 } else { r.0[a] };
            transfers[a] = DMatrix::from_fn(n1 * n2, cols, |row, k| {
                let (l1, l2) = (row % n1, row / n1);
                self.transfers[a][(l1 + o1 * l2, k)]
            });
        }
        let v = HtRep { tree: self.tree.clone(), frames, transfers, kind: RepKind::Raw, sigma: vec![] };
        Ok(v.hsvd_with(ops))
    }

    /// Restricted leaf rows; the result is flagged raw.
    pub(crate) fn map_frames<F: Fn(usize, &ModeFrame) -> ModeFrame>(&self, f: F) -> HtRep {
        let frames = self.frames.iter().enumerate().map(|(i, fr)| f(i, fr)).collect();
        HtRep { tree: self.tree.clone(), frames, transfers: self.transfers.clone(), kind: RepKind::Raw, sigma: vec![] }
    }

    /// Exact HSVD of a dense array.
    pub fn from_dense(d: &DenseTensor, tree: Arc<DimensionTree>) -> Result<HtRep> {
        let shape = d.shape();
        let size = shape.iter().product::<usize>();
        if size > DENSE_LIMIT {
            return Err(HtError::TooLarge { size, limit: DENSE_LIMIT });
        }
        if shape.len() != tree.order() {
            return Err(HtError::TreeMismatch(format!("array order {} vs tree order {}", shape.len(), tree.order())));
        }
        if size == 0 || d.data.iter().all(|&x| x == 0.0) {
            return Ok(HtRep::zero(tree));
        }
        let ops = OpCounter::new();
        let n = tree.len();
        let mut basis: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n];
        let mut sigma = vec![vec![]; n];
        for a in 1..n {
            let modes = tree.modes(a);
            let dec = svd(&d.unfold(modes.start, modes.end), &ops);
            let k = numerical_rank(&dec.s);
            basis[a] = dec.u.columns(0, k).into_owned();
            sigma[a] = dec.s[..k].to_vec();
        }
        let mut transfers = vec![DMatrix::zeros(0, 0); n];
        for a in tree.interior() {
            let (c1, c2) = tree.children(a).unwrap();
            let n1: usize = shape[tree.modes(c1)].iter().product();
            let n2: usize = shape[tree.modes(c2)].iter().product();
            let (u1, u2) = (&basis[c1], &basis[c2]);
            let cols: Vec<DMatrix<f64>> = if a == tree.root() {
                vec![DMatrix::from_column_slice(n1, n2, &d.data)]
            } else {
                (0..basis[a].ncols()).map(|k| DMatrix::from_column_slice(n1, n2, basis[a].column(k).as_slice())).collect()
            };
            let mut m = DMatrix::zeros(u1.ncols() * u2.ncols(), cols.len());
            for (k, x) in cols.iter().enumerate() {
                let b = u1.transpose() * x * u2;
                m.column_mut(k).copy_from_slice(b.as_slice());
            }
            transfers[a] = m;
        }
        let frames = (0..tree.order())
            .map(|i| ModeFrame { index: d.indices[i].clone(), values: basis[tree.leaf(i)].clone() }.without_zero_rows())
            .collect();
        Ok(HtRep { tree, frames, transfers, kind: RepKind::Hsvd, sigma })
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let idx: Vec<Vec<WaveletIndex>> = self.frames.iter().map(|f| f.index.clone()).collect();
        self.to_dense_on(&idx)
    }

    /// Dense evaluation on given sorted index lists (entries outside the support are zero).
    pub fn to_dense_on(&self, idx: &[Vec<WaveletIndex>]) -> Result<DenseTensor> {
        let size: usize = idx.iter().map(|v| v.len()).product();
        if size > DENSE_LIMIT {
            return Err(HtError::TooLarge { size, limit: DENSE_LIMIT });
        }
        let n = self.tree.len();
        let mut f: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n];
        for id in (0..n).rev() {
            if let Some(i) = self.tree.leaf_mode(id) {
                f[id] = self.frames[i].gather(&idx[i]);
            } else {
                let (c1, c2) = self.tree.children(id).unwrap();
                let (f1, f2) = (&f[c1], &f[c2]);
                let cols = self.transfers[id].ncols();
                let mut out = DMatrix::zeros(f1.nrows() * f2.nrows(), cols);
                for k in 0..cols {
                    let x = f1 * self.transfer_block_raw(id, k) * f2.transpose();
                    out.column_mut(k).copy_from_slice(x.as_slice());
                }
                f[id] = out;
            }
        }
        let data = f[self.tree.root()].column(0).iter().copied().collect();
        Ok(DenseTensor { indices: idx.to_vec(), data })
    }
}

fn tail(s: &[f64], r: usize) -> f64 {
    s.iter().skip(r).map(|x| x * x).sum::<f64>().sqrt()
}
