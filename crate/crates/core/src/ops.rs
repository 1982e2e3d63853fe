//! Low-rank operators with compressible per-mode factors, adaptive application
//! and right-hand-side assembly.

use crate::alpert::{FkExpansion, MultiwaveletBasis, PiecewiseCosSpec};
use crate::error::{HtError, Result};
use crate::ht::{HtRep, ModeFrame, RepKind};
use crate::index::{SparseModeVector, WaveletIndex};
use crate::opcount::{OpCounter, OpEvent};
use crate::reduce::{contractions, ordered, ContractionSet, SortMode};
use crate::tree::DimensionTree;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::sync::{Arc, Mutex};

/// Largest level distance tried by the `J` scan.
pub const MAX_J: u32 = 62;

/// A matrix on one physical mode with a compression ladder `q -> A_q`.
pub trait CompressibleMatrix: Send + Sync + Debug {
    /// Matrix entry `A[ν, μ]`.
    fn entry(&self, nu: &WaveletIndex, mu: &WaveletIndex) -> Result<f64>;
    /// Nonzero entries of column `μ` of `A_q`.
    fn column(&self, mu: &WaveletIndex, q: u32) -> Result<Vec<(WaveletIndex, f64)>>;
    /// Bound on `‖A − A_q‖`.
    fn ladder_error(&self, q: u32) -> f64;
    /// `A_q` has at most `α_q 2^q` nonzeros per row and column.
    fn ladder_alpha(&self, q: u32) -> f64;
    /// Bound on `‖A‖`.
    fn norm_bound(&self) -> f64;
    /// Exponent `s` with `ladder_error(q) ≲ 2^{−sq}`.
    fn exponent(&self) -> f64;
    fn name(&self) -> &str;
}

/// The Volterra integration operator in an Alpert basis.
#[derive(Clone, Debug)]
pub struct VolterraMatrix {
    basis: Arc<MultiwaveletBasis>,
}

impl VolterraMatrix {
    pub fn new(basis: Arc<MultiwaveletBasis>) -> Self {
        VolterraMatrix { basis }
    }

    pub fn basis(&self) -> &Arc<MultiwaveletBasis> {
        &self.basis
    }
}

impl CompressibleMatrix for VolterraMatrix {
    fn entry(&self, nu: &WaveletIndex, mu: &WaveletIndex) -> Result<f64> {
        self.basis.volterra_entry(nu, mu)
    }
    fn column(&self, mu: &WaveletIndex, q: u32) -> Result<Vec<(WaveletIndex, f64)>> {
        self.basis.column(mu, q, None)
    }
    fn ladder_error(&self, q: u32) -> f64 {
        self.basis.ladder_error(q)
    }
    fn ladder_alpha(&self, q: u32) -> f64 {
        self.basis.ladder_alpha(q)
    }
    fn norm_bound(&self) -> f64 {
        2.0 / std::f64::consts::PI
    }
    fn exponent(&self) -> f64 {
        self.basis.order() as f64
    }
    fn name(&self) -> &str {
        "volterra"
    }
}

/// One term of a mode factor list.
#[derive(Clone, Debug)]
pub enum Factor {
    Identity,
    Matrix(Arc<dyn CompressibleMatrix>),
}

impl Factor {
    fn norm_bound(&self) -> f64 {
        match self {
            Factor::Identity => 1.0,
            Factor::Matrix(m) => m.norm_bound(),
        }
    }

    /// Bound on the norm of any shell-wise approximation `Σ_p A_{J−p} R_p`.
    fn approx_norm_bound(&self) -> f64 {
        match self {
            Factor::Identity => 1.0,
            Factor::Matrix(m) => m.norm_bound() + (0..=MAX_J).map(|q| m.ladder_error(q).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// Operator `Σ` of Kronecker products organized by hierarchical cores.
///
/// Node `α` carries `R_α` operators `A^{(α,ν)} = Σ C^{(α,ν)}[n₁,n₂] A^{(c₁,n₁)} ⊗ A^{(c₂,n₂)}`;
/// leaves carry the mode factors and the operator is `A^{(root,1)}`.
#[derive(Clone, Debug)]
pub struct LowRankOp {
    tree: Arc<DimensionTree>,
    factors: Vec<Vec<Factor>>,
    cores: Vec<Vec<DMatrix<f64>>>,
    constants: Vec<Vec<f64>>,
    approximations: Vec<(Arc<LowRankOp>, f64)>,
}

impl LowRankOp {
    pub fn new(tree: Arc<DimensionTree>, factors: Vec<Vec<Factor>>, cores: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        if factors.len() != tree.order() || cores.len() != tree.len() {
            return Err(HtError::TreeMismatch("operator component counts do not match the tree".into()));
        }
        let rank = |a: usize| match tree.leaf_mode(a) {
            Some(i) => factors[i].len(),
            None => cores[a].len(),
        };
        for a in tree.interior() {
            let (c1, c2) = tree.children(a).unwrap();
            let want = if a == tree.root() { 1 } else { cores[a].len() };
            if cores[a].len() != want || want == 0 {
                return Err(HtError::InvalidArgument(format!("node {a} needs {want} cores")));
            }
            if cores[a].iter().any(|c| c.nrows() != rank(c1) || c.ncols() != rank(c2)) {
                return Err(HtError::InvalidArgument(format!("core shape mismatch at node {a}")));
            }
        }
        if factors.iter().any(|f| f.is_empty()) {
            return Err(HtError::InvalidArgument("every mode needs at least one factor".into()));
        }
        let mut op = LowRankOp { tree, factors, cores, constants: vec![], approximations: vec![] };
        op.constants = op.compute_constants();
        Ok(op)
    }

    pub fn identity(tree: Arc<DimensionTree>) -> Result<Self> {
        let m = tree.order();
        let cores = (0..tree.len()).map(|a| if tree.is_leaf(a) { vec![] } else { vec![DMatrix::from_element(1, 1, 1.0)] }).collect();
        LowRankOp::new(tree, vec![vec![Factor::Identity]; m], cores)
    }

    /// `I − ω ⊗ᵢ T` with factors `(I, T)` per mode, interior cores `e₁e₁ᵀ, e₂e₂ᵀ`
    /// and root core `diag(1, −ω)`.
    pub fn identity_minus_product(tree: Arc<DimensionTree>, t: Arc<dyn CompressibleMatrix>, omega: f64) -> Result<Self> {
        let m = tree.order();
        let e = |k: usize| DMatrix::from_fn(2, 2, |i, j| if i == k && j == k { 1.0 } else { 0.0 });
        let cores = (0..tree.len())
            .map(|a| {
                if tree.is_leaf(a) {
                    vec![]
                } else if a == tree.root() {
                    vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -omega])]
                } else {
                    vec![e(0), e(1)]
                }
            })
            .collect();
        let factors = vec![vec![Factor::Identity, Factor::Matrix(t)]; m];
        LowRankOp::new(tree, factors, cores)
    }

    /// Registers `(A_N, ‖A − A_N‖)` approximations, tried in order by [`apply_adaptive`].
    pub fn with_approximations(mut self, list: Vec<(Arc<LowRankOp>, f64)>) -> Self {
        self.approximations = list;
        self
    }

    pub fn tree(&self) -> &Arc<DimensionTree> {
        &self.tree
    }

    pub fn factors(&self, mode: usize) -> &[Factor] {
        &self.factors[mode]
    }

    pub fn cores(&self, node: usize) -> &[DMatrix<f64>] {
        &self.cores[node]
    }

    /// Representation rank `R_α`.
    pub fn rank(&self, node: usize) -> usize {
        match self.tree.leaf_mode(node) {
            Some(i) => self.factors[i].len(),
            None => self.cores[node].len(),
        }
    }

    /// `C⁽ⁱ⁾` for factor `n` of mode `i`.
    pub fn constant(&self, mode: usize, n: usize) -> f64 {
        self.constants[mode][n]
    }

    /// Contraction of the absolute cores against per-leaf weight vectors.
    fn abs_contraction(&self, weights: &[Vec<f64>]) -> f64 {
        let t = &self.tree;
        let mut x: Vec<Vec<f64>> = vec![vec![]; t.len()];
        for a in (0..t.len()).rev() {
            x[a] = match t.leaf_mode(a) {
                Some(i) => weights[i].clone(),
                None => {
                    let (c1, c2) = t.children(a).unwrap();
                    self.cores[a].iter().map(|c| (c.abs() * DMatrix::from_column_slice(x[c2].len(), 1, &x[c2]))
                        .iter()
                        .zip(&x[c1])
                        .map(|(u, w)| u * w)
                        .sum())
                        .collect()
                }
            };
        }
        x[t.root()][0]
    }

    fn compute_constants(&self) -> Vec<Vec<f64>> {
        let m = self.tree.order();
        (0..m)
            .map(|i| {
                (0..self.factors[i].len())
                    .map(|n| {
                        let w: Vec<Vec<f64>> = (0..m)
                            .map(|j| {
                                if j == i {
                                    (0..self.factors[j].len()).map(|k| if k == n { 1.0 } else { 0.0 }).collect()
                                } else if j < i {
                                    self.factors[j].iter().map(Factor::approx_norm_bound).collect()
                                } else {
                                    self.factors[j].iter().map(Factor::norm_bound).collect()
                                }
                            })
                            .collect();
                        self.abs_contraction(&w)
                    })
                    .collect()
            })
            .collect()
    }

    /// Bound on `‖A‖` from the absolute cores.
    pub fn norm_bound(&self) -> f64 {
        let w: Vec<Vec<f64>> = self.factors.iter().map(|f| f.iter().map(Factor::norm_bound).collect()).collect();
        self.abs_contraction(&w)
    }
}

/// Dyadic shells of best-`2^p`-term supports of each contraction sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPartition {
    /// `shells[i][p]` for `p = 0..=J+1`; the last shell is the remainder.
    pub shells: Vec<Vec<Vec<(WaveletIndex, f64)>>>,
}

impl SupportPartition {
    pub fn build(c: &ContractionSet, j: u32, mode: SortMode) -> Self {
        let shells = (0..c.modes.len())
            .map(|i| {
                let single = ContractionSet { modes: vec![c.modes[i].clone()] };
                let order: Vec<(WaveletIndex, f64)> = ordered(&single, mode).into_iter().map(|e| (e.1, e.2)).collect();
                let mut out = Vec::with_capacity(j as usize + 2);
                for p in 0..=j + 1 {
                    let lo = if p == 0 { 0 } else { 1usize << (p - 1) };
                    let hi = if p == j + 1 { order.len() } else { 1usize << p };
                    let (lo, hi) = (lo.min(order.len()), hi.min(order.len()));
                    out.push(order[lo..hi].to_vec());
                }
                out
            })
            .collect();
        SupportPartition { shells }
    }

    pub fn depth(&self) -> u32 {
        self.shells.first().map_or(0, |s| s.len() as u32 - 2)
    }

    pub fn shell_norm(&self, i: usize, p: usize) -> f64 {
        self.shells[i][p].iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }
}

/// Per-mode shell norms for all depths, used by the `J` scan.
struct ShellNorms {
    norms: Vec<Vec<f64>>,
}

impl ShellNorms {
    fn new(c: &ContractionSet, mode: SortMode) -> Self {
        let norms = c
            .modes
            .iter()
            .map(|m| {
                let single = ContractionSet { modes: vec![m.clone()] };
                let order: Vec<f64> = ordered(&single, mode).into_iter().map(|e| e.2).collect();
                let mut out = vec![];
                let mut lo = 0;
                let mut p = 0u32;
                while lo < order.len() {
                    let hi = (1usize << p).min(order.len());
                    out.push(order[lo..hi].iter().map(|x| x * x).sum::<f64>().sqrt());
                    lo = hi;
                    p += 1;
                }
                out
            })
            .collect();
        ShellNorms { norms }
    }

    fn shell(&self, i: usize, p: usize) -> f64 {
        self.norms[i].get(p).copied().unwrap_or(0.0)
    }

    fn tail(&self, i: usize, j: u32) -> f64 {
        self.norms[i].iter().skip(j as usize + 1).map(|x| x * x).sum::<f64>().sqrt()
    }

    fn depth(&self) -> u32 {
        self.norms.iter().map(|n| n.len() as u32).max().unwrap_or(0)
    }
}

fn bound_from_norms(op: &LowRankOp, s: &ShellNorms, j: u32) -> f64 {
    let mut total = 0.0;
    for (i, facs) in op.factors.iter().enumerate() {
        for (n, f) in facs.iter().enumerate() {
            if let Factor::Matrix(a) = f {
                let inner: f64 = (0..=j).map(|p| a.ladder_error(j - p) * s.shell(i, p as usize)).sum();
                total += op.constants[i][n] * (inner + a.norm_bound() * s.tail(i, j));
            }
        }
    }
    total
}

/// Computable bound on `‖A v − Ã_J v‖`.
pub fn error_bound(op: &LowRankOp, v: &HtRep, j: u32, mode: SortMode) -> Result<f64> {
    let h = if v.kind() == RepKind::Hsvd { v.clone() } else { v.hsvd() };
    let c = contractions(&h)?;
    Ok(bound_from_norms(op, &ShellNorms::new(&c, mode), j))
}

/// Bound `Σ_n #supp` per mode of `Ã_J v`: identity factors keep `supp v`, compressible
/// factors add at most `2^J Σ_{q≤J} α_q` rows.
pub fn support_bound(op: &LowRankOp, v: &HtRep, j: u32) -> Vec<f64> {
    op.factors
        .iter()
        .enumerate()
        .map(|(i, facs)| {
            facs.iter()
                .map(|f| match f {
                    Factor::Identity => v.frame(i).support() as f64,
                    Factor::Matrix(a) => (j as f64).exp2() * (0..=j).map(|q| a.ladder_alpha(q)).sum::<f64>(),
                })
                .sum()
        })
        .collect()
}

/// Outcome of an adaptive application.
#[derive(Clone, Debug)]
pub struct Applied {
    pub result: HtRep,
    pub j: u32,
    pub bound: f64,
}

/// Applies `Σ_{p≤J} A_{J−p} R_{Λ_[p]}` to every column of `frame`.
fn apply_factor(
    a: &dyn CompressibleMatrix,
    frame: &ModeFrame,
    shells: &[Vec<(WaveletIndex, f64)>],
    j: u32,
    ops: &OpCounter,
) -> Result<ModeFrame> {
    let mut trip: Vec<(WaveletIndex, usize, f64)> = Vec::new();
    for (p, shell) in shells.iter().enumerate().take(j as usize + 1) {
        let q = j - p as u32;
        for (mu, _) in shell {
            let r = frame.index.binary_search(mu).expect("shell index outside frame support");
            for (nu, val) in a.column(mu, q)? {
                trip.push((nu, r, val));
            }
        }
    }
    trip.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
    let k = frame.rank();
    ops.record(OpEvent::Sparse { entries: trip.len() * k });
    let mut index: Vec<WaveletIndex> = Vec::new();
    let mut rows: Vec<usize> = Vec::with_capacity(trip.len());
    for t in &trip {
        if index.last() != Some(&t.0) {
            index.push(t.0);
        }
        rows.push(index.len() - 1);
    }
    let mut values = DMatrix::zeros(index.len(), k);
    for c in 0..k {
        let src = frame.values.column(c);
        let mut dst = values.column_mut(c);
        for (t, &row) in trip.iter().zip(&rows) {
            dst[row] += t.2 * src[t.1];
        }
    }
    Ok(ModeFrame { index, values })
}

fn hstack(frames: Vec<ModeFrame>) -> ModeFrame {
    let mut index: Vec<WaveletIndex> = Vec::new();
    for f in &frames {
        index = crate::index::merge_indices(&index, &f.index);
    }
    let total: usize = frames.iter().map(|f| f.rank()).sum();
    let mut values = DMatrix::zeros(index.len(), total);
    let mut col = 0;
    for f in &frames {
        let pos = crate::index::positions_in(&f.index, &index);
        for c in 0..f.rank() {
            for (r, &p) in pos.iter().enumerate() {
                values[(p, col + c)] = f.values[(r, c)];
            }
        }
        col += f.rank();
    }
    ModeFrame { index, values }
}

/// `w` with `‖Av − w‖ ≤ η`, obtained as `Ã_J v` for the smallest admissible `J`.
pub fn apply_adaptive(op: &LowRankOp, v: &HtRep, eta: f64, mode: SortMode, ops: &OpCounter) -> Result<Applied> {
    if !(eta > 0.0) {
        return Err(HtError::InvalidArgument(format!("apply tolerance must be positive, got {eta}")));
    }
    if v.order() != op.tree.order() || v.tree().shape() != op.tree.shape() {
        return Err(HtError::TreeMismatch("operator and tensor trees differ".into()));
    }
    if let Some((approx, _)) = op.approximations.iter().find(|a| a.1 <= eta / 2.0) {
        let mut out = apply_adaptive(approx, v, eta / 2.0, mode, ops)?;
        out.bound += eta / 2.0;
        return Ok(out);
    }
    if v.is_zero() {
        return Ok(Applied { result: HtRep::zero(v.tree().clone()), j: 0, bound: 0.0 });
    }
    let h = if v.kind() == RepKind::Hsvd { v.clone() } else { v.hsvd_with(ops) };
    if h.is_zero() {
        return Ok(Applied { result: h, j: 0, bound: 0.0 });
    }
    let c = contractions(&h)?;
    let norms = ShellNorms::new(&c, mode);
    let mut j = 0;
    let mut bound = bound_from_norms(op, &norms, 0);
    while bound > eta {
        j += 1;
        if j > MAX_J {
            return Err(HtError::NoCompressionLevel(MAX_J as usize));
        }
        bound = bound_from_norms(op, &norms, j);
        if j > norms.depth() + 64 {
            return Err(HtError::NoCompressionLevel(j as usize));
        }
    }
    let part = SupportPartition::build(&c, j, mode);
    let t = op.tree.clone();
    let mut frames = Vec::with_capacity(t.order());
    for i in 0..t.order() {
        let u = h.frame(i);
        let mut blocks = Vec::with_capacity(op.factors[i].len());
        for f in &op.factors[i] {
            blocks.push(match f {
                Factor::Identity => u.clone(),
                Factor::Matrix(a) => apply_factor(a.as_ref(), u, &part.shells[i], j, ops)?,
            });
        }
        frames.push(hstack(blocks));
    }
    let mut transfers = vec![DMatrix::zeros(0, 0); t.len()];
    for a in t.interior() {
        let (c1, c2) = t.children(a).unwrap();
        let (r1, r2, ra) = (h.rank(c1), h.rank(c2), h.rank(a));
        let (q1, q2) = (op.rank(c1), op.rank(c2));
        let b = h.transfer(a);
        let cores = &op.cores[a];
        let rows = q1 * r1 * q2 * r2;
        let mut d = DMatrix::zeros(rows, cores.len() * ra);
        for (nu, core) in cores.iter().enumerate() {
            for k in 0..ra {
                let col = k + ra * nu;
                for n2 in 0..q2 {
                    for n1 in 0..q1 {
                        let cv = core[(n1, n2)];
                        if cv == 0.0 {
                            continue;
                        }
                        for l2 in 0..r2 {
                            for l1 in 0..r1 {
                                let j1 = l1 + r1 * n1;
                                let j2 = l2 + r2 * n2;
                                d[(j1 + q1 * r1 * j2, col)] = cv * b[(l1 + r1 * l2, k)];
                            }
                        }
                    }
                }
            }
        }
        transfers[a] = d;
    }
    let result = HtRep::from_parts(t, frames, transfers)?;
    Ok(Applied { result, j, bound })
}

/// Right-hand-side variants of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    /// `⊗ᵢ f₀`.
    Rank1,
    /// `(1−τ) Σ_k τ^k ⊗ᵢ f_k`.
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsSpec {
    pub d: usize,
    pub tau: f64,
    pub kind: RhsKind,
}

impl RhsSpec {
    /// Exact `‖f‖`; the factors `f_k` are orthonormal.
    pub fn norm(&self) -> f64 {
        match self.kind {
            RhsKind::Rank1 => 1.0,
            RhsKind::Series => ((1.0 - self.tau) / (1.0 + self.tau)).sqrt(),
        }
    }

    /// `‖Σ_{k>K} (1−τ)τ^k ⊗ f_k‖`.
    pub fn series_tail(&self, k: usize) -> f64 {
        match self.kind {
            RhsKind::Rank1 => 0.0,
            RhsKind::Series => (1.0 - self.tau) * self.tau.powi(k as i32 + 1) / (1.0 - self.tau * self.tau).sqrt(),
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        match self.kind {
            RhsKind::Rank1 => 1.0,
            RhsKind::Series => (1.0 - self.tau) * self.tau.powi(k as i32),
        }
    }

    /// Smallest `K` whose series tail is at most `eps`.
    pub fn terms_for(&self, eps: f64) -> usize {
        match self.kind {
            RhsKind::Rank1 => 0,
            RhsKind::Series => (0..).find(|&k| self.series_tail(k) <= eps).unwrap(),
        }
    }
}

/// Assembler for the experiment right-hand side with cached factor expansions.
#[derive(Debug)]
pub struct RightHandSide {
    spec: RhsSpec,
    basis: Arc<MultiwaveletBasis>,
    tree: Arc<DimensionTree>,
    cache: Mutex<Vec<FkExpansion>>,
}

impl RightHandSide {
    pub fn new(spec: RhsSpec, basis: Arc<MultiwaveletBasis>, tree: Arc<DimensionTree>) -> Result<Self> {
        if tree.order() != spec.d {
            return Err(HtError::TreeMismatch(format!("tree order {} vs d = {}", tree.order(), spec.d)));
        }
        if !(spec.tau > 0.0 && spec.tau < 1.0) {
            return Err(HtError::InvalidArgument(format!("tau must lie in (0,1), got {}", spec.tau)));
        }
        Ok(RightHandSide { spec, basis, tree, cache: Mutex::new(vec![]) })
    }

    pub fn spec(&self) -> &RhsSpec {
        &self.spec
    }

    pub fn norm(&self) -> f64 {
        self.spec.norm()
    }

    fn factor(&self, k: usize, tol: f64) -> Result<SparseModeVector> {
        let mut cache = self.cache.lock().unwrap();
        while cache.len() <= k {
            let n = cache.len();
            cache.push(FkExpansion::new(&self.basis, PiecewiseCosSpec::new(n)));
        }
        Ok(cache[k].coeffs(&self.basis, tol)?.0)
    }

    /// `f̃` with `‖f − f̃‖ ≤ η`.
    pub fn assemble(&self, eta: f64, ops: &OpCounter) -> Result<HtRep> {
        if !(eta > 0.0) {
            return Err(HtError::InvalidArgument(format!("rhs tolerance must be positive, got {eta}")));
        }
        if eta >= self.norm() {
            return Ok(HtRep::zero(self.tree.clone()));
        }
        let (kmax, budget) = match self.spec.kind {
            RhsKind::Rank1 => (0, eta),
            RhsKind::Series => {
                let k = self.spec.terms_for(eta / 2.0);
                let mass: f64 = (0..=k).map(|i| self.spec.weight(i)).sum();
                (k, eta / 2.0 / mass)
            }
        };
        let d = self.spec.d as f64;
        let per_mode = (-((-budget * budget).ln_1p() / d).exp_m1()).sqrt();
        let mut terms = Vec::with_capacity(kmax + 1);
        for k in 0..=kmax {
            let f = self.factor(k, per_mode)?;
            ops.record(OpEvent::Rhs { entries: f.len() * self.spec.d });
            terms.push((self.spec.weight(k), vec![f; self.spec.d]));
        }
        HtRep::from_terms(self.tree.clone(), &terms)
    }
}

/// Serializable operator description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OperatorSpec {
    Identity,
    /// `I − ω_d ⊗ T` with `ω_d = ½(π/2)^d`.
    VolterraExperiment,
    /// Explicit factors (per mode) and cores (per tree node, row-major).
    General { factors: Vec<Vec<FactorKind>>, cores: Vec<Vec<Vec<Vec<f64>>>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Identity,
    Volterra,
}

/// `ω_d = ½(π/2)^d`.
pub fn omega_d(d: usize) -> f64 {
    0.5 * (std::f64::consts::FRAC_PI_2).powi(d as i32)
}

impl OperatorSpec {
    pub fn build(&self, tree: Arc<DimensionTree>, basis: Arc<MultiwaveletBasis>) -> Result<LowRankOp> {
        let t: Arc<dyn CompressibleMatrix> = Arc::new(VolterraMatrix::new(basis));
        match self {
            OperatorSpec::Identity => LowRankOp::identity(tree),
            OperatorSpec::VolterraExperiment => {
                let d = tree.order();
                LowRankOp::identity_minus_product(tree, t, omega_d(d))
            }
            OperatorSpec::General { factors, cores } => {
                let factors = factors
                    .iter()
                    .map(|fs| {
                        fs.iter()
                            .map(|k| match k {
                                FactorKind::Identity => Factor::Identity,
                                FactorKind::Volterra => Factor::Matrix(t.clone()),
                            })
                            .collect()
                    })
                    .collect();
                let cores = cores
                    .iter()
                    .map(|list| {
                        list.iter()
                            .map(|rows| {
                                let nr = rows.len();
                                let nc = rows.first().map_or(0, |r| r.len());
                                if rows.iter().any(|r| r.len() != nc) {
                                    return Err(HtError::InvalidArgument("ragged core matrix".into()));
                                }
                                Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                LowRankOp::new(tree, factors, cores)
            }
        }
    }
}
