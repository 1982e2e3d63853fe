//! Order-`p` Alpert multiwavelets on [0,1], the Volterra integration operator
//! `(Tv)(t) = ∫₀ᵗ v` in that basis, and coefficients of the truncated cosine
//! right-hand-side factors.

use crate::error::{HtError, Result};
use crate::index::{SparseModeVector, WaveletIndex};
use nalgebra::DMatrix;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [0,1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `∫_a^b f` with `n`-point Gauss–Legendre.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>), mut f: F) -> f64 {
    let h = b - a;
    rule.0.iter().zip(&rule.1).map(|(&x, &w)| w * f(a + h * x)).sum::<f64>() * h
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Monomial coefficients of `√(2s+1) P_s(2t−1)`.
fn scaling_poly(s: usize) -> Vec<f64> {
    let norm = ((2 * s + 1) as f64).sqrt();
    (0..=s)
        .map(|k| {
            let sign = if (s + k) % 2 == 0 { 1.0 } else { -1.0 };
            norm * sign * binom(s, k) * binom(s + k, k)
        })
        .collect()
}

/// Order-`p` multiwavelet basis with Alpert's extra vanishing moments.
#[derive(Clone, Debug)]
pub struct MultiwaveletBasis {
    p: usize,
    scaling: Vec<Vec<f64>>,
    /// `mother[s][h]`: piece of ψ_s on half `h` in the local coordinate `v = 2u − h`.
    mother: Vec<[Vec<f64>; 2]>,
    two_scale: DMatrix<f64>,
    wavelet_filter: DMatrix<f64>,
    moment: f64,
    table: DMatrix<f64>,
    level_cap: u32,
    gap_one: f64,
}

impl MultiwaveletBasis {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > 10 {
            return Err(HtError::InvalidArgument(format!("wavelet order {p} outside 1..=10")));
        }
        let scaling: Vec<Vec<f64>> = (0..p).map(scaling_poly).collect();
        let rule = gauss_legendre(2 * p + 2);
        let half_fn = |r: usize, v: f64| std::f64::consts::SQRT_2 * horner(&scaling[r], v);

        // coordinates of φ_s in the orthonormal half basis √2 φ_r(2t − h)
        let h_mat = DMatrix::from_fn(p, 2 * p, |s, col| {
            let (h, r) = (col / p, col % p);
            0.5 * integrate(0.0, 1.0, &rule, |v| horner(&scaling[s], (v + h as f64) / 2.0) * half_fn(r, v))
        });
        let mut padded = DMatrix::zeros(2 * p, 2 * p);
        padded.rows_mut(0, p).copy_from(&h_mat);
        let full = padded.svd(false, true);
        let vt = full.v_t.unwrap();
        let mut order: Vec<usize> = (0..2 * p).collect();
        order.sort_by(|&i, &j| full.singular_values[i].total_cmp(&full.singular_values[j]));
        let comp = DMatrix::from_fn(2 * p, p, |r, c| vt[(order[c], r)]);

        let moment_row = |q: i32| {
            DMatrix::from_fn(1, 2 * p, |_, col| {
                let (h, r) = (col / p, col % p);
                0.5 * integrate(0.0, 1.0, &rule, |v| ((v + h as f64) / 2.0).powi(q) * half_fn(r, v))
            })
        };
        let moments: Vec<DMatrix<f64>> = (p..2 * p - 1).map(|q| &moment_row(q as i32) * &comp).collect();

        let mut chosen: Vec<nalgebra::DVector<f64>> = vec![nalgebra::DVector::zeros(p); p];
        for j in (0..p).rev() {
            let mut cons = DMatrix::zeros(p, p);
            let mut row = 0;
            for m in moments.iter().take(j) {
                cons.row_mut(row).copy_from(&m.row(0));
                row += 1;
            }
            for c in chosen.iter().skip(j + 1) {
                cons.row_mut(row).copy_from(&c.transpose());
                row += 1;
            }
            let dec = cons.svd(false, true);
            let vt = dec.v_t.unwrap();
            let kmin = (0..p).min_by(|&a, &b| dec.singular_values[a].total_cmp(&dec.singular_values[b])).unwrap();
            chosen[j] = vt.row(kmin).transpose();
        }
        let mut filter = DMatrix::zeros(p, 2 * p);
        for (j, y) in chosen.iter().enumerate() {
            let mut c = &comp * y;
            let big = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let lead = c.iter().position(|x| x.abs() >= big * (1.0 - 1e-12)).unwrap();
            if c[lead] < 0.0 {
                c = -c;
            }
            filter.row_mut(j).copy_from(&c.transpose());
        }

        let mother: Vec<[Vec<f64>; 2]> = (0..p)
            .map(|s| {
                let piece = |h: usize| {
                    let mut out = vec![0.0; p];
                    for r in 0..p {
                        for (k, a) in scaling[r].iter().enumerate() {
                            out[k] += filter[(s, h * p + r)] * std::f64::consts::SQRT_2 * a;
                        }
                    }
                    out
                };
                [piece(0), piece(1)]
            })
            .collect();

        let mut basis = MultiwaveletBasis {
            p,
            scaling,
            mother,
            two_scale: h_mat,
            wavelet_filter: filter,
            moment: 0.0,
            table: DMatrix::zeros(2 * p, 2 * p),
            level_cap: 0,
            gap_one: 0.0,
        };
        basis.moment = (0..2)
            .map(|h| integrate(0.5 * h as f64, 0.5 * (h + 1) as f64, &rule, |u| basis.mother_eval(0, u) * u.powi(p as i32)))
            .sum();
        basis.table = basis.reference_table();
        basis.level_cap = (0..64u32)
            .take_while(|&l| WaveletIndex::wavelet(l, (1u64 << l) - 1, p - 1).linear(p).is_some())
            .last()
            .unwrap_or(0);
        basis.gap_one = basis.gap_block_norm(1);
        Ok(basis)
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Finest wavelet level whose indices fit in a signed 64-bit enumeration.
    pub fn level_cap(&self) -> u32 {
        self.level_cap
    }

    /// `∫₀¹ ψ₀(u) u^p du`; the higher slots have this moment zero.
    pub fn leading_moment(&self) -> f64 {
        self.moment
    }

    pub fn scaling_coeffs(&self, s: usize) -> &[f64] {
        &self.scaling[s]
    }

    pub fn mother_piece(&self, s: usize, half: usize) -> &[f64] {
        &self.mother[s][half]
    }

    /// Rows: φ_s expressed in the half-interval basis `√2 φ_r(2t − h)`, column `h·p + r`.
    pub fn two_scale(&self) -> &DMatrix<f64> {
        &self.two_scale
    }

    /// Rows: ψ_s expressed in the same half-interval basis.
    pub fn wavelet_filter(&self) -> &DMatrix<f64> {
        &self.wavelet_filter
    }

    fn mother_eval(&self, s: usize, u: f64) -> f64 {
        let h = usize::from(u >= 0.5);
        horner(&self.mother[s][h], 2.0 * u - h as f64)
    }

    /// Reference function `a` on [0,1]: scaling functions first, then mother wavelets.
    fn reference_eval(&self, a: usize, x: f64) -> f64 {
        if a < self.p {
            horner(&self.scaling[a], x)
        } else {
            self.mother_eval(a - self.p, x)
        }
    }

    /// `E[a][b] = ∫₀¹ F_b(x) ∫₀ˣ F_a`.
    fn reference_table(&self) -> DMatrix<f64> {
        let n = 2 * self.p;
        let rule = gauss_legendre(self.p + 2);
        DMatrix::from_fn(n, n, |a, b| {
            let left_total = integrate(0.0, 0.5, &rule, |y| self.reference_eval(a, y));
            (0..2)
                .map(|h| {
                    let lo = 0.5 * h as f64;
                    let base = if h == 0 { 0.0 } else { left_total };
                    integrate(lo, lo + 0.5, &rule, |x| {
                        let inner = base + integrate(lo, x, &rule, |y| self.reference_eval(a, y));
                        self.reference_eval(b, x) * inner
                    })
                })
                .sum()
        })
    }

    /// Value of the basis function `idx` at `x`.
    pub fn eval(&self, idx: &WaveletIndex, x: f64) -> f64 {
        if idx.is_scaling() {
            if (0.0..=1.0).contains(&x) {
                horner(&self.scaling[idx.slot()], x)
            } else {
                0.0
            }
        } else {
            let l = idx.level();
            let u = x * (l as f64).exp2() - idx.translation() as f64;
            if (0.0..1.0).contains(&u) {
                (l as f64 / 2.0).exp2() * self.mother_eval(idx.slot(), u)
            } else {
                0.0
            }
        }
    }

    fn fits(&self, idx: &WaveletIndex) -> Result<()> {
        match idx.linear(self.p) {
            Some(_) if idx.slot() < self.p => Ok(()),
            Some(_) => Err(HtError::InvalidArgument(format!("slot {} for order {}", idx.slot(), self.p))),
            None => Err(HtError::LevelOverflow(idx.level())),
        }
    }

    /// Level of the support interval; the scaling layer sits at level 0.
    fn support_level(idx: &WaveletIndex) -> u32 {
        if idx.is_scaling() {
            0
        } else {
            idx.level()
        }
    }

    fn reference_id(&self, idx: &WaveletIndex) -> usize {
        if idx.is_scaling() {
            idx.slot()
        } else {
            self.p + idx.slot()
        }
    }

    /// `log2` magnitude and mantissa of the `t^{p−1}` coefficient of `mu` on the given half.
    fn lead(&self, mu: &WaveletIndex, half: usize) -> (f64, f64) {
        let p = self.p;
        if mu.is_scaling() {
            (self.scaling[mu.slot()].get(p - 1).copied().unwrap_or(0.0), 0.0)
        } else {
            let l = mu.level() as f64;
            (self.mother[mu.slot()][half][p - 1], (l + 1.0) * (p as f64 - 1.0) + l / 2.0)
        }
    }

    /// `⟨Tψ_μ, ψ_ν⟩` where `fine` is strictly finer than `coarse` and nested in it.
    fn nested_entry(&self, fine: &WaveletIndex, coarse: &WaveletIndex) -> f64 {
        if fine.slot() != 0 {
            return 0.0;
        }
        let half = if coarse.is_scaling() {
            0
        } else {
            let gap = fine.level() - coarse.level();
            ((fine.translation() >> (gap - 1)) & 1) as usize
        };
        let (c, e) = self.lead(coarse, half);
        if c == 0.0 {
            return 0.0;
        }
        let pe = self.p as f64;
        c / pe * self.moment * (e - fine.level() as f64 * (pe + 0.5)).exp2()
    }

    /// Closed-form `⟨Tψ_μ, ψ_ν⟩` without level checks.
    pub fn entry_unchecked(&self, nu: &WaveletIndex, mu: &WaveletIndex) -> f64 {
        let (ln, lm) = (Self::support_level(nu), Self::support_level(mu));
        match ln.cmp(&lm) {
            Ordering::Equal => {
                if nu.is_scaling() || mu.is_scaling() || nu.translation() == mu.translation() {
                    let h = (-(ln as f64)).exp2();
                    h * self.table[(self.reference_id(mu), self.reference_id(nu))]
                } else {
                    0.0
                }
            }
            Ordering::Greater => {
                if !mu.is_scaling() && nu.translation() >> (ln - lm) != mu.translation() {
                    0.0
                } else {
                    self.nested_entry(nu, mu)
                }
            }
            Ordering::Less => {
                if !nu.is_scaling() && mu.translation() >> (lm - ln) != nu.translation() {
                    0.0
                } else {
                    -self.nested_entry(mu, nu)
                }
            }
        }
    }

    /// Exact `⟨Tψ_μ, ψ_ν⟩`.
    pub fn volterra_entry(&self, nu: &WaveletIndex, mu: &WaveletIndex) -> Result<f64> {
        self.fits(nu)?;
        self.fits(mu)?;
        Ok(self.entry_unchecked(nu, mu))
    }

    /// Nonzero entries `(ν, ⟨Tψ_μ, ψ_ν⟩)` of column `μ` with level distance at most `q`,
    /// optionally restricted to levels `≤ max_level`.
    pub fn column(&self, mu: &WaveletIndex, q: u32, max_level: Option<u32>) -> Result<Vec<(WaveletIndex, f64)>> {
        self.fits(mu)?;
        let p = self.p;
        let lm = Self::support_level(mu);
        let mut out = Vec::new();
        let push = |nu: WaveletIndex, out: &mut Vec<(WaveletIndex, f64)>| {
            let v = self.entry_unchecked(&nu, mu);
            if v != 0.0 {
                out.push((nu, v));
            }
        };
        // same support interval
        if lm == 0 {
            for s in 0..p {
                push(WaveletIndex::scaling(s), &mut out);
            }
            for s in 0..p {
                push(WaveletIndex::wavelet(0, 0, s), &mut out);
            }
        } else {
            for s in 0..p {
                push(WaveletIndex::wavelet(lm, mu.translation(), s), &mut out);
            }
        }
        // coarser rows
        if !mu.is_scaling() && mu.slot() == 0 && lm > 0 {
            for gap in 1..=q.min(lm) {
                let l = lm - gap;
                let k = mu.translation() >> gap;
                if l == 0 {
                    for s in 0..p {
                        push(WaveletIndex::scaling(s), &mut out);
                    }
                }
                for s in 0..p {
                    push(WaveletIndex::wavelet(l, k, s), &mut out);
                }
            }
        }
        // finer rows, slot 0 only
        let leads_nonzero = (0..2).any(|h| self.lead(mu, h).0 != 0.0);
        if leads_nonzero {
            let top = max_level.map_or(lm + q, |m| m.min(lm + q));
            for l in (lm + 1)..=top {
                if l > self.level_cap {
                    return Err(HtError::LevelOverflow(l));
                }
                let gap = l - lm;
                let base = if mu.is_scaling() { 0 } else { mu.translation() << gap };
                let count = if mu.is_scaling() { 1u64 << l } else { 1u64 << gap };
                for t in 0..count {
                    push(WaveletIndex::wavelet(l, base + t, 0), &mut out);
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// All indices with support level `≤ level_max`, in natural order.
    pub fn section_indices(&self, level_max: u32) -> Vec<WaveletIndex> {
        let n = self.p as u64 * (1u64 << (level_max + 1));
        (0..n).map(|k| WaveletIndex::from_linear(self.p, k)).collect()
    }

    /// Sparse section of `T` (or of its level-distance-`q` truncation) on levels `≤ level_max`,
    /// as `(row, col, value)` triplets into [`MultiwaveletBasis::section_indices`].
    pub fn section(&self, level_max: u32, q: Option<u32>) -> Result<Vec<(usize, usize, f64)>> {
        let idx = self.section_indices(level_max);
        let mut out = Vec::new();
        for (c, mu) in idx.iter().enumerate() {
            for (nu, v) in self.column(mu, q.unwrap_or(level_max + 1), Some(level_max))? {
                let r = nu.linear(self.p).unwrap() as usize;
                out.push((r, c, v));
            }
        }
        Ok(out)
    }

    /// Spectral norm of the section on levels `≤ level_max` by power iteration.
    pub fn section_norm(&self, level_max: u32, iters: usize) -> Result<f64> {
        let n = self.section_indices(level_max).len();
        let trip = self.section(level_max, None)?;
        Ok(sparse_norm(n, &trip, iters))
    }

    /// Norm of the part of `T` between level layers `l` and `l + gap` (rows finer).
    fn block_norm(&self, l: u32, gap: u32) -> f64 {
        let coarse: Vec<WaveletIndex> = if l == 0 {
            (0..self.p).map(WaveletIndex::scaling).chain((0..self.p).map(|s| WaveletIndex::wavelet(0, 0, s))).collect()
        } else {
            (0..self.p).map(|s| WaveletIndex::wavelet(l, 0, s)).collect()
        };
        let left = WaveletIndex::wavelet(l + gap, 0, 0);
        let right = WaveletIndex::wavelet(l + gap, 1u64 << (gap - 1), 0);
        let m = DMatrix::from_fn(coarse.len(), 2, |i, h| {
            let nu = if h == 0 { left } else { right };
            self.entry_unchecked(&nu, &coarse[i])
        });
        m.singular_values().max() * ((gap - 1) as f64 / 2.0).exp2()
    }

    /// Bound on `‖T − A_q‖` where `A_q` keeps level distance `≤ q`.
    ///
    /// The level-gap-`g` blocks scale exactly like `2^{−pg}`, so only gap 1 is evaluated.
    pub fn ladder_error(&self, q: u32) -> f64 {
        let p = self.p as f64;
        2.0 * self.gap_one * (-p * q as f64).exp2() / (1.0 - (-p).exp2())
    }

    /// Largest norm of a level-gap-`gap` block, evaluated directly.
    pub fn gap_block_norm(&self, gap: u32) -> f64 {
        self.block_norm(0, gap).max(self.block_norm(1, gap))
    }

    /// `α_q` with at most `α_q 2^q` nonzeros per row and column of `A_q`.
    pub fn ladder_alpha(&self, q: u32) -> f64 {
        let p = self.p as f64;
        let q2 = (q as f64).exp2();
        (2.0 * p + p * (q as f64 + 1.0) + 2.0 * q2 - 2.0) / q2
    }
}

/// Power iteration on a square sparse matrix given as triplets.
pub fn sparse_norm(n: usize, trip: &[(usize, usize, f64)], iters: usize) -> f64 {
    let apply = |x: &nalgebra::DVector<f64>| {
        let mut y = nalgebra::DVector::zeros(n);
        for &(r, c, v) in trip {
            y[r] += v * x[c];
        }
        y
    };
    let apply_t = |x: &nalgebra::DVector<f64>| {
        let mut y = nalgebra::DVector::zeros(n);
        for &(r, c, v) in trip {
            y[c] += v * x[r];
        }
        y
    };
    crate::linalg::power_norm(n, apply, apply_t, iters)
}

/// Right-hand-side factor `f_k(x) = A·χ_{[0,1/π]}(x)·cos(2π²(k+1)x)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PiecewiseCosSpec {
    pub k: usize,
    pub amplitude: f64,
}

impl PiecewiseCosSpec {
    /// Unit-norm factor with amplitude `√(2π)`.
    pub fn new(k: usize) -> Self {
        PiecewiseCosSpec { k, amplitude: (2.0 * PI).sqrt() }
    }

    pub fn frequency(&self) -> f64 {
        2.0 * PI * PI * (self.k as f64 + 1.0)
    }

    pub fn cutoff(&self) -> f64 {
        1.0 / PI
    }

    pub fn eval(&self, x: f64) -> f64 {
        if (0.0..self.cutoff()).contains(&x) {
            self.amplitude * (self.frequency() * x).cos()
        } else {
            0.0
        }
    }

    /// `‖f_k‖_{L₂}`: the cutoff spans `k + 1` full periods.
    pub fn norm(&self) -> f64 {
        self.amplitude * (0.5 / PI).sqrt()
    }

    /// Remainder of the degree-`p−1` Taylor expansion about `c`, evaluated at `c + y`.
    fn taylor_remainder(&self, p: usize, c: f64, y: f64) -> f64 {
        let w = self.frequency();
        let theta = w * c;
        let cyc = [theta.cos(), -theta.sin(), -theta.cos(), theta.sin()];
        let z = w * y;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..80 {
            if n > 0 {
                term *= z / n as f64;
            }
            if n >= p {
                let t = cyc[n % 4] * term;
                sum += t;
                if term.abs() <= 1e-18 * sum.abs() || term == 0.0 {
                    break;
                }
            }
        }
        self.amplitude * sum
    }
}

#[derive(Clone, Debug)]
struct Frontier {
    err2: f64,
    level: u32,
    k: u64,
    wavelet: Vec<f64>,
}

impl PartialEq for Frontier {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Frontier {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err2.total_cmp(&o.err2).then(o.level.cmp(&self.level)).then(o.k.cmp(&self.k))
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Greedy tree expansion of one right-hand-side factor, extendable on demand.
///
/// Every refinement step replaces the projection error on a dyadic interval by
/// the errors on its two halves and emits the interval's wavelet coefficients.
#[derive(Clone, Debug)]
pub struct FkExpansion {
    spec: PiecewiseCosSpec,
    p: usize,
    level_cap: u32,
    entries: Vec<(WaveletIndex, f64)>,
    checkpoints: Vec<(usize, f64)>,
    heap: BinaryHeap<Frontier>,
    err2: Neumaier,
    overflow: Option<u32>,
}

const QUAD_POINTS: usize = 16;

impl FkExpansion {
    pub fn new(basis: &MultiwaveletBasis, spec: PiecewiseCosSpec) -> Self {
        let p = basis.order();
        let (scal, root, err2) = local_projection(basis, &spec, 0, 0, true);
        let mut heap = BinaryHeap::new();
        let mut acc = Neumaier::default();
        if err2 > 0.0 {
            heap.push(Frontier { err2, level: 0, k: 0, wavelet: root });
            acc.add(err2);
        }
        let entries: Vec<(WaveletIndex, f64)> =
            scal.iter().enumerate().map(|(s, &c)| (WaveletIndex::scaling(s), c)).collect();
        FkExpansion {
            spec,
            p,
            level_cap: basis.level_cap(),
            checkpoints: vec![(entries.len(), acc.value().max(0.0))],
            entries,
            heap,
            err2: acc,
            overflow: None,
        }
    }

    pub fn spec(&self) -> &PiecewiseCosSpec {
        &self.spec
    }

    fn refine_once(&mut self, basis: &MultiwaveletBasis) -> Result<bool> {
        let Some(top) = self.heap.peek() else { return Ok(false) };
        if top.level > self.level_cap {
            self.overflow = Some(top.level);
            return Err(HtError::LevelOverflow(top.level));
        }
        let top = self.heap.pop().unwrap();
        for (s, &c) in top.wavelet.iter().enumerate() {
            self.entries.push((WaveletIndex::wavelet(top.level, top.k, s), c));
        }
        self.err2.add(-top.err2);
        for child in [2 * top.k, 2 * top.k + 1] {
            let (_, wav, e2) = local_projection(basis, &self.spec, top.level + 1, child, false);
            if e2 > 0.0 {
                self.err2.add(e2);
                self.heap.push(Frontier { err2: e2, level: top.level + 1, k: child, wavelet: wav });
            }
        }
        if self.heap.is_empty() {
            self.err2 = Neumaier::default();
        }
        self.checkpoints.push((self.entries.len(), self.err2.value().max(0.0)));
        Ok(true)
    }

    /// Coefficients with `L₂` tail at most `tol`, and that tail.
    pub fn coeffs(&mut self, basis: &MultiwaveletBasis, tol: f64) -> Result<(SparseModeVector, f64)> {
        if tol <= 0.0 || !tol.is_finite() {
            return Err(HtError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let t2 = tol * tol;
        while self.checkpoints.last().unwrap().1 > t2 {
            if let Some(l) = self.overflow {
                return Err(HtError::LevelOverflow(l));
            }
            if !self.refine_once(basis)? {
                break;
            }
        }
        let pos = self.checkpoints.partition_point(|c| c.1 > t2);
        let (n, e2) = self.checkpoints[pos.min(self.checkpoints.len() - 1)];
        Ok((SparseModeVector::from_pairs(self.entries[..n].to_vec()), e2.sqrt()))
    }

    pub fn order(&self) -> usize {
        self.p
    }
}

/// Wavelet coefficients of `f_k` with `L₂` tail at most `tol`.
pub fn fk_coeffs(basis: &MultiwaveletBasis, spec: PiecewiseCosSpec, tol: f64) -> Result<SparseModeVector> {
    FkExpansion::new(basis, spec).coeffs(basis, tol).map(|r| r.0)
}

/// Low part of `1/π` in double-double form.
const INV_PI_LO: f64 = -1.9678676675182486e-17;

/// On the dyadic interval `(level, k)`: scaling projections, wavelet coefficients and the
/// squared projection error `‖f − P_I f‖²`. With `scaling_layer`, the scaling projections
/// are those of `f` itself on [0,1].
///
/// Integration runs in the local coordinate `u ∈ [0,1]`; the cutoff position is resolved
/// in double-double so that intervals down to the level cap stay distinguishable.
fn local_projection(
    basis: &MultiwaveletBasis,
    spec: &PiecewiseCosSpec,
    level: u32,
    k: u64,
    scaling_layer: bool,
) -> (Vec<f64>, Vec<f64>, f64) {
    let p = basis.order();
    let h = (-(level as f64)).exp2();
    let k_hi = (k >> 26) << 26;
    let (a_hi, a_lo) = (k_hi as f64 * h, (k - k_hi) as f64 * h);
    let a = a_hi + a_lo;
    let u_cut = ((std::f64::consts::FRAC_1_PI - a_hi) + (INV_PI_LO - a_lo)) / h;
    if u_cut <= 0.0 {
        return (vec![0.0; p], vec![0.0; p], 0.0);
    }
    let w = spec.frequency();
    let series = !scaling_layer && u_cut >= 1.0 && w * h <= 1.0;
    let centre = a + 0.5 * h;
    let g = |u: f64| {
        if series {
            spec.taylor_remainder(p, centre, h * (u - 0.5))
        } else if u < u_cut {
            spec.amplitude * (w * (a + h * u)).cos()
        } else {
            0.0
        }
    };

    let mut breaks = vec![0.0, 0.5, 1.0];
    if u_cut < 1.0 {
        breaks.push(u_cut);
        breaks.sort_by(f64::total_cmp);
    }
    let rule = gauss_legendre(QUAD_POINTS);
    let mut scal = vec![0.0; p];
    let mut wav = vec![0.0; p];
    let mut sq = 0.0;
    for seg in breaks.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let pieces = if series { 1 } else { ((w * h * (hi - lo)) / 2.0).ceil().max(1.0) as usize };
        let step = (hi - lo) / pieces as f64;
        let half = usize::from(lo >= 0.5);
        for m in 0..pieces {
            let (s0, s1) = (lo + m as f64 * step, lo + (m + 1) as f64 * step);
            for (&x, &wt) in rule.0.iter().zip(&rule.1) {
                let u = s0 + (s1 - s0) * x;
                let ww = wt * (s1 - s0);
                let gu = g(u);
                if gu == 0.0 {
                    continue;
                }
                sq += ww * gu * gu;
                let v = 2.0 * u - half as f64;
                for s in 0..p {
                    scal[s] += ww * gu * horner(&basis.scaling[s], u);
                    wav[s] += ww * gu * horner(&basis.mother[s][half], v);
                }
            }
        }
    }
    let rh = h.sqrt();
    scal.iter_mut().chain(wav.iter_mut()).for_each(|c| *c *= rh);
    let e2 = (h * sq - scal.iter().map(|c| c * c).sum::<f64>()).max(0.0);
    (scal, wav, e2)
}

/// Maximum deviations found by [`basis_selfcheck`].
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SelfCheckReport {
    pub level_cap: u32,
    pub functions: usize,
    pub gram_deviation: f64,
    pub moment_deviation: f64,
    pub refinement_deviation: f64,
}

/// Quadrature checks of orthonormality, vanishing moments and two-scale relations
/// for all functions on levels `≤ level_cap`.
pub fn basis_selfcheck(basis: &MultiwaveletBasis, level_cap: u32) -> SelfCheckReport {
    let p = basis.order();
    let fine = level_cap + 1;
    let cells = 1u64 << fine;
    let hf = (-(fine as f64)).exp2();
    let rule = gauss_legendre(p + 1);
    let idx = basis.section_indices(level_cap);

    // single-scale coefficients on the finest cells covered by each function
    let coeffs: Vec<(u64, Vec<f64>)> = idx
        .iter()
        .map(|f| {
            let (lo, width) = if f.is_scaling() { (0.0, 1.0) } else { f.interval() };
            let first = (lo / hf).round() as u64;
            let n = ((width / hf).round() as u64).min(cells);
            let mut c = Vec::with_capacity((n as usize) * p);
            for cell in first..first + n {
                let a = cell as f64 * hf;
                for r in 0..p {
                    c.push(integrate(a, a + hf, &rule, |x| {
                        basis.eval(f, x) * horner(&basis.scaling[r], (x - a) / hf) / hf.sqrt()
                    }));
                }
            }
            (first, c)
        })
        .collect();
    let mut gram: f64 = 0.0;
    for i in 0..idx.len() {
        for j in 0..=i {
            let (fi, ci) = &coeffs[i];
            let (fj, cj) = &coeffs[j];
            let (ni, nj) = (ci.len() as u64 / p as u64, cj.len() as u64 / p as u64);
            let lo = (*fi).max(*fj);
            let hi = (fi + ni).min(fj + nj);
            let mut dot = 0.0;
            if lo < hi {
                let oi = ((lo - fi) as usize) * p;
                let oj = ((lo - fj) as usize) * p;
                let len = ((hi - lo) as usize) * p;
                dot = ci[oi..oi + len].iter().zip(&cj[oj..oj + len]).map(|(a, b)| a * b).sum();
            }
            let want = if i == j { 1.0 } else { 0.0 };
            gram = gram.max((dot - want).abs());
        }
    }
    let mut moment: f64 = 0.0;
    let mrule = gauss_legendre(p + 1);
    for f in idx.iter().filter(|f| !f.is_scaling()) {
        let (a, h) = f.interval();
        for j in 0..p {
            let m: f64 = (0..2)
                .map(|half| {
                    let lo = a + 0.5 * h * half as f64;
                    integrate(lo, lo + 0.5 * h, &mrule, |x| x.powi(j as i32) * basis.eval(f, x.min(a + h * (1.0 - 1e-15))))
                })
                .sum();
            moment = moment.max(m.abs());
        }
    }
    let mut refine: f64 = 0.0;
    for t in 0..=64 {
        let x = (t as f64 + 0.5) / 65.0;
        let half = usize::from(x >= 0.5);
        let v = 2.0 * x - half as f64;
        for s in 0..p {
            let fine_sum = |row: nalgebra::RowDVector<f64>| -> f64 {
                (0..p).map(|r| row[half * p + r] * std::f64::consts::SQRT_2 * horner(&basis.scaling[r], v)).sum()
            };
            let phi = fine_sum(basis.two_scale.row(s).into_owned());
            let psi = fine_sum(basis.wavelet_filter.row(s).into_owned());
            refine = refine.max((phi - horner(&basis.scaling[s], x)).abs());
            refine = refine.max((psi - basis.mother_eval(s, x)).abs());
        }
    }
    SelfCheckReport {
        level_cap,
        functions: idx.len(),
        gram_deviation: gram,
        moment_deviation: moment,
        refinement_deviation: refine,
    }
}
