//! Exact solution of `(I − ω ⊗T) u = Σ_k c_k ⊗ f_k` as a Neumann series of rank-one terms,
//! with `Tⁿ f_k` in closed form and all inner products by quadrature.

use htwave::alpert::{gauss_legendre, integrate, MultiwaveletBasis};
use htwave::{HtRep, SparseModeVector, WaveletIndex};
use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

const CUT: f64 = 1.0 / PI;

/// `Σ_{j≥n} (iz)^j / j!`.
fn exp_remainder(n: usize, z: f64) -> Complex<f64> {
    let iz = Complex::new(0.0, z);
    if z.abs() < n as f64 + 1.0 {
        let mut term = Complex::new(1.0, 0.0);
        for j in 1..=n {
            term *= iz / j as f64;
        }
        let mut sum = Complex::new(0.0, 0.0);
        let mut j = n;
        loop {
            sum += term;
            j += 1;
            term *= iz / j as f64;
            if term.norm() <= 1e-18 * sum.norm() || term.norm() == 0.0 {
                return sum;
            }
        }
    }
    let mut partial = Complex::new(0.0, 0.0);
    let mut term = Complex::new(1.0, 0.0);
    for j in 0..n {
        partial += term;
        term *= iz / (j + 1) as f64;
    }
    iz.exp() - partial
}

/// `g = Tⁿ f_k` with `f_k = √(2π) cos(2π²(k+1)x)` on `[0, 1/π)`.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub n: usize,
    pub k: usize,
    at_cut: Vec<f64>,
}

impl Iterate {
    pub fn new(n: usize, k: usize) -> Self {
        let mut it = Iterate { n, k, at_cut: vec![] };
        it.at_cut = (0..=n).map(|m| it.inside(m, CUT)).collect();
        it
    }

    fn freq(&self) -> f64 {
        2.0 * PI * PI * (self.k as f64 + 1.0)
    }

    /// `Tᵐ f_k (x)` for `x ≤ 1/π`.
    fn inside(&self, m: usize, x: f64) -> f64 {
        let w = self.freq();
        let scale = Complex::new(0.0, w).powi(-(m as i32));
        (2.0 * PI).sqrt() * (scale * exp_remainder(m, w * x)).re
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < CUT {
            return self.inside(self.n, x);
        }
        let y = x - CUT;
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 0..self.n {
            sum += term * self.at_cut[self.n - j];
            term *= y / (j + 1) as f64;
        }
        sum
    }

    /// Quadrature cells on `[a, b]`, split at the cutoff and refined against the oscillation.
    fn cells(&self, a: f64, b: f64, h_max: f64) -> Vec<(f64, f64)> {
        let mut out = vec![];
        let mut pieces = vec![(a, b)];
        if a < CUT && CUT < b {
            pieces = vec![(a, CUT), (CUT, b)];
        }
        for (lo, hi) in pieces {
            let osc = if lo < CUT { self.freq() } else { 0.0 };
            let n = (((hi - lo) * osc).ceil() as usize).max(((hi - lo) / h_max).ceil() as usize).max(1);
            let step = (hi - lo) / n as f64;
            out.extend((0..n).map(|c| (lo + c as f64 * step, if c + 1 == n { hi } else { lo + (c + 1) as f64 * step })));
        }
        out
    }
}

/// `⟨g, ψ_ν⟩`.
pub fn coefficient(b: &MultiwaveletBasis, g: &Iterate, nu: &WaveletIndex) -> f64 {
    let (a, h) = if nu.is_scaling() { (0.0, 1.0) } else { nu.interval() };
    let rule = gauss_legendre(16);
    let mut sum = 0.0;
    for (lo, hi) in [(a, a + h / 2.0), (a + h / 2.0, a + h)] {
        let inner = |x: f64| lo + (x - lo).min((hi - lo) * (1.0 - 1e-15));
        for (c, d) in g.cells(lo, hi, 0.25) {
            sum += integrate(c, d, &rule, |x| g.eval(x) * b.eval(nu, inner(x)));
        }
    }
    sum
}

/// `⟨g, g'⟩_{L₂(0,1)}`.
pub fn gram(gs: &[Iterate]) -> DMatrix<f64> {
    let rule = gauss_legendre(16);
    let kmax = gs.iter().map(|g| g.k).max().unwrap_or(0);
    let probe = Iterate::new(0, kmax);
    let nodes: Vec<(f64, f64)> = probe
        .cells(0.0, 1.0, 0.05)
        .into_iter()
        .flat_map(|(c, d)| {
            rule.0.iter().zip(&rule.1).map(move |(t, w)| (c + (d - c) * t, w * (d - c))).collect::<Vec<_>>()
        })
        .collect();
    let vals: Vec<Vec<f64>> = gs.iter().map(|g| nodes.iter().map(|&(x, _)| g.eval(x)).collect()).collect();
    DMatrix::from_fn(gs.len(), gs.len(), |i, j| nodes.iter().enumerate().map(|(q, &(_, w))| w * vals[i][q] * vals[j][q]).sum())
}

/// Truncated Neumann series; omitted terms total below `tol` in norm.
pub struct NeumannSolution {
    pub d: usize,
    pub terms: Vec<(f64, Iterate)>,
    pub gram: DMatrix<f64>,
}

impl NeumannSolution {
    /// `weights[k]` multiplies `⊗ f_k`.
    pub fn new(d: usize, omega: f64, weights: &[f64], tol: f64) -> Self {
        let mut cands = vec![];
        for (k, &wk) in weights.iter().enumerate() {
            for n in 0..60 {
                cands.push((omega.powi(n as i32) * wk, Iterate::new(n, k)));
            }
        }
        let diag: Vec<f64> = cands.iter().map(|(_, g)| gram(std::slice::from_ref(g))[(0, 0)].sqrt()).collect();
        let sizes: Vec<f64> = cands.iter().zip(&diag).map(|((c, _), n)| c.abs() * n.powi(d as i32)).collect();
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| sizes[a].total_cmp(&sizes[b]));
        let mut dropped = 0.0;
        let mut keep = vec![true; cands.len()];
        for &i in &order {
            if dropped + sizes[i] > tol {
                break;
            }
            dropped += sizes[i];
            keep[i] = false;
        }
        let terms: Vec<(f64, Iterate)> = cands.into_iter().zip(keep).filter(|x| x.1).map(|x| x.0).collect();
        let gs: Vec<Iterate> = terms.iter().map(|t| t.1.clone()).collect();
        let gram = gram(&gs);
        NeumannSolution { d, terms, gram }
    }

    pub fn norm_sq(&self) -> f64 {
        let n = self.terms.len();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.terms[a].0 * self.terms[b].0 * self.gram[(a, b)].powi(self.d as i32);
            }
        }
        s
    }

    /// `⟨u, v⟩`.
    pub fn inner(&self, b: &MultiwaveletBasis, v: &HtRep) -> f64 {
        if v.is_zero() {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|(c, g)| {
                let vecs: Vec<SparseModeVector> = v
                    .frames()
                    .iter()
                    .map(|f| SparseModeVector::from_pairs(f.index.iter().map(|nu| (*nu, coefficient(b, g, nu))).collect()))
                    .collect();
                let r1 = HtRep::rank_one(v.tree().clone(), vecs).unwrap();
                c * r1.inner(v).unwrap()
            })
            .sum()
    }

    /// `‖u − v‖`.
    pub fn error(&self, b: &MultiwaveletBasis, v: &HtRep) -> f64 {
        let vv = if v.is_zero() { 0.0 } else { v.inner(v).unwrap() };
        (self.norm_sq() - 2.0 * self.inner(b, v) + vv).max(0.0).sqrt()
    }
}
