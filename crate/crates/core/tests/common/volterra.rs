//! Exact references for the Volterra operator built from quadrature, independent of the
//! closed-form entry formulas except where noted.

use htwave::alpert::{gauss_legendre, integrate, MultiwaveletBasis};
use htwave::{HtRep, ModeFrame, WaveletIndex};
use nalgebra::DMatrix;

pub fn support(f: &WaveletIndex) -> (f64, f64) {
    if f.is_scaling() {
        (0.0, 1.0)
    } else {
        f.interval()
    }
}

fn pieces(f: &WaveletIndex) -> Vec<(f64, f64)> {
    let (a, h) = support(f);
    vec![(a, a + h / 2.0), (a + h / 2.0, a + h)]
}

/// `(Tψ)(x) = ∫₀ˣ ψ`, exact for polynomial pieces.
pub fn t_eval(b: &MultiwaveletBasis, f: &WaveletIndex, x: f64) -> f64 {
    let rule = gauss_legendre(6);
    pieces(f)
        .iter()
        .filter(|(c, _)| x > *c)
        .map(|&(c, d)| {
            let hi = x.min(d);
            let mid = |y: f64| c + (y - c).min((d - c) * (1.0 - 1e-14));
            integrate(c, hi, &rule, |y| b.eval(f, mid(y)))
        })
        .sum()
}

/// `⟨Tψ_μ, Tψ_μ'⟩` by quadrature on the common refinement.
pub fn t_gram(b: &MultiwaveletBasis, m1: &WaveletIndex, m2: &WaveletIndex) -> f64 {
    let (a1, h1) = support(m1);
    let (a2, h2) = support(m2);
    let lo = a1.max(a2);
    let hi = (a1 + h1).min(a2 + h2);
    if hi <= lo {
        return 0.0;
    }
    let step = h1.min(h2) / 2.0;
    let cells = ((hi - lo) / step).round() as usize;
    let rule = gauss_legendre(8);
    (0..cells)
        .map(|c| {
            let a = lo + c as f64 * step;
            integrate(a, a + step, &rule, |x| t_eval(b, m1, x) * t_eval(b, m2, x))
        })
        .sum()
}

fn with_frames(v: &HtRep, frames: Vec<ModeFrame>) -> HtRep {
    let t = v.tree().clone();
    let transfers = (0..t.len()).map(|a| if t.is_leaf(a) { DMatrix::zeros(0, 0) } else { v.transfer(a).clone() }).collect();
    HtRep::from_parts(t, frames, transfers).unwrap()
}

/// `v` with every leaf frame mapped by `entry(row, col)` onto the row set `rows[i]`.
pub fn map_modes<F: Fn(&WaveletIndex, &WaveletIndex) -> f64>(v: &HtRep, rows: &[Vec<WaveletIndex>], entry: F) -> HtRep {
    let frames = (0..v.order())
        .map(|i| {
            let f = v.frame(i);
            let m = DMatrix::from_fn(rows[i].len(), f.support(), |r, c| entry(&rows[i][r], &f.index[c]));
            ModeFrame { index: rows[i].clone(), values: m * &f.values }
        })
        .collect();
    with_frames(v, frames)
}

/// Exact `‖(I − ω ⊗T) v − w‖`.
pub fn apply_error(b: &MultiwaveletBasis, omega: f64, v: &HtRep, w: &HtRep) -> f64 {
    let vi: Vec<Vec<WaveletIndex>> = v.frames().iter().map(|f| f.index.clone()).collect();
    let wi: Vec<Vec<WaveletIndex>> = w.frames().iter().map(|f| f.index.clone()).collect();
    let tv_w = map_modes(v, &wi, |n, m| b.volterra_entry(n, m).unwrap());
    let tv_v = map_modes(v, &vi, |n, m| b.volterra_entry(n, m).unwrap());
    let gv = map_modes(v, &vi, |n, m| t_gram(b, n, m));
    let vv = v.inner(v).unwrap();
    let tvv = tv_v.inner(v).unwrap();
    let tvtv = gv.inner(v).unwrap();
    let vw = if w.is_zero() { 0.0 } else { v.inner(w).unwrap() };
    let tvw = if w.is_zero() { 0.0 } else { tv_w.inner(w).unwrap() };
    let ww = if w.is_zero() { 0.0 } else { w.inner(w).unwrap() };
    let e2 = vv - 2.0 * omega * tvv + omega * omega * tvtv - 2.0 * (vw - omega * tvw) + ww;
    e2.max(0.0).sqrt()
}
