//! Small dense kernels shared by the tensor routines.

use crate::opcount::{OpCounter, OpEvent};
use nalgebra::{DMatrix, DVector};

/// Relative threshold below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-14;

/// Thin SVD with singular values sorted non-increasingly.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>, ops: &OpCounter) -> Svd {
    let (n, k) = a.shape();
    if n == 0 || k == 0 {
        return Svd { u: DMatrix::zeros(n, 0), s: vec![], vt: DMatrix::zeros(0, k) };
    }
    ops.record(OpEvent::Svd { n, k });
    let (u, sv, vt) = checked_svd(a);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let s = order.iter().map(|&i| sv[i]).collect();
    let u = DMatrix::from_fn(n, order.len(), |r, c| u[(r, order[c])]);
    let vt = DMatrix::from_fn(order.len(), k, |r, c| vt[(order[r], c)]);
    Svd { u, s, vt }
}

/// Reconstruction error relative to `‖a‖`, plus departure of both factors from orthonormality.
fn reconstruction_error(a: &DMatrix<f64>, u: &DMatrix<f64>, s: &DVector<f64>, vt: &DMatrix<f64>) -> f64 {
    let k = s.len();
    let rec = (u * DMatrix::from_diagonal(s) * vt - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    let ou = (u.transpose() * u - DMatrix::<f64>::identity(k, k)).norm();
    let ov = (vt * vt.transpose() - DMatrix::<f64>::identity(k, k)).norm();
    rec + ou + ov
}

/// One-sided Jacobi SVD of a matrix with at least as many rows as columns.
fn jacobi_tall(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (n, k) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(k, k);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * x - sn * y;
                        m[(r, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_fn(k, |j, _| w.column(j).norm());
    let smax = s.max();
    let mut u = DMatrix::zeros(n, k);
    let mut filled = vec![false; k];
    for j in 0..k {
        if s[j] > RANK_TOL * smax && s[j] > 0.0 {
            u.set_column(j, &(w.column(j) / s[j]));
            filled[j] = true;
        }
    }
    let mut e = 0;
    for j in 0..k {
        while !filled[j] && e < n {
            let mut x = DVector::<f64>::zeros(n);
            x[e] = 1.0;
            e += 1;
            for l in 0..k {
                if filled[l] {
                    let proj = u.column(l).dot(&x);
                    x -= u.column(l) * proj;
                }
            }
            let nx = x.norm();
            if nx > 1e-8 {
                u.set_column(j, &(x / nx));
                filled[j] = true;
            }
        }
    }
    (u, s, v.transpose())
}

fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if a.nrows() >= a.ncols() {
        jacobi_tall(a)
    } else {
        let (u, s, vt) = jacobi_tall(&a.transpose());
        (vt.transpose(), s, u.transpose())
    }
}

/// Bidiagonal SVD verified by reconstruction and orthonormality, with a Jacobi fallback.
fn checked_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if let Some(d) = a.clone().try_svd(true, true, f64::EPSILON, 0) {
        let (u, s, vt) = (d.u.unwrap(), d.singular_values, d.v_t.unwrap());
        if reconstruction_error(a, &u, &s, &vt) <= 1e-12 {
            return (u, s, vt);
        }
    }
    jacobi_svd(a)
}

/// Number of singular values above the relative rank threshold.
pub fn numerical_rank(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 || !smax.is_finite() {
        return 0;
    }
    s.iter().take_while(|&&x| x > RANK_TOL * smax).count()
}

/// Rank-revealing orthonormal factorization `a ≈ q * r` with orthonormal `q`.
pub fn orth_factor(a: &DMatrix<f64>, ops: &OpCounter) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = a.shape();
    if n == 0 || k == 0 {
        return (DMatrix::zeros(n, 0), DMatrix::zeros(0, k));
    }
    if n > k {
        ops.record(OpEvent::Qr { n, k });
        let qr = a.clone().qr();
        let (q, r) = qr.unpack();
        let d = svd(&r, ops);
        let rk = numerical_rank(&d.s);
        let w = d.u.columns(0, rk).into_owned();
        ops.matmul(n, k, rk);
        let q = q * &w;
        let sv = scale_rows(&d.vt.rows(0, rk).into_owned(), &d.s[..rk]);
        (q, sv)
    } else {
        let d = svd(a, ops);
        let rk = numerical_rank(&d.s);
        let q = d.u.columns(0, rk).into_owned();
        let sv = scale_rows(&d.vt.rows(0, rk).into_owned(), &d.s[..rk]);
        (q, sv)
    }
}

pub fn scale_rows(a: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s[i])
}

pub fn scale_cols(a: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s[j])
}

/// Largest singular value by power iteration on `x -> At(A(x))`.
pub fn power_norm<F, G>(n_in: usize, apply: F, apply_t: G, iters: usize) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n_in == 0 {
        return 0.0;
    }
    let mut x = DVector::from_fn(n_in, |i, _| 1.0 + ((i * 7919) % 97) as f64 / 97.0);
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..iters {
        let y = apply_t(&apply(&x));
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        est = ny.sqrt();
        x = y / ny;
    }
    est
}
