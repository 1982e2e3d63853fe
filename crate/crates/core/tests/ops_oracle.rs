mod common;

use common::volterra::*;
use common::*;
use htwave::alpert::{gauss_legendre, integrate, MultiwaveletBasis, PiecewiseCosSpec, FkExpansion};
use htwave::ops::*;
use htwave::reduce::{contractions, SortMode};
use htwave::{HtRep, OpCounter, TreeShape, WaveletIndex};
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn basis() -> Arc<MultiwaveletBasis> {
    Arc::new(MultiwaveletBasis::new(4).unwrap())
}

fn experiment(m: usize, b: &Arc<MultiwaveletBasis>) -> LowRankOp {
    OperatorSpec::VolterraExperiment.build(tree(m, TreeShape::Balanced), b.clone()).unwrap()
}

#[test]
fn gram_oracle_sanity() {
    let b = basis();
    let one = WaveletIndex::scaling(0);
    assert!((t_gram(&b, &one, &one) - 1.0 / 3.0).abs() < 1e-14);
    // ⟨Tψ, ψ⟩ from quadrature agrees with the closed form
    let mu = WaveletIndex::wavelet(2, 1, 0);
    let nu = WaveletIndex::wavelet(3, 3, 0);
    let rule = gauss_legendre(8);
    let (a, h) = nu.interval();
    let q: f64 = (0..2).map(|k| {
        let lo = a + k as f64 * h / 2.0;
        integrate(lo, lo + h / 2.0, &rule, |x| t_eval(&b, &mu, x) * b.eval(&nu, x.min(a + h * (1.0 - 1e-14))))
    }).sum();
    assert!((q - b.volterra_entry(&nu, &mu).unwrap()).abs() < 1e-14);
}

#[test]
fn identity_apply_is_exact() {
    let b = basis();
    let t = tree(3, TreeShape::Balanced);
    let op = OperatorSpec::Identity.build(t.clone(), b).unwrap();
    let mut r = rng(31);
    let v = random_sparse_ht(&t, 2, 5, 64, 4, &mut r);
    let ops = OpCounter::new();
    let out = apply_adaptive(&op, &v, 1e-8, SortMode::ExactSort, &ops).unwrap();
    assert_eq!(out.bound, 0.0);
    assert!(dense_dist(&out.result.to_dense().unwrap(), &v.to_dense().unwrap()) < 1e-12);
    assert_eq!(error_bound(&op, &v, 0, SortMode::ExactSort).unwrap(), 0.0);
}

#[test]
fn apply_certificate_and_bounds() {
    let b = basis();
    let mut r = rng(32);
    for m in [2usize, 3] {
        let op = experiment(m, &b);
        let t = op.tree().clone();
        for trial in 0..6 {
            let rank = 1 + trial % 2;
            let v = random_sparse_ht(&t, rank, 4, 48, 4, &mut r).hsvd();
            for eta in [1e-1, 1e-2, 1e-4] {
                let ops = OpCounter::new();
                let out = apply_adaptive(&op, &v, eta, SortMode::ExactSort, &ops).unwrap();
                let err = apply_error(&b, omega_d(m), &v, &out.result);
                assert!(err <= eta, "m={m} eta={eta}: {err}");
                assert!(out.bound <= eta);
                let sb = support_bound(&op, &v, out.j);
                for (i, f) in out.result.frames().iter().enumerate() {
                    assert!(f.support() as f64 <= sb[i]);
                }
                for a in 1..t.len() {
                    assert!(out.result.rank(a) <= 2 * v.rank(a));
                }
                assert!(ops.total() > 0);
            }
        }
    }
}

#[test]
fn error_bound_dominates_and_decays() {
    let b = basis();
    let op = experiment(2, &b);
    let t = op.tree().clone();
    let mut r = rng(33);
    for _ in 0..5 {
        let v = random_sparse_ht(&t, 2, 6, 64, 4, &mut r).hsvd();
        let c = contractions(&v).unwrap();
        let depth = c.modes.iter().map(|m| (m.len() as f64).log2().ceil() as u32).max().unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..8 {
            let bound = error_bound(&op, &v, j, SortMode::ExactSort).unwrap();
            let out = apply_adaptive(&op, &v, bound.max(1e-300) * (1.0 + 1e-12), SortMode::ExactSort, &OpCounter::new()).unwrap();
            assert!(out.j <= j);
            let w = forced_apply(&op, &v, j);
            assert!(apply_error(&b, omega_d(2), &v, &w) <= bound * (1.0 + 1e-9) + 1e-13);
            if j > depth {
                assert!(bound <= prev * (1.0 + 1e-12));
                assert!(bound <= prev * 2f64.powi(-4) * 1.01);
            }
            prev = bound;
        }
    }
}

/// `Ã_J v` at a fixed `J`, found by passing the bound at `J` as tolerance.
fn forced_apply(op: &LowRankOp, v: &HtRep, j: u32) -> HtRep {
    let bound = error_bound(op, v, j, SortMode::ExactSort).unwrap();
    let prev = if j == 0 { f64::INFINITY } else { error_bound(op, v, j - 1, SortMode::ExactSort).unwrap() };
    assert!(bound < prev || j == 0);
    let out = apply_adaptive(op, v, bound, SortMode::ExactSort, &OpCounter::new()).unwrap();
    out.result
}

#[test]
fn rank_product_bound_for_rank_one() {
    let b = basis();
    let op = experiment(4, &b);
    let t = op.tree().clone();
    let mut r = rng(34);
    let v = random_sparse_ht(&t, 1, 3, 32, 4, &mut r);
    let out = apply_adaptive(&op, &v, 1e-3, SortMode::ExactSort, &OpCounter::new()).unwrap();
    assert!(out.result.ranks().0[1..].iter().all(|&k| k <= 2));
}

#[test]
fn general_spec_matches_experiment() {
    let b = basis();
    let t = tree(2, TreeShape::Balanced);
    let w = omega_d(2);
    let json = format!(
        r#"{{"kind":"general","factors":[["identity","volterra"],["identity","volterra"]],"cores":[[[[1.0,0.0],[0.0,{}]]],[],[]]}}"#,
        -w
    );
    let spec: OperatorSpec = serde_json::from_str(&json).unwrap();
    let g = spec.build(t.clone(), b.clone()).unwrap();
    let e = experiment(2, &b);
    let mut r = rng(35);
    let v = random_sparse_ht(&t, 2, 4, 32, 4, &mut r);
    let x = apply_adaptive(&g, &v, 1e-3, SortMode::ExactSort, &OpCounter::new()).unwrap().result;
    let y = apply_adaptive(&e, &v, 1e-3, SortMode::ExactSort, &OpCounter::new()).unwrap().result;
    assert!(dense_dist(&x.to_dense().unwrap(), &y.to_dense().unwrap()) < 1e-13);
    let back: OperatorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"general","factors":[["identity"]],"cores":[[[[1.0]]]]}"#)
        .unwrap()
        .build(t, b)
        .is_err());
}

#[test]
fn binning_apply_is_also_certified() {
    let b = basis();
    let op = experiment(2, &b);
    let t = op.tree().clone();
    let mut r = rng(36);
    let v = random_sparse_ht(&t, 2, 6, 64, 4, &mut r).hsvd();
    for eta in [1e-2, 1e-4] {
        let out = apply_adaptive(&op, &v, eta, SortMode::BinaryBinning, &OpCounter::new()).unwrap();
        assert!(apply_error(&b, omega_d(2), &v, &out.result) <= eta);
    }
}

#[test]
fn apply_rejects_bad_input() {
    let b = basis();
    let op = experiment(3, &b);
    let mut r = rng(37);
    let v = random_sparse_ht(&tree(2, TreeShape::Balanced), 1, 2, 8, 4, &mut r);
    assert!(apply_adaptive(&op, &v, 1e-2, SortMode::ExactSort, &OpCounter::new()).is_err());
    let v3 = random_sparse_ht(op.tree(), 1, 2, 8, 4, &mut r);
    assert!(apply_adaptive(&op, &v3, 0.0, SortMode::ExactSort, &OpCounter::new()).is_err());
}

/// `⟨f_k, f_l⟩` on [0,1] by quadrature.
fn fk_inner(k: usize, l: usize) -> f64 {
    let (a, c) = (PiecewiseCosSpec::new(k), PiecewiseCosSpec::new(l));
    let rule = gauss_legendre(20);
    let n = 400;
    (0..n)
        .map(|i| {
            let lo = i as f64 / n as f64 / PI;
            let hi = (i + 1) as f64 / n as f64 / PI;
            integrate(lo, hi, &rule, |x| a.eval(x) * c.eval(x))
        })
        .sum()
}

#[test]
fn series_tail_matches_orthonormality() {
    for k in 0..4 {
        for l in 0..4 {
            let want = if k == l { 1.0 } else { 0.0 };
            assert!((fk_inner(k, l) - want).abs() < 1e-12);
        }
    }
    let spec = RhsSpec { d: 4, tau: 0.5, kind: RhsKind::Series };
    for kk in 0..6 {
        let tail2: f64 = ((kk + 1)..200).map(|k| spec.weight(k).powi(2)).sum();
        assert!((spec.series_tail(kk) - tail2.sqrt()).abs() < 1e-14);
    }
    let all: f64 = (0..200).map(|k| spec.weight(k).powi(2)).sum();
    assert!((spec.norm() - all.sqrt()).abs() < 1e-14);
}

#[test]
fn rhs_zero_and_rank_one() {
    let b = basis();
    let t = tree(4, TreeShape::Balanced);
    let rhs = RightHandSide::new(RhsSpec { d: 4, tau: 0.5, kind: RhsKind::Rank1 }, b.clone(), t.clone()).unwrap();
    let ops = OpCounter::new();
    assert!(rhs.assemble(1.0, &ops).unwrap().is_zero());
    assert!(rhs.assemble(0.0, &ops).is_err());
    let f = rhs.assemble(1e-2, &ops).unwrap();
    assert_eq!(f.max_rank(), 1);
    let mut ex = FkExpansion::new(&b, PiecewiseCosSpec::new(0));
    let full = ex.coeffs(&b, 1e-9).unwrap().0;
    for fr in f.frames() {
        let col = fr.column(0);
        let tail = (1.0 - col.norm().powi(2)).max(0.0).sqrt();
        assert!(tail <= 1e-2);
        for (idx, c) in col.entries() {
            assert!((c.abs() - full.get(idx).abs()).abs() < 1e-14);
        }
    }
    assert_eq!(ops.total() as usize, f.frames().iter().map(|fr| fr.support()).sum::<usize>());
}

#[test]
fn rhs_error_certificate() {
    let b = basis();
    let t = tree(4, TreeShape::Balanced);
    let spec = RhsSpec { d: 4, tau: 0.5, kind: RhsKind::Series };
    let rhs = RightHandSide::new(spec, b.clone(), t.clone()).unwrap();
    let fine: Vec<_> = (0..40).map(|k| htwave::alpert::fk_coeffs(&b, PiecewiseCosSpec::new(k), 1e-7).unwrap()).collect();
    for eta in [3e-1, 1e-1, 1e-2, 1e-3] {
        let f = rhs.assemble(eta, &OpCounter::new()).unwrap();
        assert!(f.max_rank() <= spec.terms_for(eta / 2.0) + 1);
        // ⟨f, f̃⟩ via rank-one terms of f truncated far below eta
        let kmax = spec.terms_for(1e-7);
        let mut cross = 0.0;
        for k in 0..=kmax.min(39) {
            let term = HtRep::rank_one(t.clone(), vec![fine[k].clone(); 4]).unwrap();
            cross += spec.weight(k) * term.inner(&f).unwrap();
        }
        let e2 = spec.norm().powi(2) - 2.0 * cross + f.inner(&f).unwrap();
        assert!(e2.max(0.0).sqrt() <= eta, "eta={eta}: {}", e2.max(0.0).sqrt());
    }
}

#[test]
fn column_supports_respect_budget_for_random_indices() {
    let b = basis();
    let tm = VolterraMatrix::new(b.clone());
    let mut r = rng(38);
    for _ in 0..200 {
        let mu = WaveletIndex::from_linear(4, r.gen_range(0..4096));
        let q = r.gen_range(0..6);
        let col = tm.column(&mu, q).unwrap();
        assert!(col.len() as f64 <= tm.ladder_alpha(q) * (q as f64).exp2());
        for (nu, v) in col {
            assert_eq!(v, tm.entry(&nu, &mu).unwrap());
        }
    }
}
