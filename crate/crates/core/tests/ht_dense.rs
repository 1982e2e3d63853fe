mod common;

use common::*;
use htwave::{DenseTensor, HtRep, ModeFrame, RankVector, RepKind, SparseModeVector, TreeShape, WaveletIndex};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn check_sigma(v: &HtRep, d: &DenseTensor, tol: f64) {
    let t = v.tree().clone();
    let shape = d.shape();
    for a in 1..t.len() {
        let m = t.modes(a);
        let want = singular_values(&unfold(&d.data, &shape, m.start, m.end));
        let got = v.sigma(a).unwrap();
        for (k, w) in want.iter().enumerate() {
            let g = got.get(k).copied().unwrap_or(0.0);
            assert!((g - w).abs() <= tol, "node {a} k={k}: {g} vs {w}");
        }
    }
}

#[test]
fn from_dense_matches_matricization_svd() {
    let mut r = rng(1);
    for shape in [TreeShape::Balanced, TreeShape::Linear] {
        let t = tree(4, shape);
        let d = random_dense(&[4, 4, 4, 4], &mut r);
        let v = HtRep::from_dense(&d, t).unwrap();
        assert_eq!(v.kind(), RepKind::Hsvd);
        check_sigma(&v, &d, 1e-10);
        assert!(dense_dist(&v.to_dense().unwrap(), &d) < 1e-12 * d.norm().max(1.0));
    }
}

#[test]
fn from_dense_rank_one_and_zero() {
    let t = tree(3, TreeShape::Balanced);
    let x = [1.0, 2.0];
    let y = [0.5, -1.0, 3.0];
    let z = [2.0, 1.0];
    let mut data = vec![];
    for k in 0..2 {
        for j in 0..3 {
            for i in 0..2 {
                data.push(x[i] * y[j] * z[k]);
            }
        }
    }
    let d = DenseTensor::from_shape(&[2, 3, 2], data);
    let v = HtRep::from_dense(&d, t.clone()).unwrap();
    let nrm = d.norm();
    for a in 1..t.len() {
        assert_eq!(v.rank(a), 1);
        assert!((v.sigma(a).unwrap()[0] - nrm).abs() < 1e-12);
    }
    let z = HtRep::from_dense(&DenseTensor::from_shape(&[2, 2, 2], vec![0.0; 8]), t).unwrap();
    assert!(z.ranks().0[1..].iter().all(|&r| r == 0));
    assert!(z.frames().iter().all(|f| f.support() == 0));
    assert_eq!(z.norm(), 0.0);
    assert!(z.to_dense().unwrap().data.is_empty());
}

#[test]
fn oversize_dense_rejected() {
    let t = tree(2, TreeShape::Balanced);
    let d = DenseTensor { indices: vec![vec![]; 2], data: vec![] };
    assert!(HtRep::from_dense(&d, t.clone()).is_ok());
    let big: Vec<WaveletIndex> = (0..2000u64).map(|k| WaveletIndex::from_linear(1, k)).collect();
    let d = DenseTensor { indices: vec![big.clone(), big], data: vec![] };
    assert!(HtRep::from_dense(&d, t).is_err());
}

#[test]
fn round_trip_three_modes() {
    let mut r = rng(2);
    let t = tree(3, TreeShape::Balanced);
    for _ in 0..10 {
        let d = random_dense(&[3, 3, 3], &mut r);
        let v = HtRep::from_dense(&d, t.clone()).unwrap();
        let back = HtRep::from_dense(&v.to_dense().unwrap(), t.clone()).unwrap().to_dense().unwrap();
        assert!(dense_dist(&back, &d) < 1e-12 * d.norm());
    }
}

#[test]
fn two_mode_singular_values() {
    let t = tree(2, TreeShape::Balanced);
    let s = 1.0 / 2f64.sqrt();
    let u = DMatrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
    let w = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
    let idx = |n: u64| (0..n).map(|k| WaveletIndex::from_linear(1, k)).collect::<Vec<_>>();
    let frames = vec![ModeFrame { index: idx(3), values: u }, ModeFrame { index: idx(2), values: w }];
    let root = DMatrix::from_column_slice(4, 1, &[2.0, 0.0, 0.0, 1.0]);
    let v = HtRep::from_parts(t, frames, vec![root, DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)]).unwrap();
    let d = v.to_dense().unwrap();
    let sv = singular_values(&unfold(&d.data, &d.shape(), 0, 1));
    assert!((sv[0] - 2.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);
}

#[test]
fn add_scale_inner_against_dense() {
    let mut r = rng(3);
    let t = tree(3, TreeShape::Balanced);
    for _ in 0..10 {
        let a = random_sparse_ht(&t, 2, 4, 8, 1, &mut r);
        let b = random_sparse_ht(&t, 3, 5, 8, 1, &mut r);
        let (da, db) = (a.to_dense().unwrap(), b.to_dense().unwrap());
        let sum = a.add(&b).unwrap();
        assert_eq!(sum.kind(), RepKind::Raw);
        for id in 1..t.len() {
            assert!(sum.rank(id) <= a.rank(id) + b.rank(id));
        }
        let ds = sum.to_dense().unwrap();
        let want = {
            let idx = ds.indices.clone();
            let (x, y) = (da.reindex(&idx), db.reindex(&idx));
            DenseTensor { indices: idx, data: x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect() }
        };
        assert!(dense_dist(&ds, &want) < 1e-12 * want.norm());
        let ip = a.inner(&b).unwrap();
        let want_ip = dense_dot(&da, &db);
        assert!((ip - want_ip).abs() < 1e-12 * da.norm() * db.norm());
        assert!((a.norm() - da.norm()).abs() < 1e-12 * da.norm());
        let sc = a.scale(-2.5).to_dense().unwrap();
        assert!((sc.norm() - 2.5 * da.norm()).abs() < 1e-12 * da.norm());
    }
}

#[test]
fn add_zero_and_collinear() {
    let t = tree(2, TreeShape::Balanced);
    let x = SparseModeVector::from_pairs(vec![(WaveletIndex::scaling(0), 1.0), (WaveletIndex::wavelet(1, 1, 0), 2.0)]);
    let y = SparseModeVector::from_pairs(vec![(WaveletIndex::wavelet(0, 0, 0), -1.0)]);
    let a = HtRep::rank_one(t.clone(), vec![x, y]).unwrap();
    let z = HtRep::zero(t);
    let d = a.to_dense().unwrap();
    assert!(dense_dist(&a.add(&z).unwrap().to_dense().unwrap(), &d) == 0.0);
    let two = a.add(&a).unwrap().to_dense().unwrap();
    let want = DenseTensor { indices: d.indices.clone(), data: d.data.iter().map(|x| 2.0 * x).collect() };
    assert!(dense_dist(&two, &want) < 1e-15);
    assert_eq!(z.norm(), 0.0);
    assert!((a.orthonormalize().norm() - 5f64.sqrt()).abs() < 1e-14);
}

#[test]
fn orthonormalize_gives_identity_grams() {
    let mut r = rng(4);
    let t = tree(4, TreeShape::Balanced);
    for _ in 0..5 {
        let v = random_ht(&t, 3, 5, &mut r);
        let o = v.orthonormalize();
        assert_eq!(o.kind(), RepKind::Orthonormal);
        for f in o.frames() {
            let g = f.values.transpose() * &f.values;
            assert!((g - DMatrix::identity(f.rank(), f.rank())).norm() < 1e-12);
        }
        for a in t.interior().filter(|&a| a != 0) {
            let m = o.transfer(a);
            let g = m.transpose() * m;
            assert!((g - DMatrix::identity(m.ncols(), m.ncols())).norm() < 1e-12);
        }
        let (dv, dof) = (v.to_dense().unwrap(), o.to_dense().unwrap());
        assert!(dense_dist(&dv, &dof) < 1e-12 * dv.norm());
        let again = o.orthonormalize();
        assert!(dense_dist(&again.to_dense().unwrap(), &dof) < 1e-12 * dv.norm());
    }
}

#[test]
fn redundant_columns_collapse() {
    let t = tree(3, TreeShape::Balanced);
    let x = SparseModeVector::from_pairs(vec![(WaveletIndex::scaling(0), 1.0), (WaveletIndex::scaling(1), -1.0)]);
    let a = HtRep::rank_one(t.clone(), vec![x.clone(), x.clone(), x]).unwrap();
    let inflated = a.add(&a).unwrap().add(&a).unwrap();
    assert_eq!(inflated.max_rank(), 3);
    let o = inflated.orthonormalize();
    assert_eq!(o.max_rank(), 1);
    assert!((o.norm() - 3.0 * 2f64.powf(1.5)).abs() < 1e-12);
}

#[test]
fn hsvd_matches_dense_oracle() {
    let mut r = rng(5);
    for shape in [TreeShape::Balanced, TreeShape::Linear] {
        let t = tree(4, shape);
        for _ in 0..5 {
            let v = random_ht(&t, 3, 4, &mut r).hsvd();
            let d = v.to_dense().unwrap();
            check_sigma(&v, &d, 1e-10);
            let rn = t.children(0).unwrap();
            assert!((v.transfer(0).norm() - d.norm()).abs() < 1e-12 * d.norm());
            assert_eq!(v.rank(rn.0), v.rank(rn.1));
        }
    }
    let z = HtRep::zero(tree(3, TreeShape::Balanced)).hsvd();
    assert!((1..5).all(|a| z.sigma(a).unwrap().is_empty()));
}

#[test]
fn lambda_examples() {
    let mut r = rng(6);
    let t = tree(4, TreeShape::Balanced);
    let v = HtRep::from_dense(&random_low_rank_dense(&[4, 4, 4, 4], 3, &mut r), t.clone()).unwrap();
    let full = v.ranks();
    assert_eq!(v.lambda(&full).unwrap(), 0.0);
    let leaf = t.leaf(2);
    let mut less = full.clone();
    less.0[leaf] -= 1;
    let s = v.sigma(leaf).unwrap();
    assert!((v.lambda(&less).unwrap() - s[s.len() - 1]).abs() < 1e-15);
    let mut bad = full.clone();
    bad.0[1] = full.0[3] * full.0[4] + 1;
    assert!(v.lambda(&bad).is_err());
    let d = v.to_dense().unwrap();
    let shape = d.shape();
    for _ in 0..20 {
        let rv = RankVector(random_admissible(&t, &full.0, &mut r));
        let (c1, c2) = t.children(0).unwrap();
        let excl = if rv.0[c1] <= rv.0[c2] { c2 } else { c1 };
        let mut want = 0.0;
        for a in (1..t.len()).filter(|&a| a != excl) {
            let m = t.modes(a);
            let sv = singular_values(&unfold(&d.data, &shape, m.start, m.end));
            want += sv.iter().skip(rv.0[a]).map(|x| x * x).sum::<f64>();
        }
        let lam = v.lambda(&rv).unwrap();
        assert!((lam * lam - want).abs() < 1e-10, "{lam} {want}");
    }
}

#[test]
fn truncate_bounds() {
    let mut r = rng(7);
    for (m, dims) in [(2usize, vec![6, 6]), (3, vec![4, 5, 4]), (4, vec![4, 4, 4, 4])] {
        let t = tree(m, TreeShape::Balanced);
        for _ in 0..30 {
            let d = random_low_rank_dense(&dims, 4, &mut r);
            let v = HtRep::from_dense(&d, t.clone()).unwrap();
            let rv = RankVector(random_admissible(&t, &v.ranks().0, &mut r));
            let w = v.truncate(&rv).unwrap();
            let err = dense_dist(&w.to_dense().unwrap(), &d);
            let lam = v.lambda(&rv).unwrap();
            assert!(err <= lam + 1e-10, "{err} > {lam}");
            let tails = v.tails(&rv);
            let best_lower = tails.iter().cloned().fold(0.0, f64::max);
            assert!(err <= ((2 * m - 3) as f64).sqrt() * best_lower * (1.0 + 1e-10) + 1e-12);
            assert_eq!(w.kind(), RepKind::Hsvd);
        }
    }
}

#[test]
fn truncate_identity_and_eckart_young() {
    let mut r = rng(8);
    let t = tree(2, TreeShape::Balanced);
    let d = random_dense(&[5, 4], &mut r);
    let v = HtRep::from_dense(&d, t.clone()).unwrap();
    let same = v.truncate(&v.ranks()).unwrap();
    assert!(dense_dist(&same.to_dense().unwrap(), &d) < 1e-12);
    let w = v.truncate(&RankVector(vec![1, 1, 1])).unwrap();
    let sv = singular_values(&unfold(&d.data, &[5, 4], 0, 1));
    let best = sv[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((dense_dist(&w.to_dense().unwrap(), &d) - best).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn add_is_linear(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let mut r = rng(seed);
        let t = tree(3, TreeShape::Linear);
        let a = random_sparse_ht(&t, 2, 3, 6, 1, &mut r);
        let b = random_sparse_ht(&t, 2, 3, 6, 1, &mut r);
        let lhs = a.add(&b.scale(c)).unwrap();
        let nb = b.norm();
        let ip = lhs.inner(&b).unwrap();
        let want = a.inner(&b).unwrap() + c * nb * nb;
        prop_assert!((ip - want).abs() < 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn hsvd_preserves_tensor(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let t = tree(4, TreeShape::Linear);
        let v = random_sparse_ht(&t, 2, 3, 6, 1, &mut r);
        let h = v.hsvd();
        let (dv, dh) = (v.to_dense().unwrap(), h.to_dense().unwrap());
        prop_assert!(dense_dist(&dv, &dh) < 1e-12 * dv.norm().max(1e-300));
    }
}
