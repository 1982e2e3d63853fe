//! Rank recompression, support coarsening and their combination on a sparse tensor.

use htwave::reduce::{coarsen, combined_reduce, contractions, kappas, recompress, SortMode};
use htwave::{DimensionTree, HtRep, SparseModeVector, TreeShape, WaveletIndex};
use std::sync::Arc;

fn decaying(k: usize, shift: f64) -> SparseModeVector {
    SparseModeVector::from_pairs((0..40).map(|n| (WaveletIndex::from_linear(4, n), (-(n as f64) * shift).exp() * (1.0 + k as f64 * 0.1))).collect())
}

fn main() -> anyhow::Result<()> {
    let tree = Arc::new(DimensionTree::new(4, TreeShape::Balanced)?);
    let terms: Vec<(f64, Vec<SparseModeVector>)> =
        (0..6).map(|k| (0.5f64.powi(k as i32), (0..4).map(|i| decaying(k + i, 0.2 + 0.1 * k as f64)).collect())).collect();
    let v = HtRep::from_terms(tree, &terms)?.hsvd();
    println!("input: ranks {:?}, supports {:?}, norm {:.4}", v.ranks().0, v.supports(), v.norm());
    let c = contractions(&v)?;
    println!("mode-0 contractions (first 5): {:?}", c.modes[0].iter().take(5).map(|e| format!("{:.3e}", e.1)).collect::<Vec<_>>());
    for eta in [1e-1, 1e-2, 1e-3] {
        let r = recompress(&v, eta)?;
        let s = coarsen(&v, eta, SortMode::ExactSort)?;
        let (kp, kc) = kappas(4, SortMode::ExactSort);
        let b = combined_reduce(&v, eta, 1.0, kp, kc, SortMode::ExactSort)?;
        println!(
            "η = {eta:.0e}: recompress ranks {:?} err {:.2e}; coarsen supports {:?} err {:.2e}; combined ranks {:?} supports {:?}",
            r.ranks().0,
            r.sub(&v)?.norm(),
            s.supports(),
            s.sub(&v)?.norm(),
            b.ranks().0,
            b.supports()
        );
    }
    Ok(())
}
