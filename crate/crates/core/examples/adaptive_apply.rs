//! Adaptive application of the low-rank Volterra operator to a rank-one tensor.

use htwave::alpert::{fk_coeffs, MultiwaveletBasis, PiecewiseCosSpec};
use htwave::ops::{apply_adaptive, error_bound, OperatorSpec};
use htwave::reduce::SortMode;
use htwave::{DimensionTree, HtRep, OpCounter, TreeShape};
use std::sync::Arc;

fn main() -> anyhow::Result<()> {
    let d = 4;
    let basis = Arc::new(MultiwaveletBasis::new(4)?);
    let tree = Arc::new(DimensionTree::new(d, TreeShape::Balanced)?);
    let op = OperatorSpec::VolterraExperiment.build(tree.clone(), basis.clone())?;
    let f = fk_coeffs(&basis, PiecewiseCosSpec::new(0), 1e-4)?;
    let v = HtRep::rank_one(tree, vec![f; d])?.hsvd();
    println!("input supports {:?}", v.supports());
    for j in 0..4 {
        println!("a priori bound at J = {j}: {:.3e}", error_bound(&op, &v, j, SortMode::ExactSort)?);
    }
    for eta in [1e-1, 1e-2, 1e-3, 1e-4] {
        let ops = OpCounter::new();
        let out = apply_adaptive(&op, &v, eta, SortMode::ExactSort, &ops)?;
        println!(
            "η = {eta:.0e}: J = {}, bound {:.2e}, ranks {:?}, supports {:?}, ops {}",
            out.j,
            out.bound,
            out.result.ranks().0,
            out.result.supports(),
            ops.total()
        );
    }
    Ok(())
}
