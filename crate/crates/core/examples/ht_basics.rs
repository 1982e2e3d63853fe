//! Builds a hierarchical Tucker representation from a dense tensor and truncates it.

use htwave::{DenseTensor, DimensionTree, HtRep, RankVector, TreeShape};
use std::sync::Arc;

fn main() -> anyhow::Result<()> {
    let shape = [5, 4, 6, 3];
    let n: usize = shape.iter().product();
    // A smooth function sampled on a grid: nearly low rank.
    let data: Vec<f64> = (0..n)
        .map(|lin| {
            let mut rest = lin;
            let mut x = [0.0; 4];
            for (i, s) in shape.iter().enumerate().rev() {
                x[i] = (rest % s) as f64 / *s as f64;
                rest /= s;
            }
            1.0 / (1.0 + x.iter().sum::<f64>())
        })
        .collect();
    let dense = DenseTensor::from_shape(&shape, data);
    let tree = Arc::new(DimensionTree::new(4, TreeShape::Balanced)?);
    let v = HtRep::from_dense(&dense, tree.clone())?;
    println!("ranks {:?}, norm {:.6}", v.ranks().0, v.norm());
    for node in 1..tree.len() {
        let s = v.sigma(node).unwrap();
        let lead: Vec<String> = s.iter().take(4).map(|x| format!("{x:.2e}")).collect();
        println!("node {node} modes {:?}: σ = {}", tree.modes(node), lead.join(" "));
    }
    for r in 1..=3 {
        let ranks = RankVector(v.ranks().0.iter().map(|&a| a.min(r)).collect());
        let w = v.truncate(&ranks)?;
        let err = w.sub(&v)?.norm();
        println!("rank ≤ {r}: error {err:.3e}, bound λ = {:.3e}", v.lambda(&ranks)?);
    }
    Ok(())
}
