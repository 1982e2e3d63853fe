//! Solves the Volterra experiment with a rank-one right-hand side.

use htwave::alpert::MultiwaveletBasis;
use htwave::ops::{OperatorSpec, RhsKind, RhsSpec, RightHandSide};
use htwave::solver::{solve, SolverParams};
use htwave::{DimensionTree, OpCounter, TreeShape};
use std::sync::Arc;

fn main() -> anyhow::Result<()> {
    let d: usize = std::env::args().nth(1).map_or(Ok(8), |s| s.parse())?;
    let eps: f64 = std::env::args().nth(2).map_or(Ok(1e-3), |s| s.parse())?;
    let basis = Arc::new(MultiwaveletBasis::new(4)?);
    let tree = Arc::new(DimensionTree::new(d, TreeShape::Balanced)?);
    let op = OperatorSpec::VolterraExperiment.build(tree.clone(), basis.clone())?;
    let rhs = RightHandSide::new(RhsSpec { d, tau: 0.5, kind: RhsKind::Rank1 }, basis, tree)?;
    let ops = OpCounter::new();
    let sol = solve(&op, &rhs, &SolverParams::experiment(eps), &ops, |r| {
        println!(
            "k={} j={} eta={:.3e} |r|={:.3e} est={:.3e} rank w/r/int={}/{}/{} J={} ops={}",
            r.k, r.j, r.eta, r.residual_norm, r.estimate, r.w_rank, r.r_rank, r.intermediate_rank, r.apply_j, r.ops
        )
    })?;
    for o in &sol.trace.outer {
        println!("outer k={} steps={} cert={:.3e} target={:.3e} ranks={:?}", o.k, o.inner_steps, o.certificate, o.target, o.ranks);
    }
    println!("termination {:?}, delta {:.4e}, ops {}", sol.trace.termination, sol.trace.delta, sol.trace.total_ops);
    Ok(())
}
