//! Multiwavelet basis: Volterra matrix entries, section norms, compression ladder and
//! expansion coefficients of the oscillatory right-hand side factors.

use htwave::alpert::{fk_coeffs, MultiwaveletBasis, PiecewiseCosSpec};
use htwave::WaveletIndex;

fn main() -> anyhow::Result<()> {
    let b = MultiwaveletBasis::new(4)?;
    let mu = WaveletIndex::wavelet(2, 1, 0);
    let col = b.column(&mu, 2, Some(5))?;
    println!("column of {mu:?}, level distance ≤ 2: {} entries", col.len());
    for (nu, v) in col.iter().take(6) {
        println!("  {nu:?}: {v:+.6e}");
    }
    for level in [2, 4, 6, 8] {
        println!("section up to level {level}: norm {:.10} (2/π = {:.10})", b.section_norm(level, 200)?, 2.0 / std::f64::consts::PI);
    }
    for q in 0..4 {
        println!("compression q = {q}: ‖T − A_q‖ ≤ {:.3e}", b.ladder_error(q));
    }
    for k in [0, 3] {
        let c = fk_coeffs(&b, PiecewiseCosSpec::new(k), 1e-6)?;
        let deepest = c.entries().iter().map(|e| e.0.level()).max().unwrap_or(0);
        println!("f_{k}: {} coefficients to 1e-6, norm {:.8}, deepest level {deepest}", c.len(), c.norm());
    }
    Ok(())
}
