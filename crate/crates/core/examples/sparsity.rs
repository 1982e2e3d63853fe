//! Approximation-class diagnostics of a computed solution.

use htwave::experiment::{run_experiment, sparsity_diagnostics, ExperimentConfig};
use htwave::ops::RhsKind;
use htwave::reduce::GrowthSequence;

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("htwave-example-sparsity");
    let cfg = ExperimentConfig { out_dir: out.clone(), ..ExperimentConfig::new(4, RhsKind::Series, 1e-3) };
    run_experiment(&cfg, None)?;
    let u = htwave::io::read(out.join("solution.json"))?;
    for s in [0.5, 1.0, 2.0] {
        let rep = sparsity_diagnostics(&u, s, GrowthSequence::new(1.0, 1.0)?)?;
        println!("s = {s}: per-mode estimates {:?}", rep.a_s.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>());
    }
    let rep = sparsity_diagnostics(&u, 1.0, GrowthSequence::new(1.0, 1.0)?)?;
    println!("rank tails {:?}", rep.rank_tails.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>());
    println!("growth-class estimate {:.3e} ({})", rep.a_gamma, rep.note);
    Ok(())
}
