//! Runs the series experiment through the configuration interface and writes its files.

use htwave::experiment::{run_experiment, ExperimentConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("htwave-example-series");
    let text = format!(r#"{{"d": 6, "rhs": "series", "tau": 0.5, "eps": 1e-2, "out_dir": {:?}}}"#, out);
    let cfg = ExperimentConfig::from_json(&text)?;
    let rec = run_experiment(&cfg, None)?;
    let s = &rec.summary;
    println!("δ = {:.4}, J_cap = {}, κ₁ = {:.4}", s.delta, s.derived.j_cap, s.derived.kappa1);
    for o in &s.outer {
        println!("k = {:2}: certificate {:.3e}, max rank {}, max support {}", o.k, o.certificate, o.ranks[1..].iter().max().unwrap(), o.supports.iter().max().unwrap());
    }
    println!("{:?} with bound {:.3e}; files in {}", s.termination, s.final_bound, out.display());
    Ok(())
}
