//! Merged ops-versus-error table for several dimensions, with a reference-slope column.

use htwave::experiment::{emit_plots_data, run_experiment, ExperimentConfig, PlotSeries};
use htwave::ops::RhsKind;

fn main() -> anyhow::Result<()> {
    let mut runs = vec![];
    for d in [4, 8, 16] {
        let out = std::env::temp_dir().join(format!("htwave-example-plot-{d}"));
        let cfg = ExperimentConfig { out_dir: out, ..ExperimentConfig::new(d, RhsKind::Rank1, 1e-2) };
        runs.push((d, run_experiment(&cfg, None)?));
    }
    let series: Vec<PlotSeries<'_>> = runs.iter().map(|(d, r)| PlotSeries { label: format!("d{d}"), rows: &r.rows }).collect();
    print!("{}", emit_plots_data(&series));
    Ok(())
}
