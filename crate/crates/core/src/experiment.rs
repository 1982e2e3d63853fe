//! Experiment configuration, runs, sparsity diagnostics and plot data.
//!
//! A run writes four files into `out_dir`:
//!
//! * `iterations.csv`: one row per inner step, columns
//!   `k,j,eta,residual_norm,error_estimate,max_w_rank,max_r_rank,max_intermediate_rank,apply_level,max_w_support,ops`.
//! * `timing.csv`: `k,j,seconds` wall-clock times of the same rows.
//! * `summary.json`: derived constants, per-outer-step records and the final ranks and supports.
//! * `solution.json`: the final iterate in the [`crate::io`] format.
//!
//! Everything except `timing.csv` is byte-identical across runs of the same configuration.

use crate::alpert::MultiwaveletBasis;
use crate::error::{HtError, Result};
use crate::ht::HtRep;
use crate::opcount::OpCounter;
use crate::ops::{omega_d, OperatorSpec, RhsKind, RhsSpec, RightHandSide};
use crate::reduce::{contractions, GrowthSequence, SortMode};
use crate::solver::{solve, Derived, InnerRecord, OuterRecord, SolverParams, Termination};
use crate::tree::{DimensionTree, TreeShape};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// JSON schema of [`ExperimentConfig`].
pub const CONFIG_SCHEMA: &str = include_str!("../schema/experiment_config.schema.json");

/// Largest dimension accepted without `long`.
pub const SHORT_MAX_D: usize = 32;

fn default_p() -> usize {
    4
}
fn default_tau() -> f64 {
    0.5
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub rhs: RhsKind,
    pub eps: f64,
    #[serde(default)]
    pub tree: TreeShape,
    #[serde(default)]
    pub sort: SortMode,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub long: bool,
}

impl ExperimentConfig {
    pub fn new(d: usize, rhs: RhsKind, eps: f64) -> Self {
        ExperimentConfig {
            d,
            p: 4,
            tau: 0.5,
            rhs,
            eps,
            tree: TreeShape::Balanced,
            sort: SortMode::ExactSort,
            out_dir: default_out(),
            seed: 0,
            long: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| HtError::InvalidArgument(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(HtError::InvalidArgument(format!("config field `{field}`: {msg}")));
        if self.d < 2 {
            return bad("d", format!("must be at least 2, got {}", self.d));
        }
        if self.d > SHORT_MAX_D && !self.long {
            return bad("d", format!("{} exceeds {SHORT_MAX_D}; set `long` to run it", self.d));
        }
        if !(1..=10).contains(&self.p) {
            return bad("p", format!("must lie in 1..=10, got {}", self.p));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau", format!("must lie in (0,1), got {}", self.tau));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        Ok(())
    }

    pub fn params(&self) -> SolverParams {
        SolverParams { sort: self.sort, ..SolverParams::experiment(self.eps) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub omega_d: f64,
    pub derived: Derived,
    pub delta: f64,
    pub rhs_norm: f64,
    pub termination: Termination,
    pub final_bound: f64,
    pub ranks: Vec<usize>,
    pub supports: Vec<usize>,
    pub total_ops: u64,
    pub inner_steps: usize,
    pub outer: Vec<OuterRecord>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<InnerRecord>,
    pub summary: RunSummary,
    pub solution: HtRep,
}

pub const CSV_HEADER: &str =
    "k,j,eta,residual_norm,error_estimate,max_w_rank,max_r_rank,max_intermediate_rank,apply_level,max_w_support,ops";

fn e17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn iterations_csv(rows: &[InnerRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.j,
            e17(r.eta),
            e17(r.residual_norm),
            e17(r.estimate),
            r.w_rank,
            r.r_rank,
            r.intermediate_rank,
            r.apply_j,
            r.w_support,
            r.ops
        )
        .unwrap();
    }
    s
}

fn io_err(e: std::io::Error) -> HtError {
    HtError::Io(e.to_string())
}

/// Runs the Volterra experiment described by `config`; `progress` receives one JSON line per inner step.
pub fn run_experiment(config: &ExperimentConfig, mut progress: Option<&mut dyn Write>) -> Result<RunRecord> {
    config.validate()?;
    let basis = Arc::new(MultiwaveletBasis::new(config.p)?);
    let tree = Arc::new(DimensionTree::new(config.d, config.tree)?);
    let op = OperatorSpec::VolterraExperiment.build(tree.clone(), basis.clone())?;
    let spec = RhsSpec { d: config.d, tau: config.tau, kind: config.rhs };
    let rhs = RightHandSide::new(spec, basis, tree)?;
    let params = config.params();
    let ops = OpCounter::new();
    let mut failed: Option<std::io::Error> = None;
    let sol = solve(&op, &rhs, &params, &ops, |r| {
        if let Some(w) = progress.as_mut() {
            let line = serde_json::to_string(r).expect("record serializes");
            if let Err(e) = writeln!(w, "{line}") {
                failed.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(io_err(e));
    }
    let t = &sol.trace;
    let summary = RunSummary {
        config: config.clone(),
        omega_d: omega_d(config.d),
        derived: t.derived,
        delta: t.delta,
        rhs_norm: spec.norm(),
        termination: t.termination.clone(),
        final_bound: t.final_bound(),
        ranks: sol.u.ranks().0,
        supports: sol.u.supports(),
        total_ops: t.total_ops,
        inner_steps: t.inner.len(),
        outer: t.outer.clone(),
    };
    let record = RunRecord { rows: t.inner.clone(), summary, solution: sol.u };
    write_record(&record, &config.out_dir)?;
    Ok(record)
}

pub fn write_record(r: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join("iterations.csv"), iterations_csv(&r.rows)).map_err(io_err)?;
    let mut timing = String::from("k,j,seconds\n");
    for row in &r.rows {
        writeln!(timing, "{},{},{:.6}", row.k, row.j, row.seconds).unwrap();
    }
    std::fs::write(dir.join("timing.csv"), timing).map_err(io_err)?;
    let summary = serde_json::to_string_pretty(&r.summary).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), summary + "\n").map_err(io_err)?;
    crate::io::write(dir.join("solution.json"), &r.solution)
}

/// Finite-range estimates of approximation-class quantities of a tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub s: f64,
    /// Per mode, `max_{N ≤ #supp} (N+1)^s · ‖π⁽ⁱ⁾ − best N-term‖`.
    pub a_s: Vec<f64>,
    /// `max_{r ≤ rank} γ(r) · τ_r`, with `τ_r` the largest node tail beyond rank `r`.
    pub a_gamma: f64,
    /// `τ_r` for `r = 0..=max rank`; each is a lower bound for the best rank-`r` error.
    pub rank_tails: Vec<f64>,
    pub note: String,
}

pub fn sparsity_diagnostics(v: &HtRep, s: f64, gamma: GrowthSequence) -> Result<SparsityReport> {
    let note = "finite-range estimates over the available support and rank; rank tails are lower bounds".to_string();
    let m = v.order();
    if v.is_zero() {
        return Ok(SparsityReport { s, a_s: vec![0.0; m], a_gamma: 0.0, rank_tails: vec![0.0], note });
    }
    let h = v.hsvd();
    let c = contractions(&h)?;
    let a_s = c
        .modes
        .iter()
        .map(|mode| {
            let mut vals: Vec<f64> = mode.iter().map(|e| e.1).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            let mut tail2: f64 = vals.iter().map(|x| x * x).sum();
            let mut best: f64 = 0.0;
            for (n, x) in vals.iter().enumerate() {
                best = best.max(((n + 1) as f64).powf(s) * tail2.max(0.0).sqrt());
                tail2 -= x * x;
            }
            best
        })
        .collect();
    let t = h.tree();
    let rmax = h.max_rank();
    let rank_tails: Vec<f64> = (0..=rmax)
        .map(|r| {
            (1..t.len())
                .filter_map(|a| h.sigma(a))
                .map(|sig| sig.iter().skip(r).map(|x| x * x).sum::<f64>().sqrt().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let a_gamma = rank_tails.iter().enumerate().map(|(r, x)| gamma.gamma(r) * x).fold(0.0, f64::max);
    Ok(SparsityReport { s, a_s, a_gamma, rank_tails, note })
}

/// One series of a plot table.
pub struct PlotSeries<'a> {
    pub label: String,
    pub rows: &'a [InnerRecord],
}

pub const PLOT_HEADER: &str = "series,k,j,error_estimate,ops,reference_ops";

/// Reference slope: ops ∝ error^{−1/4}.
pub const REFERENCE_EXPONENT: f64 = 0.25;

/// Merged ops-versus-error table; `reference_ops` follows the reference slope through each series' first row.
pub fn emit_plots_data(series: &[PlotSeries<'_>]) -> String {
    let mut s = String::from(PLOT_HEADER);
    s.push('\n');
    for ser in series {
        let Some(first) = ser.rows.first() else { continue };
        for r in ser.rows {
            let reference = first.ops as f64 * (r.estimate / first.estimate).powf(-REFERENCE_EXPONENT);
            writeln!(s, "{},{},{},{},{},{}", ser.label, r.k, r.j, e17(r.estimate), r.ops, e17(reference)).unwrap();
        }
    }
    s
}
