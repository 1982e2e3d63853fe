//! Perturbed Richardson iteration with recompression and coarsening.

use crate::error::{HtError, Result};
use crate::ht::HtRep;
use crate::opcount::OpCounter;
use crate::ops::{apply_adaptive, LowRankOp, RightHandSide};
use crate::reduce::{coarsen_with, kappas, recompress_with, SortMode};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Iteration parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Richardson step size.
    pub omega: f64,
    /// Contraction factor of the exact Richardson map.
    pub rho: f64,
    /// Error reduction per outer step.
    pub theta: f64,
    /// Recompression factor inside the inner loop.
    pub beta: f64,
    /// Reduction slack in the combined recompression and coarsening.
    pub alpha: f64,
    /// Lower spectral bound of the operator.
    pub lambda_a: f64,
    /// Upper spectral bound of the operator.
    pub big_lambda_a: f64,
    /// Target error.
    pub eps: f64,
    #[serde(default)]
    pub sort: SortMode,
}

/// Constants derived from the parameters and the tensor order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub kappa_p: f64,
    pub kappa_c: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub j_cap: usize,
}

impl SolverParams {
    /// ω = 1, ρ = θ = ½, β = 1, α = 1, spectrum in [½, 3/2].
    pub fn experiment(eps: f64) -> Self {
        SolverParams {
            omega: 1.0,
            rho: 0.5,
            theta: 0.5,
            beta: 1.0,
            alpha: 1.0,
            lambda_a: 0.5,
            big_lambda_a: 1.5,
            eps,
            sort: SortMode::ExactSort,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HtError::InvalidParams(m));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.lambda_a > 0.0 && self.big_lambda_a >= self.lambda_a) {
            return bad(format!("need 0 < lambda_a <= big_lambda_a, got {} and {}", self.lambda_a, self.big_lambda_a));
        }
        if !(self.omega > 0.0 && self.omega < 2.0 / self.big_lambda_a) {
            return bad(format!("omega must lie in (0, 2/Lambda_A), got {}", self.omega));
        }
        let contraction = (1.0 - self.omega * self.lambda_a).abs().max((1.0 - self.omega * self.big_lambda_a).abs());
        if !(self.rho >= contraction && self.rho < 1.0) {
            return bad(format!("rho must lie in [{contraction}, 1), got {}", self.rho));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0,1), got {}", self.theta));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        Ok(())
    }

    pub fn derived(&self, m: usize) -> Derived {
        let (kp, kc) = kappas(m, self.sort);
        let a1 = 1.0 + self.alpha;
        let kappa1 = 1.0 / (1.0 + a1 * (kp + kc + kp * kc));
        let target = kappa1 * self.theta;
        let j_cap = (1..)
            .find(|&j| self.rho.powi(j as i32) * (1.0 + (self.omega + self.beta) * j as f64) <= target)
            .unwrap();
        Derived { kappa_p: kp, kappa_c: kc, kappa1, kappa2: a1 * kp * kappa1, kappa3: kc * (kp + 1.0) * a1 * kappa1, j_cap }
    }
}

/// One inner Richardson step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub k: usize,
    pub j: usize,
    pub eta: f64,
    pub residual_norm: f64,
    /// λ_A⁻¹(‖r_j‖ + η_j), a bound on ‖w_j − u‖.
    pub estimate: f64,
    pub w_rank: usize,
    pub r_rank: usize,
    /// Largest rank before recompression of `w_j − ω r_j`.
    pub intermediate_rank: usize,
    pub apply_j: u32,
    pub w_support: usize,
    pub ops: u64,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerExit {
    Cap,
    Test,
}

/// One completed outer step, producing `u_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub inner_steps: usize,
    pub exit: InnerExit,
    /// Bound on `‖w_J − u‖` at loop exit.
    pub inner_bound: f64,
    /// Bound on `‖u_{k+1} − u‖`.
    pub certificate: f64,
    /// θ^{k+1} δ.
    pub target: f64,
    pub ranks: Vec<usize>,
    pub supports: Vec<usize>,
    pub ops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cause")]
pub enum Termination {
    Converged,
    LevelOverflow { level: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub delta: f64,
    pub derived: Derived,
    pub inner: Vec<InnerRecord>,
    pub outer: Vec<OuterRecord>,
    pub termination: Termination,
    pub total_ops: u64,
}

impl IterationTrace {
    /// Certified error bound of the returned iterate.
    pub fn final_bound(&self) -> f64 {
        self.outer.last().map_or(self.delta, |o| o.certificate)
    }
}

/// Certified bounds for `u_0, u_1, …`: δ followed by the per-step certificates.
pub fn residual_certificate(trace: &IterationTrace) -> Vec<f64> {
    std::iter::once(trace.delta).chain(trace.outer.iter().map(|o| o.certificate)).collect()
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: HtRep,
    pub trace: IterationTrace,
}

fn max_support(v: &HtRep) -> usize {
    v.supports().into_iter().max().unwrap_or(0)
}

/// Solves `Au = f` to accuracy `eps`; `progress` sees every inner step.
///
/// Running into the wavelet level cap ends the iteration early with the last
/// completed outer iterate and [`Termination::LevelOverflow`].
pub fn solve(
    op: &LowRankOp,
    rhs: &RightHandSide,
    params: &SolverParams,
    ops: &OpCounter,
    progress: impl FnMut(&InnerRecord),
) -> Result<Solution> {
    solve_observed(op, rhs, params, ops, progress, |_, _| {})
}

/// [`solve`] that also hands every outer iterate `u_{k+1}` to `outer`.
pub fn solve_observed(
    op: &LowRankOp,
    rhs: &RightHandSide,
    params: &SolverParams,
    ops: &OpCounter,
    mut progress: impl FnMut(&InnerRecord),
    mut outer: impl FnMut(&OuterRecord, &HtRep),
) -> Result<Solution> {
    params.validate()?;
    let tree = op.tree().clone();
    let m = tree.order();
    let dv = params.derived(m);
    let clock = Instant::now();
    let p = params;

    let eta0 = (1e-3 * p.eps).max(1e-6);
    let f0 = rhs.assemble(eta0, ops)?;
    let delta = (f0.norm_with(ops) + eta0) / p.lambda_a;

    let mut trace =
        IterationTrace { delta, derived: dv, inner: vec![], outer: vec![], termination: Termination::Converged, total_ops: 0 };
    let mut u = HtRep::zero(tree.clone());
    let mut k = 0usize;
    let mut level = delta;

    let result = (|| -> Result<()> {
        while level > p.eps {
            let mut w = u.clone();
            let mut j = 0usize;
            let mut last;
            let exit = loop {
                let eta = p.rho.powi(j as i32 + 1) * level;
                let applied = apply_adaptive(op, &w, eta / 2.0, p.sort, ops)?;
                let f = rhs.assemble(eta / 2.0, ops)?;
                let r = applied.result.sub(&f)?;
                let rn = r.norm_with(ops);
                let next = w.sub(&r.scale(p.omega))?;
                let rec = InnerRecord {
                    k,
                    j,
                    eta,
                    residual_norm: rn,
                    estimate: (rn + eta) / p.lambda_a,
                    w_rank: w.max_rank(),
                    r_rank: r.max_rank(),
                    intermediate_rank: next.max_rank(),
                    apply_j: applied.j,
                    w_support: max_support(&w),
                    ops: ops.total(),
                    seconds: clock.elapsed().as_secs_f64(),
                };
                progress(&rec);
                trace.inner.push(rec);
                w = recompress_with(&next, p.beta * eta, ops)?;
                j += 1;
                last = (rn, eta);
                let test = (p.rho / p.lambda_a) * rn + (p.rho / p.lambda_a + p.omega + p.beta) * eta;
                if test <= dv.kappa1 * p.theta * level {
                    break InnerExit::Test;
                }
                if j >= dv.j_cap {
                    break InnerExit::Cap;
                }
            };
            let a_priori = p.rho.powi(j as i32) * (1.0 + (p.omega + p.beta) * j as f64) * level;
            let a_post = (p.rho / p.lambda_a) * last.0 + (p.rho / p.lambda_a + p.omega + p.beta) * last.1;
            let inner_bound = a_priori.min(a_post);
            let next_level = p.theta * level;
            let (t2, t3) = (dv.kappa2 * next_level, dv.kappa3 * next_level);
            u = coarsen_with(&recompress_with(&w, t2, ops)?, t3, p.sort, ops)?;
            k += 1;
            level = next_level;
            trace.outer.push(OuterRecord {
                k,
                inner_steps: j,
                exit,
                inner_bound,
                certificate: inner_bound + t2 + t3,
                target: level,
                ranks: u.ranks().0,
                supports: u.supports(),
                ops: ops.total(),
            });
            outer(trace.outer.last().unwrap(), &u);
        }
        Ok(())
    })();

    match result {
        Ok(()) => {}
        Err(HtError::LevelOverflow(l)) => trace.termination = Termination::LevelOverflow { level: l },
        Err(e) => return Err(e),
    }
    trace.total_ops = ops.total();
    Ok(Solution { u, trace })
}
