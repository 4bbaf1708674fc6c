//! Policy evaluation and modified policy iteration, generic over the operator
//! family (vanilla, R², or the numeric robust oracle).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{bellman_eval_apply, bellman_opt_apply, Policy, TabularMdp, ValueFn};
use crate::norm::sup_distance;
use crate::r2::{r2_eval_apply, r2_opt_apply, R2Config};
use crate::robust::{robust_eval_apply_numeric, robust_opt_apply_numeric, InnerMinConfig};
use crate::uncertainty::Uncertainty;

pub const DEFAULT_THETA: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorFamily {
    Vanilla,
    R2(R2Config),
    RobustNumeric {
        uncertainty: Uncertainty,
        inner: InnerMinConfig,
    },
}

impl OperatorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorFamily::Vanilla => "vanilla",
            OperatorFamily::R2(_) => "r2",
            OperatorFamily::RobustNumeric { .. } => "robust",
        }
    }

    /// `T^π v` of this family. The flag is false when an inner solver
    /// stopped at its iteration cap.
    pub fn eval_apply(&self, mdp: &TabularMdp, policy: &Policy, v: &[f64]) -> Result<(ValueFn, bool)> {
        match self {
            OperatorFamily::Vanilla => Ok((bellman_eval_apply(mdp, policy, v)?, true)),
            OperatorFamily::R2(cfg) => Ok((r2_eval_apply(mdp, cfg, policy, v)?, true)),
            OperatorFamily::RobustNumeric { uncertainty, inner } => {
                let step = robust_eval_apply_numeric(mdp, uncertainty, policy, v, inner)?;
                Ok((step.value, step.converged))
            }
        }
    }

    /// `T* v` together with the greedy policy attaining it.
    pub fn opt_apply(&self, mdp: &TabularMdp, v: &[f64]) -> Result<(ValueFn, Policy, bool)> {
        match self {
            OperatorFamily::Vanilla => {
                let (value, policy) = bellman_opt_apply(mdp, v)?;
                Ok((value, policy, true))
            }
            OperatorFamily::R2(cfg) => {
                let (value, policy) = r2_opt_apply(mdp, cfg, v)?;
                Ok((value, policy, true))
            }
            OperatorFamily::RobustNumeric { uncertainty, inner } => {
                let (step, policy) = robust_opt_apply_numeric(mdp, uncertainty, v, inner)?;
                Ok((step.value, policy, step.converged))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// `‖v_{k+1} − v_k‖∞` per iteration.
    pub residual_trace: Vec<f64>,
    pub wall_time_seconds: f64,
    /// Whether the last residual fell below `θ`.
    pub converged: bool,
    pub final_value: ValueFn,
    pub final_policy: Option<Policy>,
    /// False when some robust inner minimization hit its iteration cap.
    pub inner_converged: bool,
}

fn check_run(mdp: &TabularMdp, v0: &[f64], theta: f64, max_iters: usize) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("θ must be positive, got {theta}")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be positive".into()));
    }
    crate::error::check_len("initial value", mdp.num_states(), v0.len())
}

/// Iterates `v ← T^π v` until `‖v_{k+1} − v_k‖∞ < θ` or `max_iters`.
pub fn policy_eval(
    family: &OperatorFamily,
    mdp: &TabularMdp,
    policy: &Policy,
    v0: &[f64],
    theta: f64,
    max_iters: usize,
) -> Result<ConvergenceReport> {
    check_run(mdp, v0, theta, max_iters)?;
    let start = Instant::now();
    let mut v = v0.to_vec();
    let mut residual_trace = Vec::new();
    let mut inner_converged = true;
    let mut converged = false;
    while residual_trace.len() < max_iters {
        let (next, ok) = family.eval_apply(mdp, policy, &v)?;
        inner_converged &= ok;
        let residual = sup_distance(&next, &v);
        v = next.into_inner();
        residual_trace.push(residual);
        if residual < theta {
            converged = true;
            break;
        }
    }
    Ok(ConvergenceReport {
        iterations: residual_trace.len(),
        residual_trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        converged,
        final_value: ValueFn::new(v)?,
        final_policy: None,
        inner_converged,
    })
}

/// Modified policy iteration: a greedy step `π_{k+1} = G(v_k)` followed by
/// `m` applications of `T^{π_{k+1}}`, until `‖v_{k+1} − v_k‖∞ < θ`.
///
/// The first of the `m` applications is the optimality update returned by
/// the greedy step itself.
pub fn mpi(
    family: &OperatorFamily,
    mdp: &TabularMdp,
    m: usize,
    theta: f64,
    v0: &[f64],
    max_iters: usize,
) -> Result<ConvergenceReport> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    check_run(mdp, v0, theta, max_iters)?;
    let start = Instant::now();
    let mut v = v0.to_vec();
    let mut residual_trace = Vec::new();
    let mut inner_converged = true;
    let mut converged = false;
    let mut policy = None;
    while residual_trace.len() < max_iters {
        let (mut next, greedy, ok) = family.opt_apply(mdp, &v)?;
        inner_converged &= ok;
        for _ in 1..m {
            let (w, ok) = family.eval_apply(mdp, &greedy, &next)?;
            inner_converged &= ok;
            next = w;
        }
        let residual = sup_distance(&next, &v);
        v = next.into_inner();
        policy = Some(greedy);
        residual_trace.push(residual);
        if residual < theta {
            converged = true;
            break;
        }
    }
    Ok(ConvergenceReport {
        iterations: residual_trace.len(),
        residual_trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        converged,
        final_value: ValueFn::new(v)?,
        final_policy: policy,
        inner_converged,
    })
}

/// Largest observed `‖T*v₁ − T*v₂‖∞ / ‖v₁ − v₂‖∞` over random pairs with
/// entries uniform in `[−scale, scale]`, `scale = r_max / (1 − γ)`.
pub fn contraction_probe(
    family: &OperatorFamily,
    mdp: &TabularMdp,
    pairs: usize,
    rng_seed: u64,
) -> Result<f64> {
    let r_max = mdp.rewards().iter().fold(1.0_f64, |m, r| m.max(r.abs()));
    let scale = r_max / (1.0 - mdp.discount());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let v1: Vec<f64> = (0..mdp.num_states()).map(|_| rng.random_range(-scale..=scale)).collect();
        let v2: Vec<f64> = (0..mdp.num_states()).map(|_| rng.random_range(-scale..=scale)).collect();
        let gap = sup_distance(&v1, &v2);
        if gap == 0.0 {
            continue;
        }
        let (t1, _, _) = family.opt_apply(mdp, &v1)?;
        let (t2, _, _) = family.opt_apply(mdp, &v2)?;
        worst = worst.max(sup_distance(&t1, &t2) / gap);
    }
    Ok(worst)
}
