//! Exact policy gradient of the reward-robust objective
//! `J(π) = ⟨v^{π,U}, μ₀⟩` over softmax policies, with a central
//! finite-difference check.
//!
//! With reward-only ℓ2 balls the robust value solves
//! `(I − γP₀^π) v = r₀^π − αʳ‖π_s‖₂`, and
//!
//! ```text
//! ∂J/∂θ[s][b] = d(s)·π_s(b)·[(q(s,b) − g(b)) − Σ_a π_s(a)(q(s,a) − g(a))]
//! ```
//!
//! with `d` the discounted state occupancy from `μ₀`,
//! `q(s,a) = r₀(s,a) + γ⟨P₀(·|s,a), v⟩` and `g = αʳ[s]·π_s/‖π_s‖₂`.

use crate::error::{check_len, Error, Result};
use crate::mdp::{dot, occupancy, policy_reward, q_from_v, solve_policy_system, Policy, TabularMdp, ValueFn};
use crate::norm::NormOrder;
use crate::uncertainty::BallUncertainty;

/// Logits `θ[s * A + a]` of a softmax policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicyParams {
    num_actions: usize,
    logits: Vec<f64>,
}

impl SoftmaxPolicyParams {
    pub fn new(num_states: usize, num_actions: usize, logits: Vec<f64>) -> Result<Self> {
        check_len("logits", num_states * num_actions, logits.len())?;
        if num_actions == 0 {
            return Err(Error::InvalidInput("need at least one action".into()));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("logits must be finite".into()));
        }
        Ok(Self { num_actions, logits })
    }

    /// All-zero logits, i.e. the uniform policy.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            logits: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.logits.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn policy(&self) -> Policy {
        let rows = self
            .logits
            .chunks(self.num_actions)
            .map(|row| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter().map(|x| (x - max).exp()).collect()
            })
            .collect();
        Policy::from_rows_normalized(self.num_actions, rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub objective: f64,
    /// `∂J/∂θ[s * A + a]`
    pub gradient: Vec<f64>,
    pub fd_max_rel_error: Option<f64>,
}

fn check_reward_only(mdp: &TabularMdp, unc: &BallUncertainty, params: &SoftmaxPolicyParams) -> Result<()> {
    check_len("radius vector", mdp.num_states(), unc.num_states())?;
    check_len("logit states", mdp.num_states(), params.num_states())?;
    check_len("logit actions", mdp.num_actions(), params.num_actions())?;
    if !unc.is_reward_only() {
        return Err(Error::UnsupportedConfiguration(
            "the robust policy gradient needs αᴾ = 0; with transition uncertainty the \
             regularizer depends on the value being differentiated"
                .into(),
        ));
    }
    if unc.norm() != NormOrder::L2 {
        return Err(Error::UnsupportedConfiguration(
            "the robust policy gradient is implemented for ℓ2 balls".into(),
        ));
    }
    Ok(())
}

fn robust_value(mdp: &TabularMdp, unc: &BallUncertainty, policy: &Policy) -> Result<ValueFn> {
    let rhs: Vec<f64> = policy_reward(mdp, policy)
        .iter()
        .enumerate()
        .map(|(s, r)| r - unc.alpha_r()[s] * NormOrder::L2.norm(policy.row(s)))
        .collect();
    solve_policy_system(mdp, policy, &rhs)
}

/// `J(π_θ) = ⟨v^{π,U}, μ₀⟩` for reward-only ℓ2 uncertainty.
pub fn reward_robust_objective(
    mdp: &TabularMdp,
    unc: &BallUncertainty,
    params: &SoftmaxPolicyParams,
) -> Result<f64> {
    check_reward_only(mdp, unc, params)?;
    let v = robust_value(mdp, unc, &params.policy())?;
    Ok(dot(&v, mdp.initial_dist()))
}

/// Exact gradient of [`reward_robust_objective`] with respect to the logits.
pub fn reward_robust_gradient(
    mdp: &TabularMdp,
    unc: &BallUncertainty,
    params: &SoftmaxPolicyParams,
) -> Result<GradientReport> {
    check_reward_only(mdp, unc, params)?;
    let policy = params.policy();
    let v = robust_value(mdp, unc, &policy)?;
    let q = q_from_v(mdp, &v)?;
    let d = occupancy(mdp, &policy)?.state_weights;
    let na = mdp.num_actions();
    let mut gradient = vec![0.0; mdp.num_states() * na];
    for s in 0..mdp.num_states() {
        let pi = policy.row(s);
        let pi_norm = NormOrder::L2.norm(pi);
        let alpha = unc.alpha_r()[s];
        let adv: Vec<f64> = (0..na).map(|a| q.get(s, a) - alpha * pi[a] / pi_norm).collect();
        let baseline = dot(pi, &adv);
        for b in 0..na {
            gradient[s * na + b] = d[s] * pi[b] * (adv[b] - baseline);
        }
    }
    Ok(GradientReport {
        objective: dot(&v, mdp.initial_dist()),
        gradient,
        fd_max_rel_error: None,
    })
}

/// Central differences `(J(θ + h e_i) − J(θ − h e_i)) / 2h`.
pub fn finite_difference_gradient(
    mdp: &TabularMdp,
    unc: &BallUncertainty,
    params: &SoftmaxPolicyParams,
    h: f64,
) -> Result<Vec<f64>> {
    check_reward_only(mdp, unc, params)?;
    let mut shifted = params.clone();
    (0..params.logits.len())
        .map(|i| {
            let base = params.logits[i];
            shifted.logits[i] = base + h;
            let up = reward_robust_objective(mdp, unc, &shifted)?;
            shifted.logits[i] = base - h;
            let down = reward_robust_objective(mdp, unc, &shifted)?;
            shifted.logits[i] = base;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Denominator floor of the relative error, so that components whose true
/// value is zero are compared in absolute terms.
pub const FD_RELATIVE_FLOOR: f64 = 1e-4;

/// `max_i |a_i − f_i| / max(|a_i|, |f_i|, FD_RELATIVE_FLOOR)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(FD_RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

/// Analytic gradient with `fd_max_rel_error` filled from central differences
/// at step `h`.
pub fn gradient_check(
    mdp: &TabularMdp,
    unc: &BallUncertainty,
    params: &SoftmaxPolicyParams,
    h: f64,
) -> Result<GradientReport> {
    let mut report = reward_robust_gradient(mdp, unc, params)?;
    let numeric = finite_difference_gradient(mdp, unc, params, h)?;
    report.fd_max_rel_error = Some(max_relative_error(&report.gradient, &numeric));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub params: SoftmaxPolicyParams,
    /// `J` before every step and after the last one (`steps + 1` entries).
    pub objectives: Vec<f64>,
    /// `‖∇J‖₂` at every step.
    pub grad_norms: Vec<f64>,
}

/// Full-gradient ascent `θ ← θ + lr·∇J(θ)`.
pub fn pg_train(
    mdp: &TabularMdp,
    unc: &BallUncertainty,
    init: &SoftmaxPolicyParams,
    learning_rate: f64,
    steps: usize,
) -> Result<TrainingTrace> {
    if !(learning_rate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let mut params = init.clone();
    let mut objectives = Vec::with_capacity(steps + 1);
    let mut grad_norms = Vec::with_capacity(steps);
    for step in 0..=steps {
        let report = reward_robust_gradient(mdp, unc, &params)?;
        if !report.objective.is_finite() {
            return Err(Error::Divergence {
                step,
                value: report.objective,
            });
        }
        objectives.push(report.objective);
        if step == steps {
            break;
        }
        grad_norms.push(NormOrder::L2.norm(&report.gradient));
        for (x, g) in params.logits.iter_mut().zip(&report.gradient) {
            *x += learning_rate * g;
        }
        if params.logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                step: step + 1,
                value: f64::NAN,
            });
        }
    }
    Ok(TrainingTrace {
        params,
        objectives,
        grad_norms,
    })
}
