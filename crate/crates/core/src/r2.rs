//! Twice-regularized (R²) Bellman operators.
//!
//! The R² regularizer couples the policy and the value function:
//!
//! ```text
//! s-rectangular:      Ω_v(π_s) = ‖π_s‖_q (αʳ[s] + γ αᴾ[s] ‖v‖_q)
//! (s,a)-rectangular:  Ω_v(π_s) = Σ_a π_s(a) (αʳ[s][a] + γ αᴾ[s][a] ‖v‖_q)
//! ```
//!
//! where `q` is the dual order of the uncertainty balls. Evaluation subtracts
//! `Ω_v(π_s)` from the nominal Bellman update; the greedy step maximizes
//! `⟨π_s, q_s⟩ − Ω_v(π_s)` over the simplex.

use crate::error::{Error, Result};
use crate::geometry::project_simplex;
use crate::mdp::{argmax, bellman_eval_apply, q_from_v, Policy, TabularMdp, ValueFn};
use crate::norm::{sup_distance, NormOrder};
use crate::uncertainty::Uncertainty;

/// How the s-rectangular ℓ2 greedy step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedySolver {
    /// Exact: `π ∝ (q − λ)₊` with `‖(q − λ)₊‖₂ = κ`, found by sorting.
    Threshold,
    /// Projected gradient ascent with Euclidean simplex projection and
    /// backtracking, started from the uniform distribution.
    ProjectedAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Config {
    pub uncertainty: Uncertainty,
    pub greedy_tolerance: f64,
    pub greedy_max_iters: usize,
    pub greedy_step_size: f64,
    pub greedy_solver: GreedySolver,
}

impl R2Config {
    pub fn new(uncertainty: Uncertainty) -> Self {
        Self {
            uncertainty,
            greedy_tolerance: 1e-8,
            greedy_max_iters: 10_000,
            greedy_step_size: 0.1,
            greedy_solver: GreedySolver::Threshold,
        }
    }

    pub fn with_solver(mut self, solver: GreedySolver) -> Self {
        self.greedy_solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.greedy_tolerance > 0.0) || !(self.greedy_step_size > 0.0) {
            return Err(Error::InvalidInput(
                "greedy tolerance and step size must be positive".into(),
            ));
        }
        if self.greedy_max_iters == 0 {
            return Err(Error::InvalidInput("greedy_max_iters must be positive".into()));
        }
        Ok(())
    }

    fn check(&self, mdp: &TabularMdp) -> Result<()> {
        self.validate()?;
        self.uncertainty.check_against(mdp)
    }
}

/// `Ω_v(π_s)` for state `s`.
pub fn r2_regularizer(cfg: &R2Config, s: usize, pi_s: &[f64], v: &[f64], gamma: f64) -> f64 {
    let dual = cfg.uncertainty.norm().dual();
    regularizer_with_norm(cfg, s, pi_s, dual.norm(v), gamma)
}

fn regularizer_with_norm(cfg: &R2Config, s: usize, pi_s: &[f64], v_norm: f64, gamma: f64) -> f64 {
    match &cfg.uncertainty {
        Uncertainty::S(u) => {
            u.norm().dual_norm(pi_s) * (u.alpha_r()[s] + gamma * u.alpha_p()[s] * v_norm)
        }
        Uncertainty::Sa(u) => pi_s
            .iter()
            .enumerate()
            .map(|(a, p)| p * (u.alpha_r(s, a) + gamma * u.alpha_p(s, a) * v_norm))
            .sum(),
    }
}

/// `[T^{π,R²} v](s) = [T^π v](s) − Ω_v(π_s)`.
pub fn r2_eval_apply(mdp: &TabularMdp, cfg: &R2Config, policy: &Policy, v: &[f64]) -> Result<ValueFn> {
    cfg.check(mdp)?;
    let nominal = bellman_eval_apply(mdp, policy, v)?;
    let v_norm = cfg.uncertainty.norm().dual_norm(v);
    let gamma = mdp.discount();
    let values = nominal
        .iter()
        .enumerate()
        .map(|(s, t)| t - regularizer_with_norm(cfg, s, policy.row(s), v_norm, gamma))
        .collect();
    Ok(ValueFn::from_vec_unchecked(values))
}

/// Greedy policy `G(v)`: per state, the maximizer of `⟨π_s, q_s⟩ − Ω_v(π_s)`.
///
/// (s,a)-rectangular sets give a deterministic argmax of
/// `r₀(s,a) − αʳ[s][a] + γ(⟨P₀(·|s,a), v⟩ − αᴾ[s][a]‖v‖)`.
pub fn r2_greedy(mdp: &TabularMdp, cfg: &R2Config, v: &[f64]) -> Result<Policy> {
    cfg.check(mdp)?;
    let q = q_from_v(mdp, v)?;
    let gamma = mdp.discount();
    let dual = cfg.uncertainty.norm().dual();
    let v_norm = dual.norm(v);
    match &cfg.uncertainty {
        Uncertainty::Sa(u) => {
            let actions: Vec<usize> = (0..mdp.num_states())
                .map(|s| {
                    let scores: Vec<f64> = q
                        .row(s)
                        .iter()
                        .enumerate()
                        .map(|(a, qa)| qa - u.alpha_r(s, a) - gamma * u.alpha_p(s, a) * v_norm)
                        .collect();
                    argmax(&scores)
                })
                .collect();
            Policy::deterministic(mdp.num_actions(), &actions)
        }
        Uncertainty::S(u) => {
            let rows = (0..mdp.num_states())
                .map(|s| {
                    let kappa = u.alpha_r()[s] + gamma * u.alpha_p()[s] * v_norm;
                    norm_penalized_argmax(q.row(s), kappa, dual, cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Policy::from_rows_normalized(mdp.num_actions(), rows))
        }
    }
}

/// `T^{*,R²} v` and the greedy policy attaining it.
pub fn r2_opt_apply(mdp: &TabularMdp, cfg: &R2Config, v: &[f64]) -> Result<(ValueFn, Policy)> {
    let policy = r2_greedy(mdp, cfg, v)?;
    let value = r2_eval_apply(mdp, cfg, &policy, v)?;
    Ok((value, policy))
}

/// Maximizer over the simplex of `⟨π, q⟩ − κ‖π‖_dual` with `κ ≥ 0`.
pub fn norm_penalized_argmax(
    q: &[f64],
    kappa: f64,
    dual: NormOrder,
    cfg: &R2Config,
) -> Result<Vec<f64>> {
    if kappa == 0.0 {
        return Ok(unit(q.len(), argmax(q)));
    }
    match dual {
        // ‖π‖₁ = 1 on the simplex
        NormOrder::L1 => Ok(unit(q.len(), argmax(q))),
        NormOrder::LInf => Ok(top_k_uniform(q, kappa)),
        NormOrder::L2 => match cfg.greedy_solver {
            GreedySolver::Threshold => Ok(l2_threshold(q, kappa)),
            GreedySolver::ProjectedAscent => l2_projected_ascent(q, kappa, cfg),
        },
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Actions sorted by decreasing score, lowest index first on ties.
fn descending_order(q: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    order
}

/// With an ℓ∞ penalty the objective is piecewise linear in `max π`, with
/// breakpoints at `1/k`; the optimum is uniform over the top-`k` actions.
fn top_k_uniform(q: &[f64], kappa: f64) -> Vec<f64> {
    let order = descending_order(q);
    let mut best_k = 1;
    let mut best = f64::NEG_INFINITY;
    let mut cumsum = 0.0;
    for (i, &a) in order.iter().enumerate() {
        cumsum += q[a];
        let k = (i + 1) as f64;
        let value = (cumsum - kappa) / k;
        if value > best {
            best = value;
            best_k = i + 1;
        }
    }
    let mut pi = vec![0.0; q.len()];
    for &a in &order[..best_k] {
        pi[a] = 1.0 / best_k as f64;
    }
    pi
}

/// Stationarity on the simplex gives `κπ/‖π‖₂ = q − λ` on the support, so
/// `π ∝ (q − λ)₊` with `‖(q − λ)₊‖₂ = κ`. The support size `k` is the first
/// one for which the norm at the next sorted score already reaches `κ`.
fn l2_threshold(q: &[f64], kappa: f64) -> Vec<f64> {
    let order = descending_order(q);
    let n = q.len();
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut lambda = q[order[0]] - kappa;
    for k in 1..=n {
        let top = q[order[k - 1]];
        s1 += top;
        s2 += top * top;
        let reaches = match order.get(k) {
            None => true,
            Some(&next) => {
                let level = q[next];
                let norm_sq: f64 = order[..k].iter().map(|&a| (q[a] - level).powi(2)).sum();
                norm_sq >= kappa * kappa
            }
        };
        if reaches {
            let kf = k as f64;
            // k λ² − 2 s1 λ + s2 − κ² = 0, smaller root
            let disc = (s1 * s1 - kf * (s2 - kappa * kappa)).max(0.0);
            lambda = (s1 - disc.sqrt()) / kf;
            break;
        }
    }
    let mut pi: Vec<f64> = q.iter().map(|&x| (x - lambda).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    pi
}

fn l2_objective(q: &[f64], kappa: f64, pi: &[f64]) -> f64 {
    pi.iter().zip(q).map(|(p, x)| p * x).sum::<f64>() - kappa * NormOrder::L2.norm(pi)
}

fn l2_projected_ascent(q: &[f64], kappa: f64, cfg: &R2Config) -> Result<Vec<f64>> {
    let n = q.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut value = l2_objective(q, kappa, &pi);
    let mut step = cfg.greedy_step_size;
    for _ in 0..cfg.greedy_max_iters {
        let norm = NormOrder::L2.norm(&pi);
        let grad: Vec<f64> = q.iter().zip(&pi).map(|(x, p)| x - kappa * p / norm).collect();
        let (candidate, cand_value) = loop {
            let moved: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let candidate = project_simplex(&moved);
            let cand_value = l2_objective(q, kappa, &candidate);
            if cand_value >= value || step < 1e-12 {
                break (candidate, cand_value);
            }
            step *= 0.5;
        };
        let change = sup_distance(&candidate, &pi);
        pi = candidate;
        value = cand_value;
        if change < cfg.greedy_tolerance {
            return Ok(pi);
        }
    }
    Err(Error::IterationLimit {
        context: "R² greedy projected ascent",
        iterations: cfg.greedy_max_iters,
        last: pi,
    })
}
