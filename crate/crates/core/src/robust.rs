//! Direct robust Bellman machinery over ball uncertainty sets.
//!
//! The inner minimization `min_{(P,r)∈U} T^π_{(P,r)} v(s)` is solved
//! numerically by projected gradient descent on each ball, with random
//! restarts. No support-function closed form is used on this path; it is the
//! reference the R² operators are validated against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{project_ball, project_simplex, sample_in_ball};
use crate::mdp::{argmax, dot, q_from_v, Policy, QFn, SignedModel, TabularMdp, ValueFn};
use crate::norm::{sup_distance, NormOrder};
use crate::uncertainty::Uncertainty;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerMinConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub restarts: usize,
    /// Step length of each descent move, as a fraction of the ball radius.
    pub step_size: f64,
    pub seed: u64,
    /// Settings of the outer ascent over `π_s` used by the s-rectangular
    /// robust greedy step.
    pub policy_step_size: f64,
    pub policy_tolerance: f64,
    pub policy_max_iters: usize,
}

impl Default for InnerMinConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tolerance: 1e-9,
            restarts: 5,
            step_size: 0.05,
            seed: 0,
            policy_step_size: 0.1,
            policy_tolerance: 1e-8,
            policy_max_iters: 2000,
        }
    }
}

impl InnerMinConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.max_iters > 0
            && self.tolerance > 0.0
            && self.restarts > 0
            && self.step_size > 0.0
            && self.policy_step_size > 0.0
            && self.policy_tolerance > 0.0
            && self.policy_max_iters > 0;
        if !positive {
            return Err(Error::InvalidInput(
                "inner minimization settings must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of minimizing a linear function over a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMinimum {
    pub point: Vec<f64>,
    pub value: f64,
    /// False when some descent run stopped at the iteration cap.
    pub converged: bool,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one restart of one inner problem, independent of evaluation order.
fn stream_seed(seed: u64, parts: [u64; 4]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ p))
}

/// `min ⟨c, z⟩` over `‖z‖_p ≤ radius` by projected gradient descent from the
/// centre and from `cfg.restarts` uniform random starts.
pub fn minimize_linear_over_ball(
    c: &[f64],
    radius: f64,
    norm: NormOrder,
    cfg: &InnerMinConfig,
    stream: u64,
) -> BallMinimum {
    let dim = c.len();
    let grad_norm = NormOrder::L2.norm(c);
    if radius == 0.0 || grad_norm == 0.0 {
        return BallMinimum {
            point: vec![0.0; dim],
            value: 0.0,
            converged: true,
        };
    }
    let step = cfg.step_size * radius / grad_norm;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = true;
    let mut next = vec![0.0; dim];
    for restart in 0..=cfg.restarts {
        let mut z = if restart == 0 {
            vec![0.0; dim]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, [stream, restart as u64, 0, 0]));
            sample_in_ball(&mut rng, dim, radius, norm)
        };
        let mut run_converged = false;
        for _ in 0..cfg.max_iters {
            for ((n, zi), ci) in next.iter_mut().zip(&z).zip(c) {
                *n = zi - step * ci;
            }
            project_ball(&mut next, radius, norm);
            let change = sup_distance(&next, &z);
            std::mem::swap(&mut z, &mut next);
            if change < cfg.tolerance {
                run_converged = true;
                break;
            }
        }
        converged &= run_converged;
        let value = dot(c, &z);
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((z, value));
        }
    }
    let (point, value) = best.expect("at least one descent run");
    BallMinimum {
        point,
        value,
        converged,
    }
}

/// One robust Bellman application: values plus a convergence flag for the
/// inner solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustStep {
    pub value: ValueFn,
    /// False when some inner minimization hit its iteration cap; the value
    /// is still the best found.
    pub converged: bool,
}

/// Inner minimizers for state `s` of an s-rectangular set.
struct StateMinimum {
    reward: BallMinimum,
    transition: BallMinimum,
}

fn s_rect_state_min(
    mdp: &TabularMdp,
    unc: &crate::uncertainty::BallUncertainty,
    s: usize,
    pi_s: &[f64],
    v: &[f64],
    cfg: &InnerMinConfig,
) -> StateMinimum {
    let gamma = mdp.discount();
    let reward = minimize_linear_over_ball(pi_s, unc.alpha_r()[s], unc.norm(), cfg, stream_seed(0, [s as u64, 0, 1, 0]));
    // P_s is A × S: coefficient of P_s[a][s'] is γ π_s(a) v(s')
    let coeff: Vec<f64> = pi_s
        .iter()
        .flat_map(|&p| v.iter().map(move |&x| gamma * p * x))
        .collect();
    let transition = minimize_linear_over_ball(&coeff, unc.alpha_p()[s], unc.norm(), cfg, stream_seed(0, [s as u64, 0, 2, 0]));
    StateMinimum { reward, transition }
}

/// Worst-case q-values `min_{(P,r)∈U(s,a)} r(s,a) + γ⟨P(·|s,a), v⟩` for an
/// (s,a)-rectangular set. Pairs with `mask` false are left at their nominal
/// value.
fn sa_robust_q(
    mdp: &TabularMdp,
    unc: &crate::uncertainty::SaBallUncertainty,
    v: &[f64],
    cfg: &InnerMinConfig,
    mask: impl Fn(usize, usize) -> bool,
) -> Result<(QFn, bool)> {
    let gamma = mdp.discount();
    let q0 = q_from_v(mdp, v)?;
    let mut values = q0.values().to_vec();
    let scaled_v: Vec<f64> = v.iter().map(|x| gamma * x).collect();
    let mut converged = true;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            if !mask(s, a) {
                continue;
            }
            let (su, au) = (s as u64, a as u64);
            let r = minimize_linear_over_ball(&[1.0], unc.alpha_r(s, a), unc.norm(), cfg, stream_seed(0, [su, au, 1, 1]));
            let p = minimize_linear_over_ball(&scaled_v, unc.alpha_p(s, a), unc.norm(), cfg, stream_seed(0, [su, au, 2, 1]));
            converged &= r.converged && p.converged;
            values[s * mdp.num_actions() + a] += r.value + p.value;
        }
    }
    Ok((QFn::from_parts(mdp.num_actions(), values), converged))
}

/// `[T^{π,U} v](s) = min_{(P,r)∈U} T^π_{(P,r)} v(s)`, computed numerically.
pub fn robust_eval_apply_numeric(
    mdp: &TabularMdp,
    unc: &Uncertainty,
    policy: &Policy,
    v: &[f64],
    cfg: &InnerMinConfig,
) -> Result<RobustStep> {
    cfg.validate()?;
    unc.check_against(mdp)?;
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    match unc {
        Uncertainty::S(u) => {
            let nominal = crate::mdp::bellman_eval_apply(mdp, policy, v)?;
            let mut converged = true;
            let values = (0..mdp.num_states())
                .map(|s| {
                    let m = s_rect_state_min(mdp, u, s, policy.row(s), v, cfg);
                    converged &= m.reward.converged && m.transition.converged;
                    nominal[s] + m.reward.value + m.transition.value
                })
                .collect();
            Ok(RobustStep {
                value: ValueFn::from_vec_unchecked(values),
                converged,
            })
        }
        Uncertainty::Sa(u) => {
            let (q, converged) = sa_robust_q(mdp, u, v, cfg, |s, a| policy.row(s)[a] > 0.0)?;
            let values = (0..mdp.num_states())
                .map(|s| dot(policy.row(s), q.row(s)))
                .collect();
            Ok(RobustStep {
                value: ValueFn::from_vec_unchecked(values),
                converged,
            })
        }
    }
}

/// Robust optimality step `max_π min_{(P,r)∈U} T^π_{(P,r)} v` and the policy
/// attaining it.
///
/// (s,a)-rectangular sets admit a deterministic maximizer over the worst-case
/// q-values. For s-rectangular sets the outer maximization over `π_s` runs
/// projected ascent on the simplex, using the numerical inner minimizer as
/// a supergradient (Danskin).
pub fn robust_opt_apply_numeric(
    mdp: &TabularMdp,
    unc: &Uncertainty,
    v: &[f64],
    cfg: &InnerMinConfig,
) -> Result<(RobustStep, Policy)> {
    cfg.validate()?;
    unc.check_against(mdp)?;
    mdp.check_value(v)?;
    match unc {
        Uncertainty::Sa(u) => {
            let (q, converged) = sa_robust_q(mdp, u, v, cfg, |_, _| true)?;
            let actions: Vec<usize> = (0..mdp.num_states()).map(|s| argmax(q.row(s))).collect();
            let values = actions.iter().enumerate().map(|(s, &a)| q.get(s, a)).collect();
            Ok((
                RobustStep {
                    value: ValueFn::from_vec_unchecked(values),
                    converged,
                },
                Policy::deterministic(mdp.num_actions(), &actions)?,
            ))
        }
        Uncertainty::S(u) => {
            let q0 = q_from_v(mdp, v)?;
            let mut converged = true;
            let mut values = Vec::with_capacity(mdp.num_states());
            let mut rows = Vec::with_capacity(mdp.num_states());
            for s in 0..mdp.num_states() {
                let (pi, value, ok) = s_rect_robust_greedy(mdp, u, s, q0.row(s), v, cfg);
                converged &= ok;
                values.push(value);
                rows.push(pi);
            }
            Ok((
                RobustStep {
                    value: ValueFn::from_vec_unchecked(values),
                    converged,
                },
                Policy::from_rows_normalized(mdp.num_actions(), rows),
            ))
        }
    }
}

fn s_rect_robust_greedy(
    mdp: &TabularMdp,
    unc: &crate::uncertainty::BallUncertainty,
    s: usize,
    q_s: &[f64],
    v: &[f64],
    cfg: &InnerMinConfig,
) -> (Vec<f64>, f64, bool) {
    let n = q_s.len();
    let num_states = mdp.num_states();
    let gamma = mdp.discount();
    let evaluate = |pi: &[f64]| -> (f64, Vec<f64>, bool) {
        let m = s_rect_state_min(mdp, unc, s, pi, v, cfg);
        let value = dot(pi, q_s) + m.reward.value + m.transition.value;
        // supergradient: q_s(a) + r*(a) + γ⟨P*(a, ·), v⟩
        let grad = (0..n)
            .map(|a| {
                let p_row = &m.transition.point[a * num_states..(a + 1) * num_states];
                q_s[a] + m.reward.point[a] + gamma * dot(p_row, v)
            })
            .collect();
        (value, grad, m.reward.converged && m.transition.converged)
    };

    let mut pi = vec![1.0 / n as f64; n];
    let (mut value, mut grad, mut inner_ok) = evaluate(&pi);
    let mut step = cfg.policy_step_size;
    for _ in 0..cfg.policy_max_iters {
        let (candidate, cand) = loop {
            let moved: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let candidate = project_simplex(&moved);
            let cand = evaluate(&candidate);
            if cand.0 >= value || step < 1e-12 {
                break (candidate, cand);
            }
            step *= 0.5;
        };
        let change = sup_distance(&candidate, &pi);
        if cand.0 >= value {
            pi = candidate;
            (value, grad, inner_ok) = cand;
        }
        if change < cfg.policy_tolerance {
            return (pi, value, inner_ok);
        }
    }
    (pi, value, false)
}

/// Adversarial model attaining the inner minimum for ℓ2 balls.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseModel {
    /// `P₀ + P`, possibly signed.
    pub model: SignedModel,
    pub transition_perturbation: Vec<f64>,
    pub reward_perturbation: Vec<f64>,
    /// `T^π_{(P₀+P, r₀+r)} v(s)` per state.
    pub achieved_value: Vec<f64>,
    /// States where `v = 0` leaves the transition direction arbitrary; the
    /// transition perturbation is zero there.
    pub degenerate: Vec<bool>,
}

/// Analytic worst case for ℓ2 balls: `r_s = −αʳ π_s/‖π_s‖` and
/// `P_s = −αᴾ (v·π_s)/‖v·π_s‖` (s-rectangular), or `r = −αʳ[s][a]` and
/// `P(·|s,a) = −αᴾ[s][a] v/‖v‖` ((s,a)-rectangular).
pub fn worst_case_model(
    mdp: &TabularMdp,
    unc: &Uncertainty,
    policy: &Policy,
    v: &[f64],
) -> Result<WorstCaseModel> {
    unc.check_against(mdp)?;
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    if unc.norm() != NormOrder::L2 {
        return Err(Error::UnsupportedConfiguration(
            "the analytic worst case is implemented for ℓ2 balls".into(),
        ));
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let v_norm = NormOrder::L2.norm(v);
    let mut d_reward = vec![0.0; ns * na];
    let mut d_transition = vec![0.0; ns * na * ns];
    let mut degenerate = vec![false; ns];
    for s in 0..ns {
        let pi = policy.row(s);
        let pi_norm = NormOrder::L2.norm(pi);
        for a in 0..na {
            let (ar, ap) = match unc {
                Uncertainty::S(u) => (u.alpha_r()[s] * pi[a] / pi_norm, u.alpha_p()[s] * pi[a] / pi_norm),
                Uncertainty::Sa(u) => (u.alpha_r(s, a), u.alpha_p(s, a)),
            };
            d_reward[s * na + a] = -ar;
            if v_norm > 0.0 {
                let row = &mut d_transition[(s * na + a) * ns..(s * na + a + 1) * ns];
                for (d, x) in row.iter_mut().zip(v) {
                    *d = -ap * x / v_norm;
                }
            } else if ap > 0.0 {
                degenerate[s] = true;
            }
        }
    }
    let model = mdp.perturbed(&d_transition, &d_reward)?;
    let achieved_value = model.eval_apply(policy, v)?.into_inner();
    Ok(WorstCaseModel {
        model,
        transition_perturbation: d_transition,
        reward_perturbation: d_reward,
        achieved_value,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `max_{s, samples} v(s) − T^π_{(P,r)} v(s)`.
    pub max_violation: f64,
    pub worst_state: usize,
    pub samples: usize,
}

/// Samples models uniformly from the uncertainty balls and reports the
/// largest violation of `v ≤ T^π_{(P,r)} v`.
pub fn robust_feasibility_check(
    mdp: &TabularMdp,
    unc: &Uncertainty,
    policy: &Policy,
    v: &[f64],
    num_samples: usize,
    rng_seed: u64,
) -> Result<FeasibilityReport> {
    unc.check_against(mdp)?;
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let norm = unc.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut report = FeasibilityReport {
        max_violation: f64::NEG_INFINITY,
        worst_state: 0,
        samples: num_samples,
    };
    for _ in 0..num_samples {
        for s in 0..ns {
            let pi = policy.row(s);
            let (dr, dp): (Vec<f64>, Vec<f64>) = match unc {
                Uncertainty::S(u) => (
                    sample_in_ball(&mut rng, na, u.alpha_r()[s], norm),
                    sample_in_ball(&mut rng, na * ns, u.alpha_p()[s], norm),
                ),
                Uncertainty::Sa(u) => {
                    let mut dr = Vec::with_capacity(na);
                    let mut dp = Vec::with_capacity(na * ns);
                    for a in 0..na {
                        dr.extend(sample_in_ball(&mut rng, 1, u.alpha_r(s, a), norm));
                        dp.extend(sample_in_ball(&mut rng, ns, u.alpha_p(s, a), norm));
                    }
                    (dr, dp)
                }
            };
            let t: f64 = (0..na)
                .map(|a| {
                    let nominal = mdp.transition_row(s, a);
                    let delta = &dp[a * ns..(a + 1) * ns];
                    let next: f64 = nominal.iter().zip(delta).zip(v).map(|((p, d), x)| (p + d) * x).sum();
                    pi[a] * (mdp.reward(s, a) + dr[a] + gamma * next)
                })
                .sum();
            let violation = v[s] - t;
            if violation > report.max_violation {
                report.max_violation = violation;
                report.worst_state = s;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::bellman_eval_apply;
    use crate::uncertainty::{BallUncertainty, SaBallUncertainty};

    fn small_mdp() -> TabularMdp {
        let transition = vec![
            0.7, 0.3, 0.2, 0.8, 0.5, 0.5, //
            0.1, 0.9, 0.6, 0.4, 0.3, 0.7,
        ];
        TabularMdp::new(2, 3, transition, vec![1.0, 0.2, 0.5, 0.0, 0.8, 0.3], 0.9, vec![0.5, 0.5])
            .unwrap()
    }

    #[test]
    fn ball_minimum_matches_dual_norm() {
        let cfg = InnerMinConfig::default();
        let c = [0.3, -1.2, 0.5, 2.0];
        for norm in [NormOrder::L1, NormOrder::L2, NormOrder::LInf] {
            let m = minimize_linear_over_ball(&c, 0.7, norm, &cfg, 9);
            let expected = -0.7 * norm.dual_norm(&c);
            assert!((m.value - expected).abs() < 1e-10, "{norm}: {} vs {expected}", m.value);
            assert!(norm.norm(&m.point) <= 0.7 + 1e-9);
            assert!(m.converged);
        }
    }

    #[test]
    fn zero_radius_is_exactly_nominal() {
        let mdp = small_mdp();
        let pi = Policy::new(2, 3, vec![0.2, 0.3, 0.5, 0.6, 0.0, 0.4]).unwrap();
        let v = [1.3, -0.4];
        let nominal = bellman_eval_apply(&mdp, &pi, &v).unwrap();
        for unc in [
            Uncertainty::S(BallUncertainty::uniform(2, 0.0, 0.0, NormOrder::L2).unwrap()),
            Uncertainty::Sa(SaBallUncertainty::uniform(2, 3, 0.0, 0.0, NormOrder::L2).unwrap()),
        ] {
            let got = robust_eval_apply_numeric(&mdp, &unc, &pi, &v, &InnerMinConfig::default()).unwrap();
            for (g, n) in got.value.iter().zip(nominal.iter()) {
                assert!((g - n).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reward_only_closed_form() {
        let mdp = TabularMdp::new(1, 4, vec![1.0; 4], vec![0.5, 0.1, 0.2, 0.9], 0.9, vec![1.0])
            .unwrap();
        let unc = Uncertainty::S(BallUncertainty::uniform(1, 1e-3, 0.0, NormOrder::L2).unwrap());
        let pi = Policy::uniform(1, 4);
        let v = [2.0];
        let nominal = bellman_eval_apply(&mdp, &pi, &v).unwrap()[0];
        let got = robust_eval_apply_numeric(&mdp, &unc, &pi, &v, &InnerMinConfig::default()).unwrap();
        assert!((got.value[0] - (nominal - 5e-4)).abs() < 1e-7);
    }

    #[test]
    fn worst_case_degenerate_at_zero_value() {
        let mdp = small_mdp();
        let unc = Uncertainty::S(BallUncertainty::uniform(2, 0.1, 0.05, NormOrder::L2).unwrap());
        let pi = Policy::uniform(2, 3);
        let wc = worst_case_model(&mdp, &unc, &pi, &[0.0, 0.0]).unwrap();
        assert!(wc.transition_perturbation.iter().all(|&d| d == 0.0));
        assert_eq!(wc.degenerate, vec![true, true]);
        let expected = -0.1 / 3f64.sqrt();
        assert!(wc.reward_perturbation.iter().all(|d| (d - expected).abs() < 1e-15));
    }

    #[test]
    fn worst_case_reproduces_closed_form() {
        let mdp = small_mdp();
        let unc = Uncertainty::S(BallUncertainty::new(vec![0.1, 0.2], vec![0.05, 0.02], NormOrder::L2).unwrap());
        let pi = Policy::new(2, 3, vec![0.2, 0.3, 0.5, 0.6, 0.0, 0.4]).unwrap();
        let v = [1.3, -0.4];
        let wc = worst_case_model(&mdp, &unc, &pi, &v).unwrap();
        let nominal = bellman_eval_apply(&mdp, &pi, &v).unwrap();
        let v_norm = NormOrder::L2.norm(&v);
        for s in 0..2 {
            let pn = NormOrder::L2.norm(pi.row(s));
            let Uncertainty::S(u) = &unc else { unreachable!() };
            let closed = nominal[s] - u.alpha_r()[s] * pn - 0.9 * u.alpha_p()[s] * v_norm * pn;
            assert!((wc.achieved_value[s] - closed).abs() < 1e-12);
        }
        let replay = wc.model.eval_apply(&pi, &v).unwrap();
        assert_eq!(replay.into_inner(), wc.achieved_value);
    }

    #[test]
    fn numeric_matches_worst_case() {
        let mdp = small_mdp();
        let pi = Policy::new(2, 3, vec![0.2, 0.3, 0.5, 0.6, 0.0, 0.4]).unwrap();
        let v = [1.3, -0.4];
        for unc in [
            Uncertainty::S(BallUncertainty::new(vec![0.1, 0.2], vec![0.05, 0.02], NormOrder::L2).unwrap()),
            Uncertainty::Sa(SaBallUncertainty::uniform(2, 3, 0.01, 0.03, NormOrder::L2).unwrap()),
        ] {
            let wc = worst_case_model(&mdp, &unc, &pi, &v).unwrap();
            let got = robust_eval_apply_numeric(&mdp, &unc, &pi, &v, &InnerMinConfig::default()).unwrap();
            for s in 0..2 {
                assert!((got.value[s] - wc.achieved_value[s]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn results_do_not_depend_on_call_order() {
        let mdp = small_mdp();
        let unc = Uncertainty::S(BallUncertainty::uniform(2, 0.1, 0.05, NormOrder::L2).unwrap());
        let cfg = InnerMinConfig::default().with_seed(42);
        let pi = Policy::uniform(2, 3);
        let a = robust_eval_apply_numeric(&mdp, &unc, &pi, &[1.0, 2.0], &cfg).unwrap();
        let _ = robust_eval_apply_numeric(&mdp, &unc, &pi, &[5.0, 2.0], &cfg).unwrap();
        let b = robust_eval_apply_numeric(&mdp, &unc, &pi, &[1.0, 2.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sa_robust_greedy_is_deterministic() {
        let mdp = small_mdp();
        let unc = Uncertainty::Sa(SaBallUncertainty::uniform(2, 3, 0.01, 0.03, NormOrder::L2).unwrap());
        let (step, pi) = robust_opt_apply_numeric(&mdp, &unc, &[1.0, 0.5], &InnerMinConfig::default()).unwrap();
        assert!(pi.is_deterministic());
        assert!(step.converged);
    }

    #[test]
    fn feasibility_detects_shifted_values() {
        let mdp = small_mdp();
        let unc = Uncertainty::S(BallUncertainty::uniform(2, 0.0, 0.0, NormOrder::L2).unwrap());
        let pi = Policy::uniform(2, 3);
        let v = crate::mdp::exact_policy_value(&mdp, &pi).unwrap();
        let report = robust_feasibility_check(&mdp, &unc, &pi, &v, 10, 1).unwrap();
        assert!(report.max_violation <= 1e-9);
        let shifted: Vec<f64> = v.iter().map(|x| x + 1.0).collect();
        let report = robust_feasibility_check(&mdp, &unc, &pi, &shifted, 10, 1).unwrap();
        assert!((report.max_violation - 0.1).abs() < 1e-9);
    }

    #[test]
    fn worst_case_requires_l2() {
        let mdp = small_mdp();
        let unc = Uncertainty::S(BallUncertainty::uniform(2, 0.1, 0.0, NormOrder::L1).unwrap());
        assert!(matches!(
            worst_case_model(&mdp, &unc, &Policy::uniform(2, 3), &[1.0, 1.0]),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }
}
