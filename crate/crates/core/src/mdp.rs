//! Finite MDPs and the standard Bellman algebra.
//!
//! Storage is dense and row-major: `transition[(s * A + a) * S + s']` and
//! `reward[s * A + a]`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Tolerance on probability row sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidInput(format!(
            "{what} has a negative or non-finite entry {x}"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!(
            "{what} sums to {sum:.17}, expected 1"
        )));
    }
    Ok(())
}

/// Nominal tabular model `(P₀, r₀, γ, μ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidInput(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidInput(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        check_len(
            "transition",
            num_states * num_actions * num_states,
            transition.len(),
        )?;
        check_len("reward", num_states * num_actions, reward.len())?;
        check_len("initial_dist", num_states, initial_dist.len())?;
        for (idx, row) in transition.chunks(num_states).enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            check_distribution(&format!("transition row ({s}, {a})"), row)?;
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite reward {r}")));
        }
        check_distribution("initial_dist", &initial_dist)?;
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            discount,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Dense transition tensor, `[(s * A + a) * S + s']`.
    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// Dense reward matrix, `[s * A + a]`.
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// `P₀(·|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    /// `P₀(·|s,·)` as an `A × S` block.
    pub fn transition_slice(&self, s: usize) -> &[f64] {
        let width = self.num_actions * self.num_states;
        &self.transition[s * width..(s + 1) * width]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    /// `⟨P₀(·|s,a), v⟩`.
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        dot(self.transition_row(s, a), v)
    }

    /// Same model with a signed perturbation added to the kernel and reward.
    /// The result is not required to be stochastic.
    pub fn perturbed(&self, d_transition: &[f64], d_reward: &[f64]) -> Result<SignedModel> {
        check_len("transition perturbation", self.transition.len(), d_transition.len())?;
        check_len("reward perturbation", self.reward.len(), d_reward.len())?;
        Ok(SignedModel {
            num_states: self.num_states,
            num_actions: self.num_actions,
            transition: self.transition.iter().zip(d_transition).map(|(p, d)| p + d).collect(),
            reward: self.reward.iter().zip(d_reward).map(|(r, d)| r + d).collect(),
            discount: self.discount,
        })
    }

    pub(crate) fn check_value(&self, v: &[f64]) -> Result<()> {
        check_len("value function", self.num_states, v.len())
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        check_len("policy states", self.num_states, policy.num_states())?;
        check_len("policy actions", self.num_actions, policy.num_actions())
    }
}

/// A model `(P, r)` whose kernel rows may be signed or unnormalized, as
/// produced by ball perturbations of a nominal model.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedModel {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
}

impl SignedModel {
    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// `T^π_{(P,r)} v`.
    pub fn eval_apply(&self, policy: &Policy, v: &[f64]) -> Result<ValueFn> {
        check_len("policy states", self.num_states, policy.num_states())?;
        check_len("policy actions", self.num_actions, policy.num_actions())?;
        check_len("value function", self.num_states, v.len())?;
        Ok(ValueFn(eval_apply_raw(
            self.num_states,
            self.num_actions,
            &self.transition,
            &self.reward,
            self.discount,
            policy,
            v,
        )))
    }
}

fn eval_apply_raw(
    num_states: usize,
    num_actions: usize,
    transition: &[f64],
    reward: &[f64],
    discount: f64,
    policy: &Policy,
    v: &[f64],
) -> Vec<f64> {
    (0..num_states)
        .map(|s| {
            policy
                .row(s)
                .iter()
                .enumerate()
                .map(|(a, &p)| {
                    let start = (s * num_actions + a) * num_states;
                    let next = dot(&transition[start..start + num_states], v);
                    p * (reward[s * num_actions + a] + discount * next)
                })
                .sum()
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-stochastic map from states to action distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_len("policy", num_states * num_actions, probs.len())?;
        for (s, row) in probs.chunks(num_actions).enumerate() {
            check_distribution(&format!("policy row {s}"), row)?;
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    /// Builds a policy from rows that are on the simplex up to rounding;
    /// each row is rescaled to sum to one.
    pub(crate) fn from_rows_normalized(num_actions: usize, rows: Vec<Vec<f64>>) -> Self {
        let num_states = rows.len();
        let mut probs = Vec::with_capacity(num_states * num_actions);
        for row in rows {
            debug_assert_eq!(row.len(), num_actions);
            let sum: f64 = row.iter().map(|p| p.max(0.0)).sum();
            probs.extend(row.iter().map(|p| p.max(0.0) / sum));
        }
        Self {
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy picking `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidInput(format!(
                    "action {a} out of range in state {s}"
                )));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// True when every row puts mass one on a single action.
    pub fn is_deterministic(&self) -> bool {
        self.probs
            .chunks(self.num_actions)
            .all(|row| row.iter().filter(|&&p| p == 1.0).count() == 1)
    }

    /// The most likely action per state, lowest index on ties.
    pub fn modal_actions(&self) -> Vec<usize> {
        self.probs.chunks(self.num_actions).map(argmax).collect()
    }
}

/// Index of the maximal entry, lowest index on ties.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// State-indexed values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn(Vec<f64>);

impl ValueFn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value entry {x}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(num_states: usize) -> Self {
        Self(vec![0.0; num_states])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for ValueFn {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// State-action values, `[s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFn {
    num_actions: usize,
    values: Vec<f64>,
}

impl QFn {
    pub(crate) fn from_parts(num_actions: usize, values: Vec<f64>) -> Self {
        Self {
            num_actions,
            values,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }
}

/// Discounted visitation of a policy from `μ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    /// `d[s]`
    pub state_weights: Vec<f64>,
    /// `μ[s * A + a] = d[s]·π[s][a]`
    pub state_action: Vec<f64>,
}

/// `T^π v = r^π + γ P^π v`.
pub fn bellman_eval_apply(mdp: &TabularMdp, policy: &Policy, v: &[f64]) -> Result<ValueFn> {
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    Ok(ValueFn(eval_apply_raw(
        mdp.num_states,
        mdp.num_actions,
        &mdp.transition,
        &mdp.reward,
        mdp.discount,
        policy,
        v,
    )))
}

/// `q(s,a) = r(s,a) + γ⟨P(·|s,a), v⟩`.
pub fn q_from_v(mdp: &TabularMdp, v: &[f64]) -> Result<QFn> {
    mdp.check_value(v)?;
    let values = (0..mdp.num_states)
        .flat_map(|s| (0..mdp.num_actions).map(move |a| (s, a)))
        .map(|(s, a)| mdp.reward(s, a) + mdp.discount * mdp.expected_next(s, a, v))
        .collect();
    Ok(QFn {
        num_actions: mdp.num_actions,
        values,
    })
}

/// `T v = max_π T^π v` together with the deterministic greedy policy
/// (lowest action index on ties).
pub fn bellman_opt_apply(mdp: &TabularMdp, v: &[f64]) -> Result<(ValueFn, Policy)> {
    let q = q_from_v(mdp, v)?;
    let actions: Vec<usize> = (0..mdp.num_states).map(|s| argmax(q.row(s))).collect();
    let values = actions.iter().enumerate().map(|(s, &a)| q.get(s, a)).collect();
    let policy = Policy::deterministic(mdp.num_actions, &actions)?;
    Ok((ValueFn(values), policy))
}

/// `r^π[s] = Σ_a π(a|s) r(s,a)`.
pub fn policy_reward(mdp: &TabularMdp, policy: &Policy) -> Vec<f64> {
    (0..mdp.num_states)
        .map(|s| dot(policy.row(s), &mdp.reward[s * mdp.num_actions..(s + 1) * mdp.num_actions]))
        .collect()
}

/// `I − γ P^π` as a dense matrix.
fn resolvent_matrix(mdp: &TabularMdp, policy: &Policy) -> DMatrix<f64> {
    let n = mdp.num_states;
    let mut m = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for (a, &p) in policy.row(s).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (t, &pt) in mdp.transition_row(s, a).iter().enumerate() {
                m[(s, t)] -= mdp.discount * p * pt;
            }
        }
    }
    m
}

/// Solves `(I − γP^π) v = rhs` by LU with partial pivoting.
pub fn solve_policy_system(mdp: &TabularMdp, policy: &Policy, rhs: &[f64]) -> Result<ValueFn> {
    mdp.check_policy(policy)?;
    check_len("right-hand side", mdp.num_states, rhs.len())?;
    let m = resolvent_matrix(mdp, policy);
    let b = DVector::from_column_slice(rhs);
    let x = m
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular policy-evaluation system".into()))?;
    let residual = (&m * &x - &b).amax();
    let scale = b.amax().max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::Numeric(format!(
            "policy-evaluation residual {residual:e} exceeds tolerance"
        )));
    }
    ValueFn::new(x.iter().copied().collect())
}

/// `v^π = (I − γP^π)^{-1} r^π`.
pub fn exact_policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<ValueFn> {
    let r = policy_reward(mdp, policy);
    solve_policy_system(mdp, policy, &r)
}

/// `dᵀ = μ₀ᵀ (I − γP^π)^{-1}` and `μ[s][a] = d[s]·π[s][a]`.
pub fn occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyMeasure> {
    mdp.check_policy(policy)?;
    let m = resolvent_matrix(mdp, policy).transpose();
    let b = DVector::from_column_slice(&mdp.initial_dist);
    let d = m
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular occupancy system".into()))?;
    let residual = (&m * &d - &b).amax();
    if residual > 1e-9 {
        return Err(Error::Numeric(format!(
            "occupancy residual {residual:e} exceeds tolerance"
        )));
    }
    let state_weights: Vec<f64> = d.iter().copied().collect();
    let state_action = (0..mdp.num_states)
        .flat_map(|s| policy.row(s).iter().map(move |&p| (s, p)))
        .map(|(s, p)| state_weights[s] * p)
        .collect();
    Ok(OccupancyMeasure {
        state_weights,
        state_action,
    })
}
