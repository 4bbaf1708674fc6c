//! Ball uncertainty sets and their support functions, policy-dependent
//! interval reward sets, and the bounded-radius condition on transition balls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::norm::NormOrder;
use crate::regularizers::RegularizerKind;

fn check_radii(what: &str, radii: &[f64]) -> Result<()> {
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} radius {r} is not a nonnegative number")));
    }
    Ok(())
}

/// s-rectangular balls: `‖r_s‖_p ≤ αʳ[s]` over `R^A` and `‖P_s‖_p ≤ αᴾ[s]`
/// over `R^{S×A}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallUncertainty {
    alpha_r: Vec<f64>,
    alpha_p: Vec<f64>,
    norm: NormOrder,
}

impl BallUncertainty {
    pub fn new(alpha_r: Vec<f64>, alpha_p: Vec<f64>, norm: NormOrder) -> Result<Self> {
        check_len("transition radii", alpha_r.len(), alpha_p.len())?;
        check_radii("reward", &alpha_r)?;
        check_radii("transition", &alpha_p)?;
        Ok(Self {
            alpha_r,
            alpha_p,
            norm,
        })
    }

    /// Same radii at every state.
    pub fn uniform(num_states: usize, alpha_r: f64, alpha_p: f64, norm: NormOrder) -> Result<Self> {
        Self::new(vec![alpha_r; num_states], vec![alpha_p; num_states], norm)
    }

    pub fn alpha_r(&self) -> &[f64] {
        &self.alpha_r
    }

    pub fn alpha_p(&self) -> &[f64] {
        &self.alpha_p
    }

    pub fn norm(&self) -> NormOrder {
        self.norm
    }

    pub fn num_states(&self) -> usize {
        self.alpha_r.len()
    }

    pub fn is_reward_only(&self) -> bool {
        self.alpha_p.iter().all(|&a| a == 0.0)
    }
}

/// (s,a)-rectangular balls: `|r(s,a)| ≤ αʳ[s][a]` and
/// `‖P(·|s,a)‖_p ≤ αᴾ[s][a]`. Radii are stored row-major, `[s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaBallUncertainty {
    num_actions: usize,
    alpha_r: Vec<f64>,
    alpha_p: Vec<f64>,
    norm: NormOrder,
}

impl SaBallUncertainty {
    pub fn new(
        num_actions: usize,
        alpha_r: Vec<f64>,
        alpha_p: Vec<f64>,
        norm: NormOrder,
    ) -> Result<Self> {
        if num_actions == 0 || alpha_r.len() % num_actions != 0 {
            return Err(Error::InvalidInput(format!(
                "{} reward radii do not tile {num_actions} actions",
                alpha_r.len()
            )));
        }
        check_len("transition radii", alpha_r.len(), alpha_p.len())?;
        check_radii("reward", &alpha_r)?;
        check_radii("transition", &alpha_p)?;
        Ok(Self {
            num_actions,
            alpha_r,
            alpha_p,
            norm,
        })
    }

    pub fn uniform(
        num_states: usize,
        num_actions: usize,
        alpha_r: f64,
        alpha_p: f64,
        norm: NormOrder,
    ) -> Result<Self> {
        let n = num_states * num_actions;
        Self::new(num_actions, vec![alpha_r; n], vec![alpha_p; n], norm)
    }

    pub fn alpha_r(&self, s: usize, a: usize) -> f64 {
        self.alpha_r[s * self.num_actions + a]
    }

    pub fn alpha_p(&self, s: usize, a: usize) -> f64 {
        self.alpha_p[s * self.num_actions + a]
    }

    pub fn norm(&self) -> NormOrder {
        self.norm
    }

    pub fn num_states(&self) -> usize {
        self.alpha_r.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Largest transition radius over the actions of `s`.
    pub fn max_alpha_p(&self, s: usize) -> f64 {
        self.alpha_p[s * self.num_actions..(s + 1) * self.num_actions]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Either rectangularity flavour.
#[derive(Debug, Clone, PartialEq)]
pub enum Uncertainty {
    S(BallUncertainty),
    Sa(SaBallUncertainty),
}

impl Uncertainty {
    pub fn norm(&self) -> NormOrder {
        match self {
            Uncertainty::S(u) => u.norm,
            Uncertainty::Sa(u) => u.norm,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Uncertainty::S(u) => u.num_states(),
            Uncertainty::Sa(u) => u.num_states(),
        }
    }

    /// Largest transition radius attached to state `s`.
    pub fn max_alpha_p(&self, s: usize) -> f64 {
        match self {
            Uncertainty::S(u) => u.alpha_p[s],
            Uncertainty::Sa(u) => u.max_alpha_p(s),
        }
    }

    pub(crate) fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        check_len("uncertainty states", mdp.num_states(), self.num_states())?;
        if let Uncertainty::Sa(u) = self {
            check_len("uncertainty actions", mdp.num_actions(), u.num_actions)?;
        }
        Ok(())
    }
}

/// Support function of the radius-`radius` ℓp ball: `radius·‖y‖_q`.
pub fn ball_support(radius: f64, y: &[f64], norm: NormOrder) -> f64 {
    radius * norm.dual_norm(y)
}

/// `σ_{R_s}(−π_s) = αʳ[s]·‖π_s‖_q`.
pub fn reward_support(unc: &BallUncertainty, s: usize, pi_s: &[f64]) -> f64 {
    ball_support(unc.alpha_r[s], pi_s, unc.norm)
}

/// `σ_{P_s}(−γ v·π_s) = γ·αᴾ[s]·‖v·π_s‖_q`, using `‖v·π_s‖_q = ‖v‖_q‖π_s‖_q`
/// for the outer product `[v·π_s](s',a) = v(s')π_s(a)`.
pub fn transition_support(
    unc: &BallUncertainty,
    s: usize,
    pi_s: &[f64],
    v: &[f64],
    gamma: f64,
) -> f64 {
    gamma * unc.alpha_p[s] * unc.norm.dual_norm(v) * unc.norm.dual_norm(pi_s)
}

/// Policy-dependent reward intervals `[ℓ(s,a), +∞)` whose support function
/// at `−π_s` reproduces a named regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRewardSet {
    kind: RegularizerKind,
    num_actions: usize,
    lower: Vec<f64>,
}

impl IntervalRewardSet {
    /// Lower endpoints: `ln(1/π)` (Shannon), `ln d + ln(1/π)` (KL),
    /// `(1 − π)/2` (Tsallis).
    pub fn from_policy(kind: RegularizerKind, policy: &Policy) -> Result<Self> {
        let num_actions = policy.num_actions();
        if let RegularizerKind::Kl { reference } = &kind {
            check_len("KL reference", num_actions, reference.len())?;
        }
        let needs_positive = !matches!(kind, RegularizerKind::NegTsallis);
        if needs_positive {
            if let Some(idx) = policy.probs().iter().position(|&p| p <= 0.0) {
                return Err(Error::Domain(format!(
                    "interval set undefined at zero probability (state {}, action {})",
                    idx / num_actions,
                    idx % num_actions
                )));
            }
        }
        let lower = policy
            .probs()
            .iter()
            .enumerate()
            .map(|(idx, &p)| match &kind {
                RegularizerKind::NegShannon => -p.ln(),
                RegularizerKind::Kl { reference } => reference[idx % num_actions].ln() - p.ln(),
                RegularizerKind::NegTsallis => 0.5 * (1.0 - p),
            })
            .collect();
        Ok(Self {
            kind,
            num_actions,
            lower,
        })
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    /// `ℓ(s, ·)`.
    pub fn lower(&self, s: usize) -> &[f64] {
        &self.lower[s * self.num_actions..(s + 1) * self.num_actions]
    }
}

/// `σ_{R_s}(−π_s) = max_{r ∈ R_s} −⟨r, π_s⟩`, attained at the lower endpoints
/// because `π_s ≥ 0`.
pub fn interval_support(set: &IntervalRewardSet, s: usize, pi_s: &[f64]) -> Result<f64> {
    check_len("policy row", set.num_actions, pi_s.len())?;
    if let Some(p) = pi_s.iter().find(|p| **p < 0.0) {
        return Err(Error::Domain(format!("negative probability {p}")));
    }
    Ok(-set.lower(s).iter().zip(pi_s).map(|(l, p)| l * p).sum::<f64>())
}

/// Default slack for the bounded-radius condition: `0.01·(1 − γ)`.
pub fn default_epsilon(gamma: f64) -> f64 {
    0.01 * (1.0 - gamma)
}

/// Upper bound on `αᴾ[s]`:
/// `min((1 − γ − ε)/(γ|S|^{1/q}), min_{a,s'} P₀(s'|s,a))`.
///
/// The second term is the closed form of the bilinear minimum of
/// `uᵀP₀(·|s,·)w` over nonnegative unit vectors: `uᵀMw ≥ min(M)‖u‖₁‖w‖₁ ≥ min(M)`,
/// with equality at a pair of coordinate vectors.
pub fn asm1_radius_bound(mdp: &TabularMdp, s: usize, epsilon: f64, norm: NormOrder) -> Result<f64> {
    let gamma = mdp.discount();
    if !(epsilon > 0.0 && epsilon < 1.0 - gamma) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1 − γ) = (0, {}), got {epsilon}",
            1.0 - gamma
        )));
    }
    if s >= mdp.num_states() {
        return Err(Error::InvalidInput(format!("state {s} out of range")));
    }
    let dual = norm.dual();
    let size_factor = (mdp.num_states() as f64).powf(dual.reciprocal());
    let contraction_term = (1.0 - gamma - epsilon) / (gamma * size_factor);
    let min_entry = mdp
        .transition_slice(s)
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(contraction_term.min(min_entry))
}

/// Numerical estimate of `min uᵀMw` over nonnegative unit-ℓ2 `u ∈ R^A`,
/// `w ∈ R^S` by alternating minimization from random starts, together with
/// enumeration of all coordinate-vector pairs. `kernel_slice` is `A × S`
/// row-major.
pub fn bilinear_min_numeric(
    kernel_slice: &[f64],
    num_rows: usize,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    if kernel_slice.is_empty() || num_rows == 0 || kernel_slice.len() % num_rows != 0 {
        return Err(Error::InvalidInput("empty or ragged kernel slice".into()));
    }
    let num_cols = kernel_slice.len() / num_rows;
    let entry = |i: usize, j: usize| kernel_slice[i * num_cols + j];
    let bilinear = |u: &[f64], w: &[f64]| -> f64 {
        (0..num_rows)
            .map(|i| u[i] * (0..num_cols).map(|j| entry(i, j) * w[j]).sum::<f64>())
            .sum()
    };

    let mut best = kernel_slice.iter().copied().fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let mut w: Vec<f64> = (0..num_cols).map(|_| rng.random::<f64>()).collect();
        let n = NormOrder::L2.norm(&w);
        w.iter_mut().for_each(|x| *x /= n);
        let mut u = vec![0.0; num_rows];
        let mut value = f64::INFINITY;
        for _ in 0..100 {
            // best u for fixed w: coordinate vector at argmin of Mw
            let mw: Vec<f64> = (0..num_rows)
                .map(|i| (0..num_cols).map(|j| entry(i, j) * w[j]).sum())
                .collect();
            let i = argmin(&mw);
            u.iter_mut().for_each(|x| *x = 0.0);
            u[i] = 1.0;
            // best w for fixed u: coordinate vector at argmin of Mᵀu
            let mtu: Vec<f64> = (0..num_cols).map(|j| entry(i, j)).collect();
            let j = argmin(&mtu);
            w.iter_mut().for_each(|x| *x = 0.0);
            w[j] = 1.0;
            let next = bilinear(&u, &w);
            if next >= value {
                break;
            }
            value = next;
        }
        best = best.min(value);
    }
    Ok(best)
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Outcome of checking configured transition radii against the bounded-radius
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Asm1Report {
    /// Per-state upper bounds on `αᴾ[s]`.
    pub bounds: Vec<f64>,
    /// Whether every configured radius is within its bound.
    pub satisfied: bool,
    /// `ε* = min_s (1 − γ − γ·αᴾ[s]·|S|^{1/q})`: the slack actually left by
    /// the configured radii, so that `1 − ε*` is the contraction factor.
    pub epsilon_star: f64,
}

/// Checks `unc` against [`asm1_radius_bound`] with per-state slack `epsilon`.
/// For (s,a)-rectangular sets the largest radius at each state is checked.
pub fn check_asm1(mdp: &TabularMdp, unc: &Uncertainty, epsilon: f64) -> Result<Asm1Report> {
    unc.check_against(mdp)?;
    let gamma = mdp.discount();
    let norm = unc.norm();
    let size_factor = (mdp.num_states() as f64).powf(norm.dual().reciprocal());
    let mut bounds = Vec::with_capacity(mdp.num_states());
    let mut satisfied = true;
    let mut epsilon_star = f64::INFINITY;
    for s in 0..mdp.num_states() {
        let bound = asm1_radius_bound(mdp, s, epsilon, norm)?;
        let alpha = unc.max_alpha_p(s);
        satisfied &= alpha <= bound;
        epsilon_star = epsilon_star.min(1.0 - gamma - gamma * alpha * size_factor);
        bounds.push(bound);
    }
    Ok(Asm1Report {
        bounds,
        satisfied,
        epsilon_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_kernel(n: usize, gamma: f64) -> TabularMdp {
        TabularMdp::new(
            n,
            2,
            vec![1.0 / n as f64; n * 2 * n],
            vec![0.0; n * 2],
            gamma,
            vec![1.0 / n as f64; n],
        )
        .unwrap()
    }

    #[test]
    fn ball_support_examples() {
        assert!((ball_support(1.0, &[0.25; 4], NormOrder::L2) - 0.5).abs() < 1e-15);
        assert_eq!(ball_support(3.0, &[0.0, 0.0], NormOrder::L2), 0.0);
        assert_eq!(ball_support(2.0, &[1.0, -3.0], NormOrder::L1), 6.0);
    }

    #[test]
    fn reward_support_examples() {
        let unc = BallUncertainty::uniform(1, 1e-3, 0.0, NormOrder::L2).unwrap();
        assert!((reward_support(&unc, 0, &[0.25; 4]) - 5e-4).abs() < 1e-18);
        for norm in [NormOrder::L1, NormOrder::L2, NormOrder::LInf] {
            let unc = BallUncertainty::uniform(1, 0.7, 0.0, norm).unwrap();
            assert_eq!(reward_support(&unc, 0, &[0.0, 1.0, 0.0]), 0.7);
        }
        let unc = BallUncertainty::uniform(1, 0.0, 0.0, NormOrder::L2).unwrap();
        assert_eq!(reward_support(&unc, 0, &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn transition_support_examples() {
        let unc = BallUncertainty::uniform(2, 0.0, 1.0, NormOrder::L2).unwrap();
        assert_eq!(transition_support(&unc, 0, &[1.0, 0.0], &[0.0, 0.0], 0.9), 0.0);
        // ‖v‖₂ = 2
        let got = transition_support(&unc, 0, &[1.0, 0.0], &[2f64.sqrt(), 2f64.sqrt()], 0.9);
        assert!((got - 1.8).abs() < 1e-15);
    }

    #[test]
    fn transition_support_matches_materialized_outer_product() {
        let v = [1.5, -0.3, 2.0];
        let pi = [0.2, 0.5, 0.3];
        let outer: Vec<f64> = v.iter().flat_map(|x| pi.iter().map(move |p| x * p)).collect();
        for norm in [NormOrder::L1, NormOrder::L2, NormOrder::LInf] {
            let unc = BallUncertainty::uniform(3, 0.0, 0.4, norm).unwrap();
            let factorized = transition_support(&unc, 1, &pi, &v, 0.8);
            let direct = 0.8 * ball_support(0.4, &outer, norm);
            assert!((factorized - direct).abs() < 1e-15, "{norm}");
        }
    }

    #[test]
    fn interval_support_reproduces_regularizers() {
        let policy = Policy::uniform(1, 4);
        let set = IntervalRewardSet::from_policy(RegularizerKind::NegShannon, &policy).unwrap();
        let got = interval_support(&set, 0, policy.row(0)).unwrap();
        assert!((got + 4f64.ln()).abs() < 1e-15);

        let det = Policy::deterministic(3, &[1]).unwrap();
        let set = IntervalRewardSet::from_policy(RegularizerKind::NegTsallis, &det).unwrap();
        assert_eq!(interval_support(&set, 0, det.row(0)).unwrap(), 0.0);
    }

    #[test]
    fn interval_set_rejects_zero_probability() {
        let det = Policy::deterministic(2, &[0]).unwrap();
        assert!(matches!(
            IntervalRewardSet::from_policy(RegularizerKind::NegShannon, &det),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn asm1_bound_uniform_kernel() {
        let mdp = uniform_kernel(4, 0.5);
        let bound = asm1_radius_bound(&mdp, 0, 0.1, NormOrder::L2).unwrap();
        assert!((bound - 0.25).abs() < 1e-15);
        // ℓ1 balls have dual ℓ∞, so |S|^{1/q} = 1 and the first term is 0.8
        let mdp = uniform_kernel(2, 0.5);
        let bound = asm1_radius_bound(&mdp, 0, 0.1, NormOrder::L1).unwrap();
        assert!((bound - 0.5).abs() < 1e-15);
    }

    #[test]
    fn asm1_bound_rejects_bad_epsilon() {
        let mdp = uniform_kernel(2, 0.5);
        assert!(asm1_radius_bound(&mdp, 0, 0.0, NormOrder::L2).is_err());
        assert!(asm1_radius_bound(&mdp, 0, 0.5, NormOrder::L2).is_err());
    }

    #[test]
    fn bilinear_min_examples() {
        assert_eq!(bilinear_min_numeric(&[1.0, 0.0, 0.0, 1.0], 2, 5, 0).unwrap(), 0.0);
        assert_eq!(bilinear_min_numeric(&[1.0; 6], 2, 5, 0).unwrap(), 1.0);
        assert!(bilinear_min_numeric(&[], 1, 5, 0).is_err());
    }

    #[test]
    fn check_asm1_flags_violations() {
        let mdp = uniform_kernel(4, 0.5);
        let ok = Uncertainty::S(BallUncertainty::uniform(4, 0.0, 0.2, NormOrder::L2).unwrap());
        let report = check_asm1(&mdp, &ok, 0.1).unwrap();
        assert!(report.satisfied);
        assert!((report.epsilon_star - (0.5 - 0.5 * 0.2 * 2.0)).abs() < 1e-15);
        let bad = Uncertainty::S(BallUncertainty::uniform(4, 0.0, 0.3, NormOrder::L2).unwrap());
        assert!(!check_asm1(&mdp, &bad, 0.1).unwrap().satisfied);
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(BallUncertainty::new(vec![-1.0], vec![0.0], NormOrder::L2).is_err());
        assert!(SaBallUncertainty::new(2, vec![0.0; 3], vec![0.0; 3], NormOrder::L2).is_err());
    }
}
