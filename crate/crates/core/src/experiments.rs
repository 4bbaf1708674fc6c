//! Drivers behind the benchmark command line: timed planner runs, radius
//! sweeps and the property verification suite.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::environments::make_random_mdp;
use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::norm::{sup_distance, NormOrder};
use crate::planners::{mpi, policy_eval, ConvergenceReport, OperatorFamily, DEFAULT_MAX_ITERS};
use crate::policy_gradient::{gradient_check, SoftmaxPolicyParams};
use crate::r2::{r2_eval_apply, r2_opt_apply, R2Config};
use crate::regularizers::{conjugate_bruteforce, omega, omega_conjugate, omega_conjugate_grad, RegularizerKind};
use crate::robust::{robust_eval_apply_numeric, InnerMinConfig};
use crate::uncertainty::{
    asm1_radius_bound, check_asm1, default_epsilon, interval_support, BallUncertainty,
    IntervalRewardSet, SaBallUncertainty, Uncertainty,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rect {
    S,
    Sa,
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rect::S => "s",
            Rect::Sa => "sa",
        })
    }
}

impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(Rect::S),
            "sa" => Ok(Rect::Sa),
            other => Err(Error::Parse(format!("unknown rectangularity {other:?} (expected s or sa)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyKind {
    Vanilla,
    R2,
    Robust,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::Vanilla, FamilyKind::R2, FamilyKind::Robust];
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Vanilla => "vanilla",
            FamilyKind::R2 => "r2",
            FamilyKind::Robust => "robust",
        })
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(FamilyKind::Vanilla),
            "r2" => Ok(FamilyKind::R2),
            "robust" => Ok(FamilyKind::Robust),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Benchmark settings; the defaults are the grid-world hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub norm: NormOrder,
    pub rect: Rect,
    pub m: usize,
    pub seeds: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            theta: 1e-3,
            alpha: 1e-3,
            beta: 1e-5,
            norm: NormOrder::L2,
            rect: Rect::Sa,
            m: 1,
            seeds: 5,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Uniform radii `alpha` (reward) and `beta` (transition) at every state or
/// state-action pair.
pub fn uniform_uncertainty(mdp: &TabularMdp, rect: Rect, alpha: f64, beta: f64, norm: NormOrder) -> Result<Uncertainty> {
    Ok(match rect {
        Rect::S => Uncertainty::S(BallUncertainty::uniform(mdp.num_states(), alpha, beta, norm)?),
        Rect::Sa => Uncertainty::Sa(SaBallUncertainty::uniform(
            mdp.num_states(),
            mdp.num_actions(),
            alpha,
            beta,
            norm,
        )?),
    })
}

pub fn operator_family(kind: FamilyKind, uncertainty: Uncertainty, seed: u64) -> OperatorFamily {
    match kind {
        FamilyKind::Vanilla => OperatorFamily::Vanilla,
        FamilyKind::R2 => OperatorFamily::R2(R2Config::new(uncertainty)),
        FamilyKind::Robust => OperatorFamily::RobustNumeric {
            uncertainty,
            inner: InnerMinConfig::default().with_seed(seed),
        },
    }
}

fn family_for(mdp: &TabularMdp, cfg: &BenchConfig, kind: FamilyKind, seed: u64) -> Result<OperatorFamily> {
    let unc = uniform_uncertainty(mdp, cfg.rect, cfg.alpha, cfg.beta, cfg.norm)?;
    Ok(operator_family(kind, unc, seed))
}

/// Policy evaluation of the uniform policy from `v = 0`.
pub fn run_pe(mdp: &TabularMdp, cfg: &BenchConfig, kind: FamilyKind, seed: u64) -> Result<ConvergenceReport> {
    let family = family_for(mdp, cfg, kind, seed)?;
    let policy = Policy::uniform(mdp.num_states(), mdp.num_actions());
    policy_eval(&family, mdp, &policy, &vec![0.0; mdp.num_states()], cfg.theta, cfg.max_iters)
}

/// Modified policy iteration with depth `cfg.m` from `v = 0`.
pub fn run_mpi(mdp: &TabularMdp, cfg: &BenchConfig, kind: FamilyKind, seed: u64) -> Result<ConvergenceReport> {
    let family = family_for(mdp, cfg, kind, seed)?;
    mpi(&family, mdp, cfg.m, cfg.theta, &vec![0.0; mdp.num_states()], cfg.max_iters)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Beta,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            other => Err(Error::Parse(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub radius: f64,
    pub family: FamilyKind,
    pub seed: u64,
    /// `‖v − v*_vanilla‖₂`
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One sweep point: MPI of `kind` with the swept radius set to `radius` and
/// the other radius at zero, compared with the vanilla MPI value `reference`.
pub fn sweep_point(
    mdp: &TabularMdp,
    cfg: &BenchConfig,
    param: SweepParam,
    radius: f64,
    kind: FamilyKind,
    seed: u64,
    reference: &[f64],
) -> Result<SweepPoint> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidInput(format!("radius must be nonnegative, got {radius}")));
    }
    let (alpha, beta) = match param {
        SweepParam::Alpha => (radius, 0.0),
        SweepParam::Beta => (0.0, radius),
    };
    let point_cfg = BenchConfig {
        alpha,
        beta,
        ..cfg.clone()
    };
    let report = run_mpi(mdp, &point_cfg, kind, seed)?;
    let diff: Vec<f64> = report.final_value.iter().zip(reference).map(|(a, b)| a - b).collect();
    Ok(SweepPoint {
        param,
        radius,
        family: kind,
        seed,
        distance: NormOrder::L2.norm(&diff),
        iterations: report.iterations,
        converged: report.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for GroupStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupStatus::Pass => "pass",
            GroupStatus::Fail => "fail",
            GroupStatus::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub group: &'static str,
    pub status: GroupStatus,
    pub checks: usize,
    /// Largest observed violation, or a reason when not applicable.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub quick: bool,
    /// Transition radius as a multiple of the bounded-radius limit. Values
    /// above one violate the assumption and disable the operator-law group.
    pub radius_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            quick: false,
            radius_scale: 0.9,
        }
    }
}

struct Tally {
    checks: usize,
    worst: f64,
    failed: bool,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: 0,
            worst: f64::NEG_INFINITY,
            failed: false,
        }
    }

    /// Records `excess`, the amount by which a check exceeds its tolerance
    /// (nonpositive when the check holds).
    fn record(&mut self, excess: f64) {
        self.checks += 1;
        self.worst = self.worst.max(excess);
        self.failed |= !(excess <= 0.0);
    }

    fn finish(self, group: &'static str) -> GroupResult {
        GroupResult {
            group,
            status: if self.failed { GroupStatus::Fail } else { GroupStatus::Pass },
            checks: self.checks,
            detail: format!("largest excess over tolerance {:e}", self.worst),
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    let rows = (0..ns).map(|_| random_vec(rng, na, 0.05, 1.0)).collect();
    Policy::from_rows_normalized(na, rows)
}

fn verify_conjugates(cfg: &VerifyConfig) -> Result<GroupResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xC0);
    let mut tally = Tally::new();
    let samples = if cfg.quick { 5 } else { 30 };
    for na in 2..=4 {
        let reference = {
            let w = random_vec(&mut rng, na, 0.1, 1.0);
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        };
        let kinds = [
            RegularizerKind::NegShannon,
            RegularizerKind::kl(reference)?,
            RegularizerKind::NegTsallis,
        ];
        let step = if na == 4 { 0.01 } else { 0.002 };
        for kind in &kinds {
            for i in 0..samples {
                let q = random_vec(&mut rng, na, -1.0, 1.0);
                let c = rng.random_range(-2.0..2.0);
                let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
                tally.record((omega_conjugate(kind, &shifted) - omega_conjugate(kind, &q) - c).abs() - 1e-10);
                let bumped: Vec<f64> = q.iter().map(|x| x + rng.random_range(0.0..0.5)).collect();
                tally.record(omega_conjugate(kind, &q) - omega_conjugate(kind, &bumped) - 1e-10);
                // the brute-force grid is costly; compare on a subset
                if i < 3 {
                    let (value, _) = conjugate_bruteforce(kind, &q, step)?;
                    let analytic = omega_conjugate(kind, &q);
                    tally.record((value - analytic).abs() - 2.0 * step);
                    let grad = omega_conjugate_grad(kind, &q);
                    let attained = crate::mdp::dot(&grad, &q) - omega(kind, &grad);
                    tally.record((attained - analytic).abs() - 1e-10);
                }
            }
        }
    }
    Ok(tally.finish("conjugates"))
}

fn verify_duality(cfg: &VerifyConfig) -> Result<GroupResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD0);
    let mut tally = Tally::new();
    let samples = if cfg.quick { 10 } else { 100 };
    for _ in 0..samples {
        let na = rng.random_range(2..=5);
        let policy = random_policy(&mut rng, 1, na);
        let pi = policy.row(0);
        let reference = {
            let w = random_vec(&mut rng, na, 0.1, 1.0);
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        };
        for kind in [
            RegularizerKind::NegShannon,
            RegularizerKind::kl(reference)?,
            RegularizerKind::NegTsallis,
        ] {
            let set = IntervalRewardSet::from_policy(kind.clone(), &policy)?;
            let support = interval_support(&set, 0, pi)?;
            tally.record((support - omega(&kind, pi)).abs() - 1e-12);
        }
    }
    Ok(tally.finish("duality"))
}

fn law_model(cfg: &VerifyConfig, index: u64) -> Result<(TabularMdp, Uncertainty)> {
    let mdp = make_random_mdp(5, 3, 0.05, 0.9, cfg.seed.wrapping_add(index))?;
    let eps = default_epsilon(mdp.discount());
    let alpha_p = (0..mdp.num_states())
        .map(|s| asm1_radius_bound(&mdp, s, eps, NormOrder::L2).map(|b| cfg.radius_scale * b))
        .collect::<Result<Vec<_>>>()?;
    let unc = Uncertainty::S(BallUncertainty::new(vec![0.05; mdp.num_states()], alpha_p, NormOrder::L2)?);
    Ok((mdp, unc))
}

fn verify_asm1(cfg: &VerifyConfig) -> Result<GroupResult> {
    let mut tally = Tally::new();
    let models = if cfg.quick { 2 } else { 10 };
    for i in 0..models {
        let mdp = make_random_mdp(5, 3, 0.05, 0.9, cfg.seed.wrapping_add(i))?;
        let eps = default_epsilon(mdp.discount());
        for s in 0..mdp.num_states() {
            let bound = asm1_radius_bound(&mdp, s, eps, NormOrder::L2)?;
            let min_entry = mdp.transition_slice(s).iter().copied().fold(f64::INFINITY, f64::min);
            let numeric = crate::uncertainty::bilinear_min_numeric(
                mdp.transition_slice(s),
                mdp.num_actions(),
                8,
                cfg.seed ^ s as u64,
            )?;
            tally.record((numeric - min_entry).abs() - 1e-12);
            tally.record(bound - min_entry);
            tally.record(bound - (1.0 - 0.9 - eps) / (0.9 * 5f64.sqrt()) - 1e-15);
        }
    }
    Ok(tally.finish("asm1"))
}

fn verify_operator_laws(cfg: &VerifyConfig) -> Result<GroupResult> {
    let (probe_mdp, probe_unc) = law_model(cfg, 0)?;
    let report = check_asm1(&probe_mdp, &probe_unc, default_epsilon(probe_mdp.discount()))?;
    if !report.satisfied {
        return Ok(GroupResult {
            group: "operator_laws",
            status: GroupStatus::NotApplicable,
            checks: 0,
            detail: "transition radii exceed the bounded-radius limit".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1A);
    let mut tally = Tally::new();
    let models = if cfg.quick { 2 } else { 5 };
    let pairs = if cfg.quick { 20 } else { 100 };
    for i in 0..models {
        let (mdp, unc) = law_model(cfg, i)?;
        let eps_star = check_asm1(&mdp, &unc, default_epsilon(mdp.discount()))?.epsilon_star;
        let r2 = R2Config::new(unc);
        let ns = mdp.num_states();
        for _ in 0..pairs {
            let policy = random_policy(&mut rng, ns, mdp.num_actions());
            let v1 = random_vec(&mut rng, ns, -10.0, 10.0);
            let bump = random_vec(&mut rng, ns, 0.0, 5.0);
            let v2: Vec<f64> = v1.iter().zip(&bump).map(|(a, b)| a + b).collect();
            // monotonicity, evaluation and optimality
            let t1 = r2_eval_apply(&mdp, &r2, &policy, &v1)?;
            let t2 = r2_eval_apply(&mdp, &r2, &policy, &v2)?;
            let (o1, _) = r2_opt_apply(&mdp, &r2, &v1)?;
            let (o2, _) = r2_opt_apply(&mdp, &r2, &v2)?;
            for s in 0..ns {
                tally.record(t1[s] - t2[s] - 1e-8);
                tally.record(o1[s] - o2[s] - 1e-8);
            }
            // sub-distributivity on nonnegative values
            let v_pos: Vec<f64> = v1.iter().map(|x| x.abs()).collect();
            let c = rng.random_range(0.0..3.0);
            let shifted: Vec<f64> = v_pos.iter().map(|x| x + c).collect();
            let lhs = r2_eval_apply(&mdp, &r2, &policy, &shifted)?;
            let rhs = r2_eval_apply(&mdp, &r2, &policy, &v_pos)?;
            for s in 0..ns {
                tally.record(lhs[s] - rhs[s] - mdp.discount() * c - 1e-8);
            }
            // contraction
            let v3 = random_vec(&mut rng, ns, -10.0, 10.0);
            let gap = sup_distance(&v1, &v3);
            let t3 = r2_eval_apply(&mdp, &r2, &policy, &v3)?;
            let (o3, _) = r2_opt_apply(&mdp, &r2, &v3)?;
            let factor = 1.0 - eps_star;
            tally.record(sup_distance(&t1, &t3) - factor * gap - 1e-8);
            tally.record(sup_distance(&o1, &o3) - factor * gap - 1e-8);
        }
    }
    Ok(tally.finish("operator_laws"))
}

fn verify_equivalence(cfg: &VerifyConfig) -> Result<GroupResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xE0);
    let mut tally = Tally::new();
    let models = if cfg.quick { 3 } else { 10 };
    let inner = InnerMinConfig::default().with_seed(cfg.seed);
    for i in 0..models {
        let (mdp, unc) = law_model(cfg, 100 + i)?;
        let ns = mdp.num_states();
        let reward_only = match &unc {
            Uncertainty::S(u) => Uncertainty::S(BallUncertainty::new(u.alpha_r().to_vec(), vec![0.0; ns], NormOrder::L2)?),
            Uncertainty::Sa(_) => unreachable!("law models are s-rectangular"),
        };
        for u in [reward_only, unc] {
            let r2 = R2Config::new(u.clone());
            for _ in 0..3 {
                let policy = random_policy(&mut rng, ns, mdp.num_actions());
                let v = random_vec(&mut rng, ns, -5.0, 10.0);
                let closed = r2_eval_apply(&mdp, &r2, &policy, &v)?;
                let numeric = robust_eval_apply_numeric(&mdp, &u, &policy, &v, &inner)?;
                tally.record(sup_distance(&closed, &numeric.value) - 1e-6);
            }
        }
    }
    Ok(tally.finish("equivalence"))
}

fn verify_gradient(cfg: &VerifyConfig) -> Result<GroupResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x60);
    let mut tally = Tally::new();
    let configs = if cfg.quick { 4 } else { 20 };
    for i in 0..configs {
        let ns = rng.random_range(2..=5);
        let na = rng.random_range(2..=4);
        let mdp = make_random_mdp(ns, na, 0.0, 0.9, cfg.seed.wrapping_add(1000 + i))?;
        let unc = BallUncertainty::uniform(ns, rng.random_range(0.0..0.5), 0.0, NormOrder::L2)?;
        let params = SoftmaxPolicyParams::new(ns, na, random_vec(&mut rng, ns * na, -2.0, 2.0))?;
        let report = gradient_check(&mdp, &unc, &params, 1e-6)?;
        tally.record(report.fd_max_rel_error.unwrap_or(f64::INFINITY) - 1e-4);
    }
    Ok(tally.finish("gradient"))
}

/// Runs every property group.
pub fn verify(cfg: &VerifyConfig) -> Result<Vec<GroupResult>> {
    Ok(vec![
        verify_conjugates(cfg)?,
        verify_duality(cfg)?,
        verify_asm1(cfg)?,
        verify_operator_laws(cfg)?,
        verify_equivalence(cfg)?,
        verify_gradient(cfg)?,
    ])
}
