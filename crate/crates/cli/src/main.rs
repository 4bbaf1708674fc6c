//! `r2plan`: timing comparisons, radius sweeps, property verification and
//! policy-gradient runs for the R² planners. Results are written as CSV.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use r2mdp::environments::{load_mdp, make_gridworld, GridWorldConfig};
use r2mdp::experiments::{
    mean_std, run_mpi, run_pe, sweep_point, uniform_uncertainty, verify, BenchConfig, FamilyKind,
    GroupStatus, Rect, SweepParam, VerifyConfig,
};
use r2mdp::norm::sup_distance;
use r2mdp::planners::{ConvergenceReport, DEFAULT_MAX_ITERS};
use r2mdp::policy_gradient::{gradient_check, pg_train, SoftmaxPolicyParams};
use r2mdp::{BallUncertainty, Error, NormOrder, TabularMdp};

#[derive(Parser)]
#[command(name = "r2plan", version, about = "R² versus robust planning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Policy evaluation of the uniform policy, per operator family.
    Pe(PlanArgs),
    /// Modified policy iteration, per operator family.
    Mpi {
        #[command(flatten)]
        plan: PlanArgs,
        /// Evaluation sweeps per greedy step.
        #[arg(long, default_value_t = 1)]
        m: usize,
    },
    /// Distance of robust and R² optimal values to the vanilla one as one
    /// radius varies (the other is held at zero).
    Sweep {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "alpha")]
        param: SweepParam,
        /// Comma-separated radii, in the order they are reported.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        m: usize,
    },
    /// Runs the property suites; exit code 1 if any group fails.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reduced sample counts.
        #[arg(long)]
        quick: bool,
        /// Transition radius as a multiple of the bounded-radius limit.
        #[arg(long, default_value_t = 0.9)]
        radius_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reward-robust policy-gradient ascent from the uniform policy.
    Pg {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Compare the analytic gradient with finite differences first.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// `gridworld` or a path to an MDP file.
    #[arg(long, default_value = "gridworld")]
    mdp: String,
    /// Discount; overrides the one stored in an MDP file.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Clone)]
struct PlanArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-3)]
    theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-5)]
    beta: f64,
    #[arg(long, default_value = "l2")]
    norm: NormOrder,
    #[arg(long, default_value = "sa")]
    rect: Rect,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Families to run; repeat or comma-separate. Defaults to all three
    /// (`r2,robust` for sweeps).
    #[arg(long, value_delimiter = ',')]
    family: Vec<FamilyKind>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PlanArgs {
    fn bench_config(&self, m: usize) -> BenchConfig {
        BenchConfig {
            theta: self.theta,
            alpha: self.alpha,
            beta: self.beta,
            norm: self.norm,
            rect: self.rect,
            m,
            seeds: self.seeds,
            seed: self.seed,
            max_iters: self.max_iters,
        }
    }

    fn families(&self, default: &[FamilyKind]) -> Vec<FamilyKind> {
        let mut families = if self.family.is_empty() {
            default.to_vec()
        } else {
            self.family.clone()
        };
        families.sort();
        families.dedup();
        families
    }
}

/// Errors caused by the invocation rather than by a property check.
fn is_usage_error(err: &Error) -> bool {
    matches!(
        err,
        Error::InvalidInput(_) | Error::Parse(_) | Error::UnsupportedConfiguration(_) | Error::DimensionMismatch { .. }
    )
}

enum Failure {
    Usage(String),
    Runtime(String),
    Property(String),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        if is_usage_error(&err) {
            Failure::Usage(err.to_string())
        } else {
            Failure::Runtime(err.to_string())
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(err: csv::Error) -> Self {
        Failure::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Runtime(err.to_string())
    }
}

fn load_model(args: &ModelArgs) -> Result<TabularMdp, Failure> {
    if args.mdp == "gridworld" {
        let mut cfg = GridWorldConfig::default();
        if let Some(gamma) = args.gamma {
            cfg.gamma = gamma;
        }
        return Ok(make_gridworld(&cfg)?);
    }
    let mdp = load_mdp(&args.mdp)?;
    match args.gamma {
        None => Ok(mdp),
        Some(gamma) => Ok(TabularMdp::new(
            mdp.num_states(),
            mdp.num_actions(),
            mdp.transitions().to_vec(),
            mdp.rewards().to_vec(),
            gamma,
            mdp.initial_dist().to_vec(),
        )?),
    }
}

fn csv_writer(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

struct FamilyRuns {
    family: FamilyKind,
    reports: Vec<ConvergenceReport>,
}

/// Runs every (family, seed) pair; seeds only affect the robust oracle.
fn run_all(
    mdp: &TabularMdp,
    cfg: &BenchConfig,
    families: &[FamilyKind],
    full_mpi: bool,
) -> Result<Vec<FamilyRuns>, Failure> {
    if cfg.seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    let jobs: Vec<(FamilyKind, u64)> = families
        .iter()
        .flat_map(|&f| (0..cfg.seeds as u64).map(move |i| (f, i)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(family, i)| {
            let seed = cfg.seed.wrapping_add(i);
            if full_mpi {
                run_mpi(mdp, cfg, family, seed)
            } else {
                run_pe(mdp, cfg, family, seed)
            }
        })
        .collect::<r2mdp::Result<Vec<_>>>()?;
    let mut grouped: Vec<FamilyRuns> = families
        .iter()
        .map(|&family| FamilyRuns {
            family,
            reports: Vec::new(),
        })
        .collect();
    for ((family, _), report) in jobs.into_iter().zip(reports) {
        let slot = grouped.iter_mut().find(|g| g.family == family).expect("known family");
        slot.reports.push(report);
    }
    Ok(grouped)
}

/// Largest `‖v_a − v_b‖∞` over seed pairs of two families.
fn max_gap(runs: &[FamilyRuns], a: FamilyKind, b: FamilyKind) -> Option<f64> {
    let ra = runs.iter().find(|r| r.family == a)?;
    let rb = runs.iter().find(|r| r.family == b)?;
    let mut worst: f64 = 0.0;
    for x in &ra.reports {
        for y in &rb.reports {
            worst = worst.max(sup_distance(&x.final_value, &y.final_value));
        }
    }
    Some(worst)
}

fn emit_runs(runs: &[FamilyRuns], out: &Option<PathBuf>, m: Option<usize>) -> Result<(), Failure> {
    let mut w = csv_writer(out)?;
    let mut header = vec![
        "family",
        "seeds",
        "time_mean_s",
        "time_std_s",
        "iterations_mean",
        "converged",
        "inner_converged",
        "linf_gap_r2_robust",
        "linf_to_vanilla",
    ];
    if m.is_some() {
        header.extend(["m", "deterministic_policy"]);
    }
    w.write_record(&header)?;
    let gap = max_gap(runs, FamilyKind::R2, FamilyKind::Robust);
    for run in runs {
        let times: Vec<f64> = run.reports.iter().map(|r| r.wall_time_seconds).collect();
        let iterations: Vec<f64> = run.reports.iter().map(|r| r.iterations as f64).collect();
        let (t_mean, t_std) = mean_std(&times);
        let (it_mean, _) = mean_std(&iterations);
        let to_vanilla = max_gap(runs, run.family, FamilyKind::Vanilla);
        let mut record = vec![
            run.family.to_string(),
            run.reports.len().to_string(),
            t_mean.to_string(),
            t_std.to_string(),
            it_mean.to_string(),
            run.reports.iter().all(|r| r.converged).to_string(),
            run.reports.iter().all(|r| r.inner_converged).to_string(),
            fmt_opt(gap),
            fmt_opt(to_vanilla),
        ];
        if let Some(m) = m {
            let deterministic = run
                .reports
                .iter()
                .all(|r| r.final_policy.as_ref().is_some_and(|p| p.is_deterministic()));
            record.push(m.to_string());
            record.push(deterministic.to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn default_sweep(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::Alpha => vec![1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 1e-5, 0.0],
        SweepParam::Beta => vec![1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 1e-5, 1e-6, 0.0],
    }
}

fn cmd_sweep(plan: &PlanArgs, param: SweepParam, values: Option<Vec<f64>>, m: usize) -> Result<(), Failure> {
    let mdp = load_model(&plan.model)?;
    let cfg = plan.bench_config(m);
    let values = values.unwrap_or_else(|| default_sweep(param));
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Failure::Usage(format!("radius must be nonnegative, got {bad}")));
    }
    if cfg.seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    // validates norm/rect before any heavy work
    uniform_uncertainty(&mdp, cfg.rect, 0.0, 0.0, cfg.norm)?;
    let families = plan.families(&[FamilyKind::R2, FamilyKind::Robust]);
    let vanilla = run_mpi(&mdp, &cfg, FamilyKind::Vanilla, cfg.seed)?.final_value;
    let jobs: Vec<(usize, FamilyKind, u64)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            families
                .iter()
                .flat_map(move |&f| (0..cfg.seeds as u64).map(move |k| (i, f, k)))
        })
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(i, family, k)| sweep_point(&mdp, &cfg, param, values[i], family, cfg.seed.wrapping_add(k), &vanilla))
        .collect::<r2mdp::Result<Vec<_>>>()?;

    let mut w = csv_writer(&plan.out)?;
    w.write_record(["param", "radius", "family", "seeds", "distance_mean", "distance_std", "iterations_mean", "converged"])?;
    for (i, radius) in values.iter().enumerate() {
        for &family in &families {
            let group: Vec<_> = jobs
                .iter()
                .zip(&points)
                .filter(|((j, f, _), _)| *j == i && *f == family)
                .map(|(_, p)| p)
                .collect();
            let distances: Vec<f64> = group.iter().map(|p| p.distance).collect();
            let iterations: Vec<f64> = group.iter().map(|p| p.iterations as f64).collect();
            let (d_mean, d_std) = mean_std(&distances);
            w.write_record([
                param.to_string(),
                radius.to_string(),
                family.to_string(),
                group.len().to_string(),
                d_mean.to_string(),
                d_std.to_string(),
                mean_std(&iterations).0.to_string(),
                group.iter().all(|p| p.converged).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(seed: u64, quick: bool, radius_scale: f64, out: &Option<PathBuf>) -> Result<(), Failure> {
    if !(radius_scale >= 0.0) {
        return Err(Failure::Usage(format!("--radius-scale must be nonnegative, got {radius_scale}")));
    }
    let results = verify(&VerifyConfig {
        seed,
        quick,
        radius_scale,
    })?;
    let mut w = csv_writer(out)?;
    w.write_record(["group", "status", "checks", "detail"])?;
    for r in &results {
        w.write_record([r.group.to_string(), r.status.to_string(), r.checks.to_string(), r.detail.clone()])?;
    }
    w.flush()?;
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| r.status == GroupStatus::Fail)
        .map(|r| r.group)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(format!("failed groups: {}", failed.join(", "))))
    }
}

fn cmd_pg(
    model: &ModelArgs,
    alpha: f64,
    lr: f64,
    steps: usize,
    check: bool,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let mdp = load_model(model)?;
    let unc = BallUncertainty::uniform(mdp.num_states(), alpha, 0.0, NormOrder::L2)?;
    let init = SoftmaxPolicyParams::uniform(mdp.num_states(), mdp.num_actions());
    if check {
        let report = gradient_check(&mdp, &unc, &init, 1e-6)?;
        let err = report.fd_max_rel_error.unwrap_or(f64::INFINITY);
        eprintln!("fd_max_rel_error,{err}");
        if !(err <= 1e-4) {
            return Err(Failure::Property(format!("finite-difference check failed: {err}")));
        }
    }
    let trace = pg_train(&mdp, &unc, &init, lr, steps)?;
    let mut w = csv_writer(out)?;
    w.write_record(["step", "objective", "grad_norm"])?;
    for (step, objective) in trace.objectives.iter().enumerate() {
        let grad = trace.grad_norms.get(step).map(|g| g.to_string()).unwrap_or_default();
        w.write_record([step.to_string(), objective.to_string(), grad])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pe(plan) => {
            let mdp = load_model(&plan.model)?;
            let cfg = plan.bench_config(1);
            let runs = run_all(&mdp, &cfg, &plan.families(&FamilyKind::ALL), false)?;
            emit_runs(&runs, &plan.out, None)
        }
        Command::Mpi { plan, m } => {
            if m == 0 {
                return Err(Failure::Usage("--m must be at least 1".into()));
            }
            let mdp = load_model(&plan.model)?;
            let cfg = plan.bench_config(m);
            let runs = run_all(&mdp, &cfg, &plan.families(&FamilyKind::ALL), true)?;
            emit_runs(&runs, &plan.out, Some(m))
        }
        Command::Sweep { plan, param, values, m } => cmd_sweep(&plan, param, values, m),
        Command::Verify {
            seed,
            quick,
            radius_scale,
            out,
        } => cmd_verify(seed, quick, radius_scale, &out),
        Command::Pg {
            model,
            alpha,
            lr,
            steps,
            check,
            out,
        } => cmd_pg(&model, alpha, lr, steps, check, &out),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("R2PLAN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("R2PLAN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) | Err(Failure::Property(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
