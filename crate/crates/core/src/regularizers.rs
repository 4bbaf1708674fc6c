//! Policy regularizers `Ω` over the action simplex, their Legendre-Fenchel
//! conjugates `Ω*` and the conjugate gradients `∇Ω*` (the regularized greedy
//! step).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    /// `Σ π ln π`
    NegShannon,
    /// `Σ π ln(π / d)` for a strictly positive reference `d`.
    Kl { reference: Vec<f64> },
    /// `½(‖π‖² − 1)`
    NegTsallis,
}

impl RegularizerKind {
    pub fn kl(reference: Vec<f64>) -> Result<Self> {
        if reference.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput(
                "KL reference must be strictly positive".into(),
            ));
        }
        let sum: f64 = reference.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "KL reference sums to {sum}, expected 1"
            )));
        }
        Ok(RegularizerKind::Kl { reference })
    }

    fn check_actions(&self, n: usize) {
        if let RegularizerKind::Kl { reference } = self {
            assert_eq!(
                reference.len(),
                n,
                "KL reference has {} actions, input has {n}",
                reference.len()
            );
        }
    }
}

/// `x ln x` with `0 ln 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `Ω(π_s)`.
pub fn omega(kind: &RegularizerKind, pi_s: &[f64]) -> f64 {
    kind.check_actions(pi_s.len());
    match kind {
        RegularizerKind::NegShannon => pi_s.iter().map(|&p| xlogx(p)).sum(),
        RegularizerKind::Kl { reference } => pi_s
            .iter()
            .zip(reference)
            .map(|(&p, &d)| if p > 0.0 { p * (p / d).ln() } else { 0.0 })
            .sum(),
        RegularizerKind::NegTsallis => 0.5 * (pi_s.iter().map(|p| p * p).sum::<f64>() - 1.0),
    }
}

fn log_sum_exp(q: &[f64], weights: Option<&[f64]>) -> f64 {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = match weights {
        None => q.iter().map(|x| (x - max).exp()).sum(),
        Some(w) => q.iter().zip(w).map(|(x, d)| d * (x - max).exp()).sum(),
    };
    max + sum.ln()
}

fn softmax(q: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = match weights {
        None => q.iter().map(|x| (x - max).exp()).collect(),
        Some(w) => q.iter().zip(w).map(|(x, d)| d * (x - max).exp()).collect(),
    };
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}

/// Support set and threshold of the sparsemax map: the actions `a_(i)`
/// (sorted by decreasing score, ties by index) with
/// `1 + i·q_(i) > Σ_{j≤i} q_(j)`, and `τ = (Σ_{support} q − 1) / |support|`.
pub fn sparsemax_support(q: &[f64]) -> (Vec<usize>, f64) {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    let mut cumsum = 0.0;
    let mut support = Vec::new();
    for (rank, &a) in order.iter().enumerate() {
        let i = (rank + 1) as f64;
        cumsum += q[a];
        if 1.0 + i * q[a] > cumsum {
            support.push(a);
        }
    }
    let total: f64 = support.iter().map(|&a| q[a]).sum();
    let tau = (total - 1.0) / support.len() as f64;
    (support, tau)
}

/// `Ω*(q_s) = max_{π∈Δ} ⟨π, q_s⟩ − Ω(π)`.
pub fn omega_conjugate(kind: &RegularizerKind, q_s: &[f64]) -> f64 {
    kind.check_actions(q_s.len());
    match kind {
        RegularizerKind::NegShannon => log_sum_exp(q_s, None),
        RegularizerKind::Kl { reference } => log_sum_exp(q_s, Some(reference)),
        RegularizerKind::NegTsallis => {
            let (support, tau) = sparsemax_support(q_s);
            0.5 + 0.5 * support.iter().map(|&a| q_s[a] * q_s[a] - tau * tau).sum::<f64>()
        }
    }
}

/// `∇Ω*(q_s)`, the unique maximizer of `⟨π, q_s⟩ − Ω(π)` over the simplex.
pub fn omega_conjugate_grad(kind: &RegularizerKind, q_s: &[f64]) -> Vec<f64> {
    kind.check_actions(q_s.len());
    match kind {
        RegularizerKind::NegShannon => softmax(q_s, None),
        RegularizerKind::Kl { reference } => softmax(q_s, Some(reference)),
        RegularizerKind::NegTsallis => {
            let (_, tau) = sparsemax_support(q_s);
            let mut p: Vec<f64> = q_s.iter().map(|&x| (x - tau).max(0.0)).collect();
            let sum: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= sum);
            p
        }
    }
}

/// Largest action count accepted by [`conjugate_bruteforce`].
pub const BRUTEFORCE_MAX_ACTIONS: usize = 4;

/// Maximizes `⟨π, q⟩ − Ω(π)` over the simplex grid `{k·step}` by exhaustive
/// enumeration. Returns the best value and the grid point attaining it.
pub fn conjugate_bruteforce(
    kind: &RegularizerKind,
    q_s: &[f64],
    grid_step: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = q_s.len();
    if n == 0 || n > BRUTEFORCE_MAX_ACTIONS {
        return Err(Error::UnsupportedSize(format!(
            "grid enumeration supports 1..={BRUTEFORCE_MAX_ACTIONS} actions, got {n}"
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "grid step must lie in (0, 1], got {grid_step}"
        )));
    }
    kind.check_actions(n);
    let ticks = (1.0 / grid_step).round() as usize;
    let mut counts = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut best = (f64::NEG_INFINITY, point.clone());

    // Odometer over compositions of `ticks` into `n` nonnegative parts.
    loop {
        let used: usize = counts[..n - 1].iter().sum();
        counts[n - 1] = ticks - used;
        for (p, &c) in point.iter_mut().zip(&counts) {
            *p = c as f64 / ticks as f64;
        }
        let value = point.iter().zip(q_s).map(|(p, q)| p * q).sum::<f64>() - omega(kind, &point);
        if value > best.0 {
            best = (value, point.clone());
        }
        // advance
        let mut i = n as isize - 2;
        loop {
            if i < 0 {
                return Ok(best);
            }
            let idx = i as usize;
            let used: usize = counts[..n - 1].iter().sum();
            if used < ticks {
                counts[idx] += 1;
                break;
            }
            counts[idx] = 0;
            i -= 1;
        }
    }
}
