//! Euclidean projections onto the simplex and norm balls, and uniform
//! sampling inside norm balls.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::norm::NormOrder;

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let tau = simplex_threshold(y, 1.0);
    y.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Threshold `τ` such that `Σ (y − τ)₊ = mass`.
fn simplex_threshold(y: &[f64], mass: f64) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - mass;
    for (i, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - mass) / (i + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

/// Euclidean projection onto `{z : ‖z‖_p ≤ radius}`, in place.
pub fn project_ball(z: &mut [f64], radius: f64, norm: NormOrder) {
    match norm {
        NormOrder::L2 => {
            let n = NormOrder::L2.norm(z);
            if n > radius {
                let scale = if n > 0.0 { radius / n } else { 0.0 };
                z.iter_mut().for_each(|x| *x *= scale);
            }
        }
        NormOrder::LInf => z.iter_mut().for_each(|x| *x = x.clamp(-radius, radius)),
        NormOrder::L1 => {
            if NormOrder::L1.norm(z) <= radius {
                return;
            }
            if radius == 0.0 {
                z.iter_mut().for_each(|x| *x = 0.0);
                return;
            }
            let magnitudes: Vec<f64> = z.iter().map(|x| x.abs()).collect();
            let tau = simplex_threshold(&magnitudes, radius);
            for x in z.iter_mut() {
                *x = x.signum() * (x.abs() - tau).max(0.0);
            }
        }
    }
}

/// A point drawn uniformly from `{z ∈ R^dim : ‖z‖_p ≤ radius}`.
pub fn sample_in_ball<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    radius: f64,
    norm: NormOrder,
) -> Vec<f64> {
    match norm {
        NormOrder::L2 => {
            let mut z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = NormOrder::L2.norm(&z);
            let u: f64 = rng.random();
            let scale = if n > 0.0 {
                radius * u.powf(1.0 / dim as f64) / n
            } else {
                0.0
            };
            z.iter_mut().for_each(|x| *x *= scale);
            z
        }
        NormOrder::LInf => (0..dim)
            .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
        NormOrder::L1 => {
            // dim + 1 exponential spacings give a uniform point of the simplex
            // interior; random signs spread it over the cross-polytope.
            let e: Vec<f64> = (0..=dim).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            e[..dim]
                .iter()
                .map(|x| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * radius * x / total
                })
                .collect()
        }
    }
}
