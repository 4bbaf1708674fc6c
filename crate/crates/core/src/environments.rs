//! Benchmark models: the grid-world, random strictly positive MDPs, and a
//! JSON file format for tabular MDPs.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const ACTION_NAMES: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridWorldConfig {
    pub side: usize,
    pub goal_small_reward: f64,
    pub goal_large_reward: f64,
    pub gamma: f64,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self {
            side: 5,
            goal_small_reward: 1.0,
            goal_large_reward: 10.0,
            gamma: 0.9,
        }
    }
}

impl GridWorldConfig {
    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn small_goal(&self) -> usize {
        self.cell(0, self.side - 1)
    }

    pub fn large_goal(&self) -> usize {
        self.cell(self.side - 1, self.side - 1)
    }

    pub fn sink(&self) -> usize {
        self.side * self.side
    }
}

/// Grid-world with `side²` cells plus an absorbing zero-reward sink.
///
/// Moves are deterministic and bumping into a wall leaves the agent in place.
/// Both goals pay their reward under every action and then move to the sink,
/// so each goal pays once. `μ₀` is uniform over the non-goal cells.
pub fn make_gridworld(cfg: &GridWorldConfig) -> Result<TabularMdp> {
    let side = cfg.side;
    if side < 2 {
        return Err(Error::InvalidInput(format!("grid side must be at least 2, got {side}")));
    }
    let ns = side * side + 1;
    let na = ACTION_NAMES.len();
    let (small, large, sink) = (cfg.small_goal(), cfg.large_goal(), cfg.sink());
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let next = if s == sink || s == small || s == large {
                sink
            } else {
                let (row, col) = (s / side, s % side);
                match a {
                    0 => cfg.cell(row.saturating_sub(1), col),
                    1 => cfg.cell((row + 1).min(side - 1), col),
                    2 => cfg.cell(row, col.saturating_sub(1)),
                    _ => cfg.cell(row, (col + 1).min(side - 1)),
                }
            };
            transition[(s * na + a) * ns + next] = 1.0;
            if s == small {
                reward[s * na + a] = cfg.goal_small_reward;
            } else if s == large {
                reward[s * na + a] = cfg.goal_large_reward;
            }
        }
    }
    let starts = side * side - 2;
    let initial_dist = (0..ns)
        .map(|s| {
            if s == sink || s == small || s == large {
                0.0
            } else {
                1.0 / starts as f64
            }
        })
        .collect();
    TabularMdp::new(ns, na, transition, reward, cfg.gamma, initial_dist)
}

/// Random MDP whose kernel rows are `min + (1 − S·min)·Dirichlet(1,…,1)`, so
/// every entry is at least `min_transition_prob`. Rewards are uniform in
/// `[0, 1]` and `μ₀` is uniform.
pub fn make_random_mdp(
    num_states: usize,
    num_actions: usize,
    min_transition_prob: f64,
    gamma: f64,
    rng_seed: u64,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidInput("need at least one state and one action".into()));
    }
    if !(min_transition_prob >= 0.0) || min_transition_prob * num_states as f64 >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "transition floor {min_transition_prob} is infeasible for {num_states} states"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let free = 1.0 - min_transition_prob * num_states as f64;
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let draws: Vec<f64> = (0..num_states).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let row: Vec<f64> = draws.iter().map(|d| min_transition_prob + free * d / total).collect();
        // absorb rounding so the row sums to one
        let sum: f64 = row.iter().sum();
        transition.extend(row.iter().map(|p| p / sum));
    }
    let reward = (0..num_states * num_actions).map(|_| rng.random::<f64>()).collect();
    let initial_dist = vec![1.0 / num_states as f64; num_states];
    TabularMdp::new(num_states, num_actions, transition, reward, gamma, initial_dist)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transition: Vec<(usize, usize, usize, f64)>,
    reward: Vec<(usize, usize, f64)>,
    initial_dist: Vec<(usize, f64)>,
}

/// Serializes `mdp`; zero entries are omitted. Numbers are written in their
/// shortest round-trip decimal form, so loading reproduces every field
/// bit-exactly.
pub fn mdp_to_string(mdp: &TabularMdp) -> String {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut transition = Vec::new();
    let mut reward = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p != 0.0 {
                    transition.push((s, a, t, p));
                }
            }
            let r = mdp.reward(s, a);
            if r != 0.0 {
                reward.push((s, a, r));
            }
        }
    }
    let initial_dist = mdp
        .initial_dist()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != 0.0)
        .map(|(s, &p)| (s, p))
        .collect();
    let file = MdpFile {
        num_states: ns,
        num_actions: na,
        discount: mdp.discount(),
        transition,
        reward,
        initial_dist,
    };
    serde_json::to_string_pretty(&file).expect("MDP serialization cannot fail")
}

fn index_error(field: &str, entry: usize, detail: String) -> Error {
    Error::Parse(format!("{field}[{entry}]: {detail}"))
}

pub fn mdp_from_str(text: &str) -> Result<TabularMdp> {
    let file: MdpFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let (ns, na) = (file.num_states, file.num_actions);
    let check = |field: &str, entry: usize, idx: usize, bound: usize, what: &str| {
        if idx >= bound {
            Err(index_error(field, entry, format!("{what} index {idx} out of range 0..{bound}")))
        } else {
            Ok(())
        }
    };
    let mut transition = vec![0.0; ns * na * ns];
    let mut seen = HashSet::new();
    for (i, &(s, a, t, p)) in file.transition.iter().enumerate() {
        check("transition", i, s, ns, "state")?;
        check("transition", i, a, na, "action")?;
        check("transition", i, t, ns, "next-state")?;
        if !seen.insert((s, a, t)) {
            return Err(index_error("transition", i, format!("duplicate entry ({s}, {a}, {t})")));
        }
        transition[(s * na + a) * ns + t] = p;
    }
    let mut reward = vec![0.0; ns * na];
    let mut seen = HashSet::new();
    for (i, &(s, a, r)) in file.reward.iter().enumerate() {
        check("reward", i, s, ns, "state")?;
        check("reward", i, a, na, "action")?;
        if !seen.insert((s, a)) {
            return Err(index_error("reward", i, format!("duplicate entry ({s}, {a})")));
        }
        reward[s * na + a] = r;
    }
    let mut initial_dist = vec![0.0; ns];
    let mut seen = HashSet::new();
    for (i, &(s, p)) in file.initial_dist.iter().enumerate() {
        check("initial_dist", i, s, ns, "state")?;
        if !seen.insert(s) {
            return Err(index_error("initial_dist", i, format!("duplicate entry {s}")));
        }
        initial_dist[s] = p;
    }
    TabularMdp::new(ns, na, transition, reward, file.discount, initial_dist)
}

pub fn save_mdp(mdp: &TabularMdp, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mdp_to_string(mdp))?;
    Ok(())
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<TabularMdp> {
    mdp_from_str(&std::fs::read_to_string(path)?)
}
