//! Vector norms restricted to the orders used by ball uncertainty sets.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Order `p` of an ℓp norm. Only 1, 2 and ∞ are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormOrder {
    L1,
    L2,
    LInf,
}

impl NormOrder {
    /// The order `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::L1 => NormOrder::LInf,
            NormOrder::L2 => NormOrder::L2,
            NormOrder::LInf => NormOrder::L1,
        }
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormOrder::L1 => 1.0,
            NormOrder::L2 => 0.5,
            NormOrder::LInf => 0.0,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => x.iter().map(|v| v.abs()).sum(),
            NormOrder::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormOrder::LInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Norm in the dual order.
    pub fn dual_norm(self, x: &[f64]) -> f64 {
        self.dual().norm(x)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormOrder::L1 => "l1",
            NormOrder::L2 => "l2",
            NormOrder::LInf => "linf",
        };
        f.write_str(s)
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(NormOrder::L1),
            "l2" => Ok(NormOrder::L2),
            "linf" => Ok(NormOrder::LInf),
            other => Err(Error::InvalidInput(format!("unknown norm order `{other}`"))),
        }
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
