//! The deterministic model and the two robust counterparts, plus decoding
//! and independent verification of their solutions.
//!
//! Variable names are part of the contract between builders and the decoder:
//! `x_{m}_{t}`, `z_{t}_{i}_{j}`, `s_{t}_{j}`, `f_{t}_{j}`, `rho_{j}_{t}`
//! (RM1), `rho_{j}_{k}_{l}_{t}` (RM2), `u_{j}_{g}` and `v_{j}_{g}`.
//! Constraint names start with the number of the family they belong to
//! (`c2_`, ..., `c9_`, `rob_`, `gate_`, `comp3_`, ...).

mod build;
mod rbar;
mod solution;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use build::{build_dm, build_model, build_rm1, build_rm2, BigM, Rm2Options};
pub use rbar::{compute_rbar, compute_rbar_block};
pub use solution::{decode_solution, RobustDuals, Slack, SolveMeta, Solution, VerificationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dm,
    Rm1,
    Rm2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dm, ModelKind::Rm1, ModelKind::Rm2];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Dm => "DM",
            ModelKind::Rm1 => "RM1",
            ModelKind::Rm2 => "RM2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dm => "dm",
            ModelKind::Rm1 => "rm1",
            ModelKind::Rm2 => "rm2",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dm" => Ok(ModelKind::Dm),
            "rm1" => Ok(ModelKind::Rm1),
            "rm2" => Ok(ModelKind::Rm2),
            other => Err(format!("unknown model `{other}` (expected dm, rm1 or rm2)")),
        }
    }
}

/// Objective weights: `alpha` per performed job, `beta` per minute of
/// completion time, `mu` per unit of qualification slack and `nu` per job
/// the adversary can disrupt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0001,
            mu: 0.01,
            nu: 0.99,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("mu", self.mu), ("nu", self.nu)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(crate::Error::validation(name, format!("must be finite and >= 0, found {w}")));
            }
        }
        Ok(())
    }
}
