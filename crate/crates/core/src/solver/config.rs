use serde::{Deserialize, Serialize};

use crate::error::{Result, SmfError};
use crate::factors::Orientation;

/// How feasibility of the iterates is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Adding-up and non-negativity of `X H⁺` enter the objective as weighted
    /// penalties.
    Penalty,
    /// `X H⁺` is projected onto its feasible set before the residual is
    /// taken, so every scored pair is exactly feasible.
    Projected,
}

impl std::str::FromStr for Mode {
    type Err = SmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "penalty" => Ok(Mode::Penalty),
            "projected" => Ok(Mode::Projected),
            other => Err(SmfError::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub orientation: Orientation,
    pub max_iter: usize,
    /// Relative objective change below which a run counts as converged.
    pub conv_tol: f64,
    pub penalty_sum1: f64,
    pub penalty_nonneg: f64,
    pub restarts: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Accelerated projected-gradient passes per block in each alternating
    /// proposal.
    pub inner_iters: usize,
    /// Worker threads for restarts; 0 or 1 runs them sequentially.
    pub threads: usize,
}

impl SolverConfig {
    pub const DEFAULT_PENALTY_SUM1: f64 = 100.0;
    pub const DEFAULT_PENALTY_NONNEG: f64 = 10.0;

    pub fn new(rank: usize, orientation: Orientation) -> Self {
        SolverConfig {
            rank,
            orientation,
            max_iter: 2000,
            conv_tol: 1e-9,
            penalty_sum1: Self::DEFAULT_PENALTY_SUM1,
            penalty_nonneg: Self::DEFAULT_PENALTY_NONNEG,
            restarts: 5,
            seed: 0,
            mode: Mode::Penalty,
            inner_iters: 20,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(SmfError::invalid("rank must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(SmfError::invalid("max_iter must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(SmfError::invalid("restarts must be at least 1"));
        }
        for (name, v) in [
            ("penalty_sum1", self.penalty_sum1),
            ("penalty_nonneg", self.penalty_nonneg),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SmfError::invalid(format!(
                    "{name} must be a finite non-negative weight, got {v}"
                )));
            }
        }
        if self.conv_tol.is_nan() || self.conv_tol < 0.0 {
            return Err(SmfError::invalid(format!(
                "conv_tol must be non-negative, got {}",
                self.conv_tol
            )));
        }
        Ok(())
    }

    /// Feasibility slack promised for the returned factors.
    pub fn feasibility_eps(&self) -> f64 {
        match self.mode {
            Mode::Penalty => 1e-3,
            Mode::Projected => 1e-9,
        }
    }
}
