use serde::{Deserialize, Serialize};

/// How shallow factorizations pick their starting factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    #[default]
    Nndsvd,
    /// Seeded uniform draws in `(0, 1]`, scaled to the data mean.
    Random,
}

/// Tolerances, iteration caps, seeds, and safety factors for the MU and APG loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative objective change that stops a multiplicative-update run.
    pub tol: f64,
    /// Sweep cap for multiplicative updates.
    pub max_iter: usize,
    /// Relative iterate change that stops an APG solve.
    pub inner_tol: f64,
    /// Iteration cap for one APG solve.
    pub max_inner_iter: usize,
    /// Relative objective change that stops fine-tuning.
    pub outer_tol: f64,
    /// Sweep cap for fine-tuning.
    pub max_sweeps: usize,
    /// Denominator floor in multiplicative updates.
    pub eps: f64,
    /// Multiplier applied to power-iteration Lipschitz estimates.
    pub lipschitz_safety: f64,
    pub init: InitMethod,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 500,
            inner_tol: 1e-6,
            max_inner_iter: 50,
            outer_tol: 1e-5,
            max_sweeps: 200,
            eps: crate::matrix::MU_EPS,
            lipschitz_safety: 1.01,
            init: InitMethod::Nndsvd,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: InitMethod) -> Self {
        self.init = init;
        self
    }
}
