//! Accelerated proximal gradient (Nesterov) for nonnegatively constrained
//! least-squares blocks.
//!
//! Two problem shapes are served by the same solver:
//!
//! * [`NnlsProblem`]: `min_{H ≥ 0} ½‖X − A H‖²_F`. The first factor of a deep
//!   model is updated through the transposed form `½‖Xᵀ − Bᵀ Zᵀ‖²_F`.
//! * [`SandwichProblem`]: `min_{Z ≥ 0} ½‖X − A Z B‖²_F` for the interior
//!   factors.
//!
//! Both precompute their Gram matrices once, so each APG iteration only touches
//! factor-sized products.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::matrix::{project_nonneg, spectral_norm, DenseMatrix, SPECTRAL_MAX_ITER, SPECTRAL_TOL};

/// A smooth convex objective over a matrix variable, as seen by [`apg_solve`].
pub trait SmoothObjective {
    /// Shape of the variable.
    fn variable_shape(&self) -> (usize, usize);

    fn gradient(&self, at: &DenseMatrix) -> Result<DenseMatrix>;

    fn objective(&self, at: &DenseMatrix) -> Result<f64>;
}

/// `½‖X − A H‖²_F` over `H`.
#[derive(Debug, Clone)]
pub struct NnlsProblem {
    target: DenseMatrix,
    left: DenseMatrix,
    gram: DenseMatrix,
    cross: DenseMatrix,
    target_sq: f64,
}

impl NnlsProblem {
    pub fn new(target: DenseMatrix, left: DenseMatrix) -> Result<Self> {
        if left.rows() != target.rows() {
            return Err(Error::dim(
                "NnlsProblem",
                format!("left {:?} vs target {:?}", left.shape(), target.shape()),
            ));
        }
        let gram = left.t_matmul(&left)?;
        let cross = left.t_matmul(&target)?;
        let target_sq = target.frobenius_norm().powi(2);
        Ok(Self {
            target,
            left,
            gram,
            cross,
            target_sq,
        })
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }

    pub fn left(&self) -> &DenseMatrix {
        &self.left
    }

    /// `AᵀA`.
    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    /// `‖AᵀA‖₂ × safety`.
    pub fn lipschitz(&self, safety: f64) -> f64 {
        spectral_norm(&self.gram, SPECTRAL_TOL, SPECTRAL_MAX_ITER).value * safety
    }

    fn check(&self, h: &DenseMatrix) -> Result<()> {
        if h.shape() != self.variable_shape() {
            return Err(Error::dim(
                "nnls",
                format!("variable {:?}, expected {:?}", h.shape(), self.variable_shape()),
            ));
        }
        Ok(())
    }
}

impl SmoothObjective for NnlsProblem {
    fn variable_shape(&self) -> (usize, usize) {
        (self.left.cols(), self.target.cols())
    }

    /// `AᵀA H − AᵀX`.
    fn gradient(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(h)?;
        self.gram.matmul(h)?.sub(&self.cross)
    }

    fn objective(&self, h: &DenseMatrix) -> Result<f64> {
        self.check(h)?;
        let quad = h.frobenius_dot(&self.gram.matmul(h)?)?;
        let lin = h.frobenius_dot(&self.cross)?;
        Ok(0.5 * self.target_sq - lin + 0.5 * quad)
    }
}

/// `½‖X − A Z B‖²_F` over `Z`.
#[derive(Debug, Clone)]
pub struct SandwichProblem {
    target: DenseMatrix,
    left: DenseMatrix,
    right: DenseMatrix,
    left_gram: DenseMatrix,
    right_gram: DenseMatrix,
    cross: DenseMatrix,
    target_sq: f64,
}

impl SandwichProblem {
    pub fn new(target: DenseMatrix, left: DenseMatrix, right: DenseMatrix) -> Result<Self> {
        if left.rows() != target.rows() || right.cols() != target.cols() {
            return Err(Error::dim(
                "SandwichProblem",
                format!(
                    "left {:?}, right {:?}, target {:?}",
                    left.shape(),
                    right.shape(),
                    target.shape()
                ),
            ));
        }
        let left_gram = left.t_matmul(&left)?;
        let right_gram = right.matmul_t(&right)?;
        let cross = left.t_matmul(&target)?.matmul_t(&right)?;
        let target_sq = target.frobenius_norm().powi(2);
        Ok(Self {
            target,
            left,
            right,
            left_gram,
            right_gram,
            cross,
            target_sq,
        })
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }

    pub fn left(&self) -> &DenseMatrix {
        &self.left
    }

    pub fn right(&self) -> &DenseMatrix {
        &self.right
    }

    /// `‖AᵀA‖₂ ‖BBᵀ‖₂` without any safety factor.
    pub fn exact_lipschitz(&self) -> f64 {
        spectral_norm(&self.left_gram, SPECTRAL_TOL, SPECTRAL_MAX_ITER).value
            * spectral_norm(&self.right_gram, SPECTRAL_TOL, SPECTRAL_MAX_ITER).value
    }

    pub fn lipschitz(&self, safety: f64) -> f64 {
        self.exact_lipschitz() * safety
    }

    fn check(&self, z: &DenseMatrix) -> Result<()> {
        if z.shape() != self.variable_shape() {
            return Err(Error::dim(
                "sandwich",
                format!("variable {:?}, expected {:?}", z.shape(), self.variable_shape()),
            ));
        }
        Ok(())
    }
}

impl SmoothObjective for SandwichProblem {
    fn variable_shape(&self) -> (usize, usize) {
        (self.left.cols(), self.right.rows())
    }

    /// `AᵀA Z BBᵀ − AᵀX Bᵀ`.
    fn gradient(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(z)?;
        self.left_gram
            .matmul(z)?
            .matmul(&self.right_gram)?
            .sub(&self.cross)
    }

    fn objective(&self, z: &DenseMatrix) -> Result<f64> {
        self.check(z)?;
        let quad = z.frobenius_dot(&self.left_gram.matmul(z)?.matmul(&self.right_gram)?)?;
        let lin = z.frobenius_dot(&self.cross)?;
        Ok(0.5 * self.target_sq - lin + 0.5 * quad)
    }
}

/// Gradient of `½‖X − A H‖²_F`.
pub fn nnls_gradient(p: &NnlsProblem, h: &DenseMatrix) -> Result<DenseMatrix> {
    p.gradient(h)
}

/// Gradient of `½‖X − A Z B‖²_F`.
pub fn sandwich_gradient(p: &SandwichProblem, z: &DenseMatrix) -> Result<DenseMatrix> {
    p.gradient(z)
}

/// Step-size constant for [`NnlsProblem`], inflated by `safety`.
pub fn nnls_lipschitz(p: &NnlsProblem, safety: f64) -> f64 {
    p.lipschitz(safety)
}

/// Step-size constant for [`SandwichProblem`], inflated by `safety`.
pub fn sandwich_lipschitz(p: &SandwichProblem, safety: f64) -> f64 {
    p.lipschitz(safety)
}

/// `α_{k+1} = (1 + sqrt(4α_k² + 1)) / 2`.
pub fn next_momentum(alpha: f64) -> f64 {
    (1.0 + (4.0 * alpha * alpha + 1.0).sqrt()) / 2.0
}

/// Iteration state of one APG run.
#[derive(Debug, Clone)]
pub struct ApgState {
    pub h_current: DenseMatrix,
    pub h_previous: DenseMatrix,
    /// Extrapolation point; may leave the nonnegative orthant.
    pub y: DenseMatrix,
    pub alpha: f64,
    pub k: usize,
    pub lipschitz: f64,
}

impl ApgState {
    pub fn new(init: DenseMatrix, lipschitz: f64) -> Self {
        Self {
            h_previous: init.clone(),
            y: init.clone(),
            h_current: init,
            alpha: 1.0,
            k: 0,
            lipschitz,
        }
    }

    /// One projected gradient step from `y`, then the momentum update.
    pub fn step<P: SmoothObjective + ?Sized>(&mut self, problem: &P) -> Result<()> {
        let grad = problem.gradient(&self.y)?;
        if !grad.is_finite() {
            return Err(Error::Numerical {
                context: "apg gradient".into(),
                iteration: self.k,
            });
        }
        let inv_l = 1.0 / self.lipschitz;
        let stepped = self.y.zip_map(&grad, "apg_step", |y, g| y - inv_l * g)?;
        let next = project_nonneg(&stepped);

        let alpha_next = next_momentum(self.alpha);
        let beta = (self.alpha - 1.0) / alpha_next;
        self.y = next.zip_map(&self.h_current, "apg_extrapolate", |a, b| a + beta * (a - b))?;
        self.h_previous = std::mem::replace(&mut self.h_current, next);
        self.alpha = alpha_next;
        self.k += 1;
        Ok(())
    }

    /// `‖h^k − h^{k−1}‖_F / max(1, ‖h^{k−1}‖_F)`.
    pub fn relative_change(&self) -> f64 {
        let diff = self
            .h_current
            .frobenius_distance(&self.h_previous)
            .unwrap_or(f64::INFINITY);
        diff / self.h_previous.frobenius_norm().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    /// Lowest-objective iterate visited, including the starting point.
    pub solution: DenseMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
}

/// Minimizes `problem` over the nonnegative orthant with Nesterov extrapolation
/// and step size `1 / lipschitz`, starting from `init`.
///
/// Stops once the relative iterate change falls below `cfg.inner_tol` or after
/// `cfg.max_inner_iter` iterations. The extrapolation sequence itself is never
/// restarted; the returned matrix is the best iterate seen, so the objective
/// never rises above its starting value.
pub fn apg_solve<P: SmoothObjective + ?Sized>(
    problem: &P,
    lipschitz: f64,
    init: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<ApgOutcome> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::Parameter(format!(
            "lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    if cfg.max_inner_iter == 0 {
        return Err(Error::Parameter("max_inner_iter must be at least 1".into()));
    }
    if !init.is_nonnegative() {
        return Err(Error::Domain("APG start point has negative entries".into()));
    }
    if init.shape() != problem.variable_shape() {
        return Err(Error::dim(
            "apg_solve",
            format!("init {:?}, expected {:?}", init.shape(), problem.variable_shape()),
        ));
    }

    let mut state = ApgState::new(init.clone(), lipschitz);
    let mut best = init.clone();
    let mut best_obj = problem.objective(init)?;
    let mut trace = vec![best_obj];
    let mut converged = false;

    while state.k < cfg.max_inner_iter {
        state.step(problem)?;
        let obj = problem.objective(&state.h_current)?;
        if !obj.is_finite() {
            return Err(Error::Numerical {
                context: "apg objective".into(),
                iteration: state.k,
            });
        }
        trace.push(obj);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&state.h_current);
        }
        if state.relative_change() < cfg.inner_tol {
            converged = true;
            break;
        }
    }

    Ok(ApgOutcome {
        solution: best,
        objective: best_obj,
        iterations: state.k,
        converged,
        objective_trace: trace,
    })
}
