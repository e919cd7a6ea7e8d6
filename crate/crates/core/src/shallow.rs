//! Single-layer factorizations: multiplicative-update NMF and nsNMF.
//!
//! nsNMF fits `X ≈ Z S H` with a fixed smoothing matrix `S`. Its updates are the
//! plain multiplicative rules with `S` absorbed into the opposite factor: the
//! `H` step uses the effective basis `ZS`, the `Z` step the effective encoding
//! `SH`. With `θ = 0` the smoothing matrix is the identity and the iterates
//! coincide with MU-NMF.

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::init::{initialize_for_mu, InitPair};
use crate::matrix::{hadamard_mul_div, DenseMatrix};

/// Smoothing parameter `θ` together with the factor dimension `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub theta: f64,
    pub r: usize,
}

impl SmoothingSpec {
    pub fn new(theta: f64, r: usize) -> Result<Self> {
        let spec = Self { theta, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Parameter(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if self.r == 0 {
            return Err(Error::Parameter("smoothing dimension must be at least 1".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Result<DenseMatrix> {
        smoothing_matrix(self)
    }
}

/// `S = (1 − θ) I + (θ / r) 11ᵀ`.
pub fn smoothing_matrix(spec: &SmoothingSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let r = spec.r;
    let off = spec.theta / r as f64;
    let diag = (1.0 - spec.theta) + off;
    Ok(DenseMatrix::from_fn(r, r, |i, j| if i == j { diag } else { off }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowFactorization {
    /// Basis, `p × r`.
    pub z: DenseMatrix,
    /// Encoding, `r × n`.
    pub h: DenseMatrix,
    pub smoothing: Option<SmoothingSpec>,
    /// `½‖X − Z S H‖²_F` at the start point and after every sweep.
    pub objective_trace: Vec<f64>,
}

impl ShallowFactorization {
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        match &self.smoothing {
            Some(spec) => self.z.matmul(&spec.matrix()?)?.matmul(&self.h),
            None => self.z.matmul(&self.h),
        }
    }

    pub fn sweeps(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }
}

fn check_data(x: &DenseMatrix, r: usize) -> Result<()> {
    if !x.is_nonnegative() {
        return Err(Error::Domain("input matrix has negative entries".into()));
    }
    if !x.is_finite() {
        return Err(Error::Domain("input matrix has non-finite entries".into()));
    }
    if r == 0 || r > x.rows().min(x.cols()) {
        return Err(Error::Parameter(format!(
            "rank {r} outside 1..={}",
            x.rows().min(x.cols())
        )));
    }
    Ok(())
}

fn half_sq_residual(x: &DenseMatrix, recon: &DenseMatrix) -> Result<f64> {
    Ok(0.5 * x.frobenius_distance(recon)?.powi(2))
}

/// Runs multiplicative updates from a given start, optionally with smoothing.
///
/// Each sweep updates `H` then `Z`; the run stops when the relative objective
/// change drops below `cfg.tol` or after `cfg.max_iter` sweeps.
pub fn multiplicative_updates(
    x: &DenseMatrix,
    start: InitPair,
    smoothing: Option<SmoothingSpec>,
    cfg: &SolverConfig,
) -> Result<ShallowFactorization> {
    let InitPair { z0: mut z, h0: mut h, .. } = start;
    check_data(x, z.cols())?;
    if z.rows() != x.rows() || h.cols() != x.cols() || h.rows() != z.cols() {
        return Err(Error::dim(
            "multiplicative_updates",
            format!("z {:?}, h {:?}, x {:?}", z.shape(), h.shape(), x.shape()),
        ));
    }
    let s = match &smoothing {
        Some(spec) => {
            if spec.r != z.cols() {
                return Err(Error::dim(
                    "multiplicative_updates",
                    format!("smoothing dimension {} vs rank {}", spec.r, z.cols()),
                ));
            }
            Some(spec.matrix()?)
        }
        None => None,
    };
    let eps = cfg.eps;

    let effective_basis = |z: &DenseMatrix| -> Result<DenseMatrix> {
        match &s {
            Some(s) => z.matmul(s),
            None => Ok(z.clone()),
        }
    };
    let effective_encoding = |h: &DenseMatrix| -> Result<DenseMatrix> {
        match &s {
            Some(s) => s.matmul(h),
            None => Ok(h.clone()),
        }
    };

    let mut objective = half_sq_residual(x, &effective_basis(&z)?.matmul(&h)?)?;
    let mut trace = vec![objective];
    for sweep in 0..cfg.max_iter {
        // H ← H ⊛ (WᵀX) ⊘ (WᵀW H), W = ZS
        let w = effective_basis(&z)?;
        let num = w.t_matmul(x)?;
        let den = w.t_matmul(&w)?.matmul(&h)?;
        h = hadamard_mul_div(&h, &num, &den, eps)?;

        // Z ← Z ⊛ (X Vᵀ) ⊘ (Z V Vᵀ), V = SH
        let v = effective_encoding(&h)?;
        let num = x.matmul_t(&v)?;
        let den = z.matmul(&v.matmul_t(&v)?)?;
        z = hadamard_mul_div(&z, &num, &den, eps)?;

        let next = half_sq_residual(x, &effective_basis(&z)?.matmul(&h)?)?;
        if !next.is_finite() {
            return Err(Error::Numerical {
                context: "multiplicative updates".into(),
                iteration: sweep,
            });
        }
        trace.push(next);
        let change = (objective - next).abs() / objective.max(f64::MIN_POSITIVE);
        objective = next;
        if change < cfg.tol {
            break;
        }
    }

    Ok(ShallowFactorization {
        z,
        h,
        smoothing,
        objective_trace: trace,
    })
}

/// MU-NMF with the start point chosen by `cfg.init`.
pub fn mu_nmf(x: &DenseMatrix, r: usize, cfg: &SolverConfig) -> Result<ShallowFactorization> {
    check_data(x, r)?;
    let start = initialize_for_mu(x, r, cfg)?;
    multiplicative_updates(x, start, None, cfg)
}

/// nsNMF with smoothing parameter `theta`, start point chosen by `cfg.init`.
pub fn nsnmf(
    x: &DenseMatrix,
    r: usize,
    theta: f64,
    cfg: &SolverConfig,
) -> Result<ShallowFactorization> {
    let spec = SmoothingSpec::new(theta, r)?;
    check_data(x, r)?;
    let start = initialize_for_mu(x, r, cfg)?;
    multiplicative_updates(x, start, Some(spec), cfg)
}
