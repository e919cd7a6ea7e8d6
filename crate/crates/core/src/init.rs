//! NNDSVD and random starting points for nonnegative factorizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitMethod, SolverConfig};
use crate::error::{Error, Result};
use crate::matrix::{thin_svd, DenseMatrix};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Starting factors `z0 (p×r)` and `h0 (r×n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPair {
    pub z0: DenseMatrix,
    pub h0: DenseMatrix,
    /// Components that had no usable singular pair and were filled with noise.
    pub noise_filled: Vec<usize>,
}

fn check_input(x: &DenseMatrix, r: usize) -> Result<()> {
    if !x.is_nonnegative() {
        return Err(Error::Domain("input matrix has negative entries".into()));
    }
    if r == 0 || r > x.rows().min(x.cols()) {
        return Err(Error::Parameter(format!(
            "rank {r} outside 1..={}",
            x.rows().min(x.cols())
        )));
    }
    Ok(())
}

fn split_signs(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    v.iter().map(|&x| (x.max(0.0), (-x).max(0.0))).unzip()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nonnegative double SVD.
///
/// Each leading singular pair `(u_j, σ_j, v_j)` is split into positive and
/// negative sections; the section pair with the larger `‖u±‖‖v±‖` mass is kept,
/// normalized, and scaled by `sqrt(σ_j · mass)`. Components without a usable
/// pair are filled from `seed` with small positive noise (mean `1e-2 · mean(x)`).
/// Entries below `floor` are raised to `floor`.
pub fn nndsvd(x: &DenseMatrix, r: usize, floor: f64, seed: u64) -> Result<InitPair> {
    check_input(x, r)?;
    if floor.is_nan() || floor < 0.0 {
        return Err(Error::Parameter(format!("floor must be nonnegative, got {floor}")));
    }
    let (p, n) = x.shape();
    let svd = thin_svd(x, r)?;
    let mut z0 = DenseMatrix::zeros(p, r);
    let mut h0 = DenseMatrix::zeros(r, n);
    let mut noise_filled = Vec::new();
    let top = svd.s[0];

    for j in 0..r {
        let sigma = svd.s[j];
        let usable = top > 0.0 && sigma > RANK_TOL * top;
        let mut placed = false;
        if usable {
            let (up, un) = split_signs(&svd.u.column(j));
            let (vp, vn) = split_signs(&svd.v.column(j));
            let (nup, nvp, nun, nvn) = (norm(&up), norm(&vp), norm(&un), norm(&vn));
            let (pos_mass, neg_mass) = (nup * nvp, nun * nvn);
            let (u, v, nu, nv, mass) = if pos_mass >= neg_mass {
                (up, vp, nup, nvp, pos_mass)
            } else {
                (un, vn, nun, nvn, neg_mass)
            };
            if mass > 0.0 {
                let scale = (sigma * mass).sqrt();
                for i in 0..p {
                    z0[(i, j)] = scale * u[i] / nu;
                }
                for k in 0..n {
                    h0[(j, k)] = scale * v[k] / nv;
                }
                placed = true;
            }
        }
        if !placed {
            noise_filled.push(j);
        }
    }

    if !noise_filled.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Uniform on [0, 2μ) has mean μ.
        let amp = 2.0 * 1e-2 * x.mean().max(f64::MIN_POSITIVE);
        for &j in &noise_filled {
            for i in 0..p {
                z0[(i, j)] = rng.random_range(f64::EPSILON..1.0) * amp;
            }
            for k in 0..n {
                h0[(j, k)] = rng.random_range(f64::EPSILON..1.0) * amp;
            }
        }
    }

    if floor > 0.0 {
        z0 = z0.map(|v| v.max(floor));
        h0 = h0.map(|v| v.max(floor));
    }
    Ok(InitPair {
        z0,
        h0,
        noise_filled,
    })
}

/// Seeded uniform positive factors scaled so that `z0·h0` matches the data mean.
pub fn random_init(x: &DenseMatrix, r: usize, seed: u64) -> Result<InitPair> {
    check_input(x, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (x.mean().max(f64::MIN_POSITIVE) / r as f64).sqrt() * 2.0;
    let z0 = DenseMatrix::random_uniform(x.rows(), r, 1e-3, 1.0, &mut rng).scale(scale);
    let h0 = DenseMatrix::random_uniform(r, x.cols(), 1e-3, 1.0, &mut rng).scale(scale);
    Ok(InitPair {
        z0,
        h0,
        noise_filled: Vec::new(),
    })
}

/// Floor used with multiplicative updates, which cannot leave exact zeros.
pub fn mu_floor(x: &DenseMatrix) -> f64 {
    1e-9 * x.mean()
}

/// Starting point for a multiplicative-update run according to `cfg.init`.
pub fn initialize_for_mu(x: &DenseMatrix, r: usize, cfg: &SolverConfig) -> Result<InitPair> {
    match cfg.init {
        InitMethod::Nndsvd => {
            let floor = mu_floor(x).max(f64::MIN_POSITIVE);
            nndsvd(x, r, floor, cfg.seed)
        }
        InitMethod::Random => random_init(x, r, cfg.seed),
    }
}
