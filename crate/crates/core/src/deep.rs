//! Deep nsNMF: `X ≈ Z₁S₁Z₂S₂⋯Z_mS_mH_m`.
//!
//! Training has two stages. [`pretrain`] factorizes `X` with nsNMF and then
//! keeps factorizing the previous encoding, one layer at a time.
//! [`finetune`] then runs block-coordinate sweeps over the global objective,
//! solving each block with warm-started APG in the fixed order
//! `Z₁, Z₂, …, Z_m, H_m`.

use std::time::{Duration, Instant};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::proximal::{apg_solve, NnlsProblem, SandwichProblem};
use crate::shallow::{nsnmf, SmoothingSpec};

/// Factors of a deep model. `z[i]` is `r_{i-1} × r_i` with `r_0 = p`, and
/// `h_top` is `r_m × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    z: Vec<DenseMatrix>,
    smoothing: Vec<SmoothingSpec>,
    h_top: DenseMatrix,
}

impl LayerStack {
    pub fn new(
        z: Vec<DenseMatrix>,
        smoothing: Vec<SmoothingSpec>,
        h_top: DenseMatrix,
    ) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Parameter("a layer stack needs at least one layer".into()));
        }
        if z.len() != smoothing.len() {
            return Err(Error::dim(
                "LayerStack",
                format!("{} factors but {} smoothing specs", z.len(), smoothing.len()),
            ));
        }
        for (i, (zi, si)) in z.iter().zip(&smoothing).enumerate() {
            si.validate()?;
            if si.r != zi.cols() {
                return Err(Error::dim(
                    "LayerStack",
                    format!("layer {}: smoothing r={} vs factor {:?}", i + 1, si.r, zi.shape()),
                ));
            }
            if i > 0 && z[i - 1].cols() != zi.rows() {
                return Err(Error::dim(
                    "LayerStack",
                    format!(
                        "layer {} factor {:?} does not follow {:?}",
                        i + 1,
                        zi.shape(),
                        z[i - 1].shape()
                    ),
                ));
            }
        }
        if h_top.rows() != z[z.len() - 1].cols() {
            return Err(Error::dim(
                "LayerStack",
                format!("top encoding {:?} vs last factor", h_top.shape()),
            ));
        }
        if !z.iter().all(DenseMatrix::is_nonnegative) || !h_top.is_nonnegative() {
            return Err(Error::Domain("layer factors must be nonnegative".into()));
        }
        Ok(Self { z, smoothing, h_top })
    }

    pub fn depth(&self) -> usize {
        self.z.len()
    }

    /// `[r₁, …, r_m]`.
    pub fn dims(&self) -> Vec<usize> {
        self.z.iter().map(DenseMatrix::cols).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.smoothing.iter().map(|s| s.theta).collect()
    }

    pub fn input_rows(&self) -> usize {
        self.z[0].rows()
    }

    pub fn samples(&self) -> usize {
        self.h_top.cols()
    }

    pub fn z(&self) -> &[DenseMatrix] {
        &self.z
    }

    pub fn smoothing(&self) -> &[SmoothingSpec] {
        &self.smoothing
    }

    pub fn h_top(&self) -> &DenseMatrix {
        &self.h_top
    }

    pub fn smoothing_matrices(&self) -> Result<Vec<DenseMatrix>> {
        self.smoothing.iter().map(SmoothingSpec::matrix).collect()
    }

    /// Feature matrix of layer `layer` (1-based): `W_i = Z₁S₁⋯S_{i−1}Z_i`.
    pub fn layer_features(&self, layer: usize) -> Result<DenseMatrix> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::Parameter(format!(
                "layer {layer} outside 1..={}",
                self.depth()
            )));
        }
        let s = self.smoothing_matrices()?;
        let mut w = self.z[0].clone();
        for i in 1..layer {
            w = w.matmul(&s[i - 1])?.matmul(&self.z[i])?;
        }
        Ok(w)
    }

    /// `Z₁S₁⋯Z_mS_mH_m`, evaluated as `W_m · S_m · H_m`.
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        let s = self.smoothing_matrices()?;
        self.layer_features(self.depth())?
            .matmul(&s[self.depth() - 1])?
            .matmul(&self.h_top)
    }

    /// `½‖X − Z₁S₁⋯Z_mS_mH_m‖²_F`.
    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        Ok(0.5 * x.frobenius_distance(&self.reconstruct()?)?.powi(2))
    }

    fn check_against(&self, x: &DenseMatrix) -> Result<()> {
        if self.input_rows() != x.rows() || self.samples() != x.cols() {
            return Err(Error::dim(
                "LayerStack",
                format!(
                    "stack maps {}x{} but data is {:?}",
                    self.input_rows(),
                    self.samples(),
                    x.shape()
                ),
            ));
        }
        Ok(())
    }
}

/// Free-function form of [`LayerStack::layer_features`].
pub fn layer_features(stack: &LayerStack, layer: usize) -> Result<DenseMatrix> {
    stack.layer_features(layer)
}

/// Free-function form of [`LayerStack::reconstruct`].
pub fn reconstruct(stack: &LayerStack) -> Result<DenseMatrix> {
    stack.reconstruct()
}

/// Layer-wise nsNMF: `X ≈ Z₁S₁H₁`, then `H_{i−1} ≈ Z_iS_iH_i`.
///
/// Layer `i` (0-based) uses seed `cfg.seed + i`.
pub fn pretrain(
    x: &DenseMatrix,
    dims: &[usize],
    thetas: &[f64],
    cfg: &SolverConfig,
) -> Result<LayerStack> {
    if dims.is_empty() {
        return Err(Error::Parameter("at least one layer is required".into()));
    }
    if dims.len() != thetas.len() {
        return Err(Error::dim(
            "pretrain",
            format!("{} dims but {} thetas", dims.len(), thetas.len()),
        ));
    }
    let mut rows = x.rows();
    for (i, &r) in dims.iter().enumerate() {
        if r == 0 || r > rows.min(x.cols()) {
            return Err(Error::dim(
                "pretrain",
                format!("layer {} dimension {r} exceeds its input {rows}x{}", i + 1, x.cols()),
            ));
        }
        rows = r;
    }

    let mut z = Vec::with_capacity(dims.len());
    let mut smoothing = Vec::with_capacity(dims.len());
    let mut input = x.clone();
    for (i, (&r, &theta)) in dims.iter().zip(thetas).enumerate() {
        let layer_cfg = cfg.clone().with_seed(cfg.seed.wrapping_add(i as u64));
        let f = nsnmf(&input, r, theta, &layer_cfg)?;
        z.push(f.z);
        smoothing.push(f.smoothing.expect("nsnmf always records its smoothing"));
        input = f.h;
    }
    LayerStack::new(z, smoothing, input)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// 1-based.
    pub sweep_index: usize,
    /// Global objective after the sweep.
    pub objective: f64,
    /// APG iterations spent on `Z₁, …, Z_m, H_m`, in that order.
    pub per_block_inner_iters: Vec<usize>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub stack: LayerStack,
    /// Global objective before the first sweep.
    pub initial_objective: f64,
    pub sweeps: Vec<SweepReport>,
}

impl FinetuneOutcome {
    /// Initial objective followed by the objective after each sweep.
    pub fn objective_trace(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.sweeps.iter().map(|s| s.objective))
            .collect()
    }
}

/// Solves one block, keeping the current value when its Lipschitz constant vanishes
/// (the block then has no influence on the objective).
fn solve_block<P: crate::proximal::SmoothObjective>(
    problem: &P,
    lipschitz: f64,
    current: &DenseMatrix,
    cfg: &SolverConfig,
    block: &str,
) -> Result<(DenseMatrix, usize)> {
    if lipschitz <= 0.0 {
        return Ok((current.clone(), 0));
    }
    let out = apg_solve(problem, lipschitz, current, cfg).map_err(|e| e.with_block(block))?;
    Ok((out.solution, out.iterations))
}

/// Block-coordinate APG sweeps over `½‖X − Z₁S₁⋯Z_mS_mH_m‖²_F`.
///
/// Sweeps stop when the relative objective change drops below `cfg.outer_tol`
/// or after `cfg.max_sweeps`.
pub fn finetune(x: &DenseMatrix, stack: LayerStack, cfg: &SolverConfig) -> Result<FinetuneOutcome> {
    stack.check_against(x)?;
    let m = stack.depth();
    let s = stack.smoothing_matrices()?;
    let LayerStack {
        mut z,
        smoothing,
        mut h_top,
    } = stack;
    let x_t = x.transpose();
    let safety = cfg.lipschitz_safety;

    let initial_objective = LayerStack::new(z.clone(), smoothing.clone(), h_top.clone())?.objective(x)?;
    let mut objective = initial_objective;
    let mut sweeps = Vec::new();

    for sweep in 1..=cfg.max_sweeps {
        let started = Instant::now();
        let mut iters = Vec::with_capacity(m + 1);

        // suffix[i] = S_i Z_{i+1} S_{i+1} ⋯ Z_m S_m H_m from the previous sweep's factors
        let mut suffix = vec![DenseMatrix::zeros(1, 1); m];
        suffix[m - 1] = s[m - 1].matmul(&h_top)?;
        for i in (0..m - 1).rev() {
            suffix[i] = s[i].matmul(&z[i + 1])?.matmul(&suffix[i + 1])?;
        }

        // Z₁ through ½‖Xᵀ − Bᵀ Z₁ᵀ‖²
        let problem = NnlsProblem::new(x_t.clone(), suffix[0].transpose())?;
        let (z1_t, it) = solve_block(
            &problem,
            problem.lipschitz(safety),
            &z[0].transpose(),
            cfg,
            "Z1",
        )?;
        z[0] = z1_t.transpose();
        iters.push(it);

        // prefix = Z₁S₁⋯Z_{i−1}S_{i−1} with factors already updated in this sweep
        let mut prefix = z[0].matmul(&s[0])?;
        for i in 1..m {
            let problem = SandwichProblem::new(x.clone(), prefix.clone(), suffix[i].clone())?;
            let (zi, it) = solve_block(
                &problem,
                problem.lipschitz(safety),
                &z[i],
                cfg,
                &format!("Z{}", i + 1),
            )?;
            z[i] = zi;
            iters.push(it);
            prefix = prefix.matmul(&z[i])?.matmul(&s[i])?;
        }

        let problem = NnlsProblem::new(x.clone(), prefix.clone())?;
        let (h, it) = solve_block(&problem, problem.lipschitz(safety), &h_top, cfg, "H")?;
        h_top = h;
        iters.push(it);

        let next = 0.5 * x.frobenius_distance(&prefix.matmul(&h_top)?)?.powi(2);
        if !next.is_finite() {
            return Err(Error::Numerical {
                context: "fine-tuning objective".into(),
                iteration: sweep,
            });
        }
        sweeps.push(SweepReport {
            sweep_index: sweep,
            objective: next,
            per_block_inner_iters: iters,
            wall_time: started.elapsed(),
        });
        let change = (objective - next).abs() / objective.max(f64::MIN_POSITIVE);
        objective = next;
        if change < cfg.outer_tol {
            break;
        }
    }

    Ok(FinetuneOutcome {
        stack: LayerStack::new(z, smoothing, h_top)?,
        initial_objective,
        sweeps,
    })
}
