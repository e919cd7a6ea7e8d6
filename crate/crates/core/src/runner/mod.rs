//! End-to-end experiment pipeline: load → initialize → factorize → cluster the
//! top encoding → score → write checkpoint and report.

pub mod checkpoint;
pub mod dataset;
pub mod features;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::deep::{finetune, pretrain, LayerStack, SweepReport};
use crate::error::{Error, Result};
use crate::eval::{accuracy, hoyer_sparseness, kmeans, nmi, ClusteringReport};
use crate::matrix::DenseMatrix;
use crate::shallow::{mu_nmf, nsnmf, ShallowFactorization, SmoothingSpec};

use checkpoint::{save_checkpoint, Checkpoint, SweepRecord};
use dataset::{load_dataset, DatasetBundle, DatasetSource};
use report::{export_report, ExperimentReport, SparsenessSection, TraceSection};

pub const REPORT_FILE: &str = "report.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nmf,
    Nsnmf,
    #[default]
    Dnsnmf,
}

/// One smoothing parameter for every layer, or one per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Shared(f64),
    PerLayer(Vec<f64>),
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Shared(0.5)
    }
}

impl ThetaSpec {
    pub fn per_layer(&self, depth: usize) -> Result<Vec<f64>> {
        match self {
            ThetaSpec::Shared(t) => Ok(vec![*t; depth]),
            ThetaSpec::PerLayer(v) if v.len() == depth => Ok(v.clone()),
            ThetaSpec::PerLayer(v) => Err(Error::Config(format!(
                "{} thetas given for {depth} layers",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    /// Number of clusters; defaults to the number of distinct labels, or the
    /// top-layer dimension when unlabeled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub restarts: usize,
    /// Defaults to the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: None,
            restarts: 20,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Everything needed to run one experiment. Loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub method: Method,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub seed: u64,
    /// Fail with a configuration error when the dataset has no labels.
    #[serde(default)]
    pub require_labels: bool,
    #[serde(default)]
    pub pretrain: SolverConfig,
    #[serde(default)]
    pub finetune: SolverConfig,
    #[serde(default)]
    pub kmeans: KMeansConfig,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(method: Method, dims: Vec<usize>, theta: f64, dataset: DatasetSource) -> Self {
        Self {
            method,
            dims,
            theta: ThetaSpec::Shared(theta),
            seed: 0,
            require_labels: false,
            pretrain: SolverConfig::default(),
            finetune: SolverConfig::default(),
            kmeans: KMeansConfig::default(),
            dataset,
            outputs: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Smoothing parameter per layer; zero for plain NMF.
    pub fn thetas(&self) -> Result<Vec<f64>> {
        match self.method {
            Method::Nmf => Ok(vec![0.0; self.dims.len()]),
            _ => self.theta.per_layer(self.dims.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Config("dims must list at least one positive size".into()));
        }
        if matches!(self.method, Method::Nmf | Method::Nsnmf) && self.dims.len() != 1 {
            return Err(Error::Config(format!(
                "{:?} is single-layer but {} dims were given",
                self.method,
                self.dims.len()
            )));
        }
        for t in self.thetas()? {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("theta {t} outside [0, 1]")));
            }
        }
        if self.kmeans.restarts == 0 {
            return Err(Error::Config("kmeans.restarts must be at least 1".into()));
        }
        Ok(())
    }

    fn pretrain_config(&self) -> SolverConfig {
        self.pretrain.clone().with_seed(self.seed)
    }

    fn kmeans_seed(&self) -> u64 {
        self.kmeans.seed.unwrap_or(self.seed)
    }
}

/// Fitted model plus its objective history.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub stack: LayerStack,
    /// Objective at the start of the final stage, then after every sweep.
    pub objective_trace: Vec<f64>,
    /// Fine-tuning sweeps; empty for shallow methods.
    pub sweeps: Vec<SweepReport>,
}

fn shallow_to_stack(f: ShallowFactorization) -> Result<Factorization> {
    let r = f.z.cols();
    let spec = f.smoothing.unwrap_or(SmoothingSpec { theta: 0.0, r });
    Ok(Factorization {
        stack: LayerStack::new(vec![f.z], vec![spec], f.h)?,
        objective_trace: f.objective_trace,
        sweeps: Vec::new(),
    })
}

/// Runs the configured method on `x`.
pub fn factorize(x: &DenseMatrix, cfg: &ExperimentConfig) -> Result<Factorization> {
    cfg.validate()?;
    let thetas = cfg.thetas()?;
    let pre = cfg.pretrain_config();
    match cfg.method {
        Method::Nmf => shallow_to_stack(mu_nmf(x, cfg.dims[0], &pre)?),
        Method::Nsnmf => shallow_to_stack(nsnmf(x, cfg.dims[0], thetas[0], &pre)?),
        Method::Dnsnmf => {
            let stack = pretrain(x, &cfg.dims, &thetas, &pre)?;
            let out = finetune(x, stack, &cfg.finetune)?;
            Ok(Factorization {
                objective_trace: out.objective_trace(),
                stack: out.stack,
                sweeps: out.sweeps,
            })
        }
    }
}

fn sparseness_or_zero(m: &DenseMatrix) -> f64 {
    // single-entry columns have no defined sparseness
    hoyer_sparseness(m).unwrap_or(0.0)
}

pub fn stack_sparseness(stack: &LayerStack) -> SparsenessSection {
    SparsenessSection {
        z: stack.z().iter().map(sparseness_or_zero).collect(),
        h: sparseness_or_zero(stack.h_top()),
    }
}

/// k-means on the columns of `H_m`, then accuracy and NMI when labels exist.
pub fn evaluate_stack(
    stack: &LayerStack,
    bundle: &DatasetBundle,
    kcfg: &KMeansConfig,
    seed: u64,
) -> Result<ClusteringReport> {
    let k = kcfg.k.unwrap_or_else(|| match &bundle.labels {
        Some(l) => l.compacted().span(),
        None => stack.dims().last().copied().unwrap_or(1),
    });
    let km = kmeans(stack.h_top(), k, kcfg.restarts, seed)?;
    let (acc, nmi_value) = match &bundle.labels {
        Some(truth) => (Some(accuracy(&km.labels, truth)?), Some(nmi(&km.labels, truth)?)),
        None => (None, None),
    };
    let sp = stack_sparseness(stack);
    Ok(ClusteringReport {
        accuracy: acc,
        nmi: nmi_value,
        kmeans_objective: km.objective,
        restarts_used: km.restart_objectives.len(),
        sparseness_z: sp.z,
        sparseness_h: sp.h,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub clustering: Option<ClusteringReport>,
    pub factorization: Factorization,
    pub report_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

fn trace_section(f: &Factorization) -> TraceSection {
    TraceSection {
        objective: f.objective_trace.clone(),
        inner_iterations: f
            .sweeps
            .iter()
            .map(|s| s.per_block_inner_iters.clone())
            .collect(),
    }
}

fn write_outputs(
    dir: &Path,
    report: &ExperimentReport,
    factorization: &Factorization,
    seed: u64,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let report_path = dir.join(REPORT_FILE);
    let ck = Checkpoint::new(
        factorization.stack.clone(),
        factorization.sweeps.iter().map(SweepRecord::from).collect(),
        seed,
    );
    let written = save_checkpoint(&ck_path, &ck).and_then(|_| export_report(report, &report_path));
    if let Err(e) = written {
        let _ = fs::remove_file(&ck_path);
        let _ = fs::remove_file(&report_path);
        return Err(e);
    }
    Ok((report_path, ck_path))
}

fn run(cfg: &ExperimentConfig, cluster: bool) -> Result<ExperimentOutcome> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let bundle = load_dataset(&cfg.dataset).map_err(|e| e.in_stage("load"))?;
    if cfg.require_labels && bundle.labels.is_none() {
        return Err(Error::Config("metrics requested but the dataset has no labels".into())
            .in_stage("load"));
    }
    let factorization = factorize(&bundle.x, cfg).map_err(|e| e.in_stage("factorize"))?;
    let clustering = if cluster {
        Some(
            evaluate_stack(&factorization.stack, &bundle, &cfg.kmeans, cfg.kmeans_seed())
                .map_err(|e| e.in_stage("cluster"))?,
        )
    } else {
        None
    };
    let report = ExperimentReport::new(
        cfg,
        clustering.as_ref(),
        stack_sparseness(&factorization.stack),
        trace_section(&factorization),
        cluster.then(|| cfg.kmeans_seed()),
    );
    let (report_path, checkpoint_path) =
        write_outputs(&cfg.outputs.dir, &report, &factorization, cfg.seed)
            .map_err(|e| e.in_stage("write"))?;
    Ok(ExperimentOutcome {
        report,
        clustering,
        factorization,
        report_path,
        checkpoint_path,
    })
}

/// Full pipeline including k-means on `H_m` and, with labels, accuracy and NMI.
/// Writes `report.toml` and `model.ckpt` into `cfg.outputs.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run(cfg, true)
}

/// Factorization only: writes the checkpoint and a report without metrics.
pub fn run_factorization(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run(cfg, false)
}

/// Result of one arm of a depth study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthArm {
    pub depth: usize,
    pub theta: f64,
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    pub final_objective: f64,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthStudy {
    pub arms: Vec<DepthArm>,
}

/// Layer sizes for a model of `depth` layers taken from the deepest template:
/// the leading `depth − 1` sizes followed by the top size.
pub fn dims_for_depth(template: &[usize], depth: usize) -> Result<Vec<usize>> {
    if depth == 0 || depth > template.len() {
        return Err(Error::Config(format!(
            "depth {depth} needs a dims template of at least that many sizes (got {})",
            template.len()
        )));
    }
    let mut dims = template[..depth - 1].to_vec();
    dims.push(*template.last().expect("non-empty template"));
    Ok(dims)
}

/// Runs dnsNMF for every `(depth, θ)` pair; each arm writes into
/// `<outputs.dir>/depth-<m>/theta-<θ>/`, and a summary goes to
/// `<outputs.dir>/depth_study.toml`.
pub fn depth_study(base: &ExperimentConfig, depths: &[usize], thetas: &[f64]) -> Result<DepthStudy> {
    if depths.is_empty() || thetas.is_empty() {
        return Err(Error::Config("depth study needs at least one depth and one theta".into()));
    }
    let mut plan = Vec::new();
    for &depth in depths {
        let dims = dims_for_depth(&base.dims, depth)?;
        for &theta in thetas {
            let mut cfg = base.clone();
            cfg.method = Method::Dnsnmf;
            cfg.dims = dims.clone();
            cfg.theta = ThetaSpec::Shared(theta);
            cfg.outputs.dir = base
                .outputs
                .dir
                .join(format!("depth-{depth}"))
                .join(format!("theta-{theta}"));
            cfg.validate()?;
            plan.push((depth, theta, cfg));
        }
    }
    let arms = plan
        .into_par_iter()
        .map(|(depth, theta, cfg)| {
            let out = run_experiment(&cfg)?;
            Ok(DepthArm {
                depth,
                theta,
                dims: cfg.dims.clone(),
                accuracy: out.clustering.as_ref().and_then(|c| c.accuracy),
                nmi: out.clustering.as_ref().and_then(|c| c.nmi),
                final_objective: *out
                    .factorization
                    .objective_trace
                    .last()
                    .expect("trace is never empty"),
                dir: cfg.outputs.dir,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let study = DepthStudy { arms };
    let dir = &base.outputs.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("depth_study.toml");
    let text = toml::to_string(&study).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(study)
}
