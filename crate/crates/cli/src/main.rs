//! `dnsnmf` command-line runner.
//!
//! Every experiment verb accepts `--config <file.toml>` holding an
//! `ExperimentConfig`; flags given on the command line replace the matching
//! file values. Exit codes: 0 success, 1 configuration, 2 data/format,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dnsnmf::runner::checkpoint::load_checkpoint;
use dnsnmf::runner::dataset::{generate_synthetic, write_csv_matrix, write_labels, SyntheticSpec};
use dnsnmf::runner::features::export_feature_grid;
use dnsnmf::runner::{depth_study, run_factorization, ExperimentOutcome};
use dnsnmf::{run_experiment, Error, ExperimentConfig, Result};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "dnsnmf", version, about = "Deep non-smooth NMF experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write its checkpoint and report.
    Factorize(ExperimentArgs),
    /// Fit, cluster the top-layer encodings with k-means, and score against labels.
    Evaluate(ExperimentArgs),
    /// Render one layer's features from a checkpoint as a PGM grid.
    ExportFeatures(ExportArgs),
    /// Write a seeded synthetic hierarchical dataset as CSV plus labels.
    Synth(SynthArgs),
    /// Run dnsNMF over a grid of depths and smoothing parameters.
    DepthStudy(DepthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nmf,
    Nsnmf,
    Dnsnmf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Nndsvd,
    Random,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Layer sizes, e.g. `40,20,10`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// One value shared by all layers, or one per layer.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV data matrix (rows are features, columns are samples).
    #[arg(long, conflicts_with = "pgm_dir")]
    data: Option<PathBuf>,
    /// Directory of binary PGM images, one sample per file.
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
    /// Label file, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of k-means clusters.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    kmeans_seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Multiplicative-update sweep cap for pre-training.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Fine-tuning sweep cap.
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// 1-based layer index.
    #[arg(long, default_value_t = 1)]
    layer: usize,
    /// Image geometry as `HxW`.
    #[arg(long, value_parser = parse_shape)]
    shape: (usize, usize),
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Planted layer sizes; the last one is the number of clusters.
    #[arg(long, value_delimiter = ',', default_value = "20,10")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    background: f64,
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives `x.csv` and `labels.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Depths to run; defaults to 1 through the number of template dims.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Smoothing grid; defaults to the configured shared theta.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
}

fn parse_shape(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    Ok((h, w))
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn sub_table<'a>(root: &'a mut Table, key: &str) -> Result<&'a mut Table> {
    root.entry(key)
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("`{key}` must be a table")))
}

impl ExperimentArgs {
    /// Config file contents with command-line values layered on top.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut root = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        if let Some(m) = self.method {
            let name = match m {
                MethodArg::Nmf => "nmf",
                MethodArg::Nsnmf => "nsnmf",
                MethodArg::Dnsnmf => "dnsnmf",
            };
            root.insert("method".into(), name.into());
        }
        if let Some(dims) = &self.dims {
            root.insert(
                "dims".into(),
                Value::Array(dims.iter().map(|&d| Value::Integer(d as i64)).collect()),
            );
        }
        if let Some(theta) = &self.theta {
            let v = match theta.as_slice() {
                [t] => Value::Float(*t),
                many => Value::Array(many.iter().map(|&t| Value::Float(t)).collect()),
            };
            root.insert("theta".into(), v);
        }
        if let Some(seed) = self.seed {
            root.insert("seed".into(), Value::Integer(seed as i64));
        }
        if self.data.is_some() || self.pgm_dir.is_some() {
            let mut ds = Table::new();
            match (&self.data, &self.pgm_dir) {
                (Some(csv), _) => {
                    ds.insert("kind".into(), "csv".into());
                    ds.insert("matrix".into(), path_value(csv));
                }
                (None, Some(dir)) => {
                    ds.insert("kind".into(), "pgm".into());
                    ds.insert("dir".into(), path_value(dir));
                }
                (None, None) => unreachable!(),
            }
            root.insert("dataset".into(), Value::Table(ds));
        }
        if let Some(labels) = &self.labels {
            let ds = sub_table(&mut root, "dataset")?;
            if ds.get("kind").and_then(Value::as_str) == Some("synthetic") {
                return Err(Error::Config("synthetic datasets carry their own labels".into()));
            }
            ds.insert("labels".into(), path_value(labels));
        }
        if self.k.is_some() || self.restarts.is_some() || self.kmeans_seed.is_some() {
            let km = sub_table(&mut root, "kmeans")?;
            if let Some(k) = self.k {
                km.insert("k".into(), Value::Integer(k as i64));
            }
            if let Some(r) = self.restarts {
                km.insert("restarts".into(), Value::Integer(r as i64));
            }
            if let Some(s) = self.kmeans_seed {
                km.insert("seed".into(), Value::Integer(s as i64));
            }
        }
        if let Some(init) = self.init {
            let name = match init {
                InitArg::Nndsvd => "nndsvd",
                InitArg::Random => "random",
            };
            sub_table(&mut root, "pretrain")?.insert("init".into(), name.into());
        }
        if let Some(n) = self.max_iter {
            sub_table(&mut root, "pretrain")?.insert("max_iter".into(), Value::Integer(n as i64));
        }
        if let Some(n) = self.max_sweeps {
            sub_table(&mut root, "finetune")?.insert("max_sweeps".into(), Value::Integer(n as i64));
        }
        if let Some(out) = &self.out {
            sub_table(&mut root, "outputs")?.insert("dir".into(), path_value(out));
        }
        let text = toml::to_string(&root).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = ExperimentConfig::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_outcome(out: &ExperimentOutcome) {
    let trace = &out.factorization.objective_trace;
    println!(
        "objective {:.6e} -> {:.6e} over {} steps",
        trace[0],
        trace[trace.len() - 1],
        trace.len() - 1
    );
    if let Some(c) = &out.clustering {
        if let (Some(ac), Some(nmi)) = (c.accuracy, c.nmi) {
            println!("accuracy {ac:.4}  nmi {nmi:.4}");
        }
        println!("kmeans objective {:.6e} ({} restarts)", c.kmeans_objective, c.restarts_used);
    }
    println!("report {}", out.report_path.display());
    println!("checkpoint {}", out.checkpoint_path.display());
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Factorize(args) => {
            let cfg = args.resolve()?;
            print_outcome(&run_factorization(&cfg)?);
        }
        Command::Evaluate(args) => {
            let mut cfg = args.resolve()?;
            cfg.require_labels = true;
            print_outcome(&run_experiment(&cfg)?);
        }
        Command::ExportFeatures(args) => {
            let ck = load_checkpoint(&args.checkpoint)?;
            let img = export_feature_grid(&ck.stack, args.layer, args.shape, &args.output)?;
            println!("wrote {}x{} grid to {}", img.width, img.height, args.output.display());
        }
        Command::Synth(args) => {
            let spec = SyntheticSpec {
                noise: args.noise,
                background: args.background,
                sparsity: args.sparsity,
                ..SyntheticSpec::new(args.p, args.n, args.dims, args.theta, args.seed)
            };
            let (bundle, _) = generate_synthetic(&spec)?;
            fs::create_dir_all(&args.out).map_err(|e| Error::Io {
                path: args.out.clone(),
                source: e,
            })?;
            let x_path = args.out.join("x.csv");
            let l_path = args.out.join("labels.txt");
            write_csv_matrix(&x_path, &bundle.x)?;
            if let Some(labels) = &bundle.labels {
                write_labels(&l_path, labels)?;
            }
            println!("wrote {} and {}", x_path.display(), l_path.display());
        }
        Command::DepthStudy(args) => {
            let cfg = args.experiment.resolve()?;
            let depths = args.depths.unwrap_or_else(|| (1..=cfg.dims.len()).collect());
            let thetas = match args.thetas {
                Some(t) => t,
                None => vec![cfg.thetas()?[0]],
            };
            let study = depth_study(&cfg, &depths, &thetas)?;
            println!("depth  theta  accuracy  nmi     objective");
            for arm in &study.arms {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{:<6} {:<6} {:<9} {:<7} {:.6e}",
                    arm.depth,
                    arm.theta,
                    fmt(arm.accuracy),
                    fmt(arm.nmi),
                    arm.final_objective
                );
            }
            println!("summary {}", cfg.outputs.dir.join("depth_study.toml").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
