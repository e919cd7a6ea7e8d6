//! Configuration-driven run: load, factorize, cluster, and write a report
//! plus a checkpoint.
//!
//! Usage: `cargo run --example experiment_pipeline [output-dir]`

use dnsnmf::runner::checkpoint::load_checkpoint;
use dnsnmf::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
method = "dnsnmf"
dims = [24, 8]
theta = [0.3, 0.5]
seed = 5

[finetune]
max_sweeps = 60

[kmeans]
restarts = 10

[dataset]
kind = "synthetic"
p = 60
n = 160
dims = [24, 8]
theta = 0.3
noise = 0.2
background = 0.2
sparsity = 0.5
seed = 5
"#;

fn main() -> dnsnmf::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.outputs.dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("dnsnmf-pipeline"));

    let out = run_experiment(&cfg)?;
    let metrics = out.report.metrics.as_ref().expect("clustering ran");
    println!(
        "accuracy {:.3}  nmi {:.3}",
        metrics.accuracy.unwrap_or(f64::NAN),
        metrics.nmi.unwrap_or(f64::NAN)
    );
    println!("sparseness Z {:?}  H {:.3}", out.report.sparseness.z, out.report.sparseness.h);
    println!("report at {}", out.report_path.display());

    let ck = load_checkpoint(&out.checkpoint_path)?;
    println!("checkpoint holds dims {:?}, {} sweeps", ck.manifest.dims, ck.sweeps.len());
    Ok(())
}
