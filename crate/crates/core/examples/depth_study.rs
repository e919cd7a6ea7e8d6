//! Clustering accuracy as the model gets deeper, over a small θ grid.
//!
//! Usage: `cargo run --release --example depth_study [output-dir]`

use dnsnmf::runner::dataset::{DatasetSource, SyntheticSpec};
use dnsnmf::runner::depth_study;
use dnsnmf::{ExperimentConfig, Method};

fn main() -> dnsnmf::Result<()> {
    let mut spec = SyntheticSpec::new(100, 200, vec![20, 10], 0.3, 1);
    spec.noise = 0.5;
    spec.background = 0.3;
    spec.sparsity = 0.7;
    let mut cfg = ExperimentConfig::new(Method::Dnsnmf, vec![20, 15, 10], 0.3, DatasetSource::Synthetic(spec));
    cfg.seed = 1;
    cfg.outputs.dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("dnsnmf-depth"));

    let study = depth_study(&cfg, &[1, 2, 3], &[0.1, 0.3, 0.5])?;
    println!("depth  theta  dims          accuracy  nmi");
    for arm in &study.arms {
        println!(
            "{:<6} {:<6} {:<13} {:<9.3} {:.3}",
            arm.depth,
            arm.theta,
            format!("{:?}", arm.dims),
            arm.accuracy.unwrap_or(f64::NAN),
            arm.nmi.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
