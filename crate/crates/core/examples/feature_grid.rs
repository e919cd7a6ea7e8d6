//! Renders the features of every layer as PGM grids.
//!
//! Usage: `cargo run --example feature_grid [output-dir]`

use std::path::PathBuf;

use dnsnmf::runner::dataset::{generate_synthetic, SyntheticSpec};
use dnsnmf::runner::features::export_feature_grid;
use dnsnmf::{finetune, pretrain, SolverConfig};

fn main() -> dnsnmf::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dnsnmf-features"));
    std::fs::create_dir_all(&dir).expect("output directory");

    // 12x12 "images", 144 pixels per sample
    let mut spec = SyntheticSpec::new(144, 100, vec![16, 9, 4], 0.5, 2);
    spec.sparsity = 0.6;
    let (bundle, _) = generate_synthetic(&spec)?;
    let stack = pretrain(&bundle.x, &[16, 9, 4], &[0.5; 3], &SolverConfig::default())?;
    let out = finetune(&bundle.x, stack, &SolverConfig::default())?;

    for layer in 1..=3 {
        let path = dir.join(format!("layer{layer}.pgm"));
        let img = export_feature_grid(&out.stack, layer, (12, 12), &path)?;
        println!("{} ({}x{})", path.display(), img.width, img.height);
    }
    Ok(())
}
