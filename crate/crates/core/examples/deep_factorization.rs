//! Two-layer model on planted hierarchical data: pre-training, fine-tuning,
//! and the feature matrices of each layer.

use dnsnmf::runner::dataset::{generate_synthetic, SyntheticSpec};
use dnsnmf::{finetune, pretrain, SolverConfig};

fn main() -> dnsnmf::Result<()> {
    let mut spec = SyntheticSpec::new(60, 120, vec![16, 6], 0.4, 3);
    spec.noise = 0.1;
    spec.background = 0.2;
    let (bundle, _) = generate_synthetic(&spec)?;

    let cfg = SolverConfig::default();
    let stack = pretrain(&bundle.x, &[16, 6], &[0.4, 0.4], &cfg)?;
    println!("after pre-training: objective {:.4}", stack.objective(&bundle.x)?);

    let out = finetune(&bundle.x, stack, &cfg)?;
    for s in out.sweeps.iter().filter(|s| s.sweep_index % 20 == 1) {
        println!(
            "sweep {:>3}: objective {:.4}, inner iterations {:?}",
            s.sweep_index, s.objective, s.per_block_inner_iters
        );
    }
    let last = out.sweeps.last().expect("at least one sweep");
    println!("final after {} sweeps: {:.4}", last.sweep_index, last.objective);

    for layer in 1..=out.stack.depth() {
        let w = out.stack.layer_features(layer)?;
        println!("layer {layer} features: {}x{}", w.rows(), w.cols());
    }
    Ok(())
}
