//! k-means on the top-layer encodings, scored with accuracy and NMI.

use dnsnmf::runner::dataset::{generate_synthetic, SyntheticSpec};
use dnsnmf::{accuracy, finetune, kmeans, nmi, pretrain, SolverConfig};

fn main() -> dnsnmf::Result<()> {
    let mut spec = SyntheticSpec::new(80, 150, vec![20, 5], 0.3, 9);
    spec.noise = 0.3;
    spec.background = 0.3;
    spec.sparsity = 0.5;
    let (bundle, _) = generate_synthetic(&spec)?;
    let truth = bundle.labels.as_ref().expect("synthetic data is labeled");

    for dims in [vec![5], vec![20, 5]] {
        let thetas = vec![0.3; dims.len()];
        let stack = pretrain(&bundle.x, &dims, &thetas, &SolverConfig::default())?;
        let out = finetune(&bundle.x, stack, &SolverConfig::default())?;
        let km = kmeans(out.stack.h_top(), 5, 20, 0)?;
        println!(
            "dims {dims:?}: accuracy {:.3}, NMI {:.3}, k-means objective {:.3} (restart {})",
            accuracy(&km.labels, truth)?,
            nmi(&km.labels, truth)?,
            km.objective,
            km.best_restart
        );
    }
    Ok(())
}
