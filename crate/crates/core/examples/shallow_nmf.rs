//! MU-NMF and nsNMF on random data: fit quality and sparseness as θ grows.

use dnsnmf::{hoyer_sparseness, mu_nmf, nsnmf, DenseMatrix, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dnsnmf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = DenseMatrix::from_fn(30, 80, |_, _| rng.random::<f64>());
    let cfg = SolverConfig::default();

    let plain = mu_nmf(&x, 6, &cfg)?;
    println!(
        "MU-NMF   sweeps {:>3}  objective {:.4}",
        plain.sweeps(),
        plain.objective_trace.last().unwrap()
    );
    for theta in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let f = nsnmf(&x, 6, theta, &cfg)?;
        println!(
            "nsNMF θ={theta:.1} sweeps {:>3}  objective {:.4}  sparseness Z {:.3}  H {:.3}",
            f.sweeps(),
            f.objective_trace.last().unwrap(),
            hoyer_sparseness(&f.z)?,
            hoyer_sparseness(&f.h)?
        );
    }
    Ok(())
}
