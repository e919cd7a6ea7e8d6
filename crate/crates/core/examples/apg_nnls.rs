//! Nonnegative least squares with the accelerated solver, against plain
//! projected gradient steps on the same problem.

use dnsnmf::matrix::project_nonneg;
use dnsnmf::proximal::{nnls_gradient, SmoothObjective};
use dnsnmf::{apg_solve, DenseMatrix, NnlsProblem, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP: f64 = 1e-8;

fn main() -> dnsnmf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = DenseMatrix::from_fn(40, 10, |_, _| rng.random::<f64>());
    let h_true = DenseMatrix::from_fn(10, 5, |_, _| rng.random::<f64>().max(0.4) - 0.4);
    // exact fit exists, so the optimal objective is zero
    let x = a.matmul(&h_true)?;
    let problem = NnlsProblem::new(x, a)?;
    let l = problem.lipschitz(1.01);
    let init = DenseMatrix::filled(10, 5, 1.0);

    let cfg = SolverConfig {
        inner_tol: 0.0,
        max_inner_iter: 20_000,
        ..SolverConfig::default()
    };
    let out = apg_solve(&problem, l, &init, &cfg)?;
    let apg_k = out.objective_trace.iter().position(|&f| f <= GAP);

    let mut h = init;
    let mut pg_k = None;
    for k in 0..200_000 {
        if problem.objective(&h)? <= GAP {
            pg_k = Some(k);
            break;
        }
        let g = nnls_gradient(&problem, &h)?;
        h = project_nonneg(&h.sub(&g.scale(1.0 / l))?);
    }
    println!("iterations to objective {GAP:e}: APG {apg_k:?}, projected gradient {pg_k:?}");
    println!("APG recovery error {:.3e}", out.solution.frobenius_distance(&h_true)?);
    Ok(())
}
