//! Test-side oracles, written independently of the library kernels.
#![allow(dead_code)]

use dnsnmf::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

pub fn signed(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Naive triple loop.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; b.cols()]; a.rows()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            for k in 0..a.cols() {
                *v += a[(i, k)] * b[(k, j)];
            }
        }
    }
    out
}

pub fn to_matrix(rows: Vec<Vec<f64>>) -> DenseMatrix {
    DenseMatrix::from_rows(&rows).unwrap()
}

/// `½‖X − A H B‖²_F` by explicit loops; `b = None` means the identity.
pub fn half_residual(x: &DenseMatrix, a: &DenseMatrix, h: &DenseMatrix, b: Option<&DenseMatrix>) -> f64 {
    let ah = to_matrix(naive_matmul(a, h));
    let full = match b {
        Some(b) => to_matrix(naive_matmul(&ah, b)),
        None => ah,
    };
    let mut s = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let d = x[(i, j)] - full[(i, j)];
            s += d * d;
        }
    }
    0.5 * s
}

/// One-sided Jacobi SVD: singular values in descending order with the left
/// and right singular vectors as columns.
pub struct JacobiSvd {
    pub u: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

pub fn jacobi_svd(a: &DenseMatrix) -> JacobiSvd {
    // operate on columns of the taller orientation
    let transposed = a.rows() < a.cols();
    let m = if transposed { a.transpose() } else { a.clone() };
    let (rows, cols) = m.shape();
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-300 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let (x, y) = (u[p][k], u[q][k]);
                    u[p][k] = c * x - s * y;
                    u[q][k] = s * x + c * y;
                }
                for k in 0..cols {
                    let (x, y) = (v[p][k], v[q][k]);
                    v[p][k] = c * x - s * y;
                    v[q][k] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = u
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let s: Vec<f64> = order.iter().map(|o| o.0).collect();
    let left: Vec<Vec<f64>> = order
        .iter()
        .map(|&(sv, j)| u[j].iter().map(|x| if sv > 0.0 { x / sv } else { 0.0 }).collect())
        .collect();
    let right: Vec<Vec<f64>> = order.iter().map(|&(_, j)| v[j].clone()).collect();
    if transposed {
        JacobiSvd { u: right, s, v: left }
    } else {
        JacobiSvd { u: left, s, v: right }
    }
}

pub fn oracle_spectral_norm(a: &DenseMatrix) -> f64 {
    jacobi_svd(a).s[0]
}

/// Plain projected gradient with step `1/L` on `½‖X − A H‖²_F`.
/// Returns the objective before the first step and after each one.
pub fn projected_gradient_trace(
    x: &DenseMatrix,
    a: &DenseMatrix,
    init: &DenseMatrix,
    lipschitz: f64,
    iters: usize,
) -> Vec<f64> {
    let gram = a.t_matmul(a).unwrap();
    let cross = a.t_matmul(x).unwrap();
    let mut h = init.clone();
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(half_residual(x, a, &h, None));
    for _ in 0..iters {
        let g = gram.matmul(&h).unwrap().sub(&cross).unwrap();
        h = h.zip_map(&g, "pg", |v, gv| (v - gv / lipschitz).max(0.0)).unwrap();
        trace.push(0.5 * x.frobenius_distance(&a.matmul(&h).unwrap()).unwrap().powi(2));
    }
    trace
}

/// Entropy-based NMI from the contingency table, normalized by the larger entropy.
pub fn oracle_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let pa: Vec<f64> = table.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let ent = |p: &[f64]| -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let pij = table[i][j] / n;
            if pij > 0.0 {
                mi += pij * (pij / (pa[i] * pb[j])).ln();
            }
        }
    }
    let denom = ent(&pa).max(ent(&pb));
    if denom == 0.0 {
        1.0
    } else {
        mi / denom
    }
}

/// Best agreement over every injective relabeling of the predicted clusters.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let k = kp.max(kt);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Hoyer sparseness, straight from the definition.
pub fn oracle_hoyer(v: &[f64]) -> f64 {
    let d = v.len() as f64;
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let l2: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (d.sqrt() - l1 / l2) / (d.sqrt() - 1.0)
}
