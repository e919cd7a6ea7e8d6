//! Dense row-major matrices and the numerical kernels shared by every solver.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Denominator floor used by all multiplicative updates.
pub const MU_EPS: f64 = 1e-12;

/// Default power-iteration tolerance (relative change of the estimate).
pub const SPECTRAL_TOL: f64 = 1e-9;

/// Default power-iteration cap.
pub const SPECTRAL_MAX_ITER: usize = 1000;

const SPECTRAL_SEED: u64 = 0x005e_ed0f_5ec7;

// Products with fewer multiply-adds than this stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

/// Rectangular real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("new", format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(
                "new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::dim(
                    "from_rows",
                    format!("row {i} has {} entries, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    /// Entries drawn uniformly from `[low, high)`.
    pub fn random_uniform<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Self {
        Self::from_fn(rows, cols, |_, _| rng.random_range(low..high))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.data[i * self.cols + j]);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dim(
                "matmul",
                format!("{:?} * {:?}", self.shape(), rhs.shape()),
            ));
        }
        let (n, inner, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let lhs_row = &self.data[i * inner..(i + 1) * inner];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * m..(k + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        };
        if n * inner * m >= PAR_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ * rhs` without materializing the transpose of `self`.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::dim(
                "t_matmul",
                format!("{:?}ᵀ * {:?}", self.shape(), rhs.shape()),
            ));
        }
        self.transpose().matmul(rhs)
    }

    /// `self * rhsᵀ`.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::dim(
                "matmul_t",
                format!("{:?} * {:?}ᵀ", self.shape(), rhs.shape()),
            ));
        }
        self.matmul(&rhs.transpose())
    }

    fn check_same_shape(&self, rhs: &DenseMatrix, op: &'static str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.shape(), rhs.shape()),
            ));
        }
        Ok(())
    }

    pub fn zip_map(
        &self,
        rhs: &DenseMatrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.check_same_shape(rhs, op)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.zip_map(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.zip_map(rhs, "sub", |a, b| a - b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Frobenius inner product `⟨self, rhs⟩`.
    pub fn frobenius_dot(&self, rhs: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(rhs, "frobenius_dot")?;
        Ok(self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − rhs‖_F`.
    pub fn frobenius_distance(&self, rhs: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(rhs, "frobenius_distance")?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Product of a chain of matrices, evaluated left to right.
    pub fn chain_product(factors: &[&DenseMatrix]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::dim("chain_product", "empty chain"))?;
        rest.iter()
            .try_fold((*first).clone(), |acc, f| acc.matmul(f))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// `a ⊛ num ⊘ (den + eps)`, the multiplicative-update kernel.
pub fn hadamard_mul_div(
    a: &DenseMatrix,
    num: &DenseMatrix,
    den: &DenseMatrix,
    eps: f64,
) -> Result<DenseMatrix> {
    a.check_same_shape(num, "hadamard_mul_div")?;
    a.check_same_shape(den, "hadamard_mul_div")?;
    let data = a
        .data
        .iter()
        .zip(&num.data)
        .zip(&den.data)
        .map(|((&a, &n), &d)| a * n / (d + eps))
        .collect();
    Ok(DenseMatrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg(a: &DenseMatrix) -> DenseMatrix {
    a.map(|v| v.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNormEstimate {
    pub value: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Largest singular value by power iteration on `aᵀa`.
///
/// The start vector comes from a fixed seed, so the estimate is deterministic.
/// Power iteration approaches the true value from below; callers that turn
/// the result into a step size should inflate it.
pub fn spectral_norm(a: &DenseMatrix, tol: f64, max_iter: usize) -> SpectralNormEstimate {
    let (rows, cols) = a.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(SPECTRAL_SEED);
    let mut v: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);

    let mut estimate = 0.0;
    let mut av = vec![0.0; rows];
    let mut atav = vec![0.0; cols];
    for it in 1..=max_iter.max(1) {
        for (i, out) in av.iter_mut().enumerate() {
            *out = a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        atav.iter_mut().for_each(|x| *x = 0.0);
        for (i, &w) in av.iter().enumerate() {
            for (out, &x) in atav.iter_mut().zip(a.row(i)) {
                *out += x * w;
            }
        }
        let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            if av.iter().all(|&x| x == 0.0) && a.max_abs() == 0.0 {
                return SpectralNormEstimate {
                    value: 0.0,
                    iterations_used: it,
                    converged: true,
                };
            }
            // Start vector fell in the null space; restart from a fresh draw.
            v = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut v);
            continue;
        }
        let next = norm.sqrt();
        v.iter_mut()
            .zip(&atav)
            .for_each(|(x, &y)| *x = y / norm);
        if (next - estimate).abs() <= tol * next {
            return SpectralNormEstimate {
                value: next,
                iterations_used: it,
                converged: true,
            };
        }
        estimate = next;
    }
    SpectralNormEstimate {
        value: estimate,
        iterations_used: max_iter,
        converged: false,
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Leading `k` singular triplets, singular values in nonincreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `rows × k`, orthonormal columns.
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: DenseMatrix,
}

pub fn thin_svd(a: &DenseMatrix, k: usize) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    if k == 0 || k > rows.min(cols) {
        return Err(Error::dim(
            "thin_svd",
            format!("rank {k} outside 1..={}", rows.min(cols)),
        ));
    }
    let m = nalgebra::DMatrix::from_row_slice(rows, cols, &a.data);
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::Numerical {
                context: "thin_svd".into(),
                iteration: 0,
            })
        }
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(k);

    let s = order.iter().map(|&c| svd.singular_values[c]).collect();
    let u = DenseMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]);
    let v = DenseMatrix::from_fn(cols, k, |i, j| v_t[(order[j], i)]);
    Ok(ThinSvd { u, s, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn hadamard_scalar() {
        let r = hadamard_mul_div(&m(&[&[1.0]]), &m(&[&[8.0]]), &m(&[&[4.0]]), MU_EPS).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn hadamard_fixed_point_and_zero_absorption() {
        let a = m(&[&[0.5, 2.0], &[3.0, 1.5]]);
        let nd = m(&[&[1.0, 4.0], &[2.5, 7.0]]);
        let r = hadamard_mul_div(&a, &nd, &nd, MU_EPS).unwrap();
        assert!(r.frobenius_distance(&a).unwrap() < 1e-10);

        let zero = DenseMatrix::zeros(2, 2);
        let r = hadamard_mul_div(&zero, &nd, &a, MU_EPS).unwrap();
        assert_eq!(r, zero);
    }

    #[test]
    fn hadamard_shape_mismatch() {
        let err = hadamard_mul_div(
            &DenseMatrix::zeros(2, 2),
            &DenseMatrix::zeros(2, 3),
            &DenseMatrix::zeros(2, 2),
            MU_EPS,
        );
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn projection() {
        let a = m(&[&[-1.0, 2.0], &[0.0, -3.0]]);
        let p = project_nonneg(&a);
        assert_eq!(p, m(&[&[0.0, 2.0], &[0.0, 0.0]]));
        assert_eq!(project_nonneg(&p), p);
    }

    #[test]
    fn spectral_norm_simple_cases() {
        let est = spectral_norm(&DenseMatrix::identity(3), SPECTRAL_TOL, SPECTRAL_MAX_ITER);
        assert!((est.value - 1.0).abs() < 1e-12 && est.converged);

        let est = spectral_norm(&DenseMatrix::from_diag(&[3.0, 1.0]), SPECTRAL_TOL, 1000);
        assert!((est.value - 3.0).abs() < 1e-8);

        let est = spectral_norm(&DenseMatrix::zeros(3, 2), SPECTRAL_TOL, 10);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn matmul_shapes() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0], &[0.0], &[-1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), m(&[&[-2.0], &[-2.0]]));
        assert!(b.matmul(&b).is_err());
        assert_eq!(a.t_matmul(&a).unwrap(), a.transpose().matmul(&a).unwrap());
        assert_eq!(a.matmul_t(&a).unwrap(), m(&[&[14.0, 32.0], &[32.0, 77.0]]));
    }

    #[test]
    fn thin_svd_identity_and_range() {
        let svd = thin_svd(&DenseMatrix::identity(3), 3).unwrap();
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(thin_svd(&DenseMatrix::identity(3), 0).is_err());
        assert!(thin_svd(&DenseMatrix::identity(3), 4).is_err());
    }

    #[test]
    fn thin_svd_rank_one() {
        let u = [0.6, 0.8, 0.0];
        let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let a = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let svd = thin_svd(&a, 1).unwrap();
        assert!((svd.s[0] - 1.0).abs() < 1e-12);
        let sign = svd.u[(0, 0)].signum() * u[0].signum();
        for i in 0..3 {
            assert!((svd.u[(i, 0)] * sign - u[i]).abs() < 1e-10);
        }
        for j in 0..2 {
            assert!((svd.v[(j, 0)] * sign - v[j]).abs() < 1e-10);
        }
    }
}
