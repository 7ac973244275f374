//! Dense 64-bit linear algebra and seeded random number generation.
//!
//! Everything downstream (adapters, the tape, task generation) is built on
//! the two types here. Execution is sequential with a fixed accumulation
//! order, so results are bit-reproducible for a given seed and shapes.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    /// Build from a row-major data vector; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested row slices; rows must be non-empty and ragged rows are rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Shape("matrix must have at least one row and column".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Matrix::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Scalar stored in a 1x1 matrix.
    pub fn scalar(v: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// Value of a 1x1 matrix.
    pub fn as_scalar(&self) -> Result<f64> {
        if self.rows != 1 || self.cols != 1 {
            return Err(Error::Shape(format!(
                "expected 1x1 matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(self.data[0])
    }

    /// Matrix product with a fixed left-to-right accumulation order: for each
    /// output entry the sum over the inner index runs in increasing order, so
    /// sequential results are bit-reproducible.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul dimension mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        let n = other.cols;
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, &a) in arow.iter().enumerate() {
                let brow = &other.data[k * n..(k + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data: out,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b, "add")
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b, "sub")
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a * b, "hadamard")
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64, op: &str) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{op} shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Column `j` as a fresh column vector.
    pub fn column(&self, j: usize) -> Result<Matrix> {
        if j >= self.cols {
            return Err(Error::Lookup(format!(
                "column {j} out of range for {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let data = (0..self.rows).map(|i| self.get(i, j)).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: 1,
            data,
        })
    }

    /// Gather the given columns into a new matrix, in the given order.
    pub fn gather_columns(&self, idx: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            for &j in idx {
                if j >= self.cols {
                    return Err(Error::Lookup(format!(
                        "column {j} out of range for {}x{} matrix",
                        self.rows, self.cols
                    )));
                }
                data.push(self.get(i, j));
            }
        }
        Matrix::from_vec(self.rows, idx.len(), data)
    }
}

/// Sum of elementwise products of two same-shaped matrices (the Frobenius
/// inner product).
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "frobenius_inner shape mismatch: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(a.data.iter().zip(b.data.iter()).map(|(&x, &y)| x * y).sum())
}

/// Deterministic random number generator.
///
/// This is xoshiro256++ (Blackman & Vigna), seeded by expanding the 64-bit
/// seed through SplitMix64. Both algorithms are fixed public-domain
/// specifications, so the stream is identical across platforms and rebuilds
/// of this crate. Gaussian draws use the Box-Muller transform with no state
/// carried between calls: one `normal()` consumes exactly two raw draws.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut x = seed;
        let s = [
            splitmix64(&mut x),
            splitmix64(&mut x),
            splitmix64(&mut x),
            splitmix64(&mut x),
        ];
        Rng { s }
    }

    /// Derive an independent child seed. Used to give subsystems (suite
    /// generation, pretraining, task training) their own streams from one
    /// master seed.
    pub fn derive_seed(seed: u64, tag: u64) -> u64 {
        let mut x = seed ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
        splitmix64(&mut x)
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box-Muller; consumes exactly two raw draws.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `[0, n)` via 128-bit widening multiply.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.index(i + 1);
            v.swap(i, j);
        }
    }
}

/// Matrix with i.i.d. `N(0, std^2)` entries, filled row-major.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, std: f64) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if !(std > 0.0) {
        return Err(Error::Shape(format!("std must be positive, got {std}")));
    }
    let data = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Random orthogonal matrix: modified Gram-Schmidt over a Gaussian matrix,
/// run twice for orthogonality to machine precision, with the sign of each
/// diagonal pivot fixed so the result is deterministic.
pub fn orthogonal_matrix(rng: &mut Rng, n: usize) -> Result<Matrix> {
    let g = gaussian_matrix(rng, n, n, 1.0)?;
    // Columns of g, orthonormalized.
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| g.get(i, j)).collect())
        .collect();
    for _pass in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q[j][i] * q[k][i]).sum();
                for i in 0..n {
                    q[j][i] -= dot * q[k][i];
                }
            }
            let norm: f64 = (0..n).map(|i| q[j][i] * q[j][i]).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::Degenerate(
                    "gaussian matrix was numerically rank-deficient".into(),
                ));
            }
            for i in 0..n {
                q[j][i] /= norm;
            }
        }
    }
    // Fix signs: make the first nonzero entry of each column positive.
    for col in q.iter_mut() {
        if let Some(&lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if lead < 0.0 {
                for v in col.iter_mut() {
                    *v = -*v;
                }
            }
        }
    }
    let mut m = Matrix::zeros(n, n)?;
    for (j, col) in q.iter().enumerate() {
        for i in 0..n {
            m.set(i, j, col[i]);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        // Independent triple-loop oracle.
        let mut out = Matrix::zeros(a.rows(), b.cols()).unwrap();
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let m = Matrix::from_rows(&[vec![3.0, -1.5], vec![0.25, 7.0]]).unwrap();
        let i2 = Matrix::identity(2).unwrap();
        assert_eq!(i2.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_direct() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_vs_naive_oracle() {
        let mut rng = Rng::from_seed(11);
        let a = gaussian_matrix(&mut rng, 7, 5, 1.0).unwrap();
        let b = gaussian_matrix(&mut rng, 5, 3, 1.0).unwrap();
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        let delta = fast.sub(&slow).unwrap().max_abs();
        assert!(delta < 1e-12, "max |delta| = {delta}");
    }

    #[test]
    fn matmul_shape_error_names_shapes() {
        let a = Matrix::zeros(2, 3).unwrap();
        let b = Matrix::zeros(2, 3).unwrap();
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3 * 2x3"), "{err}");
    }

    #[test]
    fn matmul_bit_reproducible() {
        let mk = || {
            let mut rng = Rng::from_seed(99);
            let a = gaussian_matrix(&mut rng, 8, 8, 1.0).unwrap();
            let b = gaussian_matrix(&mut rng, 8, 8, 1.0).unwrap();
            a.matmul(&b).unwrap()
        };
        let (x, y) = (mk(), mk());
        assert!(x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn matmul_associativity_tolerance() {
        let mut rng = Rng::from_seed(5);
        for _ in 0..10 {
            let a = gaussian_matrix(&mut rng, 8, 8, 1.0).unwrap();
            let b = gaussian_matrix(&mut rng, 8, 8, 1.0).unwrap();
            let c = gaussian_matrix(&mut rng, 8, 8, 1.0).unwrap();
            let lhs = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let rhs = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let gap = lhs.sub(&rhs).unwrap().frobenius_norm();
            let bound =
                1e-9 * (1.0 + a.frobenius_norm() * b.frobenius_norm() * c.frobenius_norm());
            assert!(gap <= bound, "gap {gap} > bound {bound}");
        }
    }

    #[test]
    fn frobenius_inner_is_norm_on_self() {
        let mut rng = Rng::from_seed(2);
        let m = gaussian_matrix(&mut rng, 4, 6, 1.0).unwrap();
        let ip = frobenius_inner(&m, &m).unwrap();
        assert!((ip - m.frobenius_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn frobenius_inner_disjoint_support() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(frobenius_inner(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn frobenius_inner_vs_loop_oracle() {
        let mut rng = Rng::from_seed(3);
        let a = gaussian_matrix(&mut rng, 4, 4, 1.0).unwrap();
        let b = gaussian_matrix(&mut rng, 4, 4, 1.0).unwrap();
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                oracle += a.get(i, j) * b.get(i, j);
            }
        }
        assert!((frobenius_inner(&a, &b).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn frobenius_inner_shape_error() {
        let a = Matrix::zeros(2, 2).unwrap();
        let b = Matrix::zeros(2, 3).unwrap();
        assert!(frobenius_inner(&a, &b).is_err());
    }

    #[test]
    fn gaussian_deterministic() {
        let a = gaussian_matrix(&mut Rng::from_seed(42), 5, 5, 1.0).unwrap();
        let b = gaussian_matrix(&mut Rng::from_seed(42), 5, 5, 1.0).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn gaussian_sample_statistics() {
        let m = gaussian_matrix(&mut Rng::from_seed(7), 100, 100, 1.0).unwrap();
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean > -0.05 && mean < 0.05, "mean {mean}");
        let std = var.sqrt();
        assert!(std > 0.95 && std < 1.05, "std {std}");
    }

    #[test]
    fn gaussian_rejects_nonpositive_std() {
        assert!(gaussian_matrix(&mut Rng::from_seed(0), 2, 2, 0.0).is_err());
        assert!(gaussian_matrix(&mut Rng::from_seed(0), 2, 2, -1.0).is_err());
    }

    #[test]
    fn gaussian_rejects_zero_dims() {
        assert!(gaussian_matrix(&mut Rng::from_seed(0), 0, 3, 1.0).is_err());
    }

    #[test]
    fn gaussian_consumes_fixed_draws() {
        // rows*cols normal draws, two raw u64 each; afterwards both streams align.
        let mut a = Rng::from_seed(13);
        let mut b = Rng::from_seed(13);
        let _ = gaussian_matrix(&mut a, 3, 5, 1.0).unwrap();
        for _ in 0..(3 * 5 * 2) {
            b.next_u64();
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut rng = Rng::from_seed(21);
        let q = orthogonal_matrix(&mut rng, 16).unwrap();
        let qtq = q.transpose().matmul(&q).unwrap();
        let gap = qtq.sub(&Matrix::identity(16).unwrap()).unwrap().max_abs();
        assert!(gap < 1e-10, "||QtQ - I||_max = {gap}");
    }

    #[test]
    fn rng_streams_reproduce() {
        let mut a = Rng::from_seed(1234);
        let mut b = Rng::from_seed(1234);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-10.0..10.0f64, rows * cols)
                .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
        }

        proptest! {
            #[test]
            fn frobenius_inner_symmetric(a in small_matrix(3, 4), b in small_matrix(3, 4)) {
                let ab = frobenius_inner(&a, &b).unwrap();
                let ba = frobenius_inner(&b, &a).unwrap();
                prop_assert_eq!(ab.to_bits(), ba.to_bits());
            }

            #[test]
            fn frobenius_inner_bilinear(
                a in small_matrix(3, 3),
                b in small_matrix(3, 3),
                c in small_matrix(3, 3),
                s in -4.0..4.0f64,
            ) {
                let lhs = frobenius_inner(&a.scale(s).add(&b).unwrap(), &c).unwrap();
                let rhs = s * frobenius_inner(&a, &c).unwrap() + frobenius_inner(&b, &c).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }
}
