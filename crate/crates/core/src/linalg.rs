//! Minimal dense linear algebra: row-major `f64` matrices, matrix products,
//! and a Cholesky-based solver for symmetric positive definite systems.

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        DenseMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn column(data: Vec<f64>) -> Self {
        let rows = data.len();
        DenseMatrix { rows, cols: 1, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self * other`, cache-friendly ikj loop over row-major storage.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (l, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[l * n..(l + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix::from_vec(m, n, out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with `NotPositiveDefinite` when a pivot is not strictly positive,
/// which signals the caller to raise the Tikhonov shift.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "cholesky requires a square matrix");
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(DenseMatrix::from_vec(n, n, l))
}

/// Solves `L Lᵀ X = B` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    assert_eq!(b.rows(), n);
    let k = b.cols();
    let mut x = b.data().to_vec();
    // forward: L y = b
    for i in 0..n {
        for j in 0..i {
            let lij = l.get(i, j);
            for c in 0..k {
                x[i * k + c] -= lij * x[j * k + c];
            }
        }
        let d = l.get(i, i);
        for c in 0..k {
            x[i * k + c] /= d;
        }
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        for j in i + 1..n {
            let lji = l.get(j, i);
            for c in 0..k {
                x[i * k + c] -= lji * x[j * k + c];
            }
        }
        let d = l.get(i, i);
        for c in 0..k {
            x[i * k + c] /= d;
        }
    }
    DenseMatrix::from_vec(n, k, x)
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn mat_solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent Gaussian-elimination solver used as an oracle.
    fn gauss_solve(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let n = a.rows();
        let k = b.cols();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = a.row(i).to_vec();
                row.extend_from_slice(b.row(i));
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, piv);
            let p = aug[col][col];
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = aug[i][col] / p;
                for j in col..n + k {
                    aug[i][j] -= f * aug[col][j];
                }
            }
        }
        let mut x = DenseMatrix::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                x.set(i, j, aug[i][n + j] / aug[i][i]);
            }
        }
        x
    }

    #[test]
    fn solve_identity() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::column(vec![3.0, -1.0]);
        let x = mat_solve_spd(&a, &b).unwrap();
        assert_eq!(x.data(), &[3.0, -1.0]);
    }

    #[test]
    fn solve_diagonal() {
        let a = DenseMatrix::from_vec(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let b = DenseMatrix::column(vec![2.0, 8.0]);
        let x = mat_solve_spd(&a, &b).unwrap();
        assert!((x.data()[0] - 1.0).abs() < 1e-15);
        assert!((x.data()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_random_spd_matches_gaussian_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 5;
        let m = DenseMatrix::from_vec(
            n,
            n,
            (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        // A = MᵀM + I is SPD
        let mut a = m.transpose().matmul(&m);
        for i in 0..n {
            let v = a.get(i, i) + 1.0;
            a.set(i, i, v);
        }
        let b = DenseMatrix::column((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let x = mat_solve_spd(&a, &b).unwrap();
        let oracle = gauss_solve(&a, &b);
        for (xi, oi) in x.data().iter().zip(oracle.data()) {
            assert!((xi - oi).abs() < 1e-9, "{xi} vs {oi}");
        }
        // residual check from the op contract
        let res = {
            let ax = a.matmul(&x);
            let mut d = 0.0;
            for (p, q) in ax.data().iter().zip(b.data()) {
                d += (p - q) * (p - q);
            }
            d.sqrt() / b.frobenius_norm()
        };
        assert!(res <= 1e-10, "relative residual {res}");
    }

    #[test]
    fn not_positive_definite_reported() {
        let a = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        let b = DenseMatrix::column(vec![1.0, 1.0]);
        match mat_solve_spd(&a, &b) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DenseMatrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let b = DenseMatrix::from_vec(4, 5, (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let c = a.matmul(&b);
        for i in 0..3 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - s).abs() < 1e-12);
            }
        }
    }
}
