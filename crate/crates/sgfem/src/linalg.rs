//! Dense row-major matrices, LU factorization with partial pivoting, and a
//! Hager-style 1-norm condition estimator.
//!
//! Everything in this crate is desk scale (at most a few thousand unknowns),
//! so dense storage and O(n^3) factorization are deliberate.

use thiserror::Error;

/// Relative pivot threshold below which a factorization is declared singular.
const PIVOT_REL_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("SingularMatrix: pivot {pivot:.3e} below {threshold:.3e} at elimination step {step}")]
    SingularMatrix {
        step: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("DimensionMismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.row_mut(i).copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self[(i, j)].abs()).sum();
            best = best.max(s);
        }
        best
    }

    /// max |A - A^T| entry, for symmetry checks.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization PA = LU with row partial pivoting.
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

/// Factor a square matrix. Declares the matrix singular when a pivot falls
/// below `1e-14` times the infinity norm of its original row.
pub fn lu_factor(a: &Matrix) -> Result<LuFactors, LinalgError> {
    assert!(a.is_square(), "LU requires a square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    // Original row scales, tracked through the row swaps.
    let mut scale: Vec<f64> = (0..n)
        .map(|i| a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();

    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            scale.swap(k, p);
        }
        let pivot = lu[(k, k)];
        let threshold = PIVOT_REL_TOL * scale[k].max(f64::MIN_POSITIVE);
        if pivot.abs() < threshold {
            return Err(LinalgError::SingularMatrix {
                step: k,
                pivot: pivot.abs(),
                threshold,
            });
        }
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m != 0.0 {
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        // Forward substitution on the permuted right-hand side (L has unit diagonal).
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solve A^T x = b. With PA = LU this is U^T w = b, L^T v = w, x = P^T v.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &pi) in self.perm.iter().enumerate() {
            x[pi] = w[i];
        }
        Ok(x)
    }
}

/// 1-norm condition estimate of `D^{-1/2} M D^{-1/2}` with `D = |diag M|`
/// (unit where the diagonal vanishes, as in saddle-point blocks).
///
/// The norm of the inverse comes from Hager's estimator driven by LU solves,
/// so the cost is one factorization plus a handful of triangular solves.
pub fn condition_estimate(m: &Matrix) -> Result<f64, LinalgError> {
    assert!(m.is_square(), "condition estimate requires a square matrix");
    let n = m.rows();
    if n == 0 {
        return Ok(1.0);
    }
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = m[(i, i)].abs();
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] = m[(i, j)] / (d[i] * d[j]);
        }
    }
    let norm = scaled.one_norm();
    let factors = lu_factor(&scaled)?;

    // Hager's 1-norm estimate of the inverse.
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0f64;
    for iter in 0..5 {
        let y = factors.solve(&x)?;
        let y1: f64 = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<f64> = y
            .iter()
            .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let z = factors.solve_transpose(&xi)?;
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0f64), |(bj, bv), (j, &v)| {
            if v.abs() > bv {
                (j, v.abs())
            } else {
                (bj, bv)
            }
        });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if iter > 0 && (y1 <= est || zmax <= zx) {
            est = est.max(y1);
            break;
        }
        est = y1;
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    Ok(norm * est)
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
