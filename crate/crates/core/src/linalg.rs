//! Small dense linear algebra: row-major matrices, Householder least squares,
//! Cholesky factorization and symmetric eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Invalid(alloc::format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Invalid("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `A' A`.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut out = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..p {
                for b in a..p {
                    out[(a, b)] += r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                out[(a, b)] = out[(b, a)];
            }
        }
        out
    }

    /// `A' v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Relative threshold on `|R_jj| / ||a_j||` below which column `j` is treated
/// as linearly dependent on the columns before it.
pub const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `A b = y` by Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rank: usize,
}

/// Householder QR least squares. Returns `RankDeficient` when any column is
/// numerically in the span of the preceding ones.
pub fn lstsq(a: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = (a.rows(), a.cols());
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::Invalid(alloc::format!("{} responses for {n} rows", y.len())));
    }
    if a.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input"));
    }
    // Column-major working copy: Householder sweeps walk columns.
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| a.col(j)).collect();
    let col_norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut qty = y.to_vec();
    let mut diag = vec![0.0; p];
    let mut rank = 0;

    for j in 0..p.min(n) {
        let tail_norm = norm(&cols[j][j..]);
        let scale = col_norms[j];
        if scale == 0.0 || tail_norm <= RANK_TOL * scale {
            diag[j] = 0.0;
            continue;
        }
        rank += 1;
        let alpha = if cols[j][j] > 0.0 { -tail_norm } else { tail_norm };
        // v = x - alpha e1, stored in place of the column tail
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let s = 2.0 * dot(&v, target) / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        };
        for col in cols.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
    }

    if rank < p {
        return Err(Error::RankDeficient { rank, columns: p });
    }

    // back substitution on R b = Q'y
    let mut coefs = vec![0.0; p];
    for j in (0..p).rev() {
        let mut s = qty[j];
        for (k, c) in coefs.iter().enumerate().skip(j + 1) {
            s -= cols[k][j] * c;
        }
        coefs[j] = s / diag[j];
    }
    let fitted = a.mul_vec(&coefs);
    let residuals = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    Ok(LeastSquares { coefs, residuals, rank })
}

/// Lower-triangular Cholesky factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Invalid("Cholesky needs a square matrix".into()));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NumericalFailure(alloc::format!(
                    "matrix not positive definite at pivot {j}"
                )));
            }
            let djj = math::sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for (k, zk) in z[..i].iter().enumerate() {
                s -= self.l[(i, k)] * zk;
            }
            z[i] = s / self.l[(i, i)];
        }
        z
    }

    /// Solves `L' x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.l[(k, i)] * xk;
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `sum_{i in range} 2 ln L_ii`, the log-determinant of that diagonal block.
    pub fn log_det_range(&self, range: core::ops::Range<usize>) -> f64 {
        range.map(|i| 2.0 * math::ln(self.l[(i, i)])).sum()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det_range(0..self.l.rows())
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let (vals, _) = symmetric_eigen(a);
    vals
}

/// Eigenvalues (ascending) and matching column eigenvectors.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lstsq_exact_line() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let ls = lstsq(&a, &y).unwrap();
        assert!((ls.coefs[0] - 1.0).abs() < 1e-12);
        assert!((ls.coefs[1] - 2.0).abs() < 1e-12);
        assert_eq!(ls.rank, 2);
    }

    #[test]
    fn lstsq_detects_duplicate_column() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 2.0], vec![1.0, 3.0, 3.0], vec![1.0, 5.0, 5.0], vec![1.0, 7.0, 7.0]])
            .unwrap();
        let err = lstsq(&a, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 2, columns: 3 });
    }

    #[test]
    fn lstsq_zero_rows() {
        assert_eq!(lstsq(&Matrix::zeros(0, 2), &[]).unwrap_err(), Error::EmptyData);
    }

    #[test]
    fn cholesky_solves_spd() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]]).unwrap();
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-12);
        }
        let ll = ch.factor().mul(&ch.factor().transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert!((ll[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
        // det = 4*(15-1) - 2*(6-0.6) + 0.6*(2-3)
        let det: f64 = 4.0 * 14.0 - 2.0 * 5.4 + 0.6 * (2.0 - 3.0);
        assert!((ch.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::new(&a), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        let (vals, vecs) = symmetric_eigen(&a);
        for (j, &lambda) in vals.iter().enumerate() {
            let v = vecs.col(j);
            let av = a.mul_vec(&v);
            for k in 0..2 {
                assert!((av[k] - lambda * v[k]).abs() < 1e-12);
            }
        }
    }
}
