//! Small dense matrices.
//!
//! Every matrix in this crate is at most a few dozen entries wide (phase
//! space dimension `2n`, normal dimension `r`), so a row-major `Vec` with
//! textbook algorithms is all that is needed. The symmetric eigensolver is
//! cyclic Jacobi, which is accurate to working precision for the tiny sizes
//! involved.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_diag(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from a row-major slice.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[S]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
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

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[S]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(&a, &b)| a * b).sum()
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    /// Spectral norm, via the eigenvalues of `AᵀA`.
    pub fn spectral_norm(&self) -> S {
        let ata = &self.transpose() * self;
        let (vals, _) = ata.symmetric_eigen();
        vals.iter()
            .fold(S::zero(), |m, &x| m.max(x))
            .max(S::zero())
            .sqrt()
    }

    pub fn symmetric_part(&self) -> Self {
        let t = self.transpose();
        (self + &t).scale(S::lit(0.5))
    }

    /// Largest entry of `|A - Aᵀ|`.
    pub fn asymmetry(&self) -> S {
        let mut m = S::zero();
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching orthonormal
    /// eigenvectors as the columns of the second matrix. Only the lower
    /// triangle's symmetric average is used.
    pub fn symmetric_eigen(&self) -> (Vec<S>, Mat<S>) {
        assert!(self.is_square(), "eigen of non-square matrix");
        let n = self.rows;
        let mut a = self.symmetric_part();
        let mut v = Mat::identity(n);
        let eps = S::epsilon();
        for _sweep in 0..100 {
            let mut off = S::zero();
            for i in 0..n {
                for j in 0..i {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.frobenius();
            if off.sqrt() <= eps * eps * scale || off == S::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == S::zero() {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (S::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                    let c = S::one() / (t * t + S::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
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
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = Mat::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vecs[(k, new)] = v[(k, old)];
            }
        }
        (vals, vecs)
    }

    /// Applies `g` to the eigenvalues of a symmetric matrix.
    pub fn symmetric_function(&self, g: impl Fn(S) -> S) -> Self {
        let (vals, vecs) = self.symmetric_eigen();
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        for k in 0..n {
            let gk = g(vals[k]);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += vecs[(i, k)] * gk * vecs[(j, k)];
                }
            }
        }
        out
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu<S>> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "LU of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = S::one();
        let scale = self.max_abs().max(S::min_positive_value());
        for k in 0..n {
            let mut piv = k;
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > lu[(piv, k)].abs() {
                    piv = i;
                }
            }
            if lu[(piv, k)].abs() <= S::epsilon() * S::lit(1e-3) * scale {
                return Err(Error::Singular(format!("pivot {k} vanishes")));
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve(&self, b: &[S]) -> Result<Vec<S>> {
        Ok(self.lu()?.solve(b))
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![S::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = S::zero());
            e[j] = S::one();
            inv.set_column(j, &lu.solve(&e));
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> S {
        match self.lu() {
            Ok(lu) => lu.determinant(),
            Err(_) => S::zero(),
        }
    }

    /// Householder QR: `self = Q R` with `R` upper triangular with
    /// non-negative diagonal.
    pub fn qr(&self) -> (Mat<S>, Mat<S>) {
        let m = self.rows;
        let n = self.cols;
        let mut r = self.clone();
        let mut q = Mat::<S>::identity(m);
        for k in 0..n.min(m.saturating_sub(1)) {
            let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<S>().sqrt();
            if norm == S::zero() {
                continue;
            }
            let alpha = if r[(k, k)] > S::zero() { -norm } else { norm };
            let mut v: Vec<S> = (0..m)
                .map(|i| if i < k { S::zero() } else { r[(i, k)] })
                .collect();
            v[k] -= alpha;
            let vnorm2: S = v.iter().map(|&x| x * x).sum();
            if vnorm2 == S::zero() {
                continue;
            }
            let two = S::lit(2.0);
            for j in 0..n {
                let dot: S = (k..m).map(|i| v[i] * r[(i, j)]).sum();
                let f = two * dot / vnorm2;
                for i in k..m {
                    r[(i, j)] -= f * v[i];
                }
            }
            for i in 0..m {
                let dot: S = (k..m).map(|j| q[(i, j)] * v[j]).sum();
                let f = two * dot / vnorm2;
                for j in k..m {
                    q[(i, j)] -= f * v[j];
                }
            }
        }
        for k in 0..n.min(m) {
            if r[(k, k)] < S::zero() {
                for j in 0..n {
                    r[(k, j)] = -r[(k, j)];
                }
                for i in 0..m {
                    q[(i, k)] = -q[(i, k)];
                }
            }
        }
        (q, r)
    }
}

pub struct Lu<S> {
    lu: Mat<S>,
    perm: Vec<usize>,
    sign: S,
}

impl<S: Scalar> Lu<S> {
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.rows;
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn determinant(&self) -> S {
        (0..self.lu.rows).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Mul for &Mat<S> {
    type Output = Mat<S>;
    fn mul(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<S: Scalar> Add for &Mat<S> {
    type Output = Mat<S>;
    fn add(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for &Mat<S> {
    type Output = Mat<S>;
    fn sub(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

/// Standard symplectic matrix `[[0, I], [-I, 0]]` on `R^{2n}` in `(q, p)` order.
pub fn symplectic_form<S: Scalar>(n: usize) -> Mat<S> {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = S::one();
        j[(n + i, i)] = -S::one();
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sym() -> Mat<f64> {
        Mat::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 2.0],
        ])
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = sample_sym();
        let (vals, vecs) = a.symmetric_eigen();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = &(&vecs * &Mat::from_diag(&vals)) * &vecs.transpose();
        assert!((&back - &a).max_abs() < 1e-13);
        let orth = &vecs.transpose() * &vecs;
        assert!((&orth - &Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn lu_solve_and_inverse() {
        let a: Mat<f64> = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = a.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!((a.determinant() + 6.0).abs() < 1e-14);
        let inv = a.inverse().unwrap();
        assert!((&(&a * &inv) - &Mat::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn singular_is_rejected() {
        let a: Mat<f64> = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(a.lu().is_err());
    }

    #[test]
    fn qr_is_orthogonal_triangular() {
        let a: Mat<f64> = Mat::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![-1.0, 0.5, 3.0],
            vec![2.0, 1.0, 1.0],
            vec![0.0, 1.0, -1.0],
        ]);
        let (q, r) = a.qr();
        assert!((&(&q * &r) - &a).max_abs() < 1e-14);
        assert!((&(&q.transpose() * &q) - &Mat::identity(4)).max_abs() < 1e-14);
        for i in 0..4 {
            for j in 0..i.min(3) {
                assert!(r[(i, j)].abs() < 1e-14);
            }
        }
        assert!((0..3).all(|k| r[(k, k)] >= 0.0));
    }

    #[test]
    fn works_in_single_precision() {
        let a: Mat<f32> = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, _) = a.symmetric_eigen();
        assert!((vals[0] - 1.0).abs() < 1e-6 && (vals[1] - 3.0).abs() < 1e-6);
    }
}
