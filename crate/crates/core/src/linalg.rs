//! Thin dense linear-algebra layer over `faer`.
//!
//! Operators in this crate are real symmetric, so matrices stay real and
//! complex vectors are handled as split real/imaginary parts when multiplied
//! by them.

use alloc::format;
use alloc::vec::Vec;

use faer::{Mat, Side};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::C64;

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub fn sym_eig(m: &Mat<f64>) -> Result<SymEig> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let vectors = evd.U().to_owned();
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    Ok(SymEig { values, vectors })
}

pub fn sym_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// `y = M x`.
pub fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = alloc::vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = m.col(j).try_as_col_major().unwrap().as_slice();
        for (yi, &mij) in y.iter_mut().zip(col) {
            *yi += mij * xj;
        }
    }
    y
}

/// `y = M^T x`.
pub fn matvec_t(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| dot(m.col(j).try_as_col_major().unwrap().as_slice(), x))
        .collect()
}

/// `y = M x` for complex `x`.
pub fn cmatvec(m: &Mat<f64>, x: &[C64]) -> Vec<C64> {
    let mut y = alloc::vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj.re == 0.0 && xj.im == 0.0 {
            continue;
        }
        let col = m.col(j).try_as_col_major().unwrap().as_slice();
        for (yi, &mij) in y.iter_mut().zip(col) {
            *yi += xj * mij;
        }
    }
    y
}

/// `y = M^T x` for complex `x`.
pub fn cmatvec_t(m: &Mat<f64>, x: &[C64]) -> Vec<C64> {
    (0..m.ncols())
        .map(|j| {
            let col = m.col(j).try_as_col_major().unwrap().as_slice();
            let mut acc = C64::new(0.0, 0.0);
            for (&c, &v) in col.iter().zip(x) {
                acc += v * c;
            }
            acc
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `<a|b>` with the first argument conjugated.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Column `j` of a column-major matrix as a slice.
pub fn col(m: &Mat<f64>, j: usize) -> &[f64] {
    m.col(j).try_as_col_major().unwrap().as_slice()
}

/// A complex matrix stored as real and imaginary parts.
#[derive(Debug, Clone)]
pub struct SplitMat {
    pub re: Mat<f64>,
    pub im: Mat<f64>,
}

impl SplitMat {
    pub fn from_real(re: Mat<f64>) -> Self {
        let im = Mat::zeros(re.nrows(), re.ncols());
        Self { re, im }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        C64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.nrows()).map(|i| self.get(i, j)).collect()
    }

    /// `R * self` for a real matrix `R`.
    pub fn left_mul_real(&self, r: &Mat<f64>) -> Self {
        Self {
            re: r * &self.re,
            im: r * &self.im,
        }
    }

    /// `R^T * self` for a real matrix `R`.
    pub fn left_mul_real_t(&self, r: &Mat<f64>) -> Self {
        Self {
            re: r.transpose() * &self.re,
            im: r.transpose() * &self.im,
        }
    }

    /// `diag(phases) * self`.
    pub fn scale_rows(&mut self, phases: &[C64]) {
        for j in 0..self.ncols() {
            for (i, p) in phases.iter().enumerate() {
                let v = C64::new(self.re[(i, j)], self.im[(i, j)]) * p;
                self.re[(i, j)] = v.re;
                self.im[(i, j)] = v.im;
            }
        }
    }
}

/// Solves the row-major `n x n` system `a x = b` in place by Gaussian
/// elimination with partial pivoting; `b` ends up holding `x`.
pub fn solve_small(a: &mut [f64], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if a[p * n + k] == 0.0 || !a[p * n + k].is_finite() {
            return Err(Error::Eigen(format!("singular {n}x{n} system")));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * b[j]).sum();
        b[k] = (b[k] - s) / a[k * n + k];
    }
    Ok(())
}

/// `exp(-i E t)` for each eigenvalue.
pub fn phases(values: &[f64], t: f64) -> Vec<C64> {
    values
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * t))
        .collect()
}

/// Haar-random `d x d` unitary, column-major (`u[s * d + j] = <j|U|s>`).
///
/// Gram-Schmidt on complex Gaussian columns; for small `d` this draws from the
/// same measure as QR with the diagonal phase fix.
pub fn haar_unitary<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut u = alloc::vec![C64::new(0.0, 0.0); d * d];
    for s in 0..d {
        loop {
            let mut v: Vec<C64> = (0..d)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C64::new(re, im)
                })
                .collect();
            // Two passes keep the basis orthonormal to rounding.
            for _ in 0..2 {
                for r in 0..s {
                    let col = &u[r * d..(r + 1) * d];
                    let c = cdot(col, &v);
                    for (x, y) in v.iter_mut().zip(col) {
                        *x -= c * y;
                    }
                }
            }
            let nrm = norm(&v);
            if nrm > 1e-8 {
                for (x, y) in u[s * d..(s + 1) * d].iter_mut().zip(&v) {
                    *x = y / nrm;
                }
                break;
            }
        }
    }
    u
}
