//! Dense complex matrices and the handful of kernels the receivers need:
//! Hermitian Gram products, Cholesky factorization and triangular solves.
//!
//! [`CMatrix`] is row-major interleaved `Complex64`. [`SplitMatrix`] stores
//! real and imaginary planes separately so the hot loops vectorize; it is used
//! internally by the posterior computation.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};


#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `self^H * x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, xr) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * xr;
            }
        }
        out
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, b) in out.row_mut(r).iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scaled(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `||self - other||_F^2`.
    pub fn distance_sqr(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sqr(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.norm_sqr();
            }
        }
        out
    }

    /// New matrix made of the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> CMatrix {
        CMatrix::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: CMatrix,
}

impl Cholesky {
    /// Factors a Hermitian positive-definite matrix. Only the lower triangle
    /// of `m` is read. Returns the failing pivot index on breakdown.
    pub fn new(m: &CMatrix) -> core::result::Result<Self, usize> {
        let n = m.rows();
        assert_eq!(n, m.cols(), "Cholesky needs a square matrix");
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = m[(j, j)].re;
            for k in 0..j {
                diag -= l[(j, k)].norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(j);
            }
            let djj = diag.sqrt();
            l[(j, j)] = C64::new(djj, 0.0);
            let inv = 1.0 / djj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                let (li, lj) = (l.row(i), l.row(j));
                for k in 0..j {
                    s -= li[k] * lj[k].conj();
                }
                l[(i, j)] = s * inv;
            }
        }
        Ok(Self { factor: l })
    }

    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.factor.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i].re;
        }
        x
    }

    /// Solves `L^H x = b`.
    pub fn solve_upper(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let xi = x[i] / self.factor[(i, i)].re;
            x[i] = xi;
            for k in 0..i {
                x[k] -= self.factor[(i, k)].conj() * xi;
            }
        }
        x
    }

    /// Solves `L L^H x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `ln det(L L^H)`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.factor[(i, i)].re.ln())
            .sum()
    }
}

/// Row-major matrix with separate real and imaginary planes.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    /// Columns `cols` of `a`, each multiplied by the matching real `scale`.
    pub fn from_scaled_columns(a: &CMatrix, cols: &[usize], scale: &[f64]) -> Self {
        assert_eq!(cols.len(), scale.len());
        let mut out = Self::zeros(a.rows(), cols.len());
        for r in 0..a.rows() {
            let src = a.row(r);
            let base = r * out.cols;
            for (s, (&c, &w)) in cols.iter().zip(scale).enumerate() {
                let v = src[c];
                out.re[base + s] = v.re * w;
                out.im[base + s] = v.im * w;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, r: usize) -> (&[f64], &[f64]) {
        let s = r * self.cols..(r + 1) * self.cols;
        (&self.re[s.clone()], &self.im[s])
    }

    /// Lower triangle (and mirrored upper triangle) of `self * self^H`, plus
    /// `shift` on the diagonal.
    pub fn gram_plus_shift(&self, shift: f64) -> CMatrix {
        let n = self.rows;
        let mut g = CMatrix::zeros(n, n);
        for i in 0..n {
            let (ar, ai) = self.row(i);
            for j in 0..=i {
                let (br, bi) = self.row(j);
                let v = dot_conj(ar, ai, br, bi);
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
            g[(i, i)] = C64::new(g[(i, i)].re + shift, 0.0);
        }
        g
    }

    /// `L^{-1} self` for a lower-triangular Cholesky factor.
    pub fn forward_substitute(&self, chol: &Cholesky) -> SplitMatrix {
        let l = chol.factor();
        assert_eq!(l.rows(), self.rows);
        let c = self.cols;
        let mut w = self.clone();
        for r in 0..self.rows {
            let (done, rest) = (r * c, (r + 1) * c);
            let (prev_re, cur_re) = w.re[..rest].split_at_mut(done);
            let (prev_im, cur_im) = w.im[..rest].split_at_mut(done);
            let lrow = l.row(r);
            for (i, lri) in lrow.iter().enumerate().take(r) {
                let (lr, li) = (lri.re, lri.im);
                let pr = &prev_re[i * c..(i + 1) * c];
                let pi = &prev_im[i * c..(i + 1) * c];
                for q in 0..c {
                    cur_re[q] -= lr * pr[q] - li * pi[q];
                    cur_im[q] -= lr * pi[q] + li * pr[q];
                }
            }
            let inv = 1.0 / lrow[r].re;
            for q in 0..c {
                cur_re[q] *= inv;
                cur_im[q] *= inv;
            }
        }
        w
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sqr(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let (re, im) = self.row(r);
            for q in 0..self.cols {
                out[q] += re[q] * re[q] + im[q] * im[q];
            }
        }
        out
    }

    /// `self^H * x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        let mut acc_re = vec![0.0; self.cols];
        let mut acc_im = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate() {
            let (re, im) = self.row(r);
            for q in 0..self.cols {
                // conj(a) * x
                acc_re[q] += re[q] * xr.re + im[q] * xr.im;
                acc_im[q] += re[q] * xr.im - im[q] * xr.re;
            }
        }
        acc_re
            .into_iter()
            .zip(acc_im)
            .map(|(r, i)| C64::new(r, i))
            .collect()
    }
}

/// `sum_k a_k conj(b_k)` over split planes, four independent partial sums.
fn dot_conj(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> C64 {
    const W: usize = 4;
    let n = ar.len();
    let mut sr = [0.0f64; W];
    let mut si = [0.0f64; W];
    let chunks = n / W;
    for c in 0..chunks {
        let o = c * W;
        for l in 0..W {
            let (xr, xi, yr, yi) = (ar[o + l], ai[o + l], br[o + l], bi[o + l]);
            sr[l] += xr * yr + xi * yi;
            si[l] += xi * yr - xr * yi;
        }
    }
    let mut re = (sr[0] + sr[1]) + (sr[2] + sr[3]);
    let mut im = (si[0] + si[1]) + (si[2] + si[3]);
    for k in chunks * W..n {
        re += ar[k] * br[k] + ai[k] * bi[k];
        im += ai[k] * br[k] - ar[k] * bi[k];
    }
    C64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        // Small LCG so the unit tests do not need a generator crate.
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(rows, cols, |_, _| c(next(), next()))
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let b = sample_matrix(5, 9, 3);
        let split = SplitMatrix::from_scaled_columns(&b, &(0..9).collect::<Vec<_>>(), &[1.0; 9]);
        let g = split.gram_plus_shift(0.3);
        let dense = b.mul(&b.adjoint());
        for i in 0..5 {
            for j in 0..5 {
                let expect = dense[(i, j)] + if i == j { c(0.3, 0.0) } else { c(0.0, 0.0) };
                assert!((g[(i, j)] - expect).norm() < 1e-13);
            }
        }
        let chol = Cholesky::new(&g).unwrap();
        let llh = chol.factor().mul(&chol.factor().adjoint());
        assert!(llh.distance_sqr(&g) < 1e-24);

        let rhs: Vec<C64> = (0..5).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let x = chol.solve(&rhs);
        let back = g.mul_vec(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = CMatrix::identity(3);
        m[(2, 2)] = c(-1.0, 0.0);
        assert_eq!(Cholesky::new(&m).unwrap_err(), 2);
    }

    #[test]
    fn forward_substitution_matches_triangular_solve() {
        let b = sample_matrix(6, 11, 7);
        let cols: Vec<usize> = (0..11).collect();
        let split = SplitMatrix::from_scaled_columns(&b, &cols, &[1.0; 11]);
        let chol = Cholesky::new(&split.gram_plus_shift(1.0)).unwrap();
        let w = split.forward_substitute(&chol);
        let norms = w.column_norms_sqr();
        for q in 0..11 {
            let col = chol.solve_lower(&b.column(q));
            let n: f64 = col.iter().map(|v| v.norm_sqr()).sum();
            assert!((n - norms[q]).abs() < 1e-12);
        }
        let x: Vec<C64> = (0..6).map(|i| c(0.5 * i as f64, -1.0)).collect();
        let lhs = split.adjoint_mul_vec(&x);
        let rhs = b.adjoint_mul_vec(&x);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn dot_handles_tails() {
        for n in 0..11 {
            let a = sample_matrix(1, n, 11);
            let b = sample_matrix(1, n, 12);
            let sa = SplitMatrix::from_scaled_columns(&a, &(0..n).collect::<Vec<_>>(), &vec![1.0; n]);
            let sb = SplitMatrix::from_scaled_columns(&b, &(0..n).collect::<Vec<_>>(), &vec![1.0; n]);
            let (ar, ai) = sa.row(0);
            let (br, bi) = sb.row(0);
            let naive = a
                .row(0)
                .iter()
                .zip(b.row(0))
                .fold(c(0.0, 0.0), |acc, (x, y)| acc + x * y.conj());
            assert!((dot_conj(ar, ai, br, bi) - naive).norm() < 1e-14);
        }
    }
}
