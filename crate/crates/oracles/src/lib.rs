//! Slow, direct reference computations for the gfra test suites.
//!
//! Nothing here shares code with `gfra-core`: matrices are plain nested
//! vectors, integrals are evaluated numerically and discrete sums are
//! enumerated.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

pub type Dense = Vec<Vec<C64>>;

/// Adaptive Gauss-Kronrod (7/15) quadrature of a complex integrand on `[a, b]`.
pub fn integrate<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> C64 {
    gk_adaptive(f, a, b, tol, 60)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kronrod += s * WGK[i];
        if i % 2 == 1 {
            gauss += s * WG[i / 2];
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).norm())
}

fn gk_adaptive<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> C64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let m = 0.5 * (a + b);
    gk_adaptive(f, a, m, 0.5 * tol, depth - 1) + gk_adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// `(1/W) ∫_{t0}^{t0+W} exp(j 2π f t) dt` by quadrature.
pub fn window_average_quadrature(f: f64, t0: f64, w: f64) -> C64 {
    let g = |t: f64| C64::from_polar(1.0, 2.0 * PI * f * t);
    integrate(&g, t0, t0 + w, 1e-15) / w
}

/// Same average from the antiderivative `exp(j 2π f t) / (j 2π f)`.
pub fn window_average_antiderivative(f: f64, t0: f64, w: f64) -> C64 {
    if f == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let e = |t: f64| C64::from_polar(1.0, 2.0 * PI * f * t);
    (e(t0 + w) - e(t0)) / (C64::new(0.0, 2.0 * PI * f) * w)
}

/// OFDM dimensions used by the brute-force dictionary.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub n: usize,
    pub m: usize,
    pub u: usize,
    pub delta_f: f64,
    pub cp: f64,
}

impl Frame {
    pub fn window(&self) -> f64 {
        self.n as f64 / self.delta_f
    }

    pub fn super_symbol(&self) -> f64 {
        self.cp + self.window()
    }

    /// Demodulated response of sample `n` in super-symbol `u` to a unit tone
    /// on subcarrier `m` shifted by `nu`.
    pub fn coupling(&self, nu: f64, m: usize, n: usize, u: usize) -> C64 {
        let f = nu + (m as f64 - n as f64 / self.n as f64) * self.delta_f;
        window_average_antiderivative(f, u as f64 * self.super_symbol(), self.window())
    }
}

/// One entry of the measurement matrix as the explicit sum over subcarriers
/// of pilot × delay phase × Doppler window average.
pub fn dictionary_entry(
    frame: &Frame,
    pilot: &dyn Fn(usize, usize, usize) -> C64,
    k: usize,
    tau: f64,
    nu: f64,
    row: usize,
) -> C64 {
    let bins = frame.n * frame.m;
    let (u, n) = (row / bins, row % bins);
    (0..frame.m)
        .map(|m| {
            let b = C64::from_polar(1.0, -2.0 * PI * m as f64 * frame.delta_f * tau);
            pilot(k, m, u) * b * frame.coupling(nu, m, n, u)
        })
        .sum()
}

/// Received sample `n` of super-symbol `u` generated path by path.
pub fn received_sample(
    frame: &Frame,
    pilot: &dyn Fn(usize, usize, usize) -> C64,
    paths: &[(usize, f64, f64, C64)],
    row: usize,
) -> C64 {
    paths
        .iter()
        .map(|&(k, tau, nu, g)| g * dictionary_entry(frame, pilot, k, tau, nu, row))
        .sum()
}

pub fn adjoint(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols)
        .map(|c| a.iter().map(|row| row[c].conj()).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| (0..inner).map(|i| row[i] * b[i][c]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, x: &[C64]) -> Vec<C64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting. `None` if a pivot vanishes.
pub fn inverse(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut work: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| work[x][col].norm().total_cmp(&work[y][col].norm()))?;
        if work[pivot][col].norm() == 0.0 {
            return None;
        }
        work.swap(col, pivot);
        let p = work[col][col];
        for v in work[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = work[col].clone();
        for (r, row) in work.iter_mut().enumerate() {
            if r != col {
                let factor = row[col];
                if factor != C64::new(0.0, 0.0) {
                    for (v, pr) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * pr;
                    }
                }
            }
        }
    }
    Some(work.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Gaussian posterior of `h ~ CN(0, diag(d))` given `y = A h + CN(0, σ² I)`,
/// in information form `Σ = (AᴴA/σ² + D⁻¹)⁻¹`, `m = Σ Aᴴ y / σ²`,
/// restricted to the coordinates with `d > 0`; the rest are exactly zero.
/// Returns the mean and the posterior variances.
pub fn information_posterior(a: &Dense, y: &[C64], sigma2: f64, d: &[f64]) -> (Vec<C64>, Vec<f64>) {
    let q = d.len();
    let support: Vec<usize> = (0..q).filter(|&i| d[i] > 0.0).collect();
    let sub: Dense = a
        .iter()
        .map(|row| support.iter().map(|&c| row[c]).collect())
        .collect();
    let ah = adjoint(&sub);
    let mut precision = matmul(&ah, &sub);
    for (i, &c) in support.iter().enumerate() {
        for v in precision[i].iter_mut() {
            *v /= sigma2;
        }
        precision[i][i] += 1.0 / d[c];
    }
    let cov = inverse(&precision).expect("posterior precision is invertible");
    let rhs: Vec<C64> = matvec(&ah, y).into_iter().map(|v| v / sigma2).collect();
    let mean_s = matvec(&cov, &rhs);
    let mut mean = vec![C64::new(0.0, 0.0); q];
    let mut var = vec![0.0; q];
    for (i, &c) in support.iter().enumerate() {
        mean[c] = mean_s[i];
        var[c] = cov[i][i].re;
    }
    (mean, var)
}

/// `log CN(y; 0, σ² I + A D Aᴴ)` with the determinant from the Gauss-Jordan
/// pivots of the explicit covariance.
pub fn log_evidence(a: &Dense, y: &[C64], sigma2: f64, d: &[f64]) -> f64 {
    let r = a.len();
    let mut cov: Dense = vec![vec![C64::new(0.0, 0.0); r]; r];
    for i in 0..r {
        for j in 0..r {
            cov[i][j] = (0..d.len()).map(|q| a[i][q] * a[j][q].conj() * d[q]).sum();
        }
        cov[i][i] += sigma2;
    }
    let log_det = log_det(&cov);
    let inv = inverse(&cov).expect("covariance is invertible");
    let quad: f64 = y
        .iter()
        .zip(matvec(&inv, y))
        .map(|(a, b)| (a.conj() * b).re)
        .sum();
    -(r as f64) * PI.ln() - log_det - quad
}

fn log_det(a: &Dense) -> f64 {
    let n = a.len();
    let mut w = a.clone();
    let mut total = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| w[x][col].norm().total_cmp(&w[y][col].norm()))
            .unwrap();
        w.swap(col, pivot);
        let p = w[col][col];
        total += p.norm().ln();
        let pivot_row = w[col].clone();
        for row in w.iter_mut().skip(col + 1) {
            let factor = row[col] / p;
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * pr;
            }
        }
    }
    total
}

/// `-2 Re(yᴴ A m) + Tr(Aᴴ A Ω)` with `Ω = diag(φ) + m mᴴ` formed explicitly.
pub fn dense_g(a: &Dense, y: &[C64], m: &[C64], phi: &[f64]) -> f64 {
    let q = m.len();
    let gram = matmul(&adjoint(a), a);
    let mut trace = C64::new(0.0, 0.0);
    for i in 0..q {
        for j in 0..q {
            let omega = m[j] * m[i].conj() + if i == j { C64::new(phi[i], 0.0) } else { C64::new(0.0, 0.0) };
            trace += gram[i][j] * omega;
        }
    }
    let am = matvec(a, m);
    let cross: f64 = y.iter().zip(&am).map(|(p, q)| (p.conj() * q).re).sum();
    -2.0 * cross + trace.re
}

/// Exact marginals `P(s_i = +1)` of a binary pairwise model on a
/// `rows x cols` 4-connected grid (site `i = r cols + c`) with unary
/// evidence `p_i ∝ P(s_i = +1)` and couplings `exp(β s_i s_j)`, by summing all
/// `2^(rows cols)` configurations.
pub fn lattice_marginals(rows: usize, cols: usize, evidence: &[f64], beta: f64) -> Vec<f64> {
    let n = rows * cols;
    assert_eq!(evidence.len(), n);
    assert!(n <= 20);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    let mut on = vec![0.0; n];
    let mut z = 0.0;
    for state in 0u32..(1 << n) {
        let bit = |i: usize| state >> i & 1 == 1;
        let mut w = 1.0;
        for (i, &e) in evidence.iter().enumerate() {
            w *= if bit(i) { e } else { 1.0 - e };
        }
        for &(i, j) in &edges {
            w *= if bit(i) == bit(j) { beta.exp() } else { (-beta).exp() };
        }
        z += w;
        for (i, o) in on.iter_mut().enumerate() {
            if bit(i) {
                *o += w;
            }
        }
    }
    on.into_iter().map(|v| v / z).collect()
}

/// Mean and variance of `Σ s_i` for independent `s_i ∈ {−1, +1}` with
/// `P(s_i = +1) = p_i`, by enumeration.
pub fn sum_of_spins_moments(p: &[f64]) -> (f64, f64) {
    let n = p.len();
    assert!(n <= 20);
    let (mut mean, mut second) = (0.0, 0.0);
    for state in 0u32..(1 << n) {
        let mut w = 1.0;
        let mut total = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            if state >> i & 1 == 1 {
                w *= pi;
                total += 1.0;
            } else {
                w *= 1.0 - pi;
                total -= 1.0;
            }
        }
        mean += w * total;
        second += w * total * total;
    }
    (mean, second - mean * mean)
}

/// Maximizer of the scalar evidence `CN(y; 0, σ² + γ |a|²)` over `γ ≥ 0`.
pub fn scalar_evidence_argmax(a: C64, y: C64, sigma2: f64) -> f64 {
    ((y.norm_sqr() - sigma2) / a.norm_sqr()).max(0.0)
}

/// `‖a − b‖_F² / ‖b‖_F²`.
pub fn relative_error(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (num / den).sqrt()
}
