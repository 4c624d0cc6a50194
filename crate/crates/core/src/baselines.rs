//! Sparse-recovery baselines on the same `y = A h + w` problem: orthogonal
//! matching pursuit and sparse Bayesian learning.

use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::check_dim;
use crate::linalg::{CMatrix, Cholesky};
use crate::mvsp::linear_module;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub h_hat: Vec<C64>,
    /// Distinct column indices, in selection order for OMP and ascending
    /// for SBL.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// OMP: a least-squares refit needed diagonal loading.
    pub regularized: bool,
    /// OMP: residual norm after each iteration. SBL: log-evidence at each
    /// iteration's hyperparameters.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    pub max_atoms: usize,
    /// Stop once `||r|| <= residual_tol`.
    pub residual_tol: f64,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Greedy selection by normalized correlation `|a_qᴴ r| / ||a_q||` followed
/// by a least-squares refit on the selected columns.
pub fn omp(a: &CMatrix, y: &[C64], config: &OmpConfig) -> Result<BaselineResult> {
    check_dim("omp y", a.rows(), y.len())?;
    let limit = a.rows().min(a.cols());
    if config.max_atoms > limit {
        return Err(Error::ParameterDomain {
            name: "max_atoms",
            value: config.max_atoms as f64,
            expected: "<= min(R, Q)",
        });
    }
    let col_norms: Vec<f64> = a.column_norms_sqr().into_iter().map(f64::sqrt).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut coeffs: Vec<C64> = Vec::new();
    let mut residual = y.to_vec();
    let mut res_norm = norm(y);
    let mut regularized = false;
    let mut trace = Vec::new();
    let mut taken = vec![false; a.cols()];

    while support.len() < config.max_atoms && res_norm > config.residual_tol {
        let corr = a.adjoint_mul_vec(&residual);
        let best = (0..a.cols())
            .filter(|&q| !taken[q] && col_norms[q] > 0.0)
            .map(|q| (q, corr[q].norm() / col_norms[q]))
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((q, score)) = best else { break };
        if score <= 0.0 {
            break;
        }
        let mut trial = support.clone();
        trial.push(q);
        let (x, loaded) = least_squares(a, y, &trial);
        let r: Vec<C64> = {
            let fit = a.select_columns(&trial).mul_vec(&x);
            y.iter().zip(&fit).map(|(o, f)| o - f).collect()
        };
        let new_norm = norm(&r);
        if !(new_norm < res_norm) {
            break;
        }
        taken[q] = true;
        support = trial;
        coeffs = x;
        residual = r;
        res_norm = new_norm;
        regularized |= loaded;
        trace.push(res_norm);
    }

    let mut h_hat = vec![C64::new(0.0, 0.0); a.cols()];
    for (&q, &c) in support.iter().zip(&coeffs) {
        h_hat[q] = c;
    }
    Ok(BaselineResult {
        h_hat,
        iterations: trace.len(),
        support,
        regularized,
        trace,
    })
}

/// Solves `(A_Sᴴ A_S) x = A_Sᴴ y`; loads the diagonal when the Gram matrix
/// does not factor.
fn least_squares(a: &CMatrix, y: &[C64], cols: &[usize]) -> (Vec<C64>, bool) {
    let sub = a.select_columns(cols);
    let mut gram = sub.adjoint().mul(&sub);
    let rhs = sub.adjoint_mul_vec(y);
    if let Ok(ch) = Cholesky::new(&gram) {
        return (ch.solve(&rhs), false);
    }
    let n = cols.len();
    let trace: f64 = (0..n).map(|i| gram[(i, i)].re).sum();
    let mut load = 1e-10 * trace.max(f64::MIN_POSITIVE) / n as f64;
    loop {
        for i in 0..n {
            gram[(i, i)].re += load;
        }
        if let Ok(ch) = Cholesky::new(&gram) {
            return (ch.solve(&rhs), true);
        }
        load *= 10.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SblConfig {
    pub max_iter: usize,
    /// Hyperparameters below this value are set to zero and stay there.
    pub prune_tol: f64,
    /// Stop when the largest hyperparameter change, relative to the largest
    /// hyperparameter, falls below this.
    pub tol: f64,
}

impl Default for SblConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            prune_tol: 1e-8,
            tol: 1e-6,
        }
    }
}

/// Evidence maximization with the EM fixed point `γ ← |m|² + φ`. The
/// hyperparameters start at `||y||² / ||A||_F²` for every coefficient.
pub fn sbl(a: &CMatrix, y: &[C64], sigma2: f64, config: &SblConfig) -> Result<BaselineResult> {
    check_dim("sbl y", a.rows(), y.len())?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::ParameterDomain {
            name: "sigma2",
            value: sigma2,
            expected: "> 0",
        });
    }
    let frob = a.frobenius_norm_sqr();
    let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    let start = if frob > 0.0 { energy / frob } else { 0.0 };
    let mut gamma = vec![start; a.cols()];
    let mut trace = Vec::new();
    let mut h_hat = vec![C64::new(0.0, 0.0); a.cols()];
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        let out = linear_module(a, y, sigma2, &gamma)?;
        trace.push(out.log_evidence);
        iterations += 1;
        h_hat = out.m;
        let mut change: f64 = 0.0;
        let mut largest: f64 = 0.0;
        for (g, new) in gamma.iter_mut().zip(out.mu_eta_to_v) {
            let next = if *g == 0.0 || new < config.prune_tol { 0.0 } else { new };
            change = change.max((next - *g).abs());
            largest = largest.max(next);
            *g = next;
        }
        if largest == 0.0 || change <= config.tol * largest {
            break;
        }
    }
    let support = (0..a.cols()).filter(|&q| gamma[q] > 0.0).collect();
    Ok(BaselineResult {
        h_hat,
        support,
        iterations,
        regularized: false,
        trace,
    })
}

/// Device `k` is active iff `||h_k||² > fraction · max_k' ||h_k'||²` and the
/// maximum is positive.
pub fn baseline_to_activity(h_hat: &[C64], block: usize, fraction: f64) -> Vec<bool> {
    let energy: Vec<f64> = h_hat
        .chunks(block.max(1))
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let top = energy.iter().cloned().fold(0.0, f64::max);
    energy.iter().map(|&e| top > 0.0 && e > fraction * top).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omp_one_step_exact() {
        let a = CMatrix::identity(5);
        let mut y = vec![C64::new(0.0, 0.0); 5];
        y[3] = C64::new(2.0, 0.0);
        let r = omp(&a, &y, &OmpConfig { max_atoms: 3, residual_tol: 1e-12 }).unwrap();
        assert_eq!(r.support, vec![3]);
        assert!((r.h_hat[3] - C64::new(2.0, 0.0)).norm() < 1e-15);

        let zero = vec![C64::new(0.0, 0.0); 5];
        let r = omp(&a, &zero, &OmpConfig { max_atoms: 3, residual_tol: 0.0 }).unwrap();
        assert!(r.support.is_empty());
        assert!(omp(&a, &zero, &OmpConfig { max_atoms: 6, residual_tol: 0.0 }).is_err());
    }

    #[test]
    fn sbl_zero_data() {
        let a = CMatrix::from_fn(4, 6, |r, c| C64::new((r * c) as f64 + 1.0, r as f64));
        let r = sbl(&a, &[C64::new(0.0, 0.0); 4], 0.1, &SblConfig::default()).unwrap();
        assert!(r.h_hat.iter().all(|v| *v == C64::new(0.0, 0.0)));
        assert!(r.support.is_empty());
    }

    #[test]
    fn activity_from_blocks() {
        let zero = vec![C64::new(0.0, 0.0); 6];
        assert_eq!(baseline_to_activity(&zero, 2, 0.1), vec![false; 3]);
        let mut h = zero.clone();
        h[3] = C64::new(0.0, 1.0);
        assert_eq!(baseline_to_activity(&h, 2, 0.1), vec![false, true, false]);
    }
}
