//! Gaussian posterior of `h` under the prior `CN(0, D)` and the likelihood
//! `CN(y; A h, σ² I)`, computed on the `R x R` side:
//! `m = D A^H C^{-1} y`, `Φ = D - D A^H C^{-1} A D`, `C = σ² I + A D A^H`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::check_dim;
use crate::linalg::{CMatrix, Cholesky, SplitMatrix};
use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct LinearOutput {
    /// Posterior mean.
    pub m: Vec<C64>,
    /// Diagonal of the posterior covariance.
    pub phi: Vec<f64>,
    /// `|m_q|² + φ_q`.
    pub mu_eta_to_v: Vec<f64>,
    /// `ln CN(y; 0, C)`.
    pub log_evidence: f64,
    /// Diagonal loading that had to be added to `C` before it factored.
    pub jitter: Option<f64>,
}

pub fn linear_module(a: &CMatrix, y: &[C64], sigma2: f64, d: &[f64]) -> Result<LinearOutput> {
    let (rows, cols) = (a.rows(), a.cols());
    check_dim("linear module y", rows, y.len())?;
    check_dim("linear module prior variances", cols, d.len())?;
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::ParameterDomain {
            name: "sigma2",
            value: sigma2,
            expected: ">= 0",
        });
    }
    if let Some(bad) = d.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::ParameterDomain {
            name: "mu_v_to_eta",
            value: d[bad],
            expected: ">= 0 and finite",
        });
    }

    let support: Vec<usize> = (0..cols).filter(|&q| d[q] > 0.0).collect();
    let scale: Vec<f64> = support.iter().map(|&q| d[q].sqrt()).collect();
    let b = SplitMatrix::from_scaled_columns(a, &support, &scale);
    let mut c = b.gram_plus_shift(sigma2);

    let mut jitter = None;
    let chol = match Cholesky::new(&c) {
        Ok(f) => f,
        Err(_) => {
            let trace: f64 = (0..rows).map(|i| c[(i, i)].re).sum();
            let base = if trace > 0.0 { trace } else { rows as f64 };
            let mut load = 1e-12 * base / rows.max(1) as f64;
            let mut attempt = 0;
            loop {
                for i in 0..rows {
                    c[(i, i)].re += load;
                }
                match Cholesky::new(&c) {
                    Ok(f) => {
                        jitter = Some(load);
                        break f;
                    }
                    Err(_) if attempt < 8 => {
                        for i in 0..rows {
                            c[(i, i)].re -= load;
                        }
                        load *= 100.0;
                        attempt += 1;
                    }
                    Err(pivot) => {
                        return Err(Error::NotPositiveDefinite(format!(
                            "covariance of size {rows} fails at pivot {pivot} even with loading {load:e}"
                        )))
                    }
                }
            }
        }
    };

    let white = chol.solve_lower(y);
    let quad: f64 = white.iter().map(|v| v.norm_sqr()).sum();
    let log_evidence =
        -(rows as f64) * core::f64::consts::PI.ln() - chol.log_det() - quad;
    let z = chol.solve_upper(&white);

    let mut m = vec![C64::new(0.0, 0.0); cols];
    let mut phi = vec![0.0; cols];
    if !support.is_empty() {
        let bz = b.adjoint_mul_vec(&z);
        let w_norms = b.forward_substitute(&chol).column_norms_sqr();
        for (s, &q) in support.iter().enumerate() {
            m[q] = bz[s] * scale[s];
            phi[q] = (d[q] * (1.0 - w_norms[s])).max(0.0);
        }
    }
    let mu_eta_to_v = m.iter().zip(&phi).map(|(v, p)| v.norm_sqr() + p).collect();
    Ok(LinearOutput {
        m,
        phi,
        mu_eta_to_v,
        log_evidence,
        jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_prior_gives_zero_posterior() {
        let a = CMatrix::from_fn(3, 4, |r, c| C64::new(r as f64 + 1.0, c as f64));
        let y = vec![C64::new(1.0, -1.0); 3];
        let out = linear_module(&a, &y, 0.5, &[0.0; 4]).unwrap();
        assert!(out.m.iter().all(|v| *v == C64::new(0.0, 0.0)));
        assert!(out.phi.iter().all(|v| *v == 0.0));
        assert!(out.mu_eta_to_v.iter().all(|v| *v == 0.0));
        assert!(out.jitter.is_none());
    }

    #[test]
    fn scalar_wiener() {
        let a_val = C64::new(0.6, -0.8) * 1.5;
        let a = CMatrix::from_row_major(1, 1, vec![a_val]);
        let y = C64::new(0.3, 0.7);
        let (d, s2) = (2.0, 0.4);
        let out = linear_module(&a, &[y], s2, &[d]).unwrap();
        let denom = s2 + d * a_val.norm_sqr();
        let m = y * a_val.conj() * d / denom;
        let phi = d * s2 / denom;
        assert!((out.m[0] - m).norm() < 1e-14);
        assert!((out.phi[0] - phi).abs() < 1e-14);
        let ev = -(core::f64::consts::PI * denom).ln() - y.norm_sqr() / denom;
        assert!((out.log_evidence - ev).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = CMatrix::identity(2);
        let y = vec![C64::new(0.0, 0.0); 2];
        assert!(linear_module(&a, &y, -1.0, &[1.0, 1.0]).is_err());
        assert!(linear_module(&a, &y, 1.0, &[1.0, -1.0]).is_err());
        assert!(linear_module(&a, &y[..1], 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn singular_system_is_loaded() {
        let a = CMatrix::from_fn(3, 1, |_, _| C64::new(1.0, 0.0));
        let y = vec![C64::new(1.0, 0.0); 3];
        let out = linear_module(&a, &y, 0.0, &[1.0]).unwrap();
        assert!(out.jitter.is_some());
        assert!((out.m[0] - C64::new(1.0, 0.0)).norm() < 1e-6);
    }
}
