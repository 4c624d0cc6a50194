//! Channel-reconstruction NMSE and activity detection error probability.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_dim;
use crate::linalg::CMatrix;
use crate::math::db;
use crate::Result;

/// `10 log10((1/U') Σ_u ||Ĝ_u - G_u||² / ||G_u||²)` over the `U'` super-symbols
/// with nonzero `G_u`. `Ĝ = G` gives `-inf`; `None` if every `G_u` is zero.
pub fn compute_nmse(g_hat: &[CMatrix], g_true: &[CMatrix]) -> Result<Option<f64>> {
    let mut acc = NmseAccumulator::new(g_true.len());
    acc.add(g_hat, g_true)?;
    Ok(acc.nmse_db())
}

/// Trial-averaged NMSE: error and power are summed per super-symbol across
/// trials, and the per-symbol ratios are averaged at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseAccumulator {
    error: Vec<f64>,
    power: Vec<f64>,
    trials: usize,
}

impl NmseAccumulator {
    pub fn new(super_symbols: usize) -> Self {
        Self {
            error: vec![0.0; super_symbols],
            power: vec![0.0; super_symbols],
            trials: 0,
        }
    }

    pub fn add(&mut self, g_hat: &[CMatrix], g_true: &[CMatrix]) -> Result<()> {
        check_dim("estimated channel count", self.error.len(), g_hat.len())?;
        check_dim("true channel count", self.error.len(), g_true.len())?;
        for (u, (a, b)) in g_hat.iter().zip(g_true).enumerate() {
            check_dim("channel rows", b.rows(), a.rows())?;
            check_dim("channel columns", b.cols(), a.cols())?;
            self.error[u] += a.distance_sqr(b);
            self.power[u] += b.frobenius_norm_sqr();
        }
        self.trials += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &NmseAccumulator) {
        for (a, b) in self.error.iter_mut().zip(&other.error) {
            *a += b;
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
        self.trials += other.trials;
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Super-symbols whose accumulated true power is zero.
    pub fn skipped(&self) -> usize {
        self.power.iter().filter(|&&p| p == 0.0).count()
    }

    pub fn nmse_linear(&self) -> Option<f64> {
        let ratios: Vec<f64> = self
            .error
            .iter()
            .zip(&self.power)
            .filter(|(_, &p)| p > 0.0)
            .map(|(e, p)| e / p)
            .collect();
        if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        }
    }

    pub fn nmse_db(&self) -> Option<f64> {
        self.nmse_linear().map(db)
    }
}

/// Mean over trials of the fraction of devices whose decision is wrong.
pub fn compute_pe(alpha_hat: &[Vec<bool>], alpha_true: &[Vec<bool>]) -> Result<f64> {
    check_dim("trials", alpha_true.len(), alpha_hat.len())?;
    if alpha_true.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (h, t) in alpha_hat.iter().zip(alpha_true) {
        check_dim("devices", t.len(), h.len())?;
        total += trial_error_rate(h, t);
    }
    Ok(total / alpha_true.len() as f64)
}

/// `(1/K) Σ_k [α̂_k ≠ α_k]` for one trial.
pub fn trial_error_rate(alpha_hat: &[bool], alpha_true: &[bool]) -> f64 {
    if alpha_true.is_empty() {
        return 0.0;
    }
    let wrong = alpha_hat.iter().zip(alpha_true).filter(|(a, b)| a != b).count();
    wrong as f64 / alpha_true.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn mat(v: &[f64]) -> CMatrix {
        CMatrix::from_fn(1, v.len(), |_, c| C64::new(v[c], 0.0))
    }

    #[test]
    fn nmse_special_values() {
        let g = vec![mat(&[1.0, 2.0]), mat(&[0.0, 3.0])];
        assert_eq!(compute_nmse(&g, &g).unwrap(), Some(f64::NEG_INFINITY));
        let zero = vec![mat(&[0.0, 0.0]), mat(&[0.0, 0.0])];
        assert!(compute_nmse(&zero, &g).unwrap().unwrap().abs() < 1e-15);
        assert_eq!(compute_nmse(&g, &zero).unwrap(), None);
        let mixed = vec![mat(&[1.0, 2.0]), mat(&[0.0, 0.0])];
        let mut acc = NmseAccumulator::new(2);
        acc.add(&zero, &mixed).unwrap();
        assert_eq!(acc.skipped(), 1);
        assert_eq!(acc.nmse_linear(), Some(1.0));
        assert!(compute_nmse(&g[..1], &g).is_err());
    }

    #[test]
    fn nmse_ratio_of_sums() {
        let t1 = vec![mat(&[1.0])];
        let t2 = vec![mat(&[3.0])];
        let mut acc = NmseAccumulator::new(1);
        acc.add(&[mat(&[0.0])], &t1).unwrap();
        acc.add(&[mat(&[3.0])], &t2).unwrap();
        assert!((acc.nmse_linear().unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(acc.trials(), 2);
    }

    #[test]
    fn pe_counting() {
        let t = vec![vec![true, false, true]];
        assert_eq!(compute_pe(&t, &t).unwrap(), 0.0);
        let c = vec![vec![false, true, false]];
        assert_eq!(compute_pe(&c, &t).unwrap(), 1.0);
        let mut truth = vec![false; 10];
        truth[3] = true;
        let hat = vec![false; 10];
        assert!((compute_pe(&[hat], &[truth]).unwrap() - 0.1).abs() < 1e-15);
    }
}
