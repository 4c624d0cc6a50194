//! Scalar message updates between the variance, support, support-count and
//! activity variables.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{log_add_exp, log_normal_pdf, normalized_weight};
use crate::mvsp::mrf::{combine, Directional};
use crate::mvsp::PriorParams;
use crate::{Error, Result};

/// Floor on every Gaussian variance that enters a density evaluation.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// `min(μ / κ, 1)`; with `κ <= 0` any positive `μ` maps to 1.
pub fn variance_to_sparsity_prob(mu_eta_to_v: &[f64], kappa: f64) -> Vec<f64> {
    mu_eta_to_v
        .iter()
        .map(|&mu| {
            if kappa > 0.0 {
                (mu / kappa).min(1.0)
            } else if mu > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Belief of `s = +1` sent towards the support-count factor.
pub fn s_to_chi_message(pi_zeta: &[f64], lambda: &[Directional]) -> Vec<f64> {
    pi_zeta
        .iter()
        .zip(lambda)
        .map(|(z, l)| combine(*z, 0.5, l))
        .collect()
}

/// Mean `Σ(2π - 1)` and variance `4 Σ π(1 - π)` of `ℓ = Σ s`.
pub fn ell_message(pi_s_to_chi: &[f64]) -> (f64, f64) {
    let mean = pi_s_to_chi.iter().map(|p| 2.0 * p - 1.0).sum();
    let var = pi_s_to_chi.iter().map(|p| 4.0 * p * (1.0 - p)).sum();
    (mean, var)
}

/// Probability of `α = 1` carried by the `ψ → α` message. Inactive devices
/// pin `ℓ` to `-LJ` (every support state off); active devices spread it as
/// `N(m_ψ, σ²_ψ)`.
pub fn activity_message(m_chi: f64, sigma2_chi: f64, block: usize, prior: &PriorParams) -> f64 {
    let s2 = sigma2_chi.max(VARIANCE_FLOOR);
    let active = log_normal_pdf(m_chi, prior.m_psi(block), s2 + prior.sigma2_psi(block));
    let inactive = log_normal_pdf(-(block as f64), m_chi, s2);
    normalized_weight(active, inactive)
}

/// `π_{χ→s}` for every site of one device, from leave-one-out moments of the
/// other sites and the `ψ → ℓ` mixture `ρ N(m_ψ, σ²_ψ) + (1 - ρ) δ(ℓ + LJ)`.
pub fn chi_to_s_message(pi_s_to_chi: &[f64], prior: &PriorParams) -> Vec<f64> {
    let block = pi_s_to_chi.len();
    let lj = block as f64;
    let (total_mean, total_var) = ell_message(pi_s_to_chi);
    let (m_psi, s2_psi) = (prior.m_psi(block), prior.sigma2_psi(block));
    let (log_rho, log_not_rho) = (prior.rho.ln(), (1.0 - prior.rho).ln());
    pi_s_to_chi
        .iter()
        .map(|&p| {
            let m_loo = total_mean - (2.0 * p - 1.0);
            let s2_loo = (total_var - 4.0 * p * (1.0 - p)).max(VARIANCE_FLOOR);
            let weight = |s: f64| {
                log_add_exp(
                    log_not_rho + log_normal_pdf(s, -lj - m_loo, s2_loo),
                    log_rho + log_normal_pdf(s, m_psi - m_loo, s2_loo + s2_psi),
                )
            };
            normalized_weight(weight(1.0), weight(-1.0))
        })
        .collect()
}

/// Belief of `s = +1` sent back to the variance factor.
pub fn s_to_zeta_message(pi_chi: &[f64], lambda: &[Directional]) -> Vec<f64> {
    pi_chi
        .iter()
        .zip(lambda)
        .map(|(c, l)| combine(*c, 0.5, l))
        .collect()
}

/// `κ π`.
pub fn v_to_eta_message(pi_s_to_zeta: &[f64], kappa: f64) -> Vec<f64> {
    pi_s_to_zeta.iter().map(|p| kappa * p).collect()
}

/// `α̂ = 1` iff `ρ π > (1 - ρ)(1 - π)`.
pub fn decide_activity(pi_psi_to_alpha: &[f64], rho: f64) -> Vec<bool> {
    pi_psi_to_alpha
        .iter()
        .map(|&p| rho * p > (1.0 - rho) * (1.0 - p))
        .collect()
}

/// Number of largest entries averaged into a device's own `κ`:
/// `round(3 LJ ρ_s)` clamped to `[1, LJ]`.
pub fn top_count(block: usize, rho_s: f64) -> usize {
    ((3.0 * block as f64 * rho_s).round() as usize).clamp(1, block.max(1))
}

/// Per-device variance scale `κ_k`.
///
/// Each device's own estimate is the mean of its [`top_count`] largest
/// `μ_{η→v}`. With `K⁺` detected devices, the `round(θ₁ K⁺)` devices with the
/// largest own estimates keep them and every other device receives the mean of
/// the `round(θ₂ K⁺)` largest own estimates. While no device is detected the
/// expected count `max(round(ρ K), 1)` stands in for `K⁺`.
pub fn gamma_update(
    mu_eta_to_v: &[f64],
    alpha_hat: &[bool],
    block: usize,
    prior: &PriorParams,
) -> Result<Vec<f64>> {
    let devices = alpha_hat.len();
    if mu_eta_to_v.len() != devices * block {
        return Err(Error::Dimension {
            context: "gamma update",
            expected: devices * block,
            got: mu_eta_to_v.len(),
        });
    }
    if devices == 0 || block == 0 {
        return Ok(alloc::vec![prior.kappa_init; devices]);
    }
    let detected = match alpha_hat.iter().filter(|&&a| a).count() {
        0 => ((prior.rho * devices as f64).round() as usize).max(1),
        n => n,
    };
    let n_top = top_count(block, prior.rho_s);
    let own: Vec<f64> = mu_eta_to_v
        .chunks(block)
        .map(|chunk| {
            let mut sorted = chunk.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted[..n_top].iter().sum::<f64>() / n_top as f64
        })
        .collect();
    let mut order: Vec<usize> = (0..devices).collect();
    order.sort_by(|&a, &b| own[b].total_cmp(&own[a]));

    let kept = ((prior.theta1 * detected as f64).round() as usize).min(devices);
    let pooled_count = ((prior.theta2 * detected as f64).round() as usize).clamp(1, devices);
    let pooled = order[..pooled_count].iter().map(|&k| own[k]).sum::<f64>() / pooled_count as f64;

    let mut kappa = alloc::vec![pooled; devices];
    for &k in &order[..kept] {
        kappa[k] = own[k];
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn prior() -> PriorParams {
        PriorParams {
            rho: 0.1,
            rho_s: 0.1,
            beta: 0.4,
            theta1: 0.5,
            theta2: 2.0,
            kappa_init: 1.0,
        }
    }

    #[test]
    fn sparsity_prob_regions() {
        let k = 2.0;
        assert_eq!(variance_to_sparsity_prob(&[0.0, 2.0, 1.0, 9.0], k), vec![0.0, 1.0, 0.5, 1.0]);
        assert_eq!(variance_to_sparsity_prob(&[0.0, 1.0], 0.0), vec![0.0, 1.0]);
    }

    #[test]
    fn ell_moments() {
        assert_eq!(ell_message(&[1.0; 6]), (6.0, 0.0));
        assert_eq!(ell_message(&[0.5; 6]), (0.0, 6.0));
    }

    #[test]
    fn activity_limits() {
        let p = prior();
        let block = 32;
        let m_psi = p.m_psi(block);
        assert!(activity_message(m_psi, 0.0, block, &p) > 1.0 - 1e-9);
        assert!(activity_message(-(block as f64), 0.0, block, &p) < 1e-4);
        let far = activity_message(-4000.0, 1e-3, 4000, &p);
        assert!(far.is_finite() && far < 1e-12, "{far}");
    }

    #[test]
    fn activity_symmetric_case() {
        // rho_s = 1 removes the active spread, so both hypotheses are
        // equal-variance Gaussians mirrored around m_chi = 0.
        let p = PriorParams {
            rho_s: 1.0,
            ..prior()
        };
        assert_eq!(p.sigma2_psi(6), 0.0);
        assert_eq!(activity_message(0.0, 2.5, 6, &p), 0.5);
    }

    #[test]
    fn chi_to_s_limits() {
        let flat = PriorParams {
            rho: 1.0,
            rho_s: 0.5,
            ..prior()
        };
        let out = chi_to_s_message(&[0.5; 400], &flat);
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-12));
        let all_off = chi_to_s_message(&[0.0; 8], &PriorParams { rho: 0.0, ..prior() });
        assert!(all_off.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn s_to_zeta_and_v_to_eta() {
        assert_eq!(s_to_zeta_message(&[0.5], &[[0.5; 4]]), vec![0.5]);
        assert_eq!(s_to_zeta_message(&[1.0], &[[0.5; 4]]), vec![1.0]);
        assert_eq!(v_to_eta_message(&[0.0, 1.0, 0.25], 4.0), vec![0.0, 4.0, 1.0]);
    }

    #[test]
    fn decisions() {
        assert_eq!(decide_activity(&[1.0, 0.0, 0.5], 0.5), vec![true, false, false]);
        assert_eq!(decide_activity(&[1.0], 0.1), vec![true]);
    }

    #[test]
    fn gamma_rule() {
        let p = prior();
        let equal = vec![0.7; 3 * 10];
        let k = gamma_update(&equal, &[true, false, false], 10, &p).unwrap();
        assert!(k.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let k = gamma_update(&equal, &[false; 3], 10, &p).unwrap();
        assert!(k.iter().all(|&v| (v - 0.7).abs() < 1e-15));

        // Nothing detected: ρ K = 0.3 rounds to zero, so one device stands in
        // for K⁺ and keeps its own estimate (θ₁ K⁺ = 0.5 rounds to one).
        let mu = [4.0, 1.0, 0.2, 0.1, 0.3, 0.0];
        assert_eq!(gamma_update(&mu, &[false; 3], 2, &p).unwrap(), vec![4.0, 2.15, 2.15]);

        let mu = [4.0, 1.0, 0.2, 0.1, 0.3, 0.0];
        let k = gamma_update(&mu, &[true, false, false], 2, &p).unwrap();
        assert_eq!(k, vec![4.0, 2.15, 2.15]);

        let clamp = PriorParams { rho_s: 0.9, ..p };
        let k = gamma_update(&[1.0, 2.0, 3.0, 6.0], &[true, true], 2, &clamp).unwrap();
        assert_eq!(k, vec![3.0, 4.5]);
    }
}
