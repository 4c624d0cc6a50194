//! Modified variance state propagation.
//!
//! The receiver alternates between a linear module (exact Gaussian posterior
//! of `h` given per-coefficient variances) and a support module: a
//! 4-connected binary MRF per device, tied to the device activity bit through
//! the support count `ℓ_k = Σ_i s_{k,i}`.

pub mod linear;
pub mod messages;
pub mod mrf;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::check_dim;
use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

pub use linear::{linear_module, LinearOutput};
pub use messages::{
    activity_message, chi_to_s_message, decide_activity, ell_message, gamma_update,
    s_to_chi_message, s_to_zeta_message, v_to_eta_message, variance_to_sparsity_prob,
};
pub use mrf::{mrf_sweep, Directional, Lattice};

/// Hyperparameters of the hierarchical prior. The Gamma prior on each
/// variance enters the updates only through its mean `κ = γ₁ / γ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    /// Activity probability `ρ`.
    pub rho: f64,
    /// Grid occupancy `ρ_s` of an active device.
    pub rho_s: f64,
    /// MRF coupling `β`.
    pub beta: f64,
    /// Fraction of detected devices that keep their own `κ`.
    pub theta1: f64,
    /// Pool size, as a multiple of the detected count, for everyone else's `κ`.
    pub theta2: f64,
    /// `κ` before any device is detected.
    pub kappa_init: f64,
}

impl Default for PriorParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            rho_s: 0.1,
            beta: 0.4,
            theta1: 0.5,
            theta2: 2.0,
            kappa_init: 1.0,
        }
    }
}

impl PriorParams {
    /// `m_ψ = LJ (2 ρ_s - 1)`.
    pub fn m_psi(&self, block: usize) -> f64 {
        block as f64 * (2.0 * self.rho_s - 1.0)
    }

    /// `σ²_ψ = 4 LJ ρ_s (1 - ρ_s)`.
    pub fn sigma2_psi(&self, block: usize) -> f64 {
        4.0 * block as f64 * self.rho_s * (1.0 - self.rho_s)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [("rho", self.rho), ("rho_s", self.rho_s)];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    expected: "in [0, 1]",
                });
            }
        }
        if !(self.theta1 > 0.0 && self.theta1 < 1.0) {
            return Err(Error::ParameterDomain {
                name: "theta1",
                value: self.theta1,
                expected: "in (0, 1)",
            });
        }
        if !(self.theta2 >= 1.0 && self.theta2.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "theta2",
                value: self.theta2,
                expected: ">= 1",
            });
        }
        if !self.beta.is_finite() {
            return Err(Error::ParameterDomain {
                name: "beta",
                value: self.beta,
                expected: "finite",
            });
        }
        if !(self.kappa_init > 0.0 && self.kappa_init.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "kappa_init",
                value: self.kappa_init,
                expected: "> 0",
            });
        }
        Ok(())
    }
}

/// Iteration counts of the message schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvspConfig {
    pub t_out: usize,
    pub t_in1: usize,
    pub t_in2: usize,
}

impl Default for MvspConfig {
    fn default() -> Self {
        Self {
            t_out: 15,
            t_in1: 2,
            t_in2: 4,
        }
    }
}

/// Devices and the per-device lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub devices: usize,
    pub lattice: Lattice,
}

impl Shape {
    pub fn new(devices: usize, delays: usize, dopplers: usize) -> Self {
        Self {
            devices,
            lattice: Lattice { delays, dopplers },
        }
    }

    pub fn block(&self) -> usize {
        self.lattice.sites()
    }

    pub fn len(&self) -> usize {
        self.devices * self.block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every message of the factor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceState {
    pub mu_v_to_eta: Vec<f64>,
    pub mu_eta_to_v: Vec<f64>,
    pub m: Vec<C64>,
    pub phi: Vec<f64>,
    pub pi_zeta_to_s: Vec<f64>,
    pub lambda: Vec<Directional>,
    pub pi_s_to_chi: Vec<f64>,
    pub pi_chi_to_s: Vec<f64>,
    pub pi_s_to_zeta: Vec<f64>,
    pub m_chi_to_ell: Vec<f64>,
    pub sigma2_chi_to_ell: Vec<f64>,
    pub pi_psi_to_alpha: Vec<f64>,
    pub alpha_hat: Vec<bool>,
    /// Per-device `γ₁ / γ₂`.
    pub kappa: Vec<f64>,
}

impl InferenceState {
    /// `μ_{v→η} = κ_init ρ_s`, every Bernoulli message at 0.5, no device
    /// detected.
    pub fn new(shape: Shape, prior: &PriorParams) -> Self {
        let (q, k) = (shape.len(), shape.devices);
        Self {
            mu_v_to_eta: vec![prior.kappa_init * prior.rho_s; q],
            mu_eta_to_v: vec![0.0; q],
            m: vec![C64::new(0.0, 0.0); q],
            phi: vec![0.0; q],
            pi_zeta_to_s: vec![0.5; q],
            lambda: vec![[0.5; 4]; q],
            pi_s_to_chi: vec![0.5; q],
            pi_chi_to_s: vec![0.5; q],
            pi_s_to_zeta: vec![0.5; q],
            m_chi_to_ell: vec![0.0; k],
            sigma2_chi_to_ell: vec![shape.block() as f64; k],
            pi_psi_to_alpha: vec![0.5; k],
            alpha_hat: vec![false; k],
            kappa: vec![prior.kappa_init; k],
        }
    }

    /// Number of probability entries outside `[0, 1]` plus variance entries
    /// below zero. Returns the first non-finite field instead, if any.
    pub fn domain_violations(&self) -> core::result::Result<usize, (&'static str, usize)> {
        let probs: [(&'static str, &[f64]); 6] = [
            ("pi_zeta_to_s", &self.pi_zeta_to_s),
            ("pi_s_to_chi", &self.pi_s_to_chi),
            ("pi_chi_to_s", &self.pi_chi_to_s),
            ("pi_s_to_zeta", &self.pi_s_to_zeta),
            ("pi_psi_to_alpha", &self.pi_psi_to_alpha),
            ("lambda", self.lambda.as_flattened()),
        ];
        let vars: [(&'static str, &[f64]); 5] = [
            ("mu_v_to_eta", &self.mu_v_to_eta),
            ("mu_eta_to_v", &self.mu_eta_to_v),
            ("phi", &self.phi),
            ("sigma2_chi_to_ell", &self.sigma2_chi_to_ell),
            ("kappa", &self.kappa),
        ];
        let mut bad = 0;
        for (name, values) in probs {
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err((name, i));
                }
                if !(0.0..=1.0).contains(v) {
                    bad += 1;
                }
            }
        }
        for (name, values) in vars {
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err((name, i));
                }
                if *v < 0.0 {
                    bad += 1;
                }
            }
        }
        for (i, v) in self.m_chi_to_ell.iter().enumerate() {
            if !v.is_finite() {
                return Err(("m_chi_to_ell", i));
            }
        }
        for (i, v) in self.m.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(("m", i));
            }
        }
        Ok(bad)
    }
}

/// One row of the per-outer-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvspTraceRow {
    pub iteration: usize,
    /// `||y - A m||`.
    pub residual: f64,
    pub active_devices: usize,
    pub min_variance: f64,
    pub max_variance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Linear-module calls that needed diagonal loading.
    pub jitter_events: usize,
    /// Domain violations summed over all outer iterations.
    pub domain_violations: usize,
    pub trace: Vec<MvspTraceRow>,
}

#[derive(Debug, Clone)]
pub struct MvspOutput {
    pub h_hat: Vec<C64>,
    pub alpha_hat: Vec<bool>,
    pub state: InferenceState,
    pub diagnostics: Diagnostics,
}

/// Runs the outer loop `t_out` times. Each outer iteration:
///
/// 1. `t_in1` linear-module passes, feeding `|m|² + φ` back as the prior
///    variances.
/// 2. `κ` from [`gamma_update`] with the previous activity decisions, then
///    `π_{ζ→s}`.
/// 3. `t_in2` rounds of one MRF sweep followed by the `χ → s` update.
/// 4. Support count, activity message and decision.
/// 5. `π_{s→ζ}` and `μ_{v→η} = κ π_{s→ζ}`.
pub fn run_mvsp(
    a: &CMatrix,
    y: &[C64],
    sigma2: f64,
    shape: Shape,
    prior: &PriorParams,
    config: &MvspConfig,
) -> Result<MvspOutput> {
    prior.validate()?;
    check_dim("measurement rows", a.rows(), y.len())?;
    check_dim("measurement columns", shape.len(), a.cols())?;
    let block = shape.block();
    let mut st = InferenceState::new(shape, prior);
    let mut diag = Diagnostics::default();

    for iteration in 0..config.t_out {
        let mut mu = st.mu_v_to_eta.clone();
        for _ in 0..config.t_in1 {
            let out = linear_module(a, y, sigma2, &mu)?;
            diag.jitter_events += usize::from(out.jitter.is_some());
            mu = out.mu_eta_to_v;
            st.m = out.m;
            st.phi = out.phi;
        }
        st.mu_eta_to_v = mu;

        st.kappa = gamma_update(&st.mu_eta_to_v, &st.alpha_hat, block, prior)?;
        for k in 0..shape.devices {
            let r = k * block..(k + 1) * block;
            let pz = variance_to_sparsity_prob(&st.mu_eta_to_v[r.clone()], st.kappa[k]);
            st.pi_zeta_to_s[r.clone()].copy_from_slice(&pz);

            for _ in 0..config.t_in2 {
                mrf_sweep(
                    shape.lattice,
                    &st.pi_zeta_to_s[r.clone()],
                    &st.pi_chi_to_s[r.clone()],
                    prior.beta,
                    1,
                    &mut st.lambda[r.clone()],
                );
                let ps = s_to_chi_message(&st.pi_zeta_to_s[r.clone()], &st.lambda[r.clone()]);
                st.pi_s_to_chi[r.clone()].copy_from_slice(&ps);
                let pc = chi_to_s_message(&ps, prior);
                st.pi_chi_to_s[r.clone()].copy_from_slice(&pc);
            }

            let (mean, var) = ell_message(&st.pi_s_to_chi[r.clone()]);
            st.m_chi_to_ell[k] = mean;
            st.sigma2_chi_to_ell[k] = var;
            st.pi_psi_to_alpha[k] = activity_message(mean, var, block, prior);

            let pz = s_to_zeta_message(&st.pi_chi_to_s[r.clone()], &st.lambda[r.clone()]);
            st.pi_s_to_zeta[r.clone()].copy_from_slice(&pz);
            let mv = v_to_eta_message(&pz, st.kappa[k]);
            st.mu_v_to_eta[r].copy_from_slice(&mv);
        }
        st.alpha_hat = decide_activity(&st.pi_psi_to_alpha, prior.rho);

        match st.domain_violations() {
            Ok(n) => diag.domain_violations += n,
            Err((quantity, index)) => {
                return Err(Error::NonFinite {
                    quantity,
                    iteration,
                    index,
                })
            }
        }
        let am = a.mul_vec(&st.m);
        let residual = am
            .iter()
            .zip(y)
            .map(|(p, o)| (o - p).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let (min_variance, max_variance) = st
            .mu_v_to_eta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        diag.trace.push(MvspTraceRow {
            iteration,
            residual,
            active_devices: st.alpha_hat.iter().filter(|&&x| x).count(),
            min_variance,
            max_variance,
        });
    }

    Ok(MvspOutput {
        h_hat: st.m.clone(),
        alpha_hat: st.alpha_hat.clone(),
        state: st,
        diagnostics: diag,
    })
}
