//! EM-MVSP: alternate the MVSP posterior with gradient descent on the grid
//! coordinates `ω`.
//!
//! The M-step minimizes
//! `G(ω) = -2 Re(yᴴ A(ω) m) + Σ_q φ_q ||a_q(ω)||² + ||A(ω) m||²`,
//! the expected negative log-likelihood up to constants for a posterior with
//! mean `m` and diagonal covariance `diag(φ)`. Step sizes, tolerances and
//! gradients are expressed in grid spacings (`τ_max / L`, `ν_max / J`).

use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::dictionary::{build_a, build_a_derivatives, device_columns, GridModel};
use crate::error::check_dim;
use crate::linalg::CMatrix;
use crate::mvsp::{run_mvsp, MvspConfig, MvspOutput, PriorParams, Shape};
use crate::pilots::{OfdmConfig, PilotBook};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    Analytic,
    /// Central differences with a step of `1e-4` grid spacings.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Number of M-steps; MVSP runs `i_max + 1` times.
    pub i_max: usize,
    /// Stop once `||Δω||²`, in squared grid spacings, falls below this.
    pub omega_tol: f64,
    /// Largest coordinate move of a full descent step, in grid spacings.
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub max_line_search: usize,
    /// Descent steps per block (delays, then Dopplers) per M-step.
    pub descent_steps: usize,
    pub grad_mode: GradMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            i_max: 4,
            omega_tol: 1e-6,
            step_init: 0.25,
            backtrack_factor: 0.5,
            max_line_search: 10,
            descent_steps: 5,
            grad_mode: GradMode::Analytic,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "step_init",
                value: self.step_init,
                expected: "> 0",
            });
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::ParameterDomain {
                name: "backtrack_factor",
                value: self.backtrack_factor,
                expected: "in (0, 1)",
            });
        }
        if !(self.omega_tol >= 0.0) {
            return Err(Error::ParameterDomain {
                name: "omega_tol",
                value: self.omega_tol,
                expected: ">= 0",
            });
        }
        Ok(())
    }
}

/// `G` for an already built `A`.
pub fn g_from_matrix(a: &CMatrix, m: &[C64], phi: &[f64], y: &[C64]) -> f64 {
    let am = a.mul_vec(m);
    let cross: f64 = y.iter().zip(&am).map(|(yi, v)| (yi.conj() * v).re).sum();
    let fit: f64 = am.iter().map(|v| v.norm_sqr()).sum();
    let spread: f64 = a
        .column_norms_sqr()
        .iter()
        .zip(phi)
        .filter(|(_, &p)| p != 0.0)
        .map(|(n, p)| n * p)
        .sum();
    -2.0 * cross + spread + fit
}

pub fn g_objective(
    grid: &GridModel,
    m: &[C64],
    phi: &[f64],
    y: &[C64],
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
) -> Result<f64> {
    check_posterior(grid, m, phi, y, ofdm)?;
    let a = build_a(grid, pilots, ofdm)?;
    Ok(g_from_matrix(a.matrix(), m, phi, y))
}

fn check_posterior(grid: &GridModel, m: &[C64], phi: &[f64], y: &[C64], ofdm: &OfdmConfig) -> Result<()> {
    check_dim("posterior mean", grid.len(), m.len())?;
    check_dim("posterior variance", grid.len(), phi.len())?;
    check_dim("observation", ofdm.measurements(), y.len())
}

/// `∂G/∂τ_{k,l}` (device-major, length `K L`) and `∂G/∂ν_{k,j}` (length `K J`),
/// in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
}

pub fn grad_g(
    grid: &GridModel,
    m: &[C64],
    phi: &[f64],
    y: &[C64],
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    mode: GradMode,
) -> Result<Gradient> {
    check_posterior(grid, m, phi, y, ofdm)?;
    match mode {
        GradMode::Analytic => analytic_gradient(grid, m, phi, y, pilots, ofdm, true, true),
        GradMode::FiniteDifference => fd_gradient(grid, m, phi, y, pilots, ofdm, true, true),
    }
}

/// Per-column `2 Re(zᴴ ȧ_q m_q) + 2 φ_q Re(a_qᴴ ȧ_q)` with `z = A m - y`.
fn column_terms(a: &CMatrix, da: &CMatrix, z: &[C64], m: &[C64], phi: &[f64]) -> Vec<f64> {
    let w = da.adjoint_mul_vec(z);
    let mut cross = vec![C64::new(0.0, 0.0); a.cols()];
    for r in 0..a.rows() {
        for ((c, av), dv) in cross.iter_mut().zip(a.row(r)).zip(da.row(r)) {
            *c += av.conj() * dv;
        }
    }
    (0..a.cols())
        .map(|q| 2.0 * (w[q].conj() * m[q]).re + 2.0 * phi[q] * cross[q].re)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn analytic_gradient(
    grid: &GridModel,
    m: &[C64],
    phi: &[f64],
    y: &[C64],
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    want_tau: bool,
    want_nu: bool,
) -> Result<Gradient> {
    let a = build_a(grid, pilots, ofdm)?.into_matrix();
    let (da_tau, da_nu) = build_a_derivatives(grid, pilots, ofdm)?;
    let z: Vec<C64> = a.mul_vec(m).iter().zip(y).map(|(p, o)| p - o).collect();
    let (k_total, big_l, big_j) = (grid.devices(), grid.delays(), grid.dopplers());
    let mut tau = vec![0.0; k_total * big_l];
    let mut nu = vec![0.0; k_total * big_j];
    if want_tau {
        let t = column_terms(&a, &da_tau, &z, m, phi);
        for k in 0..k_total {
            for l in 0..big_l {
                tau[k * big_l + l] = (0..big_j).map(|j| t[grid.index(k, l, j)]).sum();
            }
        }
    }
    if want_nu {
        let t = column_terms(&a, &da_nu, &z, m, phi);
        for k in 0..k_total {
            for j in 0..big_j {
                nu[k * big_j + j] = (0..big_l).map(|l| t[grid.index(k, l, j)]).sum();
            }
        }
    }
    Ok(Gradient { tau, nu })
}

/// `G` with device `k`'s columns replaced, reusing `A m` for the others.
struct Incremental<'a> {
    a: CMatrix,
    am: Vec<C64>,
    norms: Vec<f64>,
    m: &'a [C64],
    phi: &'a [f64],
    y: &'a [C64],
    block: usize,
}

impl<'a> Incremental<'a> {
    fn new(a: CMatrix, m: &'a [C64], phi: &'a [f64], y: &'a [C64], block: usize) -> Self {
        let am = a.mul_vec(m);
        let norms = a.column_norms_sqr();
        Self {
            a,
            am,
            norms,
            m,
            phi,
            y,
            block,
        }
    }

    fn with_device(&self, k: usize, cols: &CMatrix) -> f64 {
        let r = k * self.block..(k + 1) * self.block;
        let mk = &self.m[r.clone()];
        let mut cross = 0.0;
        let mut fit = 0.0;
        for row in 0..self.a.rows() {
            let old: C64 = self.a.row(row)[r.clone()].iter().zip(mk).map(|(a, b)| a * b).sum();
            let new: C64 = cols.row(row).iter().zip(mk).map(|(a, b)| a * b).sum();
            let v = self.am[row] - old + new;
            cross += (self.y[row].conj() * v).re;
            fit += v.norm_sqr();
        }
        let new_norms = cols.column_norms_sqr();
        let mut spread = 0.0;
        for q in 0..self.norms.len() {
            let n = if r.contains(&q) { new_norms[q - r.start] } else { self.norms[q] };
            if self.phi[q] != 0.0 {
                spread += n * self.phi[q];
            }
        }
        -2.0 * cross + spread + fit
    }
}

#[allow(clippy::too_many_arguments)]
fn fd_gradient(
    grid: &GridModel,
    m: &[C64],
    phi: &[f64],
    y: &[C64],
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    want_tau: bool,
    want_nu: bool,
) -> Result<Gradient> {
    let a = build_a(grid, pilots, ofdm)?.into_matrix();
    let inc = Incremental::new(a, m, phi, y, grid.block());
    let (k_total, big_l, big_j) = (grid.devices(), grid.delays(), grid.dopplers());
    let mut tau = vec![0.0; k_total * big_l];
    let mut nu = vec![0.0; k_total * big_j];
    let mut probe = grid.clone();
    let central = |probe: &mut GridModel, k: usize, set: &dyn Fn(&mut GridModel, f64), x: f64, h: f64| {
        set(probe, x + h);
        let plus = inc.with_device(k, &device_columns(probe, pilots, ofdm, k));
        set(probe, x - h);
        let minus = inc.with_device(k, &device_columns(probe, pilots, ofdm, k));
        set(probe, x);
        (plus - minus) / (2.0 * h)
    };
    for k in 0..k_total {
        if want_tau && grid.tau_spacing() > 0.0 {
            let h = 1e-4 * grid.tau_spacing();
            for l in 0..big_l {
                let x = grid.tau(k)[l];
                let set = move |g: &mut GridModel, v: f64| g.tau_mut(k)[l] = v;
                tau[k * big_l + l] = central(&mut probe, k, &set, x, h);
            }
        }
        if want_nu && grid.nu_spacing() > 0.0 {
            let h = 1e-4 * grid.nu_spacing();
            for j in 0..big_j {
                let x = grid.nu(k)[j];
                let set = move |g: &mut GridModel, v: f64| g.nu_mut(k)[j] = v;
                nu[k * big_j + j] = central(&mut probe, k, &set, x, h);
            }
        }
    }
    Ok(Gradient { tau, nu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Delay,
    Doppler,
}

/// Outcome of one M-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepReport {
    pub g_start: f64,
    pub g_end: f64,
    pub accepted_steps: usize,
    /// Accepted steps whose `G` rose; kept at zero by the line search.
    pub increases: usize,
    /// Blocks whose line search found no decrease, leaving `ω` as it was.
    pub failed_searches: usize,
}

/// One M-step on a copy of `grid`. `m` and `φ` are reordered together with
/// any coordinates that change order, so `G` is unaffected by the re-sort.
pub fn m_step(
    grid: &GridModel,
    m: &[C64],
    phi: &[f64],
    y: &[C64],
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    config: &EmConfig,
) -> Result<(GridModel, MStepReport)> {
    check_posterior(grid, m, phi, y, ofdm)?;
    let mut grid = grid.clone();
    let mut m = m.to_vec();
    let mut phi = phi.to_vec();
    let mut g_cur = g_objective(&grid, &m, &phi, y, pilots, ofdm)?;
    let mut report = MStepReport {
        g_start: g_cur,
        g_end: g_cur,
        accepted_steps: 0,
        increases: 0,
        failed_searches: 0,
    };
    for block in [Block::Delay, Block::Doppler] {
        let spacing = match block {
            Block::Delay => grid.tau_spacing(),
            Block::Doppler => grid.nu_spacing(),
        };
        if !(spacing > 0.0) {
            continue;
        }
        for _ in 0..config.descent_steps {
            let (want_tau, want_nu) = (block == Block::Delay, block == Block::Doppler);
            let grad = match config.grad_mode {
                GradMode::Analytic => analytic_gradient(&grid, &m, &phi, y, pilots, ofdm, want_tau, want_nu)?,
                GradMode::FiniteDifference => fd_gradient(&grid, &m, &phi, y, pilots, ofdm, want_tau, want_nu)?,
            };
            let g: Vec<f64> = match block {
                Block::Delay => grad.tau,
                Block::Doppler => grad.nu,
            }
            .into_iter()
            .map(|v| v * spacing)
            .collect();
            let largest = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if !(largest > 0.0) {
                break;
            }
            let direction: Vec<f64> = g.iter().map(|v| -v / largest * config.step_init * spacing).collect();

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..config.max_line_search.max(1) {
                let mut cand = grid.clone();
                let (mut cm, mut cphi) = (m.clone(), phi.clone());
                apply_step(&mut cand, block, &direction, t);
                sort_with_posterior(&mut cand, &mut cm, &mut cphi);
                let g_new = g_objective(&cand, &cm, &cphi, y, pilots, ofdm)?;
                if g_new <= g_cur {
                    accepted = Some((cand, cm, cphi, g_new));
                    break;
                }
                t *= config.backtrack_factor;
            }
            match accepted {
                Some((cand, cm, cphi, g_new)) => {
                    report.increases += usize::from(g_new > g_cur);
                    report.accepted_steps += 1;
                    grid = cand;
                    m = cm;
                    phi = cphi;
                    g_cur = g_new;
                }
                None => {
                    report.failed_searches += 1;
                    break;
                }
            }
        }
    }
    report.g_end = g_cur;
    Ok((grid, report))
}

fn apply_step(grid: &mut GridModel, block: Block, direction: &[f64], t: f64) {
    let (lo, hi, coords) = match block {
        Block::Delay => {
            let hi = grid.tau_max() - 1e-9 * grid.tau_spacing();
            (0.0, hi, grid.tau_all_mut())
        }
        Block::Doppler => {
            let half = grid.nu_max() / 2.0;
            let hi = half - 1e-9 * grid.nu_spacing();
            (-half, hi, grid.nu_all_mut())
        }
    };
    for (x, d) in coords.iter_mut().zip(direction) {
        *x = (*x + t * d).clamp(lo, hi);
    }
}

/// Sorts each device's delays and Dopplers ascending and applies the same
/// permutation to the matching entries of `m` and `φ`.
fn sort_with_posterior(grid: &mut GridModel, m: &mut [C64], phi: &mut [f64]) {
    let (big_l, big_j) = (grid.delays(), grid.dopplers());
    for k in 0..grid.devices() {
        let tau_order = argsort(grid.tau(k));
        let nu_order = argsort(grid.nu(k));
        let identity = |o: &[usize]| o.iter().enumerate().all(|(i, &v)| i == v);
        if identity(&tau_order) && identity(&nu_order) {
            continue;
        }
        let tau: Vec<f64> = tau_order.iter().map(|&i| grid.tau(k)[i]).collect();
        let nu: Vec<f64> = nu_order.iter().map(|&i| grid.nu(k)[i]).collect();
        grid.tau_mut(k).copy_from_slice(&tau);
        grid.nu_mut(k).copy_from_slice(&nu);
        let base = grid.index(k, 0, 0);
        let old_m = m[base..base + big_l * big_j].to_vec();
        let old_phi = phi[base..base + big_l * big_j].to_vec();
        for (l, &src_l) in tau_order.iter().enumerate() {
            for (j, &src_j) in nu_order.iter().enumerate() {
                m[base + l * big_j + j] = old_m[src_l * big_j + src_j];
                phi[base + l * big_j + j] = old_phi[src_l * big_j + src_j];
            }
        }
    }
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// `||ω_a - ω_b||²` in squared grid spacings.
pub fn omega_distance_sqr(a: &GridModel, b: &GridModel) -> f64 {
    let part = |x: &[f64], y: &[f64], s: f64| -> f64 {
        if s > 0.0 {
            x.iter().zip(y).map(|(p, q)| ((p - q) / s).powi(2)).sum()
        } else {
            0.0
        }
    };
    part(a.tau_all(), b.tau_all(), a.tau_spacing()) + part(a.nu_all(), b.nu_all(), a.nu_spacing())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTraceRow {
    pub iteration: usize,
    pub step: MStepReport,
    pub delta_omega_sqr: f64,
}

/// Estimate after each MVSP run, starting with the initial grid.
#[derive(Debug, Clone)]
pub struct EmIterate {
    pub grid: GridModel,
    pub h_hat: Vec<C64>,
    pub alpha_hat: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct EmOutput {
    pub h_hat: Vec<C64>,
    pub alpha_hat: Vec<bool>,
    pub grid: GridModel,
    pub mvsp: MvspOutput,
    pub trace: Vec<EmTraceRow>,
    pub history: Vec<EmIterate>,
    /// Summed over every MVSP run.
    pub domain_violations: usize,
    pub jitter_events: usize,
}

/// MVSP at the initial grid, then up to `i_max` rounds of
/// {M-step on delays and Dopplers; MVSP at the new grid}, stopping early once
/// the grid moves by less than `omega_tol`.
#[allow(clippy::too_many_arguments)]
pub fn run_em_mvsp(
    y: &[C64],
    sigma2: f64,
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    initial_grid: &GridModel,
    prior: &PriorParams,
    mvsp: &MvspConfig,
    config: &EmConfig,
) -> Result<EmOutput> {
    config.validate()?;
    let shape = Shape::new(initial_grid.devices(), initial_grid.delays(), initial_grid.dopplers());
    let solve = |grid: &GridModel| -> Result<MvspOutput> {
        let a = build_a(grid, pilots, ofdm)?;
        run_mvsp(a.matrix(), y, sigma2, shape, prior, mvsp)
    };
    let mut grid = initial_grid.clone();
    let mut out = solve(&grid)?;
    let mut domain_violations = out.diagnostics.domain_violations;
    let mut jitter_events = out.diagnostics.jitter_events;
    let mut history = vec![EmIterate {
        grid: grid.clone(),
        h_hat: out.h_hat.clone(),
        alpha_hat: out.alpha_hat.clone(),
    }];
    let mut trace = Vec::new();
    for iteration in 0..config.i_max {
        let (next, step) = m_step(&grid, &out.state.m, &out.state.phi, y, pilots, ofdm, config)?;
        let delta = omega_distance_sqr(&grid, &next);
        grid = next;
        out = solve(&grid)?;
        domain_violations += out.diagnostics.domain_violations;
        jitter_events += out.diagnostics.jitter_events;
        history.push(EmIterate {
            grid: grid.clone(),
            h_hat: out.h_hat.clone(),
            alpha_hat: out.alpha_hat.clone(),
        });
        trace.push(EmTraceRow {
            iteration,
            step,
            delta_omega_sqr: delta,
        });
        if delta < config.omega_tol {
            break;
        }
    }
    Ok(EmOutput {
        h_hat: out.h_hat.clone(),
        alpha_hat: out.alpha_hat.clone(),
        grid,
        mvsp: out,
        trace,
        history,
        domain_violations,
        jitter_events,
    })
}
