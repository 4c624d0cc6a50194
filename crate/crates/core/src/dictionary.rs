//! Grid-based parametric channel model.
//!
//! Every device owns an `L`-point delay grid and a `J`-point Doppler grid.
//! The sparse representation `h` is laid out device-major, then delay-major,
//! then Doppler: entry `k L J + l J + j`. Row `u N M + n` of the measurement
//! matrix `A` maps `h` to demodulated bin `n` of super-symbol `u`.

use alloc::vec;
use alloc::vec::Vec;



use crate::channel::{DeviceRealization, PathParams};
use crate::error::check_dim;
use crate::linalg::CMatrix;
use crate::math::{cis_cycles, sinc, sinc_derivative};
use crate::pilots::{OfdmConfig, PilotBook};
use crate::{Error, Result, C64};

/// Per-device delay and Doppler grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    devices: usize,
    delays: usize,
    dopplers: usize,
    tau_max: f64,
    nu_max: f64,
    tau: Vec<f64>,
    nu: Vec<f64>,
}

/// Uniform grids `τ_l = l τ_max / L` and `ν_j = -ν_max / 2 + j ν_max / J`,
/// the same for every device.
pub fn init_grid(k: usize, l: usize, j: usize, tau_max: f64, nu_max: f64) -> Result<GridModel> {
    for (name, v) in [("K", k), ("L", l), ("J", j)] {
        if v == 0 {
            return Err(Error::ParameterDomain {
                name,
                value: 0.0,
                expected: ">= 1",
            });
        }
    }
    for (name, v) in [("tau_max", tau_max), ("nu_max", nu_max)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::ParameterDomain {
                name,
                value: v,
                expected: ">= 0",
            });
        }
    }
    let tau_row: Vec<f64> = (0..l).map(|i| i as f64 * tau_max / l as f64).collect();
    let nu_row: Vec<f64> = (0..j)
        .map(|i| -nu_max / 2.0 + i as f64 * nu_max / j as f64)
        .collect();
    Ok(GridModel {
        devices: k,
        delays: l,
        dopplers: j,
        tau_max,
        nu_max,
        tau: tau_row.repeat(k),
        nu: nu_row.repeat(k),
    })
}

impl GridModel {
    pub fn devices(&self) -> usize {
        self.devices
    }

    /// `L`
    pub fn delays(&self) -> usize {
        self.delays
    }

    /// `J`
    pub fn dopplers(&self) -> usize {
        self.dopplers
    }

    /// `L J`
    pub fn block(&self) -> usize {
        self.delays * self.dopplers
    }

    /// `Q = K L J`
    pub fn len(&self) -> usize {
        self.devices * self.block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    /// Initial delay spacing `τ_max / L`.
    pub fn tau_spacing(&self) -> f64 {
        self.tau_max / self.delays as f64
    }

    /// Initial Doppler spacing `ν_max / J`.
    pub fn nu_spacing(&self) -> f64 {
        self.nu_max / self.dopplers as f64
    }

    pub fn tau(&self, k: usize) -> &[f64] {
        &self.tau[k * self.delays..(k + 1) * self.delays]
    }

    pub fn nu(&self, k: usize) -> &[f64] {
        &self.nu[k * self.dopplers..(k + 1) * self.dopplers]
    }

    pub fn tau_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.tau[k * self.delays..(k + 1) * self.delays]
    }

    pub fn nu_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.nu[k * self.dopplers..(k + 1) * self.dopplers]
    }

    /// All delays, device-major.
    pub fn tau_all(&self) -> &[f64] {
        &self.tau
    }

    /// All Dopplers, device-major.
    pub fn nu_all(&self) -> &[f64] {
        &self.nu
    }

    pub fn tau_all_mut(&mut self) -> &mut [f64] {
        &mut self.tau
    }

    pub fn nu_all_mut(&mut self) -> &mut [f64] {
        &mut self.nu
    }

    /// Index of `(k, l, j)` in `h`.
    pub fn index(&self, k: usize, l: usize, j: usize) -> usize {
        k * self.block() + l * self.dopplers + j
    }

    /// Delay coordinates inside `[0, τ_max)`, Dopplers inside
    /// `[-ν_max / 2, ν_max / 2)`, both strictly increasing per device.
    pub fn validate(&self) -> Result<()> {
        let increasing = |row: &[f64]| row.windows(2).all(|w| w[0] < w[1]);
        for k in 0..self.devices {
            for &t in self.tau(k) {
                if !(t >= 0.0 && (t < self.tau_max || self.tau_max == 0.0)) {
                    return Err(Error::ParameterDomain {
                        name: "tau",
                        value: t,
                        expected: "in [0, tau_max)",
                    });
                }
            }
            for &v in self.nu(k) {
                if !(v >= -self.nu_max / 2.0 && (v < self.nu_max / 2.0 || self.nu_max == 0.0)) {
                    return Err(Error::ParameterDomain {
                        name: "nu",
                        value: v,
                        expected: "in [-nu_max/2, nu_max/2)",
                    });
                }
            }
            if (self.tau_max > 0.0 && !increasing(self.tau(k)))
                || (self.nu_max > 0.0 && !increasing(self.nu(k)))
            {
                return Err(Error::ParameterDomain {
                    name: "grid",
                    value: k as f64,
                    expected: "strictly increasing per device",
                });
            }
        }
        Ok(())
    }
}

/// `(1 / NT) ∫ e^{j2πνt} e^{j2π(m - n/N)Δf t} dt` over the window of
/// super-symbol `u`, i.e. `e^{j2πf(uT̄ + NT/2)} sinc(f NT)` with
/// `f = ν + (m - n/N) Δf`.
pub fn doppler_coeff(nu: f64, m: usize, n: usize, u: usize, ofdm: &OfdmConfig) -> C64 {
    let (f, t0, width) = coeff_args(nu, m, n, u, ofdm);
    cis_cycles(f * t0) * sinc(f * width)
}

/// Derivative of [`doppler_coeff`] with respect to `ν`.
pub fn doppler_coeff_derivative(nu: f64, m: usize, n: usize, u: usize, ofdm: &OfdmConfig) -> C64 {
    let (f, t0, width) = coeff_args(nu, m, n, u, ofdm);
    let phase = cis_cycles(f * t0);
    let two_pi = 2.0 * core::f64::consts::PI;
    phase * C64::new(width * sinc_derivative(f * width), two_pi * t0 * sinc(f * width))
}

fn coeff_args(nu: f64, m: usize, n: usize, u: usize, ofdm: &OfdmConfig) -> (f64, f64, f64) {
    let big_n = ofdm.repetitions as f64;
    let f = nu + (m as f64 - n as f64 / big_n) * ofdm.subcarrier_spacing;
    let width = ofdm.window();
    let t0 = u as f64 * ofdm.super_symbol_duration() + width / 2.0;
    (f, t0, width)
}

/// `b_{k,m} = [e^{-j2π m Δf τ_l}]_l`.
pub fn delay_steering(tau: &[f64], m: usize, ofdm: &OfdmConfig) -> Vec<C64> {
    tau.iter()
        .map(|t| cis_cycles(-(m as f64) * ofdm.subcarrier_spacing * t))
        .collect()
}

/// `A(ω)` together with everything needed to regenerate it.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    matrix: CMatrix,
    grid: GridModel,
    pilots: PilotBook,
    ofdm: OfdmConfig,
}

impl MeasurementMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn pilots(&self) -> &PilotBook {
        &self.pilots
    }

    pub fn ofdm(&self) -> &OfdmConfig {
        &self.ofdm
    }

    /// Rebuilds from the stored inputs.
    pub fn regenerate(&self) -> Result<MeasurementMatrix> {
        build_a(&self.grid, &self.pilots, &self.ofdm)
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

pub fn build_a(grid: &GridModel, pilots: &PilotBook, ofdm: &OfdmConfig) -> Result<MeasurementMatrix> {
    pilots.check_shape(grid.devices(), ofdm)?;
    let matrix = assemble(grid, pilots, ofdm, Factor::Plain);
    Ok(MeasurementMatrix {
        matrix,
        grid: grid.clone(),
        pilots: pilots.clone(),
        ofdm: *ofdm,
    })
}

/// Column-wise derivatives of `A`: column `(k, l, j)` of the first matrix is
/// `∂a_{k,l,j} / ∂τ_{k,l}`, of the second `∂a_{k,l,j} / ∂ν_{k,j}`.
pub fn build_a_derivatives(
    grid: &GridModel,
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
) -> Result<(CMatrix, CMatrix)> {
    pilots.check_shape(grid.devices(), ofdm)?;
    Ok((
        assemble(grid, pilots, ofdm, Factor::DelayDerivative),
        assemble(grid, pilots, ofdm, Factor::DopplerDerivative),
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Factor {
    Plain,
    DelayDerivative,
    DopplerDerivative,
}

fn assemble(grid: &GridModel, pilots: &PilotBook, ofdm: &OfdmConfig, factor: Factor) -> CMatrix {
    let lj = grid.block();
    let mut a = CMatrix::zeros(ofdm.measurements(), grid.len());
    for k in 0..grid.devices() {
        let block = assemble_block(grid, pilots, ofdm, k, factor);
        for r in 0..a.rows() {
            a.row_mut(r)[k * lj..(k + 1) * lj].copy_from_slice(block.row(r));
        }
    }
    a
}

/// The `R x LJ` columns of device `k`.
pub fn device_columns(grid: &GridModel, pilots: &PilotBook, ofdm: &OfdmConfig, k: usize) -> CMatrix {
    assemble_block(grid, pilots, ofdm, k, Factor::Plain)
}

fn assemble_block(
    grid: &GridModel,
    pilots: &PilotBook,
    ofdm: &OfdmConfig,
    k: usize,
    factor: Factor,
) -> CMatrix {
    let (big_l, big_j) = (grid.delays(), grid.dopplers());
    let (big_m, bins) = (ofdm.subcarriers, ofdm.bins());
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut out = CMatrix::zeros(ofdm.measurements(), grid.block());

    // b_{k,m,l}, optionally times -j2π m Δf.
    let mut steering = Vec::with_capacity(big_m * big_l);
    for m in 0..big_m {
        let scale = if factor == Factor::DelayDerivative {
            C64::new(0.0, -two_pi * m as f64 * ofdm.subcarrier_spacing)
        } else {
            C64::new(1.0, 0.0)
        };
        steering.extend(delay_steering(grid.tau(k), m, ofdm).into_iter().map(|v| v * scale));
    }

    // The coefficient depends on (m, n) only through d = N m - n, so each
    // (u, j) needs one table over d + offset.
    let nu = grid.nu(k);
    let big_n = ofdm.repetitions;
    let offset = bins - 1;
    let span = offset + big_n * (big_m - 1) + 1;
    let mut table = vec![C64::new(0.0, 0.0); big_j * span];
    let mut xc = vec![C64::new(0.0, 0.0); big_j];
    for u in 0..ofdm.super_symbols {
        let mut filled = vec![false; span];
        for m in 0..big_m {
            for n in 0..bins {
                let d = big_n * m + offset - n;
                if filled[d] {
                    continue;
                }
                filled[d] = true;
                for (j, &v) in nu.iter().enumerate() {
                    table[j * span + d] = if factor == Factor::DopplerDerivative {
                        doppler_coeff_derivative(v, m, n, u, ofdm)
                    } else {
                        doppler_coeff(v, m, n, u, ofdm)
                    };
                }
            }
        }
        for n in 0..bins {
            let row = out.row_mut(u * bins + n);
            for m in 0..big_m {
                let x = pilots.get(k, m, u);
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                let d = big_n * m + offset - n;
                for (j, slot) in xc.iter_mut().enumerate() {
                    *slot = x * table[j * span + d];
                }
                let b = &steering[m * big_l..(m + 1) * big_l];
                for (l, bl) in b.iter().enumerate() {
                    for (dst, c) in row[l * big_j..(l + 1) * big_j].iter_mut().zip(&xc) {
                        *dst += bl * c;
                    }
                }
            }
        }
    }
    out
}

/// Sparse channel vector `h` of length `K L J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRepresentation {
    pub h: Vec<C64>,
}

fn nearest(row: &[f64], value: f64) -> (usize, f64) {
    row.iter()
        .enumerate()
        .map(|(i, &g)| (i, (g - value).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::INFINITY))
}

/// Moves every path to the nearest grid point of its device.
pub fn snap_to_grid(devices: &[DeviceRealization], grid: &GridModel) -> Result<Vec<DeviceRealization>> {
    check_dim("grid devices", devices.len(), grid.devices())?;
    Ok(devices
        .iter()
        .enumerate()
        .map(|(k, dev)| DeviceRealization {
            active: dev.active,
            paths: dev
                .paths
                .iter()
                .map(|p| PathParams {
                    delay: grid.tau(k)[nearest(grid.tau(k), p.delay).0],
                    doppler: grid.nu(k)[nearest(grid.nu(k), p.doppler).0],
                    gain: p.gain,
                })
                .collect(),
        })
        .collect())
}

/// Places each path gain of each active device at its grid index. Paths that
/// sit more than `1e-9` grid spacings from a grid point are rejected.
pub fn project_truth_to_grid(
    devices: &[DeviceRealization],
    grid: &GridModel,
) -> Result<SparseRepresentation> {
    check_dim("grid devices", devices.len(), grid.devices())?;
    const TOL: f64 = 1e-9;
    let mut h = vec![C64::new(0.0, 0.0); grid.len()];
    for (k, dev) in devices.iter().enumerate() {
        if !dev.active {
            continue;
        }
        for (p, path) in dev.paths.iter().enumerate() {
            let (l, dt) = nearest(grid.tau(k), path.delay);
            let (j, dv) = nearest(grid.nu(k), path.doppler);
            let tau_ok = dt <= TOL * grid.tau_spacing().max(f64::MIN_POSITIVE);
            let nu_ok = dv <= TOL * grid.nu_spacing().max(f64::MIN_POSITIVE);
            if !(tau_ok && nu_ok) {
                return Err(Error::OffGrid {
                    device: k,
                    path: p,
                    delay: path.delay,
                    doppler: path.doppler,
                });
            }
            h[grid.index(k, l, j)] += path.gain;
        }
    }
    Ok(SparseRepresentation { h })
}

/// `Ĝ_u` from an estimate `ĥ` and activity decisions `α̂`.
pub fn reconstruct_channel(
    h_hat: &[C64],
    alpha_hat: &[bool],
    grid: &GridModel,
    ofdm: &OfdmConfig,
    u: usize,
) -> Result<CMatrix> {
    check_dim("h_hat", grid.len(), h_hat.len())?;
    check_dim("alpha_hat", grid.devices(), alpha_hat.len())?;
    let k_total = grid.devices();
    let (big_l, big_j, lj) = (grid.delays(), grid.dopplers(), grid.block());
    let (big_m, bins) = (ofdm.subcarriers, ofdm.bins());
    let mut g = CMatrix::zeros(bins, big_m * k_total);
    let mut s = vec![C64::new(0.0, 0.0); big_j];
    for k in 0..k_total {
        let block = &h_hat[k * lj..(k + 1) * lj];
        if !alpha_hat[k] || block.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        for m in 0..big_m {
            let b = delay_steering(grid.tau(k), m, ofdm);
            for (j, sj) in s.iter_mut().enumerate() {
                *sj = (0..big_l).map(|l| b[l] * block[l * big_j + j]).sum();
            }
            for n in 0..bins {
                g[(n, m * k_total + k)] = grid
                    .nu(k)
                    .iter()
                    .zip(&s)
                    .map(|(&v, sj)| sj * doppler_coeff(v, m, n, u, ofdm))
                    .sum();
            }
        }
    }
    Ok(g)
}

/// `[Ĝ_0, ..., Ĝ_{U-1}]`.
pub fn reconstruct_channels(
    h_hat: &[C64],
    alpha_hat: &[bool],
    grid: &GridModel,
    ofdm: &OfdmConfig,
) -> Result<Vec<CMatrix>> {
    (0..ofdm.super_symbols)
        .map(|u| reconstruct_channel(h_hat, alpha_hat, grid, ofdm, u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_true_channels, PathParams};
    use crate::pilots::{generate_pilots, synthesize_received};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ofdm() -> OfdmConfig {
        OfdmConfig::new(4, 2, 2, 15e3, 2e-6).unwrap()
    }

    #[test]
    fn grid_formulas() {
        let g = init_grid(2, 1, 2, 1e-6, 2.0).unwrap();
        assert_eq!(g.tau(1), &[0.0]);
        assert_eq!(g.nu(0), &[-1.0, 0.0]);
        let g = init_grid(3, 7, 9, 0.5e-6, 9e3).unwrap();
        for k in 0..3 {
            let d: Vec<f64> = g.tau(k).windows(2).map(|w| w[1] - w[0]).collect();
            assert!(d.iter().all(|x| (x - d[0]).abs() < 1e-15));
            let d: Vec<f64> = g.nu(k).windows(2).map(|w| w[1] - w[0]).collect();
            assert!(d.iter().all(|x| (x - d[0]).abs() < 1e-15 * 9e3));
        }
        g.validate().unwrap();
        assert_eq!(g.index(2, 3, 4), 2 * 63 + 3 * 9 + 4);
        assert!(init_grid(1, 0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn coefficient_special_values() {
        let o = ofdm();
        assert!((doppler_coeff(0.0, 1, 2, 1, &o) - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(doppler_coeff(0.0, 1, 4, 1, &o).norm() < 1e-12);
        let half = 1.0 / (2.0 * o.window());
        let v = doppler_coeff(half, 2, 4, 0, &o).norm();
        assert!((v - 2.0 / core::f64::consts::PI).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let nu = (rng.random::<f64>() - 0.5) * 1e5;
            let c = doppler_coeff(nu, rng.random_range(0..4), rng.random_range(0..8), rng.random_range(0..2), &o);
            assert!(c.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn coefficient_derivative_matches_differences() {
        let o = ofdm();
        for &(nu, m, n, u) in &[(1234.5, 1, 3, 1), (-700.0, 3, 6, 0), (0.0, 2, 4, 1)] {
            let h = 1e-3;
            let fd = (doppler_coeff(nu + h, m, n, u, &o) - doppler_coeff(nu - h, m, n, u, &o)) / (2.0 * h);
            let an = doppler_coeff_derivative(nu, m, n, u, &o);
            assert!((fd - an).norm() <= 1e-6 * an.norm().max(1e-3), "{fd} vs {an}");
        }
    }

    #[test]
    fn steering_values() {
        let o = ofdm();
        assert!(delay_steering(&[0.0, 1e-7, 3e-7], 0, &o)
            .iter()
            .all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(delay_steering(&[0.0, 1e-7], 3, &o)[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn single_atom_collapses_to_pilots() {
        let o = ofdm();
        let grid = init_grid(1, 1, 1, 0.0, 0.0).unwrap();
        let pilots = generate_pilots(1, 4, 2, &mut ChaCha8Rng::seed_from_u64(3));
        let a = build_a(&grid, &pilots, &o).unwrap();
        for u in 0..2 {
            for n in 0..8 {
                let expect = if n % 2 == 0 { pilots.get(0, n / 2, u) } else { C64::new(0.0, 0.0) };
                assert!((a.matrix()[(u * 8 + n, 0)] - expect).norm() < 1e-12);
            }
        }
        let zero = pilots.scaled(0.0);
        assert_eq!(build_a(&grid, &zero, &o).unwrap().matrix().frobenius_norm_sqr(), 0.0);
        let again = a.regenerate().unwrap();
        assert_eq!(again.matrix(), a.matrix());
    }

    #[test]
    fn on_grid_model_consistency_and_round_trip() {
        let o = ofdm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = init_grid(3, 3, 4, 0.5e-6, 6e3).unwrap();
        let pilots = generate_pilots(3, 4, 2, &mut rng);
        let devices: Vec<DeviceRealization> = (0..3)
            .map(|k| DeviceRealization {
                active: k != 1,
                paths: (0..3)
                    .map(|_| PathParams {
                        delay: grid.tau(k)[rng.random_range(0..3)],
                        doppler: grid.nu(k)[rng.random_range(0..4)],
                        gain: C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    })
                    .collect(),
            })
            .collect();
        let h = project_truth_to_grid(&devices, &grid).unwrap().h;
        assert!(h[12..24].iter().all(|v| *v == C64::new(0.0, 0.0)));

        let g = build_true_channels(&devices, &o).unwrap();
        let y = synthesize_received(&g, &pilots, 0.0, &mut rng).unwrap();
        let ah = build_a(&grid, &pilots, &o).unwrap().matrix().mul_vec(&h);
        let err: f64 = y.iter().zip(&ah).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * norm);

        let alpha: Vec<bool> = devices.iter().map(|d| d.active).collect();
        let g_hat = reconstruct_channels(&h, &alpha, &grid, &o).unwrap();
        for (a, b) in g_hat.iter().zip(&g) {
            assert!(a.distance_sqr(b).sqrt() <= 1e-10 * b.frobenius_norm_sqr().sqrt());
        }
        let off = reconstruct_channel(&h, &[false; 3], &grid, &o, 0).unwrap();
        assert_eq!(off.frobenius_norm_sqr(), 0.0);
    }

    #[test]
    fn off_grid_paths_are_reported() {
        let grid = init_grid(1, 4, 4, 1e-6, 4e3).unwrap();
        let dev = DeviceRealization {
            active: true,
            paths: vec![PathParams {
                delay: 0.1e-6,
                doppler: 0.0,
                gain: C64::new(1.0, 0.0),
            }],
        };
        assert!(matches!(
            project_truth_to_grid(core::slice::from_ref(&dev), &grid),
            Err(Error::OffGrid { device: 0, path: 0, .. })
        ));
        let snapped = snap_to_grid(&[dev], &grid).unwrap();
        assert_eq!(snapped[0].paths[0].delay, 0.0);
        assert!(project_truth_to_grid(&snapped, &grid).is_ok());
    }
}
