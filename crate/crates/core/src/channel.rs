//! Ground-truth device activity, multipath realizations and the exact
//! per-super-symbol channel matrices `G_u`.

use alloc::vec::Vec;

use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dictionary::doppler_coeff;
use crate::linalg::CMatrix;
use crate::math::{cis_cycles, complex_gaussian};
use crate::pilots::OfdmConfig;
use crate::{Error, Result, C64};

pub const EARTH_RADIUS: f64 = 6_371_000.0;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    /// Seconds.
    pub delay: f64,
    /// Hertz.
    pub doppler: f64,
    pub gain: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRealization {
    pub active: bool,
    pub paths: Vec<PathParams>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioGeometry {
    /// Meters.
    pub orbit_altitude: f64,
    /// Meters per second.
    pub satellite_speed: f64,
    /// Meters.
    pub beam_diameter: f64,
    /// Degrees, in `(0, 90]`.
    pub elevation_angle: f64,
    /// Hertz.
    pub carrier_frequency: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        Self {
            orbit_altitude: 600e3,
            satellite_speed: 7e3,
            beam_diameter: 50e3,
            elevation_angle: 50.0,
            carrier_frequency: 14e9,
        }
    }
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("orbit_altitude", self.orbit_altitude),
            ("carrier_frequency", self.carrier_frequency),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    expected: "> 0",
                });
            }
        }
        let non_negative = [
            ("satellite_speed", self.satellite_speed),
            ("beam_diameter", self.beam_diameter),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    expected: ">= 0",
                });
            }
        }
        if !(self.elevation_angle > 0.0 && self.elevation_angle <= 90.0) {
            return Err(Error::ParameterDomain {
                name: "elevation_angle",
                value: self.elevation_angle,
                expected: "in (0, 90] degrees",
            });
        }
        Ok(())
    }
}

/// Width of the residual Doppler interval left after compensating the beam
/// center: `f_c v / c |cos θ_A - cos θ_B|`, where `θ` is the angle between the
/// satellite velocity and the line of sight to the near (`A`) and far (`B`)
/// beam edges. The satellite moves horizontally in the orbital plane and the
/// near edge is seen at the configured elevation angle.
pub fn geometry_residual_doppler(geom: &ScenarioGeometry) -> Result<f64> {
    geom.validate()?;
    let orbit = EARTH_RADIUS + geom.orbit_altitude;
    let elevation = geom.elevation_angle.to_radians();
    let phi_a = (EARTH_RADIUS * elevation.cos() / orbit).acos() - elevation;
    let phi_b = phi_a + geom.beam_diameter / EARTH_RADIUS;
    let cos_theta = |phi: f64| {
        let (px, py) = (EARTH_RADIUS * phi.sin(), EARTH_RADIUS * phi.cos());
        px / (px * px + (py - orbit) * (py - orbit)).sqrt()
    };
    let spread = (cos_theta(phi_a) - cos_theta(phi_b)).abs();
    Ok(geom.carrier_frequency * geom.satellite_speed / SPEED_OF_LIGHT * spread)
}

/// Each entry independently `true` with probability `rho`.
pub fn sample_activity<R: Rng + ?Sized>(k: usize, rho: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::ParameterDomain {
            name: "rho",
            value: rho,
            expected: "in [0, 1]",
        });
    }
    Ok((0..k).map(|_| rng.random::<f64>() < rho).collect())
}

/// Mean power of each tap as a function of its delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerProfile {
    Uniform,
    /// `w ∝ exp(-delay / decay)`, `decay` in seconds.
    Exponential { decay: f64 },
}

impl PowerProfile {
    /// Per-path mean powers, normalized to sum to one.
    pub fn weights(&self, delays: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = match *self {
            PowerProfile::Uniform => delays.iter().map(|_| 1.0).collect(),
            PowerProfile::Exponential { decay } => {
                delays.iter().map(|d| (-d / decay).exp()).collect()
            }
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Statistics of one device's multipath channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub num_paths: usize,
    /// Seconds; delays fall in `[0, delay_spread)`.
    pub delay_spread: f64,
    /// Hertz; Dopplers fall in `[-nu_max / 2, nu_max / 2)`.
    pub nu_max: f64,
    pub profile: PowerProfile,
}

impl PathSpec {
    pub fn validate(&self, cyclic_prefix: f64) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::ParameterDomain {
                name: "num_paths",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if !(self.delay_spread >= 0.0 && self.delay_spread.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "delay_spread",
                value: self.delay_spread,
                expected: ">= 0",
            });
        }
        if self.delay_spread > cyclic_prefix {
            return Err(Error::CyclicPrefixViolated {
                delay_spread: self.delay_spread,
                cyclic_prefix,
            });
        }
        if !(self.nu_max >= 0.0 && self.nu_max.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "nu_max",
                value: self.nu_max,
                expected: ">= 0",
            });
        }
        if let PowerProfile::Exponential { decay } = self.profile {
            if !(decay > 0.0) {
                return Err(Error::ParameterDomain {
                    name: "decay",
                    value: decay,
                    expected: "> 0",
                });
            }
        }
        Ok(())
    }
}

/// Draws one device's paths. The first path has zero delay; the others are
/// uniform in `[0, delay_spread)` and the list is sorted by delay. Gains are
/// `CN(0, w_p)` with `w` from the power profile, so the mean total power is 1.
pub fn sample_paths<R: Rng + ?Sized>(
    spec: &PathSpec,
    cyclic_prefix: f64,
    rng: &mut R,
) -> Result<Vec<PathParams>> {
    spec.validate(cyclic_prefix)?;
    let mut delays: Vec<f64> = (0..spec.num_paths)
        .map(|p| {
            if p == 0 {
                0.0
            } else {
                rng.random::<f64>() * spec.delay_spread
            }
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    let weights = spec.profile.weights(&delays);
    Ok(delays
        .into_iter()
        .zip(weights)
        .map(|(delay, w)| {
            let doppler = (rng.random::<f64>() - 0.5) * spec.nu_max;
            PathParams {
                delay,
                doppler,
                gain: complex_gaussian(rng, w),
            }
        })
        .collect())
}

/// Activity for every device, then paths for every device (active or not, so
/// the draw count does not depend on the activity pattern).
pub fn sample_devices<R: Rng + ?Sized>(
    k: usize,
    rho: f64,
    spec: &PathSpec,
    cyclic_prefix: f64,
    rng: &mut R,
) -> Result<Vec<DeviceRealization>> {
    let activity = sample_activity(k, rho, rng)?;
    activity
        .into_iter()
        .map(|active| {
            Ok(DeviceRealization {
                active,
                paths: sample_paths(spec, cyclic_prefix, rng)?,
            })
        })
        .collect()
}

/// `G_u` of size `NM x MK`; column `m K + k`, row `n`.
pub fn build_true_channel_matrix(
    devices: &[DeviceRealization],
    ofdm: &OfdmConfig,
    u: usize,
) -> Result<CMatrix> {
    let k_total = devices.len();
    let (big_m, rows) = (ofdm.subcarriers, ofdm.bins());
    let mut g = CMatrix::zeros(rows, big_m * k_total);
    for (k, dev) in devices.iter().enumerate() {
        if !dev.active {
            continue;
        }
        for path in &dev.paths {
            if path.delay > ofdm.cyclic_prefix {
                return Err(Error::CyclicPrefixViolated {
                    delay_spread: path.delay,
                    cyclic_prefix: ofdm.cyclic_prefix,
                });
            }
            for m in 0..big_m {
                let weight = path.gain
                    * cis_cycles(-(m as f64) * ofdm.subcarrier_spacing * path.delay);
                for n in 0..rows {
                    g[(n, m * k_total + k)] += weight * doppler_coeff(path.doppler, m, n, u, ofdm);
                }
            }
        }
    }
    Ok(g)
}

/// `[G_0, ..., G_{U-1}]`.
pub fn build_true_channels(devices: &[DeviceRealization], ofdm: &OfdmConfig) -> Result<Vec<CMatrix>> {
    (0..ofdm.super_symbols)
        .map(|u| build_true_channel_matrix(devices, ofdm, u))
        .collect()
}
