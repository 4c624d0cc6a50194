//! Experiment configuration: TOML with one table per concern. A preset
//! supplies every value; a config file overrides any subset of keys. Unknown
//! keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use gfra_core::baselines::SblConfig;
use gfra_core::channel::{geometry_residual_doppler, PathSpec, PowerProfile, ScenarioGeometry};
use gfra_core::em::{EmConfig, GradMode};
use gfra_core::mvsp::{MvspConfig, PriorParams};
use gfra_core::pilots::OfdmConfig;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mvsp,
    EmMvsp,
    Omp,
    Sbl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Mvsp, Algorithm::EmMvsp, Algorithm::Omp, Algorithm::Sbl];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mvsp => "mvsp",
            Algorithm::EmMvsp => "em_mvsp",
            Algorithm::Omp => "omp",
            Algorithm::Sbl => "sbl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| SimError::Config(format!("unknown algorithm `{s}` (expected mvsp, em_mvsp, omp or sbl)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// True paths are moved to their nearest grid point.
    OnGrid,
    OffGrid,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::OnGrid => "on_grid",
            Mode::OffGrid => "off_grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(SimError::Config(format!("unknown preset `{other}` (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Fill `wall_seconds`; off by default so output bytes depend only on
    /// the configuration.
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub orbit_altitude: f64,
    pub satellite_speed: f64,
    pub beam_diameter: f64,
    pub elevation_angle: f64,
    pub carrier_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub devices: usize,
    pub activity: f64,
    pub paths: usize,
    pub delay_spread: f64,
    pub profile: ProfileKind,
    /// Seconds; only read for the exponential profile.
    pub decay: f64,
    /// Hertz. Derived from `geometry` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
    pub geometry: GeometrySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub subcarriers: usize,
    pub repetitions: usize,
    pub super_symbols: usize,
    pub subcarrier_spacing: f64,
    pub cyclic_prefix: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub delays: usize,
    pub dopplers: usize,
    /// Seconds; defaults to the scenario delay spread.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    /// Hertz; defaults to the scenario Doppler width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Activity prior used by the receiver; defaults to the scenario's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub rho_s: f64,
    pub beta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub kappa_init: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvspSection {
    pub t_out: usize,
    pub t_in1: usize,
    pub t_in2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradKind {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    pub i_max: usize,
    pub omega_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub max_line_search: usize,
    pub descent_steps: usize,
    pub grad_mode: GradKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// Defaults to `ceil(1.5 K ρ P)`, capped at `min(R, Q)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omp_max_atoms: Option<usize>,
    /// OMP stops once `||r|| <= factor · sqrt(R σ²)`.
    pub omp_residual_factor: f64,
    pub sbl_max_iter: usize,
    pub sbl_prune_tol: f64,
    pub sbl_tol: f64,
    /// A device is active iff its block energy exceeds this fraction of the
    /// largest block energy.
    pub activity_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub scenario: ScenarioSection,
    pub ofdm: OfdmSection,
    pub grid: GridSection,
    pub prior: PriorSection,
    pub mvsp: MvspSection,
    pub em: EmSection,
    pub baselines: BaselineSection,
}

impl ExperimentConfig {
    /// Desk-scale setting: 50 devices, 16 subcarriers, `N = 4`, `U = 3`,
    /// a 4 x 8 grid and 20 trials.
    pub fn desk() -> Self {
        let geometry = ScenarioGeometry::default();
        Self {
            experiment: ExperimentSection {
                mode: Mode::OnGrid,
                snr_db: vec![24.0],
                trials: 20,
                seed: 2024,
                algorithms: Algorithm::ALL.to_vec(),
                record_wall_time: false,
            },
            scenario: ScenarioSection {
                devices: 50,
                activity: 0.1,
                paths: 3,
                delay_spread: 0.5e-6,
                profile: ProfileKind::Exponential,
                decay: 0.25e-6,
                nu_max: None,
                geometry: GeometrySection {
                    orbit_altitude: geometry.orbit_altitude,
                    satellite_speed: geometry.satellite_speed,
                    beam_diameter: geometry.beam_diameter,
                    elevation_angle: geometry.elevation_angle,
                    carrier_frequency: geometry.carrier_frequency,
                },
            },
            ofdm: OfdmSection {
                subcarriers: 16,
                repetitions: 4,
                super_symbols: 3,
                subcarrier_spacing: 15e3,
                cyclic_prefix: 2e-6,
            },
            grid: GridSection {
                delays: 4,
                dopplers: 8,
                tau_max: None,
                nu_max: None,
            },
            prior: PriorSection {
                rho: None,
                rho_s: 0.3,
                beta: 0.2,
                theta1: 0.5,
                theta2: 2.0,
                kappa_init: 1.0,
            },
            mvsp: MvspSection {
                t_out: 15,
                t_in1: 2,
                t_in2: 4,
            },
            em: EmSection {
                i_max: 4,
                omega_tol: 1e-6,
                step_init: 0.25,
                backtrack_factor: 0.5,
                max_line_search: 10,
                descent_steps: 5,
                grad_mode: GradKind::Analytic,
            },
            baselines: BaselineSection {
                omp_max_atoms: None,
                omp_residual_factor: 1.0,
                sbl_max_iter: 50,
                sbl_prune_tol: 1e-8,
                sbl_tol: 1e-6,
                activity_fraction: 0.1,
            },
        }
    }

    /// Full-scale setting: 200 devices, 32 subcarriers, 100 trials.
    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.scenario.devices = 200;
        cfg.ofdm.subcarriers = 32;
        cfg.experiment.trials = 100;
        cfg.experiment.snr_db = vec![10.0, 14.0, 18.0, 22.0, 26.0, 30.0];
        cfg
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self::desk(),
            Preset::Paper => Self::paper(),
        }
    }

    /// `text` overrides the preset key by key.
    pub fn from_toml_str(text: &str, base: Preset) -> Result<Self, SimError> {
        let overrides: toml::Table = text.parse().map_err(|e| SimError::Config(format!("{e}")))?;
        let mut merged = toml::Table::try_from(Self::preset(base)).map_err(|e| SimError::Config(e.to_string()))?;
        merge(&mut merged, overrides);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, base: Preset) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let e = &self.experiment;
        if e.trials == 0 {
            return Err(SimError::Config("experiment.trials must be >= 1".into()));
        }
        if e.snr_db.is_empty() || e.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(SimError::Config("experiment.snr_db must be a non-empty list of finite values".into()));
        }
        if e.algorithms.is_empty() {
            return Err(SimError::Config("experiment.algorithms must not be empty".into()));
        }
        if self.scenario.devices == 0 {
            return Err(SimError::Config("scenario.devices must be >= 1".into()));
        }
        if self.grid.delays == 0 || self.grid.dopplers == 0 {
            return Err(SimError::Config("grid.delays and grid.dopplers must be >= 1".into()));
        }
        self.ofdm()?;
        self.path_spec()?.validate(self.ofdm.cyclic_prefix)?;
        self.prior()?.validate()?;
        self.em().validate()?;
        if !(self.tau_max()? > 0.0) {
            return Err(SimError::Config("grid.tau_max must be > 0".into()));
        }
        if !(self.baselines.activity_fraction >= 0.0 && self.baselines.activity_fraction < 1.0) {
            return Err(SimError::Config("baselines.activity_fraction must be in [0, 1)".into()));
        }
        if self.baselines.sbl_max_iter == 0 {
            return Err(SimError::Config("baselines.sbl_max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn ofdm(&self) -> Result<OfdmConfig, SimError> {
        let o = &self.ofdm;
        Ok(OfdmConfig::new(
            o.subcarriers,
            o.repetitions,
            o.super_symbols,
            o.subcarrier_spacing,
            o.cyclic_prefix,
        )?)
    }

    pub fn geometry(&self) -> ScenarioGeometry {
        let g = &self.scenario.geometry;
        ScenarioGeometry {
            orbit_altitude: g.orbit_altitude,
            satellite_speed: g.satellite_speed,
            beam_diameter: g.beam_diameter,
            elevation_angle: g.elevation_angle,
            carrier_frequency: g.carrier_frequency,
        }
    }

    /// Width of the true Doppler interval.
    pub fn scenario_nu_max(&self) -> Result<f64, SimError> {
        match self.scenario.nu_max {
            Some(v) => Ok(v),
            None => Ok(geometry_residual_doppler(&self.geometry())?),
        }
    }

    pub fn path_spec(&self) -> Result<PathSpec, SimError> {
        let s = &self.scenario;
        Ok(PathSpec {
            num_paths: s.paths,
            delay_spread: s.delay_spread,
            nu_max: self.scenario_nu_max()?,
            profile: match s.profile {
                ProfileKind::Uniform => PowerProfile::Uniform,
                ProfileKind::Exponential => PowerProfile::Exponential { decay: s.decay },
            },
        })
    }

    pub fn tau_max(&self) -> Result<f64, SimError> {
        Ok(self.grid.tau_max.unwrap_or(self.scenario.delay_spread))
    }

    pub fn grid_nu_max(&self) -> Result<f64, SimError> {
        match self.grid.nu_max {
            Some(v) => Ok(v),
            None => self.scenario_nu_max(),
        }
    }

    pub fn prior(&self) -> Result<PriorParams, SimError> {
        let p = &self.prior;
        Ok(PriorParams {
            rho: p.rho.unwrap_or(self.scenario.activity),
            rho_s: p.rho_s,
            beta: p.beta,
            theta1: p.theta1,
            theta2: p.theta2,
            kappa_init: p.kappa_init,
        })
    }

    pub fn mvsp(&self) -> MvspConfig {
        MvspConfig {
            t_out: self.mvsp.t_out,
            t_in1: self.mvsp.t_in1,
            t_in2: self.mvsp.t_in2,
        }
    }

    pub fn em(&self) -> EmConfig {
        let e = &self.em;
        EmConfig {
            i_max: e.i_max,
            omega_tol: e.omega_tol,
            step_init: e.step_init,
            backtrack_factor: e.backtrack_factor,
            max_line_search: e.max_line_search,
            descent_steps: e.descent_steps,
            grad_mode: match e.grad_mode {
                GradKind::Analytic => GradMode::Analytic,
                GradKind::FiniteDifference => GradMode::FiniteDifference,
            },
        }
    }

    pub fn sbl(&self) -> SblConfig {
        SblConfig {
            max_iter: self.baselines.sbl_max_iter,
            prune_tol: self.baselines.sbl_prune_tol,
            tol: self.baselines.sbl_tol,
        }
    }

    /// OMP atom budget for a problem with `rows` measurements.
    pub fn omp_max_atoms(&self, rows: usize) -> usize {
        let s = &self.scenario;
        let cols = s.devices * self.grid.delays * self.grid.dopplers;
        let default = (1.5 * s.devices as f64 * s.activity * s.paths as f64).ceil() as usize;
        self.baselines
            .omp_max_atoms
            .unwrap_or(default.max(1))
            .min(rows.min(cols))
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for preset in [Preset::Desk, Preset::Paper] {
            let cfg = ExperimentConfig::preset(preset);
            let text = cfg.to_toml_string();
            assert_eq!(ExperimentConfig::from_toml_str(&text, Preset::Desk).unwrap(), cfg);
        }
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ExperimentConfig::from_toml_str("[ofdm]\nrepetitions = 1\nsuper_symbols = 12\n", Preset::Desk).unwrap();
        assert_eq!((cfg.ofdm.repetitions, cfg.ofdm.super_symbols), (1, 12));
        assert_eq!(cfg.scenario.devices, 50);
        assert!(ExperimentConfig::from_toml_str("[ofdm]\nrepetition = 1\n", Preset::Desk).is_err());
        assert!(ExperimentConfig::from_toml_str("trials = 3\n", Preset::Desk).is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nalgorithms = [\"amp\"]\n", Preset::Desk).is_err());
    }

    #[test]
    fn cyclic_prefix_is_checked() {
        let err = ExperimentConfig::from_toml_str("[scenario]\ndelay_spread = 3e-6\n", Preset::Desk);
        assert!(err.is_err());
    }

    #[test]
    fn omp_budget() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(cfg.omp_max_atoms(192), 23);
        assert_eq!(cfg.omp_max_atoms(10), 10);
    }
}
