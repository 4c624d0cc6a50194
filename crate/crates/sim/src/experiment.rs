//! Seeded Monte-Carlo trials over SNR points and algorithms.
//!
//! Trial `t` draws its scenario (activity, paths, pilots) from
//! `seed_for(master, [t])`, shared by every SNR point and algorithm; the
//! noise at SNR index `s` comes from `seed_for(master, [t, s])`. Trials run on
//! a rayon pool and are reduced in trial order, so results do not depend on
//! the thread count or scheduling.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gfra_core::baselines::{baseline_to_activity, omp, sbl, OmpConfig};
use gfra_core::channel::{build_true_channels, sample_devices, DeviceRealization};
use gfra_core::dictionary::{build_a, init_grid, reconstruct_channels, snap_to_grid, GridModel, MeasurementMatrix};
use gfra_core::em::{run_em_mvsp, EmTraceRow};
use gfra_core::linalg::CMatrix;
use gfra_core::metrics::{compute_nmse, compute_pe, NmseAccumulator};
use gfra_core::mvsp::{run_mvsp, MvspTraceRow, Shape};
use gfra_core::pilots::{calibrate_sigma2, generate_pilots, synthesize_received, PilotBook};
use gfra_core::{Result as CoreResult, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentConfig, Mode};
use crate::output::{write_em_trace, write_matrix_dump, write_mvsp_trace};
use crate::SimError;

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub rho: f64,
    pub l: usize,
    pub j: usize,
    pub m: usize,
    pub u: usize,
    /// `None` when no trial had a nonzero channel.
    pub nmse_db: Option<f64>,
    pub pe: f64,
    pub trials: usize,
    pub wall_seconds: f64,
}

/// A trial excluded from the averages of one (algorithm, SNR) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAbort {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub aborts: Vec<TrialAbort>,
    /// Probability or variance entries outside their domain, summed over
    /// every MVSP iteration of every run.
    pub domain_violations: usize,
    /// Linear-module calls that needed diagonal loading.
    pub jitter_events: usize,
    /// Accepted EM line-search steps that raised `G`.
    pub g_increases: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Per-run trace CSVs and a binary dump of each trial's `A`.
    pub trace_dir: Option<PathBuf>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// SplitMix64 finalizer folded over `words`.
pub fn seed_for(master: u64, words: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    words.iter().fold(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)), |acc, &w| {
        mix(acc ^ w.wrapping_add(0x9e37_79b9_7f4a_7c15))
    })
}

/// Everything drawn once per trial.
pub struct Scenario {
    pub devices: Vec<DeviceRealization>,
    pub pilots: PilotBook,
    pub grid: GridModel,
    pub channels: Vec<CMatrix>,
    pub a: MeasurementMatrix,
}

impl Scenario {
    pub fn activity(&self) -> Vec<bool> {
        self.devices.iter().map(|d| d.active).collect()
    }
}

pub fn draw_scenario(cfg: &ExperimentConfig, trial: usize) -> Result<Scenario, SimError> {
    let ofdm = cfg.ofdm()?;
    let spec = cfg.path_spec()?;
    let s = &cfg.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg.experiment.seed, &[trial as u64]));
    let mut devices = sample_devices(s.devices, s.activity, &spec, ofdm.cyclic_prefix, &mut rng)?;
    let pilots = generate_pilots(s.devices, ofdm.subcarriers, ofdm.super_symbols, &mut rng);
    let grid = init_grid(s.devices, cfg.grid.delays, cfg.grid.dopplers, cfg.tau_max()?, cfg.grid_nu_max()?)?;
    if cfg.experiment.mode == Mode::OnGrid {
        devices = snap_to_grid(&devices, &grid)?;
    }
    let channels = build_true_channels(&devices, &ofdm)?;
    let a = build_a(&grid, &pilots, &ofdm)?;
    Ok(Scenario {
        devices,
        pilots,
        grid,
        channels,
        a,
    })
}

/// Noise variance for `snr_db`. Without any active device the signal energy
/// is zero, so the level is set from the mean per-device pilot energy times
/// the expected number of active devices instead.
pub fn noise_variance(cfg: &ExperimentConfig, sc: &Scenario, snr_db: f64) -> Result<f64, SimError> {
    if sc.devices.iter().any(|d| d.active) {
        return Ok(calibrate_sigma2(&sc.channels, &sc.pilots, snr_db)?);
    }
    let k = cfg.scenario.devices as f64;
    let pilot_energy: f64 = sc.pilots.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / k;
    let expected = pilot_energy * (k * cfg.scenario.activity).max(1.0);
    let rows = sc.a.matrix().rows() as f64;
    Ok(expected / (rows * 10f64.powf(snr_db / 10.0)))
}

pub fn received(cfg: &ExperimentConfig, sc: &Scenario, trial: usize, snr_index: usize, sigma2: f64) -> Result<Vec<C64>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg.experiment.seed, &[trial as u64, snr_index as u64]));
    Ok(synthesize_received(&sc.channels, &sc.pilots, sigma2, &mut rng)?)
}

/// Result of one algorithm on one observation.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub h_hat: Vec<C64>,
    pub alpha_hat: Vec<bool>,
    pub grid: GridModel,
    pub domain_violations: usize,
    pub jitter_events: usize,
    pub mvsp_trace: Vec<MvspTraceRow>,
    pub em_trace: Vec<EmTraceRow>,
    /// NMSE in dB of each EM iterate, starting with plain MVSP.
    pub em_nmse_db: Vec<Option<f64>>,
}

pub fn estimate(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    algorithm: Algorithm,
    y: &[C64],
    sigma2: f64,
) -> Result<Estimate, SimError> {
    let ofdm = cfg.ofdm()?;
    let a = sc.a.matrix();
    let shape = Shape::new(sc.grid.devices(), sc.grid.delays(), sc.grid.dopplers());
    let block = sc.grid.block();
    let plain = |h_hat: Vec<C64>, alpha_hat: Vec<bool>| Estimate {
        h_hat,
        alpha_hat,
        grid: sc.grid.clone(),
        domain_violations: 0,
        jitter_events: 0,
        mvsp_trace: Vec::new(),
        em_trace: Vec::new(),
        em_nmse_db: Vec::new(),
    };
    Ok(match algorithm {
        Algorithm::Mvsp => {
            let out = run_mvsp(a, y, sigma2, shape, &cfg.prior()?, &cfg.mvsp())?;
            Estimate {
                domain_violations: out.diagnostics.domain_violations,
                jitter_events: out.diagnostics.jitter_events,
                mvsp_trace: out.diagnostics.trace.clone(),
                ..plain(out.h_hat, out.alpha_hat)
            }
        }
        Algorithm::EmMvsp => {
            let out = run_em_mvsp(y, sigma2, &sc.pilots, &ofdm, &sc.grid, &cfg.prior()?, &cfg.mvsp(), &cfg.em())?;
            let em_nmse_db = out
                .history
                .iter()
                .map(|it| {
                    let g_hat = reconstruct_channels(&it.h_hat, &it.alpha_hat, &it.grid, &ofdm)?;
                    compute_nmse(&g_hat, &sc.channels)
                })
                .collect::<CoreResult<Vec<_>>>()?;
            Estimate {
                h_hat: out.h_hat,
                alpha_hat: out.alpha_hat,
                grid: out.grid,
                domain_violations: out.domain_violations,
                jitter_events: out.jitter_events,
                mvsp_trace: out.mvsp.diagnostics.trace,
                em_trace: out.trace,
                em_nmse_db,
            }
        }
        Algorithm::Omp => {
            let omp_cfg = OmpConfig {
                max_atoms: cfg.omp_max_atoms(a.rows()),
                residual_tol: cfg.baselines.omp_residual_factor * (a.rows() as f64 * sigma2).sqrt(),
            };
            let r = omp(a, y, &omp_cfg)?;
            let alpha = baseline_to_activity(&r.h_hat, block, cfg.baselines.activity_fraction);
            plain(r.h_hat, alpha)
        }
        Algorithm::Sbl => {
            let r = sbl(a, y, sigma2, &cfg.sbl())?;
            let alpha = baseline_to_activity(&r.h_hat, block, cfg.baselines.activity_fraction);
            plain(r.h_hat, alpha)
        }
    })
}

struct Outcome {
    nmse: NmseAccumulator,
    alpha_hat: Vec<bool>,
    alpha_true: Vec<bool>,
    seconds: f64,
    domain_violations: usize,
    jitter_events: usize,
    g_increases: usize,
}

type Slot = std::result::Result<Outcome, String>;

fn run_trial(cfg: &ExperimentConfig, trial: usize, trace_dir: Option<&Path>) -> Result<Vec<Slot>, SimError> {
    let algorithms = &cfg.experiment.algorithms;
    let scenario = match draw_scenario(cfg, trial) {
        Ok(sc) => sc,
        Err(e) => {
            let slots = cfg.experiment.snr_db.len() * algorithms.len();
            return Ok((0..slots).map(|_| Err(format!("scenario: {e}"))).collect());
        }
    };
    if let Some(dir) = trace_dir {
        write_matrix_dump(&dir.join(format!("a_trial{trial}.bin")), scenario.a.matrix())?;
    }
    let ofdm = cfg.ofdm()?;
    let alpha_true = scenario.activity();
    let mut slots = Vec::new();
    for (s, &snr) in cfg.experiment.snr_db.iter().enumerate() {
        let observation = noise_variance(cfg, &scenario, snr)
            .and_then(|sigma2| Ok((sigma2, received(cfg, &scenario, trial, s, sigma2)?)));
        for &alg in algorithms {
            let slot = match &observation {
                Err(e) => Err(e.to_string()),
                Ok((sigma2, y)) => {
                    let start = Instant::now();
                    match estimate(cfg, &scenario, alg, y, *sigma2) {
                        Err(e) => Err(e.to_string()),
                        Ok(est) => {
                            let seconds = start.elapsed().as_secs_f64();
                            if let Some(dir) = trace_dir {
                                let stem = format!("t{trial}_s{s}_{alg}");
                                if !est.mvsp_trace.is_empty() {
                                    write_mvsp_trace(&dir.join(format!("mvsp_{stem}.csv")), &est.mvsp_trace)?;
                                }
                                if alg == Algorithm::EmMvsp {
                                    write_em_trace(&dir.join(format!("em_{stem}.csv")), &est.em_trace, &est.em_nmse_db)?;
                                }
                            }
                            let mut nmse = NmseAccumulator::new(ofdm.super_symbols);
                            reconstruct_channels(&est.h_hat, &est.alpha_hat, &est.grid, &ofdm)
                                .and_then(|g_hat| nmse.add(&g_hat, &scenario.channels))
                                .map(|()| Outcome {
                                    nmse,
                                    alpha_hat: est.alpha_hat,
                                    alpha_true: alpha_true.clone(),
                                    seconds,
                                    domain_violations: est.domain_violations,
                                    jitter_events: est.jitter_events,
                                    g_increases: est.em_trace.iter().map(|r| r.step.increases).sum(),
                                })
                                .map_err(|e| e.to_string())
                        }
                    }
                }
            };
            slots.push(slot);
        }
    }
    Ok(slots)
}

pub fn run_experiment(cfg: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput, SimError> {
    cfg.validate()?;
    if let Some(dir) = &options.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| SimError::Io(dir.display().to_string(), e))?;
    }
    let trace_dir = options.trace_dir.as_deref();
    let trials = cfg.experiment.trials;
    let work = || -> Result<Vec<Vec<Slot>>, SimError> {
        (0..trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t, trace_dir))
            .collect()
    };
    let per_trial = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    aggregate(cfg, per_trial)
}

fn aggregate(cfg: &ExperimentConfig, per_trial: Vec<Vec<Slot>>) -> Result<ExperimentOutput, SimError> {
    let algorithms = &cfg.experiment.algorithms;
    let ofdm = cfg.ofdm()?;
    let mut records = Vec::new();
    let mut aborts = Vec::new();
    let (mut domain_violations, mut jitter_events, mut g_increases) = (0, 0, 0);
    for (s, &snr_db) in cfg.experiment.snr_db.iter().enumerate() {
        for (a, &algorithm) in algorithms.iter().enumerate() {
            let idx = s * algorithms.len() + a;
            let mut nmse = NmseAccumulator::new(ofdm.super_symbols);
            let (mut hats, mut truths) = (Vec::new(), Vec::new());
            let mut seconds = 0.0;
            for (trial, slots) in per_trial.iter().enumerate() {
                match &slots[idx] {
                    Ok(o) => {
                        nmse.merge(&o.nmse);
                        hats.push(o.alpha_hat.clone());
                        truths.push(o.alpha_true.clone());
                        seconds += o.seconds;
                        domain_violations += o.domain_violations;
                        jitter_events += o.jitter_events;
                        g_increases += o.g_increases;
                    }
                    Err(reason) => {
                        log::warn!("trial {trial} {algorithm} at {snr_db} dB aborted: {reason}");
                        aborts.push(TrialAbort {
                            trial,
                            algorithm,
                            snr_db,
                            reason: reason.clone(),
                        });
                    }
                }
            }
            if hats.is_empty() {
                continue;
            }
            if nmse.skipped() > 0 {
                log::warn!("{algorithm} at {snr_db} dB: {} zero-channel super-symbols skipped", nmse.skipped());
            }
            records.push(MetricsRecord {
                algorithm,
                snr_db,
                mode: cfg.experiment.mode,
                n: ofdm.repetitions,
                k: cfg.scenario.devices,
                rho: cfg.scenario.activity,
                l: cfg.grid.delays,
                j: cfg.grid.dopplers,
                m: ofdm.subcarriers,
                u: ofdm.super_symbols,
                nmse_db: nmse.nmse_db(),
                pe: compute_pe(&hats, &truths)?,
                trials: hats.len(),
                wall_seconds: if cfg.experiment.record_wall_time { seconds } else { 0.0 },
            });
        }
    }
    Ok(ExperimentOutput {
        records,
        aborts,
        domain_violations,
        jitter_events,
        g_increases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_word() {
        let a = seed_for(1, &[0]);
        assert_ne!(a, seed_for(1, &[1]));
        assert_ne!(a, seed_for(2, &[0]));
        assert_ne!(seed_for(1, &[0, 0]), a);
        assert_eq!(a, seed_for(1, &[0]));
    }
}
