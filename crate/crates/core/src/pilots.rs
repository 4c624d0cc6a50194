//! Super-symbol OFDM geometry, pilot books and received-signal synthesis.
//!
//! A super-symbol is `N` back-to-back copies of one OFDM symbol sharing a
//! single cyclic prefix, so the receiver can demodulate on an `N`-times finer
//! frequency grid. Received vectors are produced directly in the demodulated
//! domain as `y_u = G_u x_u + w_u` and stacked super-symbol by super-symbol.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::check_dim;
use crate::linalg::CMatrix;
use crate::math::{complex_gaussian, db, from_db};
use crate::{Error, Result, C64};

/// Geometry of one pilot phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmConfig {
    /// `M`
    pub subcarriers: usize,
    /// `N`, OFDM symbol repetitions per super-symbol.
    pub repetitions: usize,
    /// `U`, super-symbols per pilot phase.
    pub super_symbols: usize,
    /// `Δf` in hertz.
    pub subcarrier_spacing: f64,
    /// `T_cp` in seconds.
    pub cyclic_prefix: f64,
}

impl OfdmConfig {
    pub fn new(
        subcarriers: usize,
        repetitions: usize,
        super_symbols: usize,
        subcarrier_spacing: f64,
        cyclic_prefix: f64,
    ) -> Result<Self> {
        let cfg = Self {
            subcarriers,
            repetitions,
            super_symbols,
            subcarrier_spacing,
            cyclic_prefix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("subcarriers", self.subcarriers),
            ("repetitions", self.repetitions),
            ("super_symbols", self.super_symbols),
        ] {
            if v == 0 {
                return Err(Error::ParameterDomain {
                    name,
                    value: 0.0,
                    expected: ">= 1",
                });
            }
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "subcarrier_spacing",
                value: self.subcarrier_spacing,
                expected: "> 0",
            });
        }
        if !(self.cyclic_prefix > 0.0 && self.cyclic_prefix.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "cyclic_prefix",
                value: self.cyclic_prefix,
                expected: "> 0",
            });
        }
        Ok(())
    }

    /// `T = 1 / Δf`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Observation window `N T`.
    pub fn window(&self) -> f64 {
        self.repetitions as f64 * self.symbol_duration()
    }

    /// `T̄ = N T + T_cp`.
    pub fn super_symbol_duration(&self) -> f64 {
        self.window() + self.cyclic_prefix
    }

    /// Oversampled bins per super-symbol, `N M`.
    pub fn bins(&self) -> usize {
        self.repetitions * self.subcarriers
    }

    /// Total measurements `R = N M U`.
    pub fn measurements(&self) -> usize {
        self.bins() * self.super_symbols
    }
}

/// Pilot symbols `x[k][m][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    devices: usize,
    subcarriers: usize,
    super_symbols: usize,
    values: Vec<C64>,
}

impl PilotBook {
    pub fn from_fn(
        devices: usize,
        subcarriers: usize,
        super_symbols: usize,
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let mut values = Vec::with_capacity(devices * subcarriers * super_symbols);
        for k in 0..devices {
            for m in 0..subcarriers {
                for u in 0..super_symbols {
                    values.push(f(k, m, u));
                }
            }
        }
        Self {
            devices,
            subcarriers,
            super_symbols,
            values,
        }
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn super_symbols(&self) -> usize {
        self.super_symbols
    }

    pub fn get(&self, k: usize, m: usize, u: usize) -> C64 {
        self.values[(k * self.subcarriers + m) * self.super_symbols + u]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Pilot vector of super-symbol `u`, entry `m K + k`.
    pub fn stacked(&self, u: usize) -> Vec<C64> {
        let mut x = Vec::with_capacity(self.subcarriers * self.devices);
        for m in 0..self.subcarriers {
            for k in 0..self.devices {
                x.push(self.get(k, m, u));
            }
        }
        x
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn check_shape(&self, devices: usize, ofdm: &OfdmConfig) -> Result<()> {
        check_dim("pilot book devices", devices, self.devices)?;
        check_dim("pilot book subcarriers", ofdm.subcarriers, self.subcarriers)?;
        check_dim("pilot book super-symbols", ofdm.super_symbols, self.super_symbols)
    }
}

/// I.i.d. `CN(0, 1)` pilots.
pub fn generate_pilots<R: Rng + ?Sized>(
    devices: usize,
    subcarriers: usize,
    super_symbols: usize,
    rng: &mut R,
) -> PilotBook {
    PilotBook::from_fn(devices, subcarriers, super_symbols, |_, _, _| {
        complex_gaussian(rng, 1.0)
    })
}

fn noiseless_blocks(channels: &[CMatrix], pilots: &PilotBook) -> Result<Vec<Vec<C64>>> {
    check_dim("channel matrices", pilots.super_symbols(), channels.len())?;
    let cols = pilots.subcarriers() * pilots.devices();
    channels
        .iter()
        .enumerate()
        .map(|(u, g)| {
            check_dim("channel matrix columns", cols, g.cols())?;
            Ok(g.mul_vec(&pilots.stacked(u)))
        })
        .collect()
}

/// `y = [G_0 x_0 + w_0; ...; G_{U-1} x_{U-1} + w_{U-1}]` with `w ~ CN(0, sigma2 I)`.
pub fn synthesize_received<R: Rng + ?Sized>(
    channels: &[CMatrix],
    pilots: &PilotBook,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::ParameterDomain {
            name: "sigma2",
            value: sigma2,
            expected: ">= 0",
        });
    }
    let blocks = noiseless_blocks(channels, pilots)?;
    let mut y = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for block in blocks {
        for v in block {
            let w = if sigma2 > 0.0 {
                complex_gaussian(rng, sigma2)
            } else {
                C64::new(0.0, 0.0)
            };
            y.push(v + w);
        }
    }
    Ok(y)
}

/// `sum_u ||G_u x_u||^2`.
pub fn signal_energy(channels: &[CMatrix], pilots: &PilotBook) -> Result<f64> {
    Ok(noiseless_blocks(channels, pilots)?
        .iter()
        .flatten()
        .map(|v| v.norm_sqr())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Finite(f64),
    /// Noise-free observation.
    Infinite,
}

/// `10 log10(sum_u ||G_u x_u||^2 / (R sigma2))`.
pub fn snr_of(channels: &[CMatrix], pilots: &PilotBook, sigma2: f64) -> Result<Snr> {
    let energy = signal_energy(channels, pilots)?;
    if sigma2 == 0.0 {
        return Ok(Snr::Infinite);
    }
    if !(sigma2 > 0.0) {
        return Err(Error::ParameterDomain {
            name: "sigma2",
            value: sigma2,
            expected: ">= 0",
        });
    }
    let rows: usize = channels.iter().map(CMatrix::rows).sum();
    Ok(Snr::Finite(db(energy / (rows as f64 * sigma2))))
}

/// Noise variance that makes [`snr_of`] return `snr_db`.
pub fn calibrate_sigma2(channels: &[CMatrix], pilots: &PilotBook, snr_db: f64) -> Result<f64> {
    let energy = signal_energy(channels, pilots)?;
    if !(energy > 0.0) {
        return Err(Error::ParameterDomain {
            name: "signal energy",
            value: energy,
            expected: "> 0 to calibrate a noise level",
        });
    }
    let rows: usize = channels.iter().map(CMatrix::rows).sum();
    Ok(energy / (rows as f64 * from_db(snr_db)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ofdm() -> OfdmConfig {
        OfdmConfig::new(4, 2, 3, 15e3, 2e-6).unwrap()
    }

    #[test]
    fn derived_durations() {
        let o = ofdm();
        assert!((o.symbol_duration() - 1.0 / 15e3).abs() < 1e-18);
        assert!((o.super_symbol_duration() - (2.0 / 15e3 + 2e-6)).abs() < 1e-18);
        assert_eq!(o.measurements(), 24);
        assert!(OfdmConfig::new(4, 0, 1, 15e3, 2e-6).is_err());
        assert!(OfdmConfig::new(4, 1, 1, 15e3, 0.0).is_err());
    }

    #[test]
    fn pilot_shapes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = generate_pilots(1, 1, 1, &mut rng);
        assert_eq!(one.values().len(), 1);

        let a = generate_pilots(3, 4, 2, &mut ChaCha8Rng::seed_from_u64(9));
        let b = generate_pilots(3, 4, 2, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.stacked(1)[2 * 3 + 1], a.get(1, 2, 1));
    }

    #[test]
    fn pilot_variance_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let book = generate_pilots(10, 100, 100, &mut rng);
        let n = book.values().len() as f64;
        let var: f64 = book.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn synthesis_zero_and_dimension_errors() {
        let o = ofdm();
        let pilots = generate_pilots(2, 4, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let zero = vec![CMatrix::zeros(o.bins(), 8); 3];
        let y = synthesize_received(&zero, &pilots, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(y.len(), 24);
        assert!(y.iter().all(|v| *v == C64::new(0.0, 0.0)));

        let wrong = vec![CMatrix::zeros(o.bins(), 7); 3];
        assert!(matches!(
            synthesize_received(&wrong, &pilots, 0.0, &mut ChaCha8Rng::seed_from_u64(3)),
            Err(Error::Dimension { .. })
        ));
        assert!(synthesize_received(&zero[..2], &pilots, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn noise_only_variance() {
        let pilots = generate_pilots(1, 100, 100, &mut ChaCha8Rng::seed_from_u64(2));
        let zero = vec![CMatrix::zeros(100, 100); 100];
        let y = synthesize_received(&zero, &pilots, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn snr_definition_and_calibration() {
        let o = ofdm();
        let pilots = generate_pilots(2, 4, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g: Vec<CMatrix> = (0..3)
            .map(|_| CMatrix::from_fn(o.bins(), 8, |_, _| complex_gaussian(&mut rng, 1.0)))
            .collect();
        let energy = signal_energy(&g, &pilots).unwrap();
        let sigma2 = energy / 24.0;
        match snr_of(&g, &pilots, sigma2).unwrap() {
            Snr::Finite(v) => assert!(v.abs() < 1e-12),
            Snr::Infinite => panic!("finite noise"),
        }
        assert_eq!(snr_of(&g, &pilots, 0.0).unwrap(), Snr::Infinite);

        for target in [-5.0, 0.0, 13.5, 24.0] {
            let s2 = calibrate_sigma2(&g, &pilots, target).unwrap();
            let Snr::Finite(got) = snr_of(&g, &pilots, s2).unwrap() else {
                panic!("finite noise");
            };
            assert!((got - target).abs() < 1e-9);
        }
        let zero = vec![CMatrix::zeros(o.bins(), 8); 3];
        assert!(calibrate_sigma2(&zero, &pilots, 10.0).is_err());
    }
}
