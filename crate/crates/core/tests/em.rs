use gfra_core::dictionary::{init_grid, GridModel};
use gfra_core::em::{g_objective, grad_g, m_step, EmConfig, GradMode};
use gfra_core::pilots::{generate_pilots, OfdmConfig, PilotBook};
use gfra_core::C64;
use gfra_oracles::{dense_g, dictionary_entry, Dense, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Toy {
    ofdm: OfdmConfig,
    pilots: PilotBook,
    grid: GridModel,
    m: Vec<C64>,
    phi: Vec<f64>,
    y: Vec<C64>,
}

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn toy(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ofdm = OfdmConfig::new(6, 3, 2, 15e3, 2e-6).unwrap();
    let pilots = generate_pilots(2, 6, 2, &mut rng);
    let mut grid = init_grid(2, 3, 3, 1.5e-6, 9e3).unwrap();
    for x in grid.tau_all_mut() {
        *x += 0.4 * rng.random::<f64>() * 0.5e-6;
    }
    for x in grid.nu_all_mut() {
        *x += 0.4 * (rng.random::<f64>() - 0.5) * 3e3;
    }
    let m = (0..grid.len()).map(|_| cn(&mut rng)).collect();
    let phi = (0..grid.len()).map(|_| 0.2 * rng.random::<f64>()).collect();
    let y = (0..ofdm.measurements()).map(|_| cn(&mut rng) * 3.0).collect();
    Toy { ofdm, pilots, grid, m, phi, y }
}

fn oracle_g(t: &Toy, grid: &GridModel) -> f64 {
    let fr = Frame {
        n: t.ofdm.repetitions,
        m: t.ofdm.subcarriers,
        u: t.ofdm.super_symbols,
        delta_f: t.ofdm.subcarrier_spacing,
        cp: t.ofdm.cyclic_prefix,
    };
    let p = |k: usize, m: usize, u: usize| t.pilots.get(k, m, u);
    let a: Dense = (0..t.ofdm.measurements())
        .map(|row| {
            let mut r = vec![C64::new(0.0, 0.0); grid.len()];
            for k in 0..grid.devices() {
                for l in 0..grid.delays() {
                    for j in 0..grid.dopplers() {
                        r[grid.index(k, l, j)] = dictionary_entry(&fr, &p, k, grid.tau(k)[l], grid.nu(k)[j], row);
                    }
                }
            }
            r
        })
        .collect();
    dense_g(&a, &t.y, &t.m, &t.phi)
}

fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn objective_matches_dense_trace_form() {
    for seed in 0..3 {
        let t = toy(seed);
        let g = g_objective(&t.grid, &t.m, &t.phi, &t.y, &t.pilots, &t.ofdm).unwrap();
        let o = oracle_g(&t, &t.grid);
        assert!((g - o).abs() <= 1e-9 * o.abs(), "{g} vs {o}");
    }
}

#[test]
fn analytic_gradient_matches_oracle_differences() {
    for seed in 0..5 {
        let t = toy(40 + seed);
        let an = grad_g(&t.grid, &t.m, &t.phi, &t.y, &t.pilots, &t.ofdm, GradMode::Analytic).unwrap();
        let (ht, hn) = (1e-4 * t.grid.tau_spacing(), 1e-4 * t.grid.nu_spacing());
        let mut fd_tau = Vec::new();
        for i in 0..t.grid.tau_all().len() {
            let mut g = t.grid.clone();
            g.tau_all_mut()[i] += ht;
            let plus = oracle_g(&t, &g);
            g.tau_all_mut()[i] -= 2.0 * ht;
            fd_tau.push((plus - oracle_g(&t, &g)) / (2.0 * ht));
        }
        let mut fd_nu = Vec::new();
        for i in 0..t.grid.nu_all().len() {
            let mut g = t.grid.clone();
            g.nu_all_mut()[i] += hn;
            let plus = oracle_g(&t, &g);
            g.nu_all_mut()[i] -= 2.0 * hn;
            fd_nu.push((plus - oracle_g(&t, &g)) / (2.0 * hn));
        }
        assert!(vec_rel(&an.tau, &fd_tau) <= 1e-5, "{:?} vs {:?}", an.tau, fd_tau);
        assert!(vec_rel(&an.nu, &fd_nu) <= 1e-5, "{:?} vs {:?}", an.nu, fd_nu);
    }
}

#[test]
fn accepted_steps_do_not_increase_objective() {
    for seed in 0..4 {
        let t = toy(80 + seed);
        let cfg = EmConfig { descent_steps: 8, ..EmConfig::default() };
        let (grid, rep) = m_step(&t.grid, &t.m, &t.phi, &t.y, &t.pilots, &t.ofdm, &cfg).unwrap();
        assert_eq!(rep.increases, 0);
        assert!(rep.g_end <= rep.g_start);
        assert!(rep.accepted_steps > 0);
        grid.validate().unwrap();
    }
}
