use gfra_core::baselines::{sbl, SblConfig};
use gfra_core::linalg::CMatrix;
use gfra_core::mvsp::linear_module;
use gfra_core::C64;
use gfra_oracles::{information_posterior, log_evidence, relative_error, Dense};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn instance(seed: u64, rows: usize, cols: usize) -> (CMatrix, Dense, Vec<C64>, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(rows, cols, |_, _| cn(&mut rng));
    let dense: Dense = (0..rows).map(|r| a.row(r).to_vec()).collect();
    let y: Vec<C64> = (0..rows).map(|_| cn(&mut rng)).collect();
    let d: Vec<f64> = (0..cols)
        .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() * 2.0 })
        .collect();
    let sigma2 = 10f64.powf(rng.random_range(-3.0..0.0));
    (a, dense, y, d, sigma2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn mean_and_variance_match_information_form(seed in any::<u64>(), rows in 4usize..20, cols in 6usize..40) {
        let (a, dense, y, d, sigma2) = instance(seed, rows, cols);
        let out = linear_module(&a, &y, sigma2, &d).unwrap();
        let (mean, var) = information_posterior(&dense, &y, sigma2, &d);
        prop_assert!(relative_error(&out.m, &mean) <= 1e-8);
        let scale = var.iter().cloned().fold(1e-300, f64::max);
        for (p, q) in out.phi.iter().zip(&var) {
            prop_assert!((p - q).abs() <= 1e-8 * scale);
        }
        for q in 0..cols {
            prop_assert!((out.mu_eta_to_v[q] - out.m[q].norm_sqr() - out.phi[q]).abs() <= 1e-12 * (1.0 + out.mu_eta_to_v[q]));
        }
        let ev = log_evidence(&dense, &y, sigma2, &d);
        prop_assert!((out.log_evidence - ev).abs() <= 1e-8 * ev.abs().max(1.0));
    }
}

#[test]
fn zero_prior_gives_zero_posterior() {
    let (a, _, y, _, sigma2) = instance(3, 6, 9);
    let out = linear_module(&a, &y, sigma2, &[0.0; 9]).unwrap();
    assert!(out.m.iter().all(|v| v.norm() == 0.0));
    assert!(out.phi.iter().all(|v| *v == 0.0));
}

#[test]
fn sbl_evidence_never_decreases() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (rows, cols) = (16, 40);
        let a = CMatrix::from_fn(rows, cols, |_, _| cn(&mut rng));
        let mut h = vec![C64::new(0.0, 0.0); cols];
        for q in [3, 17, 29] {
            h[q] = cn(&mut rng) * 4.0;
        }
        let sigma2 = 1e-3;
        let mut y = a.mul_vec(&h);
        for v in &mut y {
            *v += cn(&mut rng) * (sigma2 * 6.0f64).sqrt();
        }
        let out = sbl(&a, &y, sigma2, &SblConfig { max_iter: 60, prune_tol: 0.0, tol: 0.0 }).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }
}
