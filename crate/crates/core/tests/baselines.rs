use gfra_core::baselines::{baseline_to_activity, omp, sbl, OmpConfig, SblConfig};
use gfra_core::linalg::CMatrix;
use gfra_core::C64;
use gfra_oracles::relative_error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn planted(seed: u64) -> (CMatrix, Vec<C64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(40, 120, |_, _| cn(&mut rng));
    let mut h = vec![C64::new(0.0, 0.0); 120];
    let mut support = Vec::new();
    while support.len() < 4 {
        let q = rng.random_range(0..120);
        if !support.contains(&q) {
            support.push(q);
            h[q] = C64::from_polar(1.0 + rng.random::<f64>(), rng.random::<f64>() * 6.0);
        }
    }
    support.sort_unstable();
    (a, h, support)
}

#[test]
fn omp_recovers_planted_support() {
    for seed in 0..10 {
        let (a, h, support) = planted(seed);
        let y = a.mul_vec(&h);
        let out = omp(&a, &y, &OmpConfig { max_atoms: 10, residual_tol: 1e-9 }).unwrap();
        let mut found = out.support.clone();
        found.sort_unstable();
        assert_eq!(found, support);
        assert!(relative_error(&out.h_hat, &h) <= 1e-9);
    }
}

#[test]
fn omp_respects_budget() {
    let (a, h, _) = planted(3);
    let y = a.mul_vec(&h);
    let out = omp(&a, &y, &OmpConfig { max_atoms: 2, residual_tol: 0.0 }).unwrap();
    assert_eq!(out.support.len(), 2);
    assert!(omp(&a, &y, &OmpConfig { max_atoms: 41, residual_tol: 0.0 }).is_err());
}

#[test]
fn sbl_recovers_planted_signal() {
    for seed in 0..5 {
        let (a, h, support) = planted(50 + seed);
        let y = a.mul_vec(&h);
        let out = sbl(&a, &y, 1e-8, &SblConfig { max_iter: 300, ..SblConfig::default() }).unwrap();
        assert!(relative_error(&out.h_hat, &h) <= 1e-3);
        for q in support {
            assert!(out.support.contains(&q));
        }
    }
}

#[test]
fn activity_gate() {
    let mut h = vec![C64::new(0.0, 0.0); 12];
    h[0] = C64::new(2.0, 0.0);
    h[5] = C64::new(0.5, 0.0);
    h[9] = C64::new(0.1, 0.0);
    assert_eq!(baseline_to_activity(&h, 4, 0.05), vec![true, true, false]);
    assert_eq!(baseline_to_activity(&[C64::new(0.0, 0.0); 4], 2, 0.1), vec![false, false]);
}
