use gfra_core::mvsp::mrf::{marginals, mrf_sweep, Directional, Lattice};
use gfra_core::mvsp::ell_message;
use gfra_oracles::{lattice_marginals, sum_of_spins_moments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bp_marginals(lattice: Lattice, evidence: &[f64], beta: f64, passes: usize) -> Vec<f64> {
    let n = lattice.sites();
    let neutral = vec![0.5; n];
    let mut lambda: Vec<Directional> = vec![[0.5; 4]; n];
    mrf_sweep(lattice, evidence, &neutral, beta, passes, &mut lambda);
    marginals(evidence, &neutral, &lambda)
}

#[test]
fn chains_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for len in 1..=10 {
        for horizontal in [true, false] {
            let lattice = if horizontal {
                Lattice { delays: 1, dopplers: len }
            } else {
                Lattice { delays: len, dopplers: 1 }
            };
            let ev: Vec<f64> = (0..len).map(|_| rng.random_range(0.02..0.98)).collect();
            let beta = rng.random_range(-1.0..1.5);
            let bp = bp_marginals(lattice, &ev, beta, len + 1);
            let exact = lattice_marginals(lattice.delays, lattice.dopplers, &ev, beta);
            for (p, q) in bp.iter().zip(&exact) {
                assert!((p - q).abs() <= 1e-10, "len {len}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn uncoupled_sites_keep_their_evidence() {
    let ev = [0.1, 0.7, 0.4, 0.9, 0.2, 0.55];
    let bp = bp_marginals(Lattice { delays: 2, dopplers: 3 }, &ev, 0.0, 3);
    for (p, q) in bp.iter().zip(&ev) {
        assert!((p - q).abs() <= 1e-14);
    }
}

#[test]
fn loopy_lattice_stays_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for cols in 2..=6 {
        let ev: Vec<f64> = (0..2 * cols).map(|_| rng.random_range(0.05..0.95)).collect();
        let bp = bp_marginals(Lattice { delays: 2, dopplers: cols }, &ev, 0.3, 50);
        let exact = lattice_marginals(2, cols, &ev, 0.3);
        for (p, q) in bp.iter().zip(&exact) {
            assert!((p - q).abs() <= 0.05, "{p} vs {q}");
        }
    }
}

#[test]
fn support_count_moments_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=10 {
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (mean, var) = ell_message(&p);
        let (m2, v2) = sum_of_spins_moments(&p);
        assert!((mean - m2).abs() <= 1e-12);
        assert!((var - v2).abs() <= 1e-12);
    }
}
