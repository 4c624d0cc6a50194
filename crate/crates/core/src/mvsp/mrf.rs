//! Sum-product on the 4-connected support lattice of one device.
//!
//! Site `i = l J + j`. Direction slots are `[L, R, T, B]`: `L` arrives from
//! `i - 1`, `R` from `i + 1`, `T` from `i + J`, `B` from `i - J`. A site with
//! no neighbour in some direction keeps the uninformative value 0.5 there.


#[allow(unused_imports)]
use num_traits::Float;

use crate::math::bernoulli_ratio;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const TOP: usize = 2;
pub const BOTTOM: usize = 3;

/// Neighbour messages of one site.
pub type Directional = [f64; 4];

/// Lattice of `delays x dopplers` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub delays: usize,
    pub dopplers: usize,
}

impl Lattice {
    pub fn sites(&self) -> usize {
        self.delays * self.dopplers
    }

    /// Site that sends the message arriving at `i` from direction `dir`.
    pub fn neighbour(&self, i: usize, dir: usize) -> Option<usize> {
        let (l, j) = (i / self.dopplers, i % self.dopplers);
        match dir {
            LEFT => (j > 0).then(|| i - 1),
            RIGHT => (j + 1 < self.dopplers).then(|| i + 1),
            TOP => (l + 1 < self.delays).then(|| i + self.dopplers),
            BOTTOM => (l > 0).then(|| i - self.dopplers),
            _ => None,
        }
    }
}

/// Slot at the sender that holds the message coming back from the receiver.
pub fn opposite(dir: usize) -> usize {
    match dir {
        LEFT => RIGHT,
        RIGHT => LEFT,
        TOP => BOTTOM,
        _ => TOP,
    }
}

/// `passes` flooding sweeps: every message is recomputed from the previous
/// sweep's messages. `lambda` is read as the starting point and overwritten.
pub fn mrf_sweep(
    lattice: Lattice,
    pi_zeta: &[f64],
    pi_chi: &[f64],
    beta: f64,
    passes: usize,
    lambda: &mut [Directional],
) {
    let n = lattice.sites();
    assert_eq!(pi_zeta.len(), n);
    assert_eq!(pi_chi.len(), n);
    assert_eq!(lambda.len(), n);
    let (ep, em) = (beta.exp(), (-beta).exp());
    let mut next: alloc::vec::Vec<Directional> = lambda.to_vec();
    for _ in 0..passes {
        for (i, out) in next.iter_mut().enumerate() {
            for dir in 0..4 {
                out[dir] = match lattice.neighbour(i, dir) {
                    None => 0.5,
                    Some(src) => {
                        let back = opposite(dir);
                        let mut p1 = pi_zeta[src] * pi_chi[src];
                        let mut p0 = (1.0 - pi_zeta[src]) * (1.0 - pi_chi[src]);
                        for (d, v) in lambda[src].iter().enumerate() {
                            if d != back {
                                p1 *= v;
                                p0 *= 1.0 - v;
                            }
                        }
                        let total = p1 + p0;
                        if total > 0.0 {
                            (ep * p1 + em * p0) / ((ep + em) * total)
                        } else {
                            0.5
                        }
                    }
                };
            }
        }
        lambda.copy_from_slice(&next);
    }
}

/// `π a Π λ / (π a Π λ + (1 - π)(1 - a) Π (1 - λ))` for one site: the belief
/// of `s = +1` from a local message `pi`, an optional second local message
/// `other` and the four neighbour messages.
pub fn combine(pi: f64, other: f64, lambda: &Directional) -> f64 {
    let mut p1 = pi * other;
    let mut p0 = (1.0 - pi) * (1.0 - other);
    for v in lambda {
        p1 *= v;
        p0 *= 1.0 - v;
    }
    bernoulli_ratio(p1, p0)
}

/// Single-site beliefs with the `χ` messages included.
pub fn marginals(pi_zeta: &[f64], pi_chi: &[f64], lambda: &[Directional]) -> alloc::vec::Vec<f64> {
    pi_zeta
        .iter()
        .zip(pi_chi)
        .zip(lambda)
        .map(|((z, c), l)| combine(*z, *c, l))
        .collect()
}
