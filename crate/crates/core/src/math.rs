//! Scalar helpers shared by the models. Everything here goes through `libm`
//! so the crate stays `no_std`.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// Normalized sinc, `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        // 1 - (pi x)^2 / 6 is exact to double precision here.
        1.0 - (PI * x) * (PI * x) / 6.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Derivative of [`sinc`] with respect to its argument.
pub fn sinc_derivative(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let p2 = PI * PI;
        -p2 * x / 3.0 + p2 * p2 * x * x * x / 30.0
    } else {
        ((PI * x).cos() - sinc(x)) / x
    }
}

/// `exp(j 2 pi x)`, with the argument reduced to `[-1/2, 1/2]` cycles first.
pub fn cis_cycles(x: f64) -> C64 {
    let r = x - x.round();
    let (s, c) = (2.0 * PI * r).sin_cos();
    C64::new(c, s)
}

/// Natural log of the real Gaussian density `N(x; mean, var)`.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -d * d / (2.0 * var) - 0.5 * (2.0 * PI * var).ln()
}

/// `ln(e^a + e^b)` tolerant of `-inf` operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `e^a / (e^a + e^b)` from log-weights; 0.5 when both weights vanish.
pub fn normalized_weight(log_a: f64, log_b: f64) -> f64 {
    match (log_a == f64::NEG_INFINITY, log_b == f64::NEG_INFINITY) {
        (true, true) => 0.5,
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => {
            let d = log_a - log_b;
            if d >= 0.0 {
                1.0 / (1.0 + (-d).exp())
            } else {
                let e = d.exp();
                e / (1.0 + e)
            }
        }
    }
}

/// `a / (a + b)` for non-negative weights, 0.5 on `0 / 0`.
pub fn bernoulli_ratio(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s > 0.0 {
        a / s
    } else {
        0.5
    }
}

/// One draw from the circularly-symmetric complex Gaussian `CN(0, var)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    Float::powf(10.0, db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_at_integers_and_half() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..6 {
            assert!(sinc(k as f64).abs() < 1e-15);
            assert!(sinc(-(k as f64)).abs() < 1e-15);
        }
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn sinc_derivative_matches_differences() {
        for &x in &[-2.3, -0.7, -1e-5, 0.0, 3e-5, 0.2, 1.0, 4.4] {
            let h = 1e-6;
            let fd = (sinc(x + h) - sinc(x - h)) / (2.0 * h);
            assert!((fd - sinc_derivative(x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn weights_handle_extremes() {
        assert_eq!(normalized_weight(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.5);
        assert_eq!(normalized_weight(0.0, f64::NEG_INFINITY), 1.0);
        assert!((normalized_weight(-1000.0, -1000.0) - 0.5).abs() < 1e-15);
        assert!(normalized_weight(-2000.0, 0.0) >= 0.0);
        assert_eq!(bernoulli_ratio(0.0, 0.0), 0.5);
        assert!((log_add_exp(-800.0, -800.0) - (-800.0 + 2f64.ln())).abs() < 1e-12);
    }
}
