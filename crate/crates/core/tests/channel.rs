use gfra_core::channel::{
    geometry_residual_doppler, sample_activity, sample_paths, PathSpec, PowerProfile, ScenarioGeometry,
    EARTH_RADIUS,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sine of the nadir angle at the satellite towards a ground point at
/// central angle `phi` from the sub-satellite point.
fn sin_nadir(phi: f64, orbit: f64) -> f64 {
    let eta = (EARTH_RADIUS * phi.sin()).atan2(orbit - EARTH_RADIUS * phi.cos());
    eta.sin()
}

#[test]
fn doppler_width_from_nadir_angles() {
    for (alt, el, beam) in [(600e3, 50.0, 50e3), (1200e3, 30.0, 200e3), (500e3, 89.0, 10e3)] {
        let geom = ScenarioGeometry {
            orbit_altitude: alt,
            elevation_angle: el,
            beam_diameter: beam,
            ..ScenarioGeometry::default()
        };
        let orbit = EARTH_RADIUS + alt;
        let el_rad = f64::to_radians(el);
        let eta_a = (EARTH_RADIUS * el_rad.cos() / orbit).asin();
        let phi_a = std::f64::consts::FRAC_PI_2 - el_rad - eta_a;
        let phi_b = phi_a + beam / EARTH_RADIUS;
        let want = geom.carrier_frequency * geom.satellite_speed / 299_792_458.0
            * (sin_nadir(phi_b, orbit) - sin_nadir(phi_a, orbit)).abs();
        let got = geometry_residual_doppler(&geom).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
    }
}

#[test]
fn desk_geometry_width() {
    let w = geometry_residual_doppler(&ScenarioGeometry::default()).unwrap();
    assert!((w - 12_496.5).abs() < 1.0, "{w}");
}

#[test]
fn mean_total_power_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for profile in [PowerProfile::Uniform, PowerProfile::Exponential { decay: 0.25e-6 }] {
        let spec = PathSpec {
            num_paths: 3,
            delay_spread: 0.5e-6,
            nu_max: 1e4,
            profile,
        };
        let draws = 40_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let paths = sample_paths(&spec, 2e-6, &mut rng).unwrap();
            assert_eq!(paths[0].delay, 0.0);
            assert!(paths.windows(2).all(|w| w[0].delay <= w[1].delay));
            assert!(paths.iter().all(|p| p.doppler.abs() <= 5e3));
            total += paths.iter().map(|p| p.gain.norm_sqr()).sum::<f64>();
        }
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}

#[test]
fn activity_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = sample_activity(100_000, 0.1, &mut rng).unwrap();
    let rate = a.iter().filter(|&&x| x).count() as f64 / a.len() as f64;
    assert!((rate - 0.1).abs() < 0.005);
    assert!(sample_activity(3, 1.5, &mut rng).is_err());
}

#[test]
fn cyclic_prefix_guard() {
    let spec = PathSpec {
        num_paths: 2,
        delay_spread: 3e-6,
        nu_max: 0.0,
        profile: PowerProfile::Uniform,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(sample_paths(&spec, 2e-6, &mut rng).is_err());
}
