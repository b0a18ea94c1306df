use num_rational::Ratio;
use paw_core::frames::*;
use paw_core::C64;
use proptest::prelude::*;

#[test]
fn momentum_resolutions_exhaustive() {
    let mut worst: f64 = 0.0;
    for d in 1..=8 {
        for n in d..=24 {
            let s = momentum_spectrum(d, -1.5, 3.0).unwrap();
            let g = FrameGrid::discrete(n, 0.25, 3.0).unwrap();
            worst = worst.max(identity_residual(&s, &g).unwrap());
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn clock_resolutions_exhaustive() {
    let mut worst: f64 = 0.0;
    for d in 1..=8i64 {
        let levels: Vec<Ratio<i64>> = (0..d).map(|k| Ratio::new(k * k, 2)).collect();
        let c = clock_from_energies(&levels).unwrap();
        for n in c.default_points()..=24usize.max(c.default_points()) {
            let g = c.grid(n, 0.0).unwrap();
            worst = worst.max(clock_identity_residual(&c, &g).unwrap());
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn undersampled_grid_rejected() {
    let s = momentum_spectrum(4, 0.0, 1.0).unwrap();
    assert!(identity_residual(&s, &FrameGrid::discrete(3, 0.0, 1.0).unwrap()).is_err());
}

proptest! {
    #[test]
    fn grid_and_period_sums(d in 1usize..=8, extra in 0usize..=16, origin in -3.0f64..3.0, period in 0.5f64..10.0) {
        let n = d + extra;
        let s = momentum_spectrum(d, -0.7 * d as f64, period).unwrap();
        let g = FrameGrid::discrete(n, origin, period).unwrap();
        for k in 0..d {
            for m in 0..d {
                let want = if k == m { n as f64 } else { 0.0 };
                prop_assert!((grid_phase_sum(&s, &g, k, m).unwrap() - C64::new(want, 0.0)).norm() <= 1e-12 * n as f64);
                let want = if k == m { period } else { 0.0 };
                prop_assert!((period_integral(&s, origin, k, m) - C64::new(want, 0.0)).norm() <= 1e-12 * period);
            }
        }
        prop_assert!(identity_residual(&s, &g).unwrap() <= 1e-12);
    }
}
