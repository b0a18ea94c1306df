mod common;

use paw_core::oracle::bayes_conditional;
use paw_core::relational::*;
use paw_core::universe::{oscillator_universe, MomentumAmplitude, OscillatorSpec, QuadratureSpec, Role};

fn spec() -> OscillatorSpec {
    OscillatorSpec {
        rod_mass: 2.0,
        sys_mass: 1.0,
        rod_frequency: 1.0,
        sys_frequency: 2.0,
        clock_coeffs: None,
        amplitude: MomentumAmplitude::Gaussian { center: 0.0, sigma: 0.7 },
        quadrature: QuadratureSpec::default(),
        truncation: 12,
    }
}

#[test]
fn constraint_residuals() {
    let u = oscillator_universe(&spec()).unwrap();
    let rep = u.state.report();
    eprintln!("{rep:?} raw {} quad {} window {}", u.raw_weight, u.quadrature_leakage, u.window_leakage);
    assert!(rep.energy.unwrap() <= 1e-8);
    assert!(u.quadrature_leakage < 1e-8);
}

#[test]
fn line_density_integrates_to_one() {
    let u = oscillator_universe(&spec()).unwrap();
    for (x, t) in [(0.0, 0.0), (0.4, 1.3), (-1.1, 2.9)] {
        let d = density_distribution(&u.state, &[x], Some(t)).unwrap();
        assert!((d.total - 1.0).abs() < 1e-6, "{}", d.total);
    }
}

#[test]
fn density_matches_bayes() {
    let u = oscillator_universe(&spec()).unwrap();
    let g = &u.state;
    let grids = Grids::continuous(g).unwrap();
    for (x, t, y) in [(0.2, 0.5, -0.3), (1.0, 2.0, 0.7)] {
        let reads = vec![grids.clock_reading(At::Value(t)).unwrap(), grids.rod_readings(&[At::Value(x)]).unwrap()[0]];
        let out = grids.system_readings(&[At::Value(y)]).unwrap();
        let p = conditional_probability_normalized(g, &reads, &out).unwrap();
        let b = bayes_conditional(g, &reads, &out).unwrap();
        assert!((p - b).abs() < 1e-12 * b.max(1.0), "{p} {b}");
    }
}

#[test]
fn relative_state_evolves_unitarily() {
    let u = oscillator_universe(&spec()).unwrap();
    let g = &u.state;
    let grids = Grids::continuous(g).unwrap();
    let c = |t| vec![grids.clock_reading(At::Value(t)).unwrap()];
    for (a, b) in [(0.0, 0.7), (0.3, 5.1)] {
        assert!(evolution_residual(g, &c(a), &c(b)).unwrap() <= 1e-8);
    }
    assert!(g.factor(Role::Clock).is_some());
}
