mod common;

use std::f64::consts::PI;

use common::*;
use paw_core::frames::{momentum_spectrum, Spectrum};
use paw_core::relational::loglog_slope;
use paw_core::relativistic::*;
use paw_core::universe::{Branch, ClockMode, UniverseOptions};
use paw_core::C64;

/// `p in {0, 4}` with rod partners.
fn axis() -> (Spectrum, Spectrum) {
    let l = PI / 2.0;
    (momentum_spectrum(2, -4.0, l).unwrap(), momentum_spectrum(2, 0.0, l).unwrap())
}

fn samples(n: usize) -> Vec<Sample> {
    (0..3).map(|k| Sample { t: 0.1 + 0.2 * k as f64, x: vec![0.05 + 0.1 * k as f64; n] }).collect()
}

#[test]
fn kg_slope_and_floor() {
    let mut r = rng(11);
    let c = unit_coeffs(&mut r, 4);
    let opts = UniverseOptions { clock_mode: ClockMode::ContinuousOnly, ..Default::default() };
    let g = kg_universe(&[axis()], 3.0, Branch::Both, &c, FrameMode::Approximate, opts).unwrap();
    assert!(g.report().energy.unwrap() < 1e-12);
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let dev: Vec<f64> = hs.iter().map(|&h| kg_residual(&g, &samples(1), h).unwrap().deviation).collect();
    let slope = loglog_slope(&hs, &dev);
    eprintln!("kg dev {dev:?} slope {slope}");
    assert!((slope - 2.0).abs() < 0.1);
    let cp = unit_coeffs(&mut r, 2);
    let ratios = [10.0, 100.0, 1000.0, 10000.0];
    let floors: Vec<f64> = ratios
        .iter()
        .map(|&mm| {
            let g = kg_universe(&[axis()], 3.0, Branch::Positive, &cp, FrameMode::Exact { rod_mass: mm * 3.0 }, opts);
            kg_residual(&g.unwrap(), &samples(1), 0.001).unwrap().floor
        })
        .collect();
    let slope = loglog_slope(&ratios, &floors);
    eprintln!("kg floors {floors:?} slope {slope}");
    assert!((slope + 1.0).abs() < 0.1);
}

#[test]
fn dirac_spectrum_and_slope() {
    let alg = dirac_algebra();
    for p in [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, -1.2, 2.0]] {
        for (lam, u) in dirac_eigenvectors(&p, 1.0) {
            let h = alg.hamiltonian(&p, 1.0);
            let v = nalgebra::DVector::from_vec(u.to_vec());
            assert!((&h * &v - &v * C64::new(lam, 0.0)).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }
    let mut r = rng(12);
    let c = unit_coeffs(&mut r, 8);
    let g = dirac_universe(&[axis()], 3.0, &c, FrameMode::Approximate, UniverseOptions::default()).unwrap();
    assert!(g.report().energy.unwrap() < 1e-12, "{:?}", g.report());
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let dev: Vec<f64> = hs.iter().map(|&h| dirac_residual(&g, &samples(1), h).unwrap().deviation).collect();
    let slope = loglog_slope(&hs, &dev);
    eprintln!("dirac dev {dev:?} slope {slope}");
    assert!((slope - 2.0).abs() < 0.1);
    let opts = UniverseOptions { clock_mode: ClockMode::ContinuousOnly, ..Default::default() };
    let g3 = dirac_universe(&[axis(), axis(), axis()], 3.0, &unit_coeffs(&mut r, 32), FrameMode::Approximate, opts).unwrap();
    assert!(g3.report().energy.unwrap() < 1e-12);
    let dev3: Vec<f64> = hs.iter().map(|&h| dirac_residual(&g3, &samples(3), h).unwrap().deviation).collect();
    eprintln!("dirac3 dev {dev3:?} slope {}", loglog_slope(&hs, &dev3));
}

#[test]
fn dirac_anticommutators() {
    let alg = dirac_algebra();
    let id = nalgebra::DMatrix::<C64>::identity(4, 4);
    let anti = |a: &nalgebra::DMatrix<C64>, b: &nalgebra::DMatrix<C64>| a * b + b * a;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { &id * C64::new(2.0, 0.0) } else { id.scale(0.0) };
            assert!((anti(&alg.alpha[i], &alg.alpha[j]) - want).norm() < 1e-14);
        }
        assert!(anti(&alg.alpha[i], &alg.beta).norm() < 1e-14);
        assert!((&alg.alpha[i] - alg.alpha[i].adjoint()).norm() < 1e-14);
    }
    assert!((&alg.beta * &alg.beta - &id).norm() < 1e-14);
    let p = [0.7, -0.2, 1.1];
    let e = (p.iter().map(|x| x * x).sum::<f64>() + 4.0).sqrt();
    let ev = alg.hamiltonian(&p, 2.0).symmetric_eigen().eigenvalues;
    let mut ev: Vec<f64> = ev.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    for (a, b) in ev.iter().zip([-e, -e, e, e]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn spacing_above_alias_limit_is_rejected() {
    let c = unit_coeffs(&mut rng(2), 2);
    let g = kg_universe(&[axis()], 3.0, Branch::Positive, &c, FrameMode::Approximate, UniverseOptions::default()).unwrap();
    assert!(kg_residual(&g, &samples(1), 2.0).is_err());
}
