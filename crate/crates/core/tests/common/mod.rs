#![allow(dead_code)]

use std::f64::consts::PI;

use paw_core::frames::{momentum_spectrum, Spectrum};
use paw_core::universe::{double_constrained_state, Dispersion, GlobalState};
use paw_core::C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

pub fn real_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

/// Symmetric spectrum `{-1, 0, 1} 2pi/L`.
pub fn sym3(l: f64) -> Spectrum {
    momentum_spectrum(3, -2.0 * PI / l, l).unwrap()
}

/// Three-level free-particle universe with real coefficients.
pub fn sec3c(c: [f64; 3], l: f64, big_m: f64, m: f64) -> GlobalState {
    let s = sym3(l);
    let cs: Vec<C64> = c.iter().map(|&x| C64::new(x, 0.0)).collect();
    double_constrained_state(Dispersion::Free { mass: big_m }, Dispersion::Free { mass: m }, &s, &s, &cs).unwrap()
}

/// Free-particle universe with `d_S` system levels starting at `k0 2pi/L`
/// and a rod spectrum holding all partners plus `extra` levels.
pub fn free_universe(rng: &mut ChaCha8Rng, ds: usize, extra: usize, k0: i32, masses: (f64, f64)) -> GlobalState {
    let l = 2.0 * PI;
    let dp = 2.0 * PI / l;
    let sys = momentum_spectrum(ds, k0 as f64 * dp, l).unwrap();
    let rod = momentum_spectrum(ds + extra, -((k0 + ds as i32 - 1) as f64) * dp, l).unwrap();
    let c = unit_coeffs(rng, ds);
    double_constrained_state(Dispersion::Free { mass: masses.0 }, Dispersion::Free { mass: masses.1 }, &rod, &sys, &c).unwrap()
}
