//! Two harmonic oscillators with continuous momentum, projected onto a
//! truncated energy basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{build_state, synthesize_clock, Dispersion, EnergyForm, Factor, Frame, GlobalState, Role, UniverseOptions};
use crate::error::{Error, Result};
use crate::frames::PhaseConvention;
use crate::tensor::{Label, C64};

/// Amplitude `psi(p)` of the relative momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumAmplitude {
    /// `|psi|^2` normal with the given centre and standard deviation.
    Gaussian { center: f64, sigma: f64 },
}

impl MomentumAmplitude {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            MomentumAmplitude::Gaussian { center, sigma } => {
                (2.0 * PI * sigma * sigma).powf(-0.25) * (-(p - center).powi(2) / (4.0 * sigma * sigma)).exp()
            }
        }
    }

    fn window(&self, half_width_sigmas: f64) -> (f64, f64) {
        match *self {
            MomentumAmplitude::Gaussian { center, sigma } => {
                (center - half_width_sigmas * sigma, center + half_width_sigmas * sigma)
            }
        }
    }
}

/// Uniform trapezoid rule over `centre +- half_width_sigmas * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub half_width_sigmas: f64,
    pub points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { half_width_sigmas: 8.0, points: 257 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSpec {
    pub rod_mass: f64,
    pub sys_mass: f64,
    pub rod_frequency: f64,
    pub sys_frequency: f64,
    /// One coefficient per synthesized clock level (ascending energy); uniform when absent.
    pub clock_coeffs: Option<Vec<C64>>,
    pub amplitude: MomentumAmplitude,
    pub quadrature: QuadratureSpec,
    /// Number of levels kept per oscillator.
    pub truncation: usize,
}

#[derive(Debug, Clone)]
pub struct OscillatorUniverse {
    pub state: GlobalState,
    /// Normalized amplitudes `c~_kl` (rod level k, system level l), before clock splitting.
    pub coefficients: DMatrix<C64>,
    /// `sum |a_kl|^2` of the projected amplitudes before renormalization.
    pub raw_weight: f64,
    /// Max change of `a_kl` against a 4x finer quadrature grid.
    pub quadrature_leakage: f64,
    /// Mass of `|psi|^2` outside the quadrature window.
    pub window_leakage: f64,
    pub spec: OscillatorSpec,
}

/// Normalized Hermite functions `h_0..h_{n-1}` at `x`, by the three-term recurrence.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut h = vec![0.0; n];
    if n == 0 {
        return h;
    }
    h[0] = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if n > 1 {
        h[1] = 2f64.sqrt() * x * h[0];
    }
    for k in 2..n {
        h[k] = (2.0 / k as f64).sqrt() * x * h[k - 1] - ((k - 1) as f64 / k as f64).sqrt() * h[k - 2];
    }
    h
}

/// `<p|E_k>` for `k < n`.
pub fn momentum_eigenfunction(n: usize, p: f64, mass: f64, omega: f64) -> Vec<C64> {
    let s = (mass * omega).sqrt();
    let mut phase = C64::new(1.0, 0.0);
    hermite_functions(n, p / s)
        .into_iter()
        .map(|h| {
            let v = phase * (h / s.sqrt());
            phase *= C64::new(0.0, -1.0);
            v
        })
        .collect()
}

/// `<x|E_k>` for `k < n` (real).
pub fn position_eigenfunction(n: usize, x: f64, mass: f64, omega: f64) -> Vec<f64> {
    let s = (mass * omega).sqrt();
    hermite_functions(n, x * s).into_iter().map(|h| h * s.sqrt()).collect()
}

fn projected_amplitudes(spec: &OscillatorSpec, points: usize) -> DMatrix<C64> {
    let n = spec.truncation;
    let (lo, hi) = spec.amplitude.window(spec.quadrature.half_width_sigmas);
    let h = (hi - lo) / (points - 1) as f64;
    let mut a = DMatrix::zeros(n, n);
    for q in 0..points {
        let p = lo + q as f64 * h;
        let w = if q == 0 || q == points - 1 { h / 2.0 } else { h };
        let psi = spec.amplitude.eval(p) * w;
        // beta(a, E_k) = <E_k|a> = conj(<a|E_k>)
        let br = momentum_eigenfunction(n, -p, spec.rod_mass, spec.rod_frequency);
        let bs = momentum_eigenfunction(n, p, spec.sys_mass, spec.sys_frequency);
        for k in 0..n {
            for l in 0..n {
                a[(k, l)] += br[k].conj() * bs[l].conj() * psi;
            }
        }
    }
    a
}

fn window_leakage(spec: &OscillatorSpec) -> f64 {
    let (lo, hi) = spec.amplitude.window(spec.quadrature.half_width_sigmas);
    let points = 8 * spec.quadrature.points;
    let h = (hi - lo) / (points - 1) as f64;
    let inside: f64 = (0..points)
        .map(|q| {
            let w = if q == 0 || q == points - 1 { h / 2.0 } else { h };
            spec.amplitude.eval(lo + q as f64 * h).powi(2) * w
        })
        .sum();
    (1.0 - inside).max(0.0)
}

pub fn oscillator_universe(spec: &OscillatorSpec) -> Result<OscillatorUniverse> {
    oscillator_universe_with(spec, UniverseOptions::default())
}

pub fn oscillator_universe_with(spec: &OscillatorSpec, options: UniverseOptions) -> Result<OscillatorUniverse> {
    let n = spec.truncation;
    if n == 0 {
        return Err(Error::InvalidInput("truncation must be at least 1".into()));
    }
    if spec.quadrature.points < 3 || !(spec.quadrature.half_width_sigmas > 0.0) {
        return Err(Error::InvalidInput("quadrature needs >= 3 points and a positive window".into()));
    }
    let rod = Dispersion::Oscillator { mass: spec.rod_mass, frequency: spec.rod_frequency };
    let system = Dispersion::Oscillator { mass: spec.sys_mass, frequency: spec.sys_frequency };
    rod.validate()?;
    system.validate()?;
    let leak = window_leakage(spec);
    if leak > 1e-6 {
        return Err(Error::QuadratureUnderflow { leakage: leak });
    }
    let a = projected_amplitudes(spec, spec.quadrature.points);
    let fine = projected_amplitudes(spec, 4 * (spec.quadrature.points - 1) + 1);
    let quadrature_leakage = (&a - &fine).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let raw_weight: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let amax = a.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let eps = |k: usize, l: usize| spec.rod_frequency * (k as f64 + 0.5) + spec.sys_frequency * (l as f64 + 0.5);
    let kept: Vec<(usize, usize)> = (0..n)
        .flat_map(|k| (0..n).map(move |l| (k, l)))
        .filter(|&(k, l)| a[(k, l)].norm() > 1e-15 * amax)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("momentum amplitude projects to zero".into()));
    }
    let clock = synthesize_clock(kept.iter().map(|&(k, l)| -eps(k, l)), &options)?;
    let weight = |k: usize, l: usize| -> Result<C64> {
        match &spec.clock_coeffs {
            None => Ok(C64::new(1.0, 0.0)),
            Some(cs) => {
                let levels = clock.levels();
                if cs.len() != levels.len() {
                    return Err(Error::InvalidInput(format!(
                        "expected {} clock coefficients, got {}",
                        levels.len(),
                        cs.len()
                    )));
                }
                let e = -eps(k, l);
                let i = levels.iter().position(|&x| (x - e).abs() <= 1e-12 * e.abs().max(1.0)).expect("synthesized");
                Ok(cs[i])
            }
        }
    };
    let mut coefficients = DMatrix::zeros(n, n);
    for &(k, l) in &kept {
        coefficients[(k, l)] = weight(k, l)? * a[(k, l)];
    }
    let norm = coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("clock coefficients cancel the state".into()));
    }
    coefficients /= C64::new(norm, 0.0);

    let level_labels = |omega: f64| (0..n).map(|k| Label::Level { n: k, energy: omega * (k as f64 + 0.5) }).collect();
    let frame = Frame {
        factors: vec![
            clock.factor.clone(),
            Factor { role: Role::Rod(0), labels: level_labels(spec.rod_frequency) },
            Factor { role: Role::System(0), labels: level_labels(spec.sys_frequency) },
        ],
        rod,
        system,
        clock: clock.spectrum.clone(),
        rod_spectra: vec![],
        sys_spectra: vec![],
        phase: PhaseConvention::Standard,
        energy_form: EnergyForm::Linear,
    };
    let raw = kept.iter().map(|&(k, l)| (vec![clock.index(-eps(k, l)), k, l], coefficients[(k, l)]));
    let state = build_state(frame, raw)?;
    Ok(OscillatorUniverse { state, coefficients, raw_weight, quadrature_leakage, window_leakage: leak, spec: spec.clone() })
}
