//! Universe construction from the `[universe]` block.

use std::f64::consts::PI;

use paw_core::frames::{momentum_spectrum, Spectrum};
use paw_core::relativistic::{dirac_universe, kg_universe, FrameMode};
use paw_core::universe::{
    oscillator_universe_with, universe_with, Branch, ClockLayout, ClockMode, Dispersion, GlobalState, MomentumAmplitude,
    OscillatorSpec, QuadratureSpec, UniverseOptions,
};
use paw_core::C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{BranchKey, ClockModeKey, Constructor, FrameKey, UniverseConfig};
use crate::CliError;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core_err(e: paw_core::Error) -> CliError {
    CliError::Config(format!("universe: {e}"))
}

/// Which keys each constructor reads; anything else set is an error.
fn allowed(c: Constructor) -> &'static [&'static str] {
    match c {
        Constructor::DoubleConstrainedState | Constructor::Universe3plus1 => &[
            "axes", "d", "p0", "period", "rod_mass", "sys_mass", "mass_ratio", "clock_levels", "clock_mode", "coefficients",
            "coefficients_im",
        ],
        Constructor::KgUniverse => &[
            "axes", "d", "p0", "period", "rod_mass", "sys_mass", "mass_ratio", "mass", "branch", "frame", "clock_mode",
            "coefficients", "coefficients_im",
        ],
        Constructor::DiracUniverse => &[
            "axes", "d", "p0", "period", "rod_mass", "sys_mass", "mass_ratio", "mass", "frame", "clock_mode", "coefficients",
            "coefficients_im",
        ],
        Constructor::OscillatorUniverse => &[
            "rod_mass", "sys_mass", "mass_ratio", "rod_frequency", "sys_frequency", "center", "sigma", "truncation",
            "quadrature_points", "half_width_sigmas", "clock_levels", "coefficients", "coefficients_im",
        ],
    }
}

fn set_keys(u: &UniverseConfig) -> Vec<&'static str> {
    let mut out = Vec::new();
    macro_rules! probe {
        ($($k:ident),*) => { $( if u.$k.is_some() { out.push(stringify!($k)); } )* };
    }
    probe!(
        axes, d, p0, period, rod_mass, sys_mass, mass_ratio, mass, branch, frame, clock_mode, clock_levels, coefficients,
        coefficients_im, rod_frequency, sys_frequency, center, sigma, truncation, quadrature_points, half_width_sigmas
    );
    out
}

pub fn check_keys(u: &UniverseConfig) -> Result<(), CliError> {
    let ok = allowed(u.constructor);
    for k in set_keys(u) {
        if !ok.contains(&k) {
            return Err(cfg_err(format!("universe.{k} is not a parameter of {:?}", u.constructor)));
        }
    }
    Ok(())
}

pub fn axes(u: &UniverseConfig) -> usize {
    match u.constructor {
        Constructor::Universe3plus1 => 3,
        Constructor::OscillatorUniverse => 1,
        _ => u.axes.unwrap_or(1),
    }
}

fn sys_mass(u: &UniverseConfig) -> f64 {
    u.sys_mass.unwrap_or(1.0)
}

pub fn rod_mass(u: &UniverseConfig) -> Result<f64, CliError> {
    match (u.mass_ratio, u.rod_mass) {
        (Some(r), _) => Ok(r * sys_mass(u)),
        (None, Some(m)) => Ok(m),
        (None, None) => Err(cfg_err("universe needs rod_mass or mass_ratio")),
    }
}

/// System spectrum and its rod partners on one axis.
pub fn axis_spectra(u: &UniverseConfig) -> Result<(Spectrum, Spectrum), CliError> {
    let d = u.d.ok_or_else(|| cfg_err("universe.d is required"))?;
    let period = u.period.unwrap_or(2.0 * PI);
    let p0 = u.p0.unwrap_or(0.0);
    let step = 2.0 * PI / period;
    let sys = momentum_spectrum(d, p0, period).map_err(core_err)?;
    let rod = momentum_spectrum(d, -(p0 + (d - 1) as f64 * step), period).map_err(core_err)?;
    Ok((rod, sys))
}

/// Number of coefficients the constructor takes (`None` for the oscillator,
/// whose coefficients weight the synthesized clock levels).
pub fn coefficient_count(u: &UniverseConfig) -> Result<Option<usize>, CliError> {
    let modes = || -> Result<usize, CliError> {
        let d = u.d.ok_or_else(|| cfg_err("universe.d is required"))?;
        Ok(d.pow(axes(u) as u32))
    };
    Ok(match u.constructor {
        Constructor::OscillatorUniverse => None,
        Constructor::KgUniverse if u.branch == Some(BranchKey::Both) => Some(2 * modes()?),
        Constructor::DiracUniverse => Some(4 * modes()?),
        _ => Some(modes()?),
    })
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

/// Coefficients from the config, or a normalized random draw.
pub fn configured_coeffs(u: &UniverseConfig, rng: &mut ChaCha8Rng) -> Result<Option<Vec<C64>>, CliError> {
    let given = match (&u.coefficients, &u.coefficients_im) {
        (None, None) => None,
        (None, Some(_)) => return Err(cfg_err("universe.coefficients_im without coefficients")),
        (Some(re), im) => {
            let im = im.clone().unwrap_or_else(|| vec![0.0; re.len()]);
            if im.len() != re.len() {
                return Err(cfg_err("universe.coefficients and coefficients_im differ in length")) ;
            }
            Some(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect::<Vec<_>>())
        }
    };
    match coefficient_count(u)? {
        None => Ok(given),
        Some(n) => match given {
            Some(c) if c.len() != n => Err(cfg_err(format!("universe.coefficients has {} entries, expected {n}", c.len()))),
            Some(c) => Ok(Some(c)),
            None => Ok(Some(random_coeffs(rng, n))),
        },
    }
}

fn options(u: &UniverseConfig) -> UniverseOptions {
    UniverseOptions {
        clock_layout: u.clock_levels.map_or(ClockLayout::Levels, ClockLayout::PaddedLadder),
        clock_mode: match u.clock_mode.unwrap_or_default() {
            ClockModeKey::Exact => ClockMode::Exact,
            ClockModeKey::ContinuousOnly => ClockMode::ContinuousOnly,
        },
        ..Default::default()
    }
}

pub fn build(u: &UniverseConfig, coeffs: Option<&[C64]>) -> Result<GlobalState, CliError> {
    check_keys(u)?;
    let need = || coeffs.ok_or_else(|| cfg_err("coefficients missing"));
    let axes_list = || -> Result<Vec<(Spectrum, Spectrum)>, CliError> { Ok(vec![axis_spectra(u)?; axes(u)]) };
    let frame = || -> Result<FrameMode, CliError> {
        Ok(match u.frame.unwrap_or_default() {
            FrameKey::Approximate => FrameMode::Approximate,
            FrameKey::Exact => FrameMode::Exact { rod_mass: rod_mass(u)? },
        })
    };
    let relativistic_mass = || u.mass.ok_or_else(|| cfg_err("universe.mass is required"));
    match u.constructor {
        Constructor::DoubleConstrainedState | Constructor::Universe3plus1 => universe_with(
            &axes_list()?,
            Dispersion::Free { mass: rod_mass(u)? },
            Dispersion::Free { mass: sys_mass(u) },
            need()?,
            options(u),
        )
        .map_err(core_err),
        Constructor::KgUniverse => {
            let branch = match u.branch.unwrap_or_default() {
                BranchKey::Positive => Branch::Positive,
                BranchKey::Negative => Branch::Negative,
                BranchKey::Both => Branch::Both,
            };
            kg_universe(&axes_list()?, relativistic_mass()?, branch, need()?, frame()?, options(u)).map_err(core_err)
        }
        Constructor::DiracUniverse => {
            dirac_universe(&axes_list()?, relativistic_mass()?, need()?, frame()?, options(u)).map_err(core_err)
        }
        Constructor::OscillatorUniverse => {
            let spec = OscillatorSpec {
                rod_mass: rod_mass(u)?,
                sys_mass: sys_mass(u),
                rod_frequency: u.rod_frequency.unwrap_or(1.0),
                sys_frequency: u.sys_frequency.unwrap_or(1.0),
                clock_coeffs: coeffs.map(|c| c.to_vec()),
                amplitude: MomentumAmplitude::Gaussian { center: u.center.unwrap_or(0.0), sigma: u.sigma.unwrap_or(1.0) },
                quadrature: QuadratureSpec {
                    half_width_sigmas: u.half_width_sigmas.unwrap_or(8.0),
                    points: u.quadrature_points.unwrap_or(257),
                },
                truncation: u.truncation.unwrap_or(12),
            };
            Ok(oscillator_universe_with(&spec, options(u)).map_err(core_err)?.state)
        }
    }
}

/// Real coefficients of the symmetric three-level free universe, when `u`
/// is one (closed-form comparisons apply).
pub fn three_level(u: &UniverseConfig, coeffs: &[C64]) -> Option<[f64; 3]> {
    if u.constructor != Constructor::DoubleConstrainedState || axes(u) != 1 || u.d != Some(3) {
        return None;
    }
    let step = 2.0 * PI / u.period.unwrap_or(2.0 * PI);
    if (u.p0.unwrap_or(0.0) + step).abs() > 1e-12 * step || coeffs.iter().any(|c| c.im != 0.0) {
        return None;
    }
    Some([coeffs[0].re, coeffs[1].re, coeffs[2].re])
}
