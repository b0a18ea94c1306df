//! Exhaustive search for product-basis triples annihilated by both
//! constraints when the clock itself carries momentum.

use super::{build_state, Dispersion, EnergyForm, Factor, Frame, GlobalState, Role};
use crate::error::Result;
use crate::frames::{ClockSpectrum, PhaseConvention, Spectrum};
use crate::tensor::{Label, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockLevel {
    pub momentum: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Uniform superposition over the solutions, if any.
    pub state: Option<GlobalState>,
    /// Solution triples `(clock, rod, system)` in canonical order.
    pub solutions: Vec<[usize; 3]>,
    /// `|p_C + p_R + p_S|` for every candidate triple, canonical order.
    pub momentum_residuals: Vec<f64>,
    /// `|E_C + E_R + E_S|` for every candidate triple, canonical order.
    pub energy_residuals: Vec<f64>,
}

pub fn nonzero_clock_momentum_state(
    clock: &[ClockLevel],
    rod: &Spectrum,
    sys: &Spectrum,
    rod_disp: Dispersion,
    sys_disp: Dispersion,
) -> Result<SearchOutcome> {
    let mut solutions = Vec::new();
    let mut momentum_residuals = Vec::new();
    let mut energy_residuals = Vec::new();
    for (ci, c) in clock.iter().enumerate() {
        for (ri, &pr) in rod.values().iter().enumerate() {
            let er = rod_disp.energy(&[pr])?;
            for (si, &ps) in sys.values().iter().enumerate() {
                let es = sys_disp.energy(&[ps])?;
                let dp = (c.momentum + pr + ps).abs();
                let de = (c.energy + er + es).abs();
                let pscale = c.momentum.abs().max(pr.abs()).max(ps.abs()).max(1.0);
                let escale = c.energy.abs().max(er.abs()).max(es.abs()).max(1.0);
                if dp <= 1e-12 * pscale && de <= 1e-12 * escale {
                    solutions.push([ci, ri, si]);
                }
                momentum_residuals.push(dp);
                energy_residuals.push(de);
            }
        }
    }
    if solutions.is_empty() {
        return Ok(SearchOutcome { state: None, solutions, momentum_residuals, energy_residuals });
    }
    let with_momentum = clock.iter().any(|c| c.momentum != 0.0);
    let labels = clock
        .iter()
        .map(|c| {
            if with_momentum {
                Label::ClockLevel { energy: c.energy, momentum: c.momentum }
            } else {
                Label::Energy(c.energy)
            }
        })
        .collect();
    let energies: Vec<f64> = clock.iter().map(|c| c.energy).collect();
    let spectrum = if energies.windows(2).all(|w| w[1] > w[0]) {
        ClockSpectrum::from_floats(&energies).ok()
    } else {
        None
    };
    let frame = Frame {
        factors: vec![
            Factor { role: Role::Clock, labels },
            Factor { role: Role::Rod(0), labels: rod.labels() },
            Factor { role: Role::System(0), labels: sys.labels() },
        ],
        rod: rod_disp,
        system: sys_disp,
        clock: spectrum,
        rod_spectra: vec![rod.clone()],
        sys_spectra: vec![sys.clone()],
        phase: PhaseConvention::Standard,
        energy_form: EnergyForm::Linear,
    };
    let amp = C64::new(1.0 / (solutions.len() as f64).sqrt(), 0.0);
    let state = build_state(frame, solutions.iter().map(|s| (s.to_vec(), amp)))?;
    Ok(SearchOutcome { state: Some(state), solutions, momentum_residuals, energy_residuals })
}
