//! Global states of clock, rod(s) and system(s) annihilated by the total
//! momentum (per axis) and, optionally, by the total energy.
//!
//! Factor order is always clock, rod axes, system axes, then spin or memory
//! factors. Constraint residuals are measured by applying the operators to
//! the dense vector, independently of how the terms were built.

mod oscillator;
mod search;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frames::{ClockSpectrum, PhaseConvention, Spectrum};
use crate::relativistic::dirac_algebra;
use crate::tensor::{flat_index, Label, LinearOperator, Normalization, OperatorSum, StateVector, C64};


pub use oscillator::{
    hermite_functions, momentum_eigenfunction, oscillator_universe, oscillator_universe_with, position_eigenfunction, MomentumAmplitude, OscillatorSpec,
    OscillatorUniverse, QuadratureSpec,
};
pub use search::{nonzero_clock_momentum_state, ClockLevel, SearchOutcome};

/// Tolerance on the normalization of input coefficients.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Clock,
    Rod(usize),
    System(usize),
    Spin,
    /// Rod memory of record `i`.
    RodMemory(usize),
    /// System memory of record `i`.
    SystemMemory(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub role: Role,
    pub labels: Vec<Label>,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// Which sign(s) of the relativistic energy a scalar universe carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Positive,
    Negative,
    Both,
}

/// Energy of a subsystem as a function of its momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    /// No kinetic energy (a frame whose kinetic term is neglected).
    Static,
    Free { mass: f64 },
    Oscillator { mass: f64, frequency: f64 },
    RelativisticScalar { mass: f64, branch: Branch },
    Dirac { mass: f64 },
}

impl Dispersion {
    /// Single-valued energy `eps(p)`.
    pub fn energy(&self, p: &[f64]) -> Result<f64> {
        let p2: f64 = p.iter().map(|x| x * x).sum();
        match *self {
            Dispersion::Static => Ok(0.0),
            Dispersion::Free { mass } => Ok(p2 / (2.0 * mass)),
            Dispersion::RelativisticScalar { mass, branch } => {
                let e = (p2 + mass * mass).sqrt();
                match branch {
                    Branch::Positive => Ok(e),
                    Branch::Negative => Ok(-e),
                    Branch::Both => Err(Error::Unsupported("two-branch dispersion is not single-valued".into())),
                }
            }
            Dispersion::Oscillator { .. } => {
                Err(Error::Unsupported("oscillator energy is not a function of momentum".into()))
            }
            Dispersion::Dirac { .. } => Err(Error::Unsupported("Dirac energy is a 4x4 matrix".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dispersion::Static => true,
            Dispersion::Free { mass } => mass > 0.0 && mass.is_finite(),
            Dispersion::Oscillator { mass, frequency } => mass > 0.0 && frequency > 0.0 && mass.is_finite(),
            Dispersion::RelativisticScalar { mass, .. } | Dispersion::Dirac { mass } => mass >= 0.0 && mass.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid dispersion parameters {self:?}")))
        }
    }
}

/// How the synthesized clock is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockLayout {
    /// Exactly the distinct levels needed.
    #[default]
    Levels,
    /// Padded to the full equally spaced ladder `E_0 + n 2pi/T`, n = 0..=r_max.
    Ladder,
    /// Equally spaced ladder with `n` levels, `n > r_max`.
    PaddedLadder(usize),
}

/// Whether the clock must admit an exact rational period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    #[default]
    Exact,
    /// Irrational ratios allowed; only continuous, non-periodic clock readings.
    ContinuousOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniverseOptions {
    pub clock_layout: ClockLayout,
    pub clock_mode: ClockMode,
    pub phase: PhaseConvention,
}

/// Kind of energy constraint imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyForm {
    None,
    /// `(H_C + H_R + H_S) Psi = 0`.
    Linear,
    /// `((H_C + H_R)^2 - |P_S|^2 - m^2) Psi = 0`.
    KleinGordon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// `||(P_C + P_R + P_S)^{(J)} Psi||` per axis.
    pub momentum: Vec<f64>,
    pub energy: Option<f64>,
    pub energy_form: EnergyForm,
    /// `|sum |c|^2 - 1|`.
    pub norm_error: f64,
}

impl ConstraintReport {
    pub fn max_momentum(&self) -> f64 {
        self.momentum.iter().copied().fold(0.0, f64::max)
    }

    pub fn satisfied(&self, tol: f64) -> bool {
        self.max_momentum() <= tol && self.energy.is_none_or(|e| e <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub index: Vec<usize>,
}

/// Momentum-basis content of one term of a potential-free universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub coeff: C64,
    pub clock_energy: Option<f64>,
    pub rod_momentum: Vec<f64>,
    pub sys_momentum: Vec<f64>,
}

/// Which subsystems an operator includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parts {
    pub clock: bool,
    pub rod: bool,
    pub system: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { clock: true, rod: true, system: true };
    pub const ROD_SYSTEM: Parts = Parts { clock: false, rod: true, system: true };
    pub const SYSTEM: Parts = Parts { clock: false, rod: false, system: true };
    pub const ROD: Parts = Parts { clock: false, rod: true, system: false };
    pub const CLOCK_ROD: Parts = Parts { clock: true, rod: true, system: false };
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    factors: Vec<Factor>,
    terms: Vec<Term>,
    rod: Dispersion,
    system: Dispersion,
    clock: Option<ClockSpectrum>,
    rod_spectra: Vec<Spectrum>,
    sys_spectra: Vec<Spectrum>,
    phase: PhaseConvention,
    energy_form: EnergyForm,
    report: ConstraintReport,
}

impl GlobalState {
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn roles(&self) -> Vec<Role> {
        self.factors.iter().map(|f| f.role).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn slot(&self, role: Role) -> Option<usize> {
        self.factors.iter().position(|f| f.role == role)
    }

    pub fn factor(&self, role: Role) -> Option<&Factor> {
        self.factors.iter().find(|f| f.role == role)
    }

    /// Number of spatial axes.
    pub fn axes(&self) -> usize {
        self.factors.iter().filter(|f| matches!(f.role, Role::System(_))).count()
    }

    pub fn clock_spectrum(&self) -> Option<&ClockSpectrum> {
        self.clock.as_ref()
    }

    pub fn has_clock(&self) -> bool {
        self.slot(Role::Clock).is_some()
    }

    pub fn rod_spectrum(&self, axis: usize) -> Option<&Spectrum> {
        self.rod_spectra.get(axis)
    }

    pub fn sys_spectrum(&self, axis: usize) -> Option<&Spectrum> {
        self.sys_spectra.get(axis)
    }

    pub fn rod_dispersion(&self) -> Dispersion {
        self.rod
    }

    pub fn system_dispersion(&self) -> Dispersion {
        self.system
    }

    pub fn phase(&self) -> PhaseConvention {
        self.phase
    }

    pub fn energy_form(&self) -> EnergyForm {
        self.energy_form
    }

    pub fn is_energy_constrained(&self) -> bool {
        self.energy_form != EnergyForm::None
    }

    pub fn report(&self) -> &ConstraintReport {
        &self.report
    }

    /// Dense amplitude tensor.
    pub fn dense(&self) -> StateVector {
        let shape = self.shape();
        let mut amps = vec![C64::new(0.0, 0.0); shape.iter().product()];
        for t in &self.terms {
            amps[flat_index(&shape, &t.index)] += t.coeff;
        }
        let labels = self.factors.iter().map(|f| f.labels.clone()).collect();
        StateVector::new(amps, shape, labels, Normalization::Unit).expect("terms index within shape")
    }

    /// Per-term momentum content; only for universes whose factors are a
    /// clock, rods and systems labelled by momentum.
    pub fn modes(&self) -> Result<Vec<Mode>> {
        let mut rod_slots = Vec::new();
        let mut sys_slots = Vec::new();
        for axis in 0..self.axes() {
            rod_slots.push(self.slot(Role::Rod(axis)).ok_or_else(|| Error::Unsupported("missing rod axis".into()))?);
            sys_slots.push(self.slot(Role::System(axis)).expect("counted"));
        }
        if self.factors.iter().any(|f| !matches!(f.role, Role::Clock | Role::Rod(_) | Role::System(_))) {
            return Err(Error::Unsupported("modes need a universe without spin or memory factors".into()));
        }
        let clock = self.slot(Role::Clock);
        let mom = |slot: usize, i: usize| {
            self.factors[slot].labels[i]
                .momentum()
                .ok_or_else(|| Error::Unsupported("factor is not labelled by momentum".into()))
        };
        self.terms
            .iter()
            .map(|t| {
                Ok(Mode {
                    coeff: t.coeff,
                    clock_energy: clock.map(|c| self.factors[c].labels[t.index[c]].energy().unwrap_or(0.0)),
                    rod_momentum: rod_slots.iter().map(|&s| mom(s, t.index[s])).collect::<Result<_>>()?,
                    sys_momentum: sys_slots.iter().map(|&s| mom(s, t.index[s])).collect::<Result<_>>()?,
                })
            })
            .collect()
    }

    fn layout(&self, roles: &[Role]) -> Result<Vec<&Factor>> {
        roles
            .iter()
            .map(|r| self.factor(*r).ok_or_else(|| Error::InvalidInput(format!("no factor with role {r:?}"))))
            .collect()
    }

    /// Energy operator of the chosen parts on the factor layout `roles`
    /// (any subset of this state's factors, in any order).
    pub fn energy_operator(&self, roles: &[Role], parts: Parts) -> Result<OperatorSum> {
        let layout = self.layout(roles)?;
        let shape: Vec<usize> = layout.iter().map(|f| f.dim()).collect();
        let mut op = OperatorSum::new(shape.clone());
        if parts.clock {
            if let Some(c) = roles.iter().position(|r| *r == Role::Clock) {
                let labels = layout[c].labels.clone();
                op.add_diagonal(|m| labels[m[c]].energy().unwrap_or(0.0));
            }
        }
        let axes = self.axes();
        if parts.rod {
            let slots = axis_slots(roles, Role::Rod, axes)?;
            add_dispersion(&mut op, self.rod, &layout, &shape, &slots, None)?;
        }
        if parts.system {
            let slots = axis_slots(roles, Role::System, axes)?;
            let spin = roles.iter().position(|r| *r == Role::Spin);
            add_dispersion(&mut op, self.system, &layout, &shape, &slots, spin)?;
        }
        Ok(op)
    }

    /// Momentum operator along `axis` of the chosen parts on the layout `roles`.
    pub fn momentum_operator(&self, roles: &[Role], axis: usize, parts: Parts) -> Result<OperatorSum> {
        let layout = self.layout(roles)?;
        let shape: Vec<usize> = layout.iter().map(|f| f.dim()).collect();
        let mut op = OperatorSum::new(shape.clone());
        let mut add = |slot: usize, disp: Dispersion| -> Result<()> {
            let labels = &layout[slot].labels;
            if labels.iter().all(|l| l.momentum().is_some()) {
                let labels = labels.clone();
                op.add_diagonal(|m| labels[m[slot]].momentum().unwrap_or(0.0));
                Ok(())
            } else if let Dispersion::Oscillator { mass, frequency } = disp {
                let local = ladder_momentum(labels.len(), mass, frequency);
                op.add_local(LinearOperator::hermitian(local, shape.clone(), vec![slot])?)
            } else {
                Err(Error::Unsupported(format!("factor {:?} carries no momentum", layout[slot].role)))
            }
        };
        for (slot, r) in roles.iter().enumerate() {
            match *r {
                Role::Clock if parts.clock && axis == 0 => {
                    if layout[slot].labels.iter().any(|l| matches!(l, Label::ClockLevel { .. })) {
                        add(slot, Dispersion::Static)?;
                    }
                }
                Role::Rod(a) if parts.rod && a == axis => add(slot, self.rod)?,
                Role::System(a) if parts.system && a == axis => add(slot, self.system)?,
                _ => {}
            }
        }
        Ok(op)
    }

    /// Dense constraint residuals of an arbitrary vector over this state's factors.
    pub fn constraint_residuals(&self, psi: &StateVector) -> Result<ConstraintReport> {
        let roles = self.roles();
        let mut momentum = Vec::new();
        for axis in 0..self.axes() {
            momentum.push(self.momentum_operator(&roles, axis, Parts::ALL)?.apply(psi)?.norm());
        }
        let energy = match self.energy_form {
            EnergyForm::None => None,
            EnergyForm::Linear => Some(self.energy_operator(&roles, Parts::ALL)?.apply(psi)?.norm()),
            EnergyForm::KleinGordon => {
                let mass = match self.system {
                    Dispersion::RelativisticScalar { mass, .. } => mass,
                    _ => return Err(Error::Unsupported("Klein-Gordon form needs a scalar system".into())),
                };
                let h0 = self.energy_operator(&roles, Parts::CLOCK_ROD)?;
                let mut out = h0.apply(&h0.apply(psi)?)?.sub(&psi.scale(C64::new(mass * mass, 0.0)))?;
                for axis in 0..self.axes() {
                    let p = self.momentum_operator(&roles, axis, Parts::SYSTEM)?;
                    out = out.sub(&p.apply(&p.apply(psi)?)?)?;
                }
                Some(out.norm())
            }
        };
        Ok(ConstraintReport { momentum, energy, energy_form: self.energy_form, norm_error: (psi.norm_sqr() - 1.0).abs() })
    }

    /// A state over a new factor list sharing this state's dynamics and frames.
    pub(crate) fn derived(&self, factors: Vec<Factor>, terms: Vec<Term>, energy_form: EnergyForm) -> Result<GlobalState> {
        let mut g = GlobalState {
            factors,
            terms,
            rod: self.rod,
            system: self.system,
            clock: self.clock.clone(),
            rod_spectra: self.rod_spectra.clone(),
            sys_spectra: self.sys_spectra.clone(),
            phase: self.phase,
            energy_form,
            report: ConstraintReport { momentum: vec![], energy: None, energy_form, norm_error: 0.0 },
        };
        g.report = g.constraint_residuals(&g.dense())?;
        Ok(g)
    }
}

fn axis_slots(roles: &[Role], make: fn(usize) -> Role, axes: usize) -> Result<Vec<usize>> {
    let slots: Vec<usize> = (0..axes).filter_map(|a| roles.iter().position(|r| *r == make(a))).collect();
    if !slots.is_empty() && slots.len() != axes {
        return Err(Error::InvalidInput("layout includes only some axes of a subsystem".into()));
    }
    Ok(slots)
}

fn add_dispersion(
    op: &mut OperatorSum,
    disp: Dispersion,
    layout: &[&Factor],
    shape: &[usize],
    slots: &[usize],
    spin: Option<usize>,
) -> Result<()> {
    if slots.is_empty() {
        return Ok(());
    }
    let momenta = |m: &[usize]| -> Vec<f64> {
        slots.iter().map(|&s| layout[s].labels[m[s]].momentum().unwrap_or(f64::NAN)).collect()
    };
    match disp {
        Dispersion::Static => Ok(()),
        Dispersion::Free { .. } | Dispersion::RelativisticScalar { .. } => {
            disp.energy(&[0.0])?;
            if slots.iter().any(|&s| layout[s].labels.iter().any(|l| l.momentum().is_none())) {
                return Err(Error::Unsupported("momentum dispersion on a factor without momentum labels".into()));
            }
            op.add_diagonal(|m| disp.energy(&momenta(m)).unwrap_or(f64::NAN));
            Ok(())
        }
        Dispersion::Oscillator { frequency, .. } => {
            for &s in slots {
                let local = ladder_number(layout[s].dim(), frequency);
                op.add_local(LinearOperator::hermitian(local, shape.to_vec(), vec![s])?)?;
            }
            Ok(())
        }
        Dispersion::Dirac { mass } => {
            let spin = spin.ok_or_else(|| Error::Unsupported("Dirac dispersion needs a spin factor".into()))?;
            let alg = dirac_algebra();
            let dims: Vec<usize> = slots.iter().map(|&s| shape[s]).collect();
            let n: usize = dims.iter().product();
            let mut local = DMatrix::zeros(n * 4, n * 4);
            for k in 0..n {
                let multi = crate::tensor::multi_index(&dims, k);
                let p: Vec<f64> = multi.iter().zip(slots).map(|(&i, &s)| layout[s].labels[i].momentum().unwrap_or(f64::NAN)).collect();
                let h = alg.hamiltonian(&p, mass);
                for a in 0..4 {
                    for b in 0..4 {
                        local[(k * 4 + a, k * 4 + b)] = h[(a, b)];
                    }
                }
            }
            let mut all = slots.to_vec();
            all.push(spin);
            op.add_local(LinearOperator::hermitian(local, shape.to_vec(), all)?)
        }
    }
}

/// Truncated lowering operator `a` on `n` levels.
pub fn lowering(n: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// `omega (a^dagger a + 1/2)` built from the truncated ladder.
pub fn ladder_number(n: usize, omega: f64) -> DMatrix<C64> {
    let a = lowering(n);
    let num = a.adjoint() * &a;
    (num + DMatrix::identity(n, n) * C64::new(0.5, 0.0)) * C64::new(omega, 0.0)
}

/// `P = i sqrt(m omega / 2) (a^dagger - a)`.
pub fn ladder_momentum(n: usize, mass: f64, omega: f64) -> DMatrix<C64> {
    let a = lowering(n);
    (a.adjoint() - &a) * C64::new(0.0, (mass * omega / 2.0).sqrt())
}

/// `X = (a + a^dagger) / sqrt(2 m omega)`.
pub fn ladder_position(n: usize, mass: f64, omega: f64) -> DMatrix<C64> {
    let a = lowering(n);
    (a.adjoint() + &a) * C64::new(1.0 / (2.0 * mass * omega).sqrt(), 0.0)
}

/// One product-basis term before clock synthesis.
#[derive(Debug, Clone)]
pub(crate) struct TermSpec {
    pub coeff: C64,
    pub clock_energy: f64,
    pub rod: Vec<usize>,
    pub sys: Vec<usize>,
    /// Spin amplitudes; the term fans out over the four components.
    pub spin: Option<[C64; 4]>,
}

pub(crate) struct Blueprint {
    pub rod_spectra: Vec<Spectrum>,
    pub sys_spectra: Vec<Spectrum>,
    pub rod: Dispersion,
    pub system: Dispersion,
    pub options: UniverseOptions,
    pub energy_form: EnergyForm,
    pub terms: Vec<TermSpec>,
}

fn same_energy(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Distinct values of `xs`, merged within tolerance, ascending.
pub(crate) fn distinct_levels(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| !same_energy(l, x)) {
            out.push(x);
        }
    }
    out
}

fn level_index(levels: &[f64], e: f64) -> usize {
    levels.iter().position(|&l| same_energy(l, e)).expect("level synthesized from this energy")
}

/// Clock factor whose levels are the distinct `energies`; returns the
/// spectrum (when rational), the factor, and a lookup from energy to slot.
pub(crate) struct SynthClock {
    pub spectrum: Option<ClockSpectrum>,
    pub factor: Factor,
    distinct: Vec<f64>,
    slot_of: Vec<usize>,
}

impl SynthClock {
    pub fn index(&self, energy: f64) -> usize {
        self.slot_of[level_index(&self.distinct, energy)]
    }

    /// Distinct synthesized levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.distinct
    }
}

pub(crate) fn synthesize_clock(energies: impl IntoIterator<Item = f64>, options: &UniverseOptions) -> Result<SynthClock> {
    let distinct = distinct_levels(energies);
    if distinct.is_empty() {
        return Err(Error::InvalidInput("all coefficients are zero".into()));
    }
    let spectrum = match options.clock_mode {
        ClockMode::Exact => Some(ClockSpectrum::from_floats(&distinct)?),
        ClockMode::ContinuousOnly => ClockSpectrum::from_floats(&distinct).ok(),
    };
    let (labels, slot_of): (Vec<f64>, Vec<usize>) = match (&spectrum, options.clock_layout) {
        (Some(c), ClockLayout::Ladder | ClockLayout::PaddedLadder(_)) => {
            let n = match options.clock_layout {
                ClockLayout::PaddedLadder(n) if n <= c.r_max() as usize => {
                    return Err(Error::InvalidInput(format!("ladder of {n} levels cannot hold r_max = {}", c.r_max())))
                }
                ClockLayout::PaddedLadder(n) => n,
                _ => c.r_max() as usize + 1,
            };
            let w = c.quantum();
            let e0 = c.base_energy();
            let ladder = (0..n).map(|k| e0 + k as f64 * w).collect();
            (ladder, c.r().iter().map(|&r| r as usize).collect())
        }
        (Some(c), ClockLayout::Levels) => (c.energies(), (0..c.d()).collect()),
        (None, ClockLayout::Ladder | ClockLayout::PaddedLadder(_)) => {
            return Err(Error::Unsupported("ladder clock needs rational energy ratios".into()))
        }
        (None, ClockLayout::Levels) => (distinct.clone(), (0..distinct.len()).collect()),
    };
    let factor = Factor { role: Role::Clock, labels: labels.into_iter().map(Label::Energy).collect() };
    Ok(SynthClock { spectrum, factor, distinct, slot_of })
}

/// Everything but the terms of a state under construction.
pub(crate) struct Frame {
    pub factors: Vec<Factor>,
    pub rod: Dispersion,
    pub system: Dispersion,
    pub clock: Option<ClockSpectrum>,
    pub rod_spectra: Vec<Spectrum>,
    pub sys_spectra: Vec<Spectrum>,
    pub phase: PhaseConvention,
    pub energy_form: EnergyForm,
}

/// Merge duplicate indices (canonical order), check normalization, measure
/// the constraints.
pub(crate) fn build_state(frame: Frame, raw: impl IntoIterator<Item = (Vec<usize>, C64)>) -> Result<GlobalState> {
    frame.rod.validate()?;
    frame.system.validate()?;
    let mut merged: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
    for (index, c) in raw {
        *merged.entry(index).or_insert(C64::new(0.0, 0.0)) += c;
    }
    let terms: Vec<Term> = merged
        .into_iter()
        .filter(|(_, c)| *c != C64::new(0.0, 0.0))
        .map(|(index, coeff)| Term { coeff, index })
        .collect();
    let n2: f64 = terms.iter().map(|t| t.coeff.norm_sqr()).sum();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidInput(format!("coefficients are not normalized: sum |c|^2 = {n2}")));
    }
    let mut g = GlobalState {
        factors: frame.factors,
        terms,
        rod: frame.rod,
        system: frame.system,
        clock: frame.clock,
        rod_spectra: frame.rod_spectra,
        sys_spectra: frame.sys_spectra,
        phase: frame.phase,
        energy_form: frame.energy_form,
        report: ConstraintReport { momentum: vec![], energy: None, energy_form: frame.energy_form, norm_error: 0.0 },
    };
    g.report = g.constraint_residuals(&g.dense())?;
    Ok(g)
}

pub(crate) fn assemble(bp: Blueprint) -> Result<GlobalState> {
    let mut factors = Vec::new();
    let clock = if bp.energy_form != EnergyForm::None {
        let c = synthesize_clock(bp.terms.iter().map(|t| t.clock_energy), &bp.options)?;
        factors.push(c.factor.clone());
        Some(c)
    } else {
        None
    };
    for (a, s) in bp.rod_spectra.iter().enumerate() {
        factors.push(Factor { role: Role::Rod(a), labels: s.labels() });
    }
    for (a, s) in bp.sys_spectra.iter().enumerate() {
        factors.push(Factor { role: Role::System(a), labels: s.labels() });
    }
    if bp.terms.iter().any(|t| t.spin.is_some()) {
        factors.push(Factor { role: Role::Spin, labels: (0..4).map(Label::Spin).collect() });
    }
    let mut raw = Vec::new();
    for t in &bp.terms {
        let mut index = Vec::with_capacity(factors.len());
        if let Some(c) = &clock {
            index.push(c.index(t.clock_energy));
        }
        index.extend(&t.rod);
        index.extend(&t.sys);
        match t.spin {
            Some(u) => {
                for (s, us) in u.iter().enumerate() {
                    let mut i = index.clone();
                    i.push(s);
                    raw.push((i, t.coeff * us));
                }
            }
            None => raw.push((index, t.coeff)),
        }
    }
    let frame = Frame {
        factors,
        rod: bp.rod,
        system: bp.system,
        clock: clock.and_then(|c| c.spectrum),
        rod_spectra: bp.rod_spectra,
        sys_spectra: bp.sys_spectra,
        phase: bp.options.phase,
        energy_form: bp.energy_form,
    };
    build_state(frame, raw)
}

/// Rod partner indices of system multi-index `sys` (levels `-p` per axis).
pub(crate) fn partners(rods: &[Spectrum], syss: &[Spectrum], sys: &[usize]) -> Result<Vec<usize>> {
    sys.iter()
        .enumerate()
        .map(|(axis, &k)| {
            let p = syss[axis].values()[k];
            rods[axis].index_of(-p).ok_or(Error::MissingPartner { axis, level: k, momentum: -p })
        })
        .collect()
}

fn check_axes(axes: &[(Spectrum, Spectrum)], coeffs: &[C64]) -> Result<Vec<usize>> {
    if axes.is_empty() {
        return Err(Error::InvalidInput("at least one axis required".into()));
    }
    let dims: Vec<usize> = axes.iter().map(|(_, s)| s.d()).collect();
    let n: usize = dims.iter().product();
    if coeffs.len() != n {
        return Err(Error::InvalidInput(format!("expected {n} coefficients, got {}", coeffs.len())));
    }
    Ok(dims)
}

fn product_terms(
    axes: &[(Spectrum, Spectrum)],
    coeffs: &[C64],
    energy: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Vec<TermSpec>> {
    let dims = check_axes(axes, coeffs)?;
    let rods: Vec<Spectrum> = axes.iter().map(|(r, _)| r.clone()).collect();
    let syss: Vec<Spectrum> = axes.iter().map(|(_, s)| s.clone()).collect();
    let mut terms = Vec::new();
    for (flat, &c) in coeffs.iter().enumerate() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let sys = crate::tensor::multi_index(&dims, flat);
        let rod = partners(&rods, &syss, &sys)?;
        let p: Vec<f64> = sys.iter().enumerate().map(|(a, &k)| syss[a].values()[k]).collect();
        terms.push(TermSpec { coeff: c, clock_energy: -energy(&p)?, rod, sys, spin: None });
    }
    Ok(terms)
}

/// `sum_k c_k |-p_k>_R |p_k>_S` with no clock.
pub fn momentum_constrained_state(rod: &Spectrum, sys: &Spectrum, coeffs: &[C64]) -> Result<GlobalState> {
    momentum_constrained_axes(&[(rod.clone(), sys.clone())], coeffs)
}

/// Momentum-only constraint over any number of axes; coefficients row-major
/// over the system levels.
pub fn momentum_constrained_axes(axes: &[(Spectrum, Spectrum)], coeffs: &[C64]) -> Result<GlobalState> {
    let terms = product_terms(axes, coeffs, |_| Ok(0.0))?;
    assemble(Blueprint {
        rod_spectra: axes.iter().map(|(r, _)| r.clone()).collect(),
        sys_spectra: axes.iter().map(|(_, s)| s.clone()).collect(),
        rod: Dispersion::Static,
        system: Dispersion::Static,
        options: UniverseOptions::default(),
        energy_form: EnergyForm::None,
        terms,
    })
}

/// `sum_k c_k |E = -eps_k>_C |-p_k>_R |p_k>_S` with
/// `eps_k = E_R(-p_k) + E_S(p_k)`.
pub fn double_constrained_state(
    rod_disp: Dispersion,
    sys_disp: Dispersion,
    rod: &Spectrum,
    sys: &Spectrum,
    coeffs: &[C64],
) -> Result<GlobalState> {
    universe_with(&[(rod.clone(), sys.clone())], rod_disp, sys_disp, coeffs, UniverseOptions::default())
}

/// Three-axis product universe with one clock.
pub fn universe_3plus1(
    axes: &[(Spectrum, Spectrum); 3],
    rod_disp: Dispersion,
    sys_disp: Dispersion,
    coeffs: &[C64],
) -> Result<GlobalState> {
    universe_with(axes, rod_disp, sys_disp, coeffs, UniverseOptions::default())
}

/// Double-constrained universe over any number of axes.
pub fn universe_with(
    axes: &[(Spectrum, Spectrum)],
    rod_disp: Dispersion,
    sys_disp: Dispersion,
    coeffs: &[C64],
    options: UniverseOptions,
) -> Result<GlobalState> {
    let terms = product_terms(axes, coeffs, |p| {
        let minus: Vec<f64> = p.iter().map(|x| -x).collect();
        Ok(rod_disp.energy(&minus)? + sys_disp.energy(p)?)
    })?;
    assemble(Blueprint {
        rod_spectra: axes.iter().map(|(r, _)| r.clone()).collect(),
        sys_spectra: axes.iter().map(|(_, s)| s.clone()).collect(),
        rod: rod_disp,
        system: sys_disp,
        options,
        energy_form: EnergyForm::Linear,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::momentum_spectrum;
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn three() -> Spectrum {
        momentum_spectrum(3, -1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn single_term_momentum_state() {
        let g = momentum_constrained_state(&three(), &three(), &[c(1.0), c(0.0), c(0.0)]).unwrap();
        assert_eq!(g.terms().len(), 1);
        assert_eq!(g.terms()[0].index, vec![2, 0]);
        assert!(g.report().max_momentum() < 1e-15);
    }

    #[test]
    fn missing_partner() {
        let rod = momentum_spectrum(2, -1.0, 2.0 * PI).unwrap();
        let err = momentum_constrained_state(&rod, &three(), &[c(1.0), c(0.0), c(0.0)]).unwrap_err();
        assert!(matches!(err, Error::MissingPartner { level: 0, .. }));
    }

    #[test]
    fn sec3c_levels() {
        let (mm, m, l) = (2.0, 1.0, 2.0 * PI);
        let s = momentum_spectrum(3, -2.0 * PI / l, l).unwrap();
        let w = 1.0 / 3f64.sqrt();
        let g = double_constrained_state(
            Dispersion::Free { mass: mm },
            Dispersion::Free { mass: m },
            &s,
            &s,
            &[c(w), c(w), c(w)],
        )
        .unwrap();
        let eps = (2.0 * PI / l).powi(2) * (1.0 / (2.0 * mm) + 1.0 / (2.0 * m));
        let clock = g.factor(Role::Clock).unwrap();
        assert_eq!(clock.dim(), 2);
        assert!((clock.labels[0].energy().unwrap() + eps).abs() < 1e-14);
        assert!(clock.labels[1].energy().unwrap().abs() < 1e-14);
        assert!(g.report().satisfied(1e-12));
    }

    #[test]
    fn stationary_single_level() {
        let s = three();
        let g = double_constrained_state(
            Dispersion::Free { mass: 1.0 },
            Dispersion::Free { mass: 1.0 },
            &s,
            &s,
            &[c(0.0), c(1.0), c(0.0)],
        )
        .unwrap();
        assert_eq!(g.factor(Role::Clock).unwrap().dim(), 1);
        assert_eq!(g.report().energy, Some(0.0));
    }

    #[test]
    fn unnormalized_rejected() {
        let s = three();
        assert!(momentum_constrained_state(&s, &s, &[c(1.0), c(1.0), c(0.0)]).is_err());
    }

    #[test]
    fn ladder_operators() {
        let n = 6;
        let x = ladder_position(n, 2.0, 3.0);
        let p = ladder_momentum(n, 2.0, 3.0);
        let comm = &x * &p - &p * &x;
        for k in 0..n - 1 {
            assert!((comm[(k, k)] - C64::new(0.0, 1.0)).norm() < 1e-12);
        }
    }
}
