//! Klein-Gordon and Dirac universes, checked by finite differences of the
//! conditioned relative state in the frame coordinates.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frames::{PhaseConvention, Spectrum};
use crate::relational::{frame_bra, relative_state, At, Grids, Reading, RelativeState};
use crate::tensor::{condition, multi_index, LinearOperator, StateVector, C64};
use crate::universe::{
    assemble, partners, Blueprint, Branch, Dispersion, EnergyForm, GlobalState, Parts, Role, TermSpec, UniverseOptions,
};

/// Standard representation: `beta = diag(1, 1, -1, -1)`, `alpha_i` with Pauli
/// blocks off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracAlgebra {
    pub alpha: [DMatrix<C64>; 3],
    pub beta: DMatrix<C64>,
}

fn pauli(i: usize) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let j = C64::new(0.0, 1.0);
    match i {
        0 => [[z, o], [o, z]],
        1 => [[z, -j], [j, z]],
        _ => [[o, z], [z, -o]],
    }
}

pub fn dirac_algebra() -> DiracAlgebra {
    let alpha = [0, 1, 2].map(|i| {
        let s = pauli(i);
        let mut m = DMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b + 2)] = s[a][b];
                m[(a + 2, b)] = s[a][b];
            }
        }
        m
    });
    let beta = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        [1.0, 1.0, -1.0, -1.0].map(|x| C64::new(x, 0.0)).to_vec(),
    ));
    DiracAlgebra { alpha, beta }
}

impl DiracAlgebra {
    /// `alpha . p + beta m` for up to three momentum components.
    pub fn hamiltonian(&self, p: &[f64], mass: f64) -> DMatrix<C64> {
        let mut h = &self.beta * C64::new(mass, 0.0);
        for (a, &pj) in self.alpha.iter().zip(p) {
            h += a * C64::new(pj, 0.0);
        }
        h
    }
}

/// Analytic eigenvectors of `alpha . p + beta m`: two of energy `+E`, then
/// two of energy `-E`, `E = sqrt(p^2 + m^2)`. The standard basis when `E + m = 0`.
pub fn dirac_eigenvectors(p: &[f64], mass: f64) -> [(f64, [C64; 4]); 4] {
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let e = (p2 + mass * mass).sqrt();
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    if e + mass == 0.0 {
        return [(0.0, [o, z, z, z]), (0.0, [z, o, z, z]), (0.0, [z, z, o, z]), (0.0, [z, z, z, o])];
    }
    let px = p.first().copied().unwrap_or(0.0);
    let py = p.get(1).copied().unwrap_or(0.0);
    let pz = p.get(2).copied().unwrap_or(0.0);
    // sigma . p applied to the two unit spinors
    let sp = |chi: [C64; 2]| -> [C64; 2] {
        [chi[0] * pz + chi[1] * C64::new(px, -py), chi[0] * C64::new(px, py) - chi[1] * pz]
    };
    let n = ((e + mass) / (2.0 * e)).sqrt();
    let k = 1.0 / (e + mass);
    let mut out = [(0.0, [z; 4]); 4];
    for (s, chi) in [[o, z], [z, o]].into_iter().enumerate() {
        let lower = sp(chi);
        out[s] = (e, [chi[0] * n, chi[1] * n, lower[0] * (n * k), lower[1] * (n * k)]);
        out[s + 2] = (-e, [-lower[0] * (n * k), -lower[1] * (n * k), chi[0] * n, chi[1] * n]);
    }
    out
}

/// Whether the frame kinetic term enters the clock levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameMode {
    /// Rod kinetic energy neglected (static rod).
    Approximate,
    /// Rod of mass `M` with energy `p^2 / 2M` included.
    Exact { rod_mass: f64 },
}

impl FrameMode {
    fn rod(self) -> Dispersion {
        match self {
            FrameMode::Approximate => Dispersion::Static,
            FrameMode::Exact { rod_mass } => Dispersion::Free { mass: rod_mass },
        }
    }
}

fn axis_modes(axes: &[(Spectrum, Spectrum)]) -> Result<(Vec<usize>, Vec<Spectrum>, Vec<Spectrum>)> {
    if axes.is_empty() {
        return Err(Error::InvalidInput("at least one axis required".into()));
    }
    let dims = axes.iter().map(|(_, s)| s.d()).collect();
    Ok((dims, axes.iter().map(|(r, _)| r.clone()).collect(), axes.iter().map(|(_, s)| s.clone()).collect()))
}

/// Scalar universe: clock levels `-eps` with `eps = E_R(-p) + sign sqrt(p^2 + m^2)`.
/// `Branch::Both` takes `2 n` coefficients, the positive branch first.
pub fn kg_universe(
    axes: &[(Spectrum, Spectrum)],
    mass: f64,
    branch: Branch,
    coeffs: &[C64],
    frame: FrameMode,
    options: UniverseOptions,
) -> Result<GlobalState> {
    let (dims, rods, syss) = axis_modes(axes)?;
    let n: usize = dims.iter().product();
    let signs: Vec<f64> = match branch {
        Branch::Positive => vec![1.0],
        Branch::Negative => vec![-1.0],
        Branch::Both => vec![1.0, -1.0],
    };
    if coeffs.len() != n * signs.len() {
        return Err(Error::InvalidInput(format!("expected {} coefficients, got {}", n * signs.len(), coeffs.len())));
    }
    let rod_disp = frame.rod();
    let mut terms = Vec::new();
    for (b, &sign) in signs.iter().enumerate() {
        for flat in 0..n {
            let c = coeffs[b * n + flat];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let sys = multi_index(&dims, flat);
            let rod = partners(&rods, &syss, &sys)?;
            let p: Vec<f64> = sys.iter().enumerate().map(|(a, &k)| syss[a].values()[k]).collect();
            let minus: Vec<f64> = p.iter().map(|x| -x).collect();
            let p2: f64 = p.iter().map(|x| x * x).sum();
            let eps = rod_disp.energy(&minus)? + sign * (p2 + mass * mass).sqrt();
            terms.push(TermSpec { coeff: c, clock_energy: -eps, rod, sys, spin: None });
        }
    }
    assemble(Blueprint {
        rod_spectra: rods,
        sys_spectra: syss,
        rod: rod_disp,
        system: Dispersion::RelativisticScalar { mass, branch },
        options: UniverseOptions { phase: PhaseConvention::PlaneWave, ..options },
        energy_form: EnergyForm::KleinGordon,
        terms,
    })
}

/// Spin-1/2 universe; `coeffs[4 k + s]` weights eigenvector `s` of
/// [`dirac_eigenvectors`] on system mode `k` (row-major over axes).
pub fn dirac_universe(
    axes: &[(Spectrum, Spectrum)],
    mass: f64,
    coeffs: &[C64],
    frame: FrameMode,
    options: UniverseOptions,
) -> Result<GlobalState> {
    let (dims, rods, syss) = axis_modes(axes)?;
    let n: usize = dims.iter().product();
    if coeffs.len() != 4 * n {
        return Err(Error::InvalidInput(format!("expected {} coefficients, got {}", 4 * n, coeffs.len())));
    }
    let rod_disp = frame.rod();
    let mut terms = Vec::new();
    for flat in 0..n {
        let sys = multi_index(&dims, flat);
        let p: Vec<f64> = sys.iter().enumerate().map(|(a, &k)| syss[a].values()[k]).collect();
        let minus: Vec<f64> = p.iter().map(|x| -x).collect();
        let er = rod_disp.energy(&minus)?;
        for (s, (lambda, u)) in dirac_eigenvectors(&p, mass).into_iter().enumerate() {
            let c = coeffs[4 * flat + s];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let rod = partners(&rods, &syss, &sys)?;
            terms.push(TermSpec { coeff: c, clock_energy: -(er + lambda), rod, sys: sys.clone(), spin: Some(u) });
        }
    }
    assemble(Blueprint {
        rod_spectra: rods,
        sys_spectra: syss,
        rod: rod_disp,
        system: Dispersion::Dirac { mass },
        options: UniverseOptions { phase: PhaseConvention::PlaneWave, ..options },
        energy_form: EnergyForm::Linear,
        terms,
    })
}

/// A frame-coordinate sample `(x^0, x^1..x^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdResidual {
    /// Max norm of the finite-difference operator applied to the relative state.
    pub residual: f64,
    /// Max norm of the same operator taken exactly (nonzero only through the neglected frame kinetic term).
    pub floor: f64,
    /// Max distance between the finite-difference and exact results.
    pub deviation: f64,
}

fn relative_at(g: &GlobalState, t: f64, x: &[f64]) -> Result<RelativeState> {
    let grids = Grids::continuous(g)?;
    let mut r = vec![grids.clock_reading(At::Value(t))?];
    r.extend(grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?);
    relative_state(g, &r)
}

/// Relative state of an arbitrary global vector `v` (same layout as `g`).
fn relative_of(g: &GlobalState, v: &StateVector, t: f64, x: &[f64]) -> Result<StateVector> {
    let grids = Grids::continuous(g)?;
    let mut reads = vec![grids.clock_reading(At::Value(t))?];
    reads.extend(grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?);
    let roles = g.roles();
    let mut out = v.clone();
    let mut order: Vec<(usize, Reading)> = reads.into_iter().map(|r| (roles.iter().position(|x| *x == r.role).expect("frame"), r)).collect();
    order.sort_by_key(|(s, _)| std::cmp::Reverse(*s));
    for (slot, r) in order {
        out = condition(&out, slot, &frame_bra(g, &r)?)?;
    }
    Ok(out)
}

fn check_spacing(g: &GlobalState, h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
    }
    let mut w: f64 = 0.0;
    for f in g.factors() {
        for l in &f.labels {
            match f.role {
                Role::Clock => w = w.max(l.energy().unwrap_or(0.0).abs()),
                Role::Rod(_) => w = w.max(l.momentum().unwrap_or(0.0).abs()),
                _ => {}
            }
        }
    }
    if w > 0.0 && h > 2.0 * PI / w {
        return Err(Error::InvalidGrid(format!("spacing {h} exceeds the shortest phase period {} (aliasing)", 2.0 * PI / w)));
    }
    Ok(())
}

fn shifted(s: &Sample, axis: Option<usize>, d: f64) -> (f64, Vec<f64>) {
    let mut x = s.x.clone();
    match axis {
        None => (s.t + d, x),
        Some(a) => {
            x[a] += d;
            (s.t, x)
        }
    }
}

/// `(d_0^2 - sum_J d_J^2 + m^2) psi` by second central differences with
/// spacing `h` in every coordinate.
pub fn kg_residual(g: &GlobalState, samples: &[Sample], h: f64) -> Result<FdResidual> {
    let mass = match g.system_dispersion() {
        Dispersion::RelativisticScalar { mass, .. } => mass,
        _ => return Err(Error::Unsupported("Klein-Gordon residual needs a scalar universe".into())),
    };
    check_spacing(g, h)?;
    let roles = g.roles();
    let psi = g.dense();
    let clock = g.energy_operator(&roles, Parts { clock: true, rod: false, system: false })?;
    // exact: <t,x| (-H_C^2 + sum P_R^2 + m^2) Psi>
    let mut exact = clock.apply(&clock.apply(&psi)?)?.scale(C64::new(-1.0, 0.0)).add(&psi.scale(C64::new(mass * mass, 0.0)))?;
    for a in 0..g.axes() {
        let p = g.momentum_operator(&roles, a, Parts::ROD)?;
        exact = exact.add(&p.apply(&p.apply(&psi)?)?)?;
    }
    let mut out = FdResidual { residual: 0.0, floor: 0.0, deviation: 0.0 };
    for s in samples {
        if s.x.len() != g.axes() {
            return Err(Error::InvalidInput(format!("sample has {} coordinates, universe {}", s.x.len(), g.axes())));
        }
        let at = |axis: Option<usize>, d: f64| -> Result<StateVector> {
            let (t, x) = shifted(s, axis, d);
            Ok(relative_at(g, t, &x)?.vector)
        };
        let c = at(None, 0.0)?;
        let second = |axis: Option<usize>| -> Result<StateVector> {
            Ok(at(axis, h)?.add(&at(axis, -h)?)?.sub(&c.scale(C64::new(2.0, 0.0)))?.scale(C64::new(1.0 / (h * h), 0.0)))
        };
        let mut fd = second(None)?.add(&c.scale(C64::new(mass * mass, 0.0)))?;
        for a in 0..g.axes() {
            fd = fd.sub(&second(Some(a))?)?;
        }
        let ex = relative_of(g, &exact, s.t, &s.x)?;
        out.residual = out.residual.max(fd.norm());
        out.floor = out.floor.max(ex.norm());
        out.deviation = out.deviation.max(fd.sub(&ex)?.norm());
    }
    Ok(out)
}

/// `i d_0 psi - (-i alpha . grad + beta m) psi` by first central differences.
pub fn dirac_residual(g: &GlobalState, samples: &[Sample], h: f64) -> Result<FdResidual> {
    let mass = match g.system_dispersion() {
        Dispersion::Dirac { mass } => mass,
        _ => return Err(Error::Unsupported("Dirac residual needs a spinor universe".into())),
    };
    check_spacing(g, h)?;
    let alg = dirac_algebra();
    let roles = g.roles();
    let spin_full = roles.iter().position(|r| *r == Role::Spin).ok_or_else(|| Error::Unsupported("no spin factor".into()))?;
    let psi = g.dense();
    let on_spin = |m: &DMatrix<C64>, shape: Vec<usize>, slot: usize| LinearOperator::new(m.clone(), shape, vec![slot]);
    // exact: <t,x| (-H_C + alpha . P_R - beta m) Psi>
    let clock = g.energy_operator(&roles, Parts { clock: true, rod: false, system: false })?;
    let beta_full = on_spin(&(&alg.beta * C64::new(mass, 0.0)), psi.shape().to_vec(), spin_full)?;
    let mut exact = clock.apply(&psi)?.scale(C64::new(-1.0, 0.0)).sub(&beta_full.apply(&psi)?)?;
    for a in 0..g.axes() {
        let p = g.momentum_operator(&roles, a, Parts::ROD)?;
        let al = on_spin(&alg.alpha[a], psi.shape().to_vec(), spin_full)?;
        exact = exact.add(&al.apply(&p.apply(&psi)?)?)?;
    }
    let mut out = FdResidual { residual: 0.0, floor: 0.0, deviation: 0.0 };
    for s in samples {
        if s.x.len() != g.axes() {
            return Err(Error::InvalidInput(format!("sample has {} coordinates, universe {}", s.x.len(), g.axes())));
        }
        let at = |axis: Option<usize>, d: f64| -> Result<RelativeState> {
            let (t, x) = shifted(s, axis, d);
            relative_at(g, t, &x)
        };
        let c = at(None, 0.0)?;
        let shape = c.vector.shape().to_vec();
        let spin = c.slot(Role::Spin).expect("spin survives conditioning");
        let first = |axis: Option<usize>| -> Result<StateVector> {
            Ok(at(axis, h)?.vector.sub(&at(axis, -h)?.vector)?.scale(C64::new(1.0 / (2.0 * h), 0.0)))
        };
        let i = C64::new(0.0, 1.0);
        let mut fd = first(None)?.scale(i).sub(&on_spin(&(&alg.beta * C64::new(mass, 0.0)), shape.clone(), spin)?.apply(&c.vector)?)?;
        for a in 0..g.axes() {
            let al = on_spin(&alg.alpha[a], shape.clone(), spin)?;
            fd = fd.add(&al.apply(&first(Some(a))?.scale(i))?)?;
        }
        let ex = relative_of(g, &exact, s.t, &s.x)?;
        out.residual = out.residual.max(fd.norm());
        out.floor = out.floor.max(ex.norm());
        out.deviation = out.deviation.max(fd.sub(&ex)?.norm());
    }
    Ok(out)
}
