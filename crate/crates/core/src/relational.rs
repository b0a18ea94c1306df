//! Relative states of a global state conditioned on clock and rod readings,
//! and the conditional probabilities, covariance checks and diagnostics
//! built on them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frames::{phase_state, FrameGrid, PhaseConvention};
use crate::tensor::{condition, inner, LinearOperator, Normalization, Propagator, StateVector, C64};
use crate::universe::{position_eigenfunction, Dispersion, GlobalState, Parts, Role};

/// Where on its grid a reading sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum At {
    Index(usize),
    Value(f64),
}

/// A frame reading: the factor read, its grid, and the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub role: Role,
    pub grid: FrameGrid,
    pub at: At,
}

impl Reading {
    pub fn new(role: Role, grid: FrameGrid, at: At) -> Self {
        Reading { role, grid, at }
    }

    /// Numeric value of the reading.
    pub fn value(&self) -> Result<f64> {
        match self.at {
            At::Index(j) => self.grid.value(j),
            At::Value(x) => {
                if let Some(n) = self.grid.points() {
                    self.grid.index_of(x).map_err(|_| Error::OffGrid { value: x, points: n })?;
                }
                Ok(x)
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        !self.grid.is_continuous()
    }
}

/// Frame grids of every reading factor of a universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub clock: Option<FrameGrid>,
    pub rod: Vec<FrameGrid>,
    pub system: Vec<FrameGrid>,
}

fn clock_period(g: &GlobalState) -> Option<f64> {
    g.clock_spectrum().map(|c| c.period())
}

fn axis_period(g: &GlobalState, role: Role) -> f64 {
    let s = match role {
        Role::Rod(a) => g.rod_spectrum(a),
        Role::System(a) => g.sys_spectrum(a),
        _ => None,
    };
    // Oscillator positions are unbounded; the period only matters for wrapping.
    s.map_or(f64::MAX, |s| s.period())
}

impl Grids {
    /// Discrete grids with `D_C` (default from the clock), `D_R`, `D_S` points per axis, origins at zero.
    pub fn discrete(g: &GlobalState, clock_points: Option<usize>, rod_points: usize, sys_points: usize) -> Result<Grids> {
        let clock = match (g.has_clock(), g.clock_spectrum()) {
            (false, _) => None,
            (true, Some(c)) => {
                let n = clock_points.unwrap_or_else(|| c.default_points().max(g.factor(Role::Clock).map_or(1, |f| f.dim())));
                Some(FrameGrid::discrete(n, 0.0, c.period())?)
            }
            (true, None) => return Err(Error::Unsupported("discrete clock readings need a rational clock".into())),
        };
        let axes = g.axes();
        let rod = (0..axes).map(|a| FrameGrid::discrete(rod_points, 0.0, axis_period(g, Role::Rod(a)))).collect::<Result<_>>()?;
        let system =
            (0..axes).map(|a| FrameGrid::discrete(sys_points, 0.0, axis_period(g, Role::System(a)))).collect::<Result<_>>()?;
        Ok(Grids { clock, rod, system })
    }

    /// Continuous intervals starting at zero.
    pub fn continuous(g: &GlobalState) -> Result<Grids> {
        let clock = if g.has_clock() {
            Some(FrameGrid::continuous(0.0, clock_period(g).unwrap_or(f64::MAX))?)
        } else {
            None
        };
        let axes = g.axes();
        let rod = (0..axes).map(|a| FrameGrid::continuous(0.0, axis_period(g, Role::Rod(a)))).collect::<Result<_>>()?;
        let system = (0..axes).map(|a| FrameGrid::continuous(0.0, axis_period(g, Role::System(a)))).collect::<Result<_>>()?;
        Ok(Grids { clock, rod, system })
    }

    pub fn clock_reading(&self, at: At) -> Result<Reading> {
        let grid = self.clock.ok_or_else(|| Error::Unsupported("universe has no clock".into()))?;
        Ok(Reading::new(Role::Clock, grid, at))
    }

    pub fn rod_readings(&self, at: &[At]) -> Result<Vec<Reading>> {
        if at.len() != self.rod.len() {
            return Err(Error::InvalidInput(format!("expected {} rod readings, got {}", self.rod.len(), at.len())));
        }
        Ok(at.iter().enumerate().map(|(a, &x)| Reading::new(Role::Rod(a), self.rod[a], x)).collect())
    }

    pub fn system_readings(&self, at: &[At]) -> Result<Vec<Reading>> {
        if at.len() != self.system.len() {
            return Err(Error::InvalidInput(format!("expected {} system readings, got {}", self.system.len(), at.len())));
        }
        Ok(at.iter().enumerate().map(|(a, &x)| Reading::new(Role::System(a), self.system[a], x)).collect())
    }
}

/// Bra state of a reading on the matching factor of `g`, without any
/// prefactor beyond the frame convention (1/sqrt d discrete, 1 continuous).
pub fn frame_bra(g: &GlobalState, r: &Reading) -> Result<StateVector> {
    let f = g.factor(r.role).ok_or_else(|| Error::InvalidInput(format!("no factor {:?}", r.role)))?;
    let d = f.dim();
    let x = r.value()?;
    let (weight, norm) = match r.grid.points() {
        Some(n) => {
            if n < d {
                return Err(Error::InvalidGrid(format!("D = {n} is smaller than d = {d} for {:?}", r.role)));
            }
            (1.0 / (d as f64).sqrt(), Normalization::Unit)
        }
        None => (1.0, Normalization::Continuous),
    };
    match r.role {
        Role::Clock => {
            let e: Vec<f64> = f
                .labels
                .iter()
                .map(|l| l.energy().ok_or_else(|| Error::InvalidInput("clock factor lacks energies".into())))
                .collect::<Result<_>>()?;
            Ok(phase_state(&e, f.labels.clone(), x, -1.0, weight, norm))
        }
        Role::Rod(_) | Role::System(_) => {
            if f.labels.iter().all(|l| l.momentum().is_some()) {
                let p: Vec<f64> = f.labels.iter().map(|l| l.momentum().expect("checked")).collect();
                Ok(phase_state(&p, f.labels.clone(), x, g.phase().sign(), weight, norm))
            } else {
                let disp = if matches!(r.role, Role::Rod(_)) { g.rod_dispersion() } else { g.system_dispersion() };
                let (mass, omega) = match disp {
                    Dispersion::Oscillator { mass, frequency } => (mass, frequency),
                    _ => return Err(Error::Unsupported("position states need momentum or oscillator levels".into())),
                };
                if r.is_discrete() {
                    return Err(Error::Unsupported("oscillator positions are continuous only".into()));
                }
                let chi = position_eigenfunction(d, x, mass, omega);
                let amps = chi.into_iter().map(|v| C64::new(v, 0.0)).collect();
                StateVector::from_factor(amps, f.labels.clone(), Normalization::Continuous)
            }
        }
        other => Err(Error::InvalidInput(format!("{other:?} is not a frame"))),
    }
}

/// POVM weight of a reading: `d/D` discrete, `1/L` continuous (1 for
/// orthogonal oscillator positions).
pub fn povm_weight(g: &GlobalState, r: &Reading) -> Result<f64> {
    let f = g.factor(r.role).ok_or_else(|| Error::InvalidInput(format!("no factor {:?}", r.role)))?;
    Ok(match r.grid.points() {
        Some(n) => f.dim() as f64 / n as f64,
        None => {
            if f.labels.iter().all(|l| l.momentum().is_some() || (l.energy().is_some() && matches!(r.role, Role::Clock))) {
                1.0 / r.grid.period()
            } else {
                1.0
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeState {
    pub vector: StateVector,
    /// Roles of the factors left in `vector`, in order.
    pub roles: Vec<Role>,
    pub conditioning: Vec<(Role, f64)>,
    /// Product of the sqrt(d) factors applied.
    pub prefactor: f64,
}

impl RelativeState {
    pub fn slot(&self, role: Role) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }
}

/// Condition `g` on frame readings (clock and/or rods).
pub fn relative_state(g: &GlobalState, readings: &[Reading]) -> Result<RelativeState> {
    let mut seen = Vec::new();
    for r in readings {
        if !matches!(r.role, Role::Clock | Role::Rod(_)) {
            return Err(Error::InvalidInput(format!("{:?} is not a clock or rod", r.role)));
        }
        if seen.contains(&r.role) {
            return Err(Error::InvalidInput(format!("{:?} read twice", r.role)));
        }
        seen.push(r.role);
    }
    condition_on(g, readings)
}

fn condition_on(g: &GlobalState, readings: &[Reading]) -> Result<RelativeState> {
    let mut roles = g.roles();
    let mut v = g.dense();
    let mut prefactor = 1.0;
    let mut conditioning = Vec::new();
    let mut order: Vec<&Reading> = readings.iter().collect();
    order.sort_by_key(|r| std::cmp::Reverse(g.slot(r.role)));
    for r in order {
        let slot = roles.iter().position(|x| *x == r.role).ok_or_else(|| Error::InvalidInput(format!("no factor {:?}", r.role)))?;
        let bra = frame_bra(g, r)?;
        v = condition(&v, slot, &bra)?;
        if r.is_discrete() {
            prefactor *= (bra.len() as f64).sqrt();
        }
        roles.remove(slot);
        conditioning.push((r.role, r.value()?));
    }
    conditioning.reverse();
    let vector = v.scale(C64::new(prefactor, 0.0));
    Ok(RelativeState { vector, roles, conditioning, prefactor })
}

/// `w_y ||(<y| (x) 1) psi||^2` for system readings `outcome` (one per axis),
/// with `psi` the prefactored relative state of `readings`.
pub fn conditional_probability(g: &GlobalState, readings: &[Reading], outcome: &[Reading]) -> Result<f64> {
    if outcome.len() != g.axes() || outcome.iter().enumerate().any(|(a, r)| r.role != Role::System(a)) {
        return Err(Error::InvalidInput(format!("need one system reading per axis ({})", g.axes())));
    }
    let rel = relative_state(g, readings)?;
    let mut v = rel.vector.clone();
    let mut roles = rel.roles.clone();
    let mut w = 1.0;
    for r in outcome.iter().rev() {
        let slot = roles.iter().position(|x| *x == r.role).expect("system factor present");
        v = condition(&v, slot, &frame_bra(g, r)?)?;
        roles.remove(slot);
        w *= povm_weight(g, r)?;
    }
    Ok(w * v.norm_sqr())
}

/// Same ratio divided by the relative-state norm (the ratio-of-expectations
/// value, whatever the prefactor conventions).
pub fn conditional_probability_normalized(g: &GlobalState, readings: &[Reading], outcome: &[Reading]) -> Result<f64> {
    let rel = relative_state(g, readings)?;
    let n2 = rel.vector.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::InvalidInput("readings have zero probability".into()));
    }
    Ok(conditional_probability(g, readings, outcome)? / n2)
}

/// `P(y_l | x_j, t_m)` on discrete grids; `t_m = None` conditions on the rod only.
pub fn conditional_prob_discrete(g: &GlobalState, grids: &Grids, x_j: &[usize], t_m: Option<usize>, y_l: &[usize]) -> Result<f64> {
    let mut readings = grids.rod_readings(&x_j.iter().map(|&j| At::Index(j)).collect::<Vec<_>>())?;
    if let Some(m) = t_m {
        readings.insert(0, grids.clock_reading(At::Index(m))?);
    }
    let outcome = grids.system_readings(&y_l.iter().map(|&l| At::Index(l)).collect::<Vec<_>>())?;
    for r in &outcome {
        if r.grid.points().unwrap_or(0) < g.factor(r.role).map_or(0, |f| f.dim()) {
            return Err(Error::InvalidGrid("D_S must be at least d_S".into()));
        }
    }
    conditional_probability(g, &readings, &outcome)
}

/// `P(y | x, t)` density on continuous intervals.
pub fn conditional_density(g: &GlobalState, x: &[f64], t: Option<f64>, y: &[f64]) -> Result<f64> {
    let grids = Grids::continuous(g)?;
    let mut readings = grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?;
    if let Some(t) = t {
        readings.insert(0, grids.clock_reading(At::Value(t))?);
    }
    let outcome = grids.system_readings(&y.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?;
    conditional_probability(g, &readings, &outcome)
}

/// Three-axis conditional probability (discrete when `grids` is given,
/// density otherwise).
pub fn conditional_3plus1(
    g: &GlobalState,
    grids: Option<&Grids>,
    x: [f64; 3],
    t: Option<f64>,
    y: [f64; 3],
) -> Result<f64> {
    if g.axes() != 3 {
        return Err(Error::InvalidInput(format!("universe has {} axes, expected 3", g.axes())));
    }
    match grids {
        None => conditional_density(g, &x, t, &y),
        Some(gr) => {
            let xj: Vec<usize> = x.iter().zip(&gr.rod).map(|(&v, gg)| gg.index_of(v)).collect::<Result<_>>()?;
            let yl: Vec<usize> = y.iter().zip(&gr.system).map(|(&v, gg)| gg.index_of(v)).collect::<Result<_>>()?;
            let tm = match t {
                Some(t) => Some(gr.clock.ok_or_else(|| Error::Unsupported("no clock".into()))?.index_of(t)?),
                None => None,
            };
            conditional_prob_discrete(g, gr, &xj, tm, &yl)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Mass,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    /// Outcome points, one vector of per-axis values per entry.
    pub grid: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub kind: DistributionKind,
    /// Sum of masses, or the quadrature integral of the density.
    pub total: f64,
}

fn outcome_points(grids: &[FrameGrid], per_axis: &[usize]) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = grids
        .iter()
        .zip(per_axis)
        .map(|(g, &n)| (0..n).map(|k| g.origin() + g.period() * k as f64 / n as f64).collect())
        .collect();
    let mut out = vec![vec![]];
    for a in axes {
        out = out.into_iter().flat_map(|p| a.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Full distribution over the discrete system grid.
pub fn conditional_distribution(g: &GlobalState, grids: &Grids, x_j: &[usize], t_m: Option<usize>) -> Result<ConditionalDistribution> {
    let per_axis: Vec<usize> = grids.system.iter().map(|s| s.points().unwrap_or(0)).collect();
    if per_axis.contains(&0) {
        return Err(Error::InvalidGrid("system grid must be discrete".into()));
    }
    let points = outcome_points(&grids.system, &per_axis);
    let mut probabilities = Vec::with_capacity(points.len());
    for p in &points {
        let yl: Vec<usize> = p.iter().zip(&grids.system).map(|(&v, gg)| gg.index_of(v)).collect::<Result<_>>()?;
        probabilities.push(conditional_prob_discrete(g, grids, x_j, t_m, &yl)?);
    }
    let total = probabilities.iter().sum();
    Ok(ConditionalDistribution { grid: points, probabilities, kind: DistributionKind::Mass, total })
}

/// Density samples over one period per axis, with the rectangle-rule
/// integral (exact for the trigonometric polynomials involved). Oscillator
/// systems get the normalized density on a finite window instead.
pub fn density_distribution(g: &GlobalState, x: &[f64], t: Option<f64>) -> Result<ConditionalDistribution> {
    let grids = Grids::continuous(g)?;
    let axes = g.axes();
    let per_axis: Vec<usize> = (0..axes)
        .map(|a| {
            let d = g.factor(Role::System(a)).map_or(1, |f| f.dim());
            if axes == 1 {
                32 * d
            } else {
                4 * d
            }
        })
        .collect();
    if grids.system.iter().any(|s| s.period() == f64::MAX) {
        return line_density(g, &grids, x, t);
    }
    let points = outcome_points(&grids.system, &per_axis);
    let cell: f64 = grids.system.iter().zip(&per_axis).map(|(s, &n)| s.period() / n as f64).product();
    let probabilities: Vec<f64> = points.iter().map(|y| conditional_density(g, x, t, y)).collect::<Result<_>>()?;
    let total = probabilities.iter().sum::<f64>() * cell;
    Ok(ConditionalDistribution { grid: points, probabilities, kind: DistributionKind::Density, total })
}

/// Oscillator positions: normalized density on a window covering the
/// truncated levels, trapezoid integral.
fn line_density(g: &GlobalState, grids: &Grids, x: &[f64], t: Option<f64>) -> Result<ConditionalDistribution> {
    let (n, mass, omega) = match (g.axes(), g.system_dispersion(), g.factor(Role::System(0))) {
        (1, Dispersion::Oscillator { mass, frequency }, Some(f)) => (f.dim(), mass, frequency),
        _ => return Err(Error::Unsupported("density grid needs a periodic system or one oscillator axis".into())),
    };
    let mut readings = grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?;
    if let Some(t) = t {
        readings.insert(0, grids.clock_reading(At::Value(t))?);
    }
    let half = ((2 * n + 1) as f64).sqrt() + 8.0;
    let s = (mass * omega).sqrt();
    let points = 2048;
    let h = 2.0 * half / s / (points - 1) as f64;
    let ys: Vec<f64> = (0..points).map(|k| -half / s + k as f64 * h).collect();
    let probabilities: Vec<f64> = ys
        .iter()
        .map(|&y| conditional_probability_normalized(g, &readings, &grids.system_readings(&[At::Value(y)])?))
        .collect::<Result<_>>()?;
    let total = h * (probabilities.iter().sum::<f64>() - 0.5 * (probabilities[0] + probabilities[points - 1]));
    Ok(ConditionalDistribution { grid: ys.into_iter().map(|y| vec![y]).collect(), probabilities, kind: DistributionKind::Density, total })
}

/// `sum c e^{-i eps t} prod_J e^{+-i p_J delta_J}` over the momentum modes, sign
/// following the frame convention.
pub fn phase_sum(g: &GlobalState, t: Option<f64>, delta: &[f64]) -> Result<C64> {
    let sign = -g.phase().sign();
    let mut acc = C64::new(0.0, 0.0);
    for m in g.modes()? {
        let mut ph = sign * m.sys_momentum.iter().zip(delta).map(|(p, d)| p * d).sum::<f64>();
        if let (Some(t), Some(e)) = (t, m.clock_energy) {
            ph += e * t;
        }
        acc += m.coeff * C64::from_polar(1.0, ph);
    }
    Ok(acc)
}

fn diagonal_from(op: &crate::tensor::OperatorSum) -> LinearOperator {
    op.to_operator()
}

fn rod_shift(a: &[Reading], b: &[Reading]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (ra, rb) in a.iter().zip(b) {
        if ra.role != rb.role {
            return Err(Error::InvalidInput("readings must pair up by factor".into()));
        }
        match ra.role {
            Role::Rod(axis) => out.push((axis, rb.value()? - ra.value()?)),
            _ => {
                if (ra.value()? - rb.value()?).abs() > 0.0 {
                    return Err(Error::InvalidInput("only rod readings may differ".into()));
                }
            }
        }
    }
    Ok(out)
}

/// `||psi(b) - exp(-i P.(x_b - x_a)) psi(a)||` (sign per the frame
/// convention); the generator includes clock momentum when present.
pub fn translation_residual(g: &GlobalState, a: &[Reading], b: &[Reading]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("reading lists differ in length".into()));
    }
    let ra = relative_state(g, a)?;
    let rb = relative_state(g, b)?;
    let shifts = rod_shift(a, b)?;
    let parts = Parts { clock: true, rod: false, system: true };
    let mut gen: Option<LinearOperator> = None;
    for (axis, dx) in shifts {
        let p = diagonal_from(&g.momentum_operator(&ra.roles, axis, parts)?);
        let scaled = LinearOperator::hermitian(p.matrix() * C64::new(dx, 0.0), p.domain_shape().to_vec(), p.slots().to_vec())?;
        gen = Some(match gen {
            None => scaled,
            Some(acc) => acc.add(&scaled)?,
        });
    }
    let gen = match gen {
        Some(x) => x,
        None => return Ok(rb.vector.sub(&ra.vector)?.norm()),
    };
    let t = match g.phase() {
        PhaseConvention::Standard => 1.0,
        PhaseConvention::PlaneWave => -1.0,
    };
    let moved = Propagator::new(&gen)?.apply(t, &ra.vector)?;
    Ok(rb.vector.sub(&moved)?.norm())
}

/// Energy operator of the rods and systems on the relative-state layout.
pub fn rs_hamiltonian(g: &GlobalState, roles: &[Role]) -> Result<LinearOperator> {
    Ok(g.energy_operator(roles, Parts::ROD_SYSTEM)?.to_operator())
}

/// `||psi(t_b) - exp(-i(H_R + H_S)(t_b - t_a)) psi(t_a)||` for clock readings
/// (plus identical rod readings, if any).
pub fn evolution_residual(g: &GlobalState, a: &[Reading], b: &[Reading]) -> Result<f64> {
    if !g.is_energy_constrained() || !g.has_clock() {
        return Err(Error::Unsupported("evolution needs an energy-constrained universe with a clock".into()));
    }
    let ta = a.iter().find(|r| r.role == Role::Clock).ok_or_else(|| Error::InvalidInput("missing clock reading".into()))?;
    let tb = b.iter().find(|r| r.role == Role::Clock).ok_or_else(|| Error::InvalidInput("missing clock reading".into()))?;
    for r in a.iter().filter(|r| r.role != Role::Clock) {
        if !b.contains(r) {
            return Err(Error::InvalidInput("non-clock readings must match".into()));
        }
    }
    let ra = relative_state(g, a)?;
    let rb = relative_state(g, b)?;
    if ra.roles.iter().any(|r| matches!(r, Role::Rod(_))) || a.len() == 1 {
        let h = rs_hamiltonian(g, &ra.roles)?;
        let moved = Propagator::new(&h)?.apply(tb.value()? - ta.value()?, &ra.vector)?;
        return Ok(rb.vector.sub(&moved)?.norm());
    }
    Err(Error::Unsupported("rod readings freeze R; evolve with the clock reading alone".into()))
}

/// Central-difference residual `||i (phi(t+h) - phi(t-h)) / 2h - (H_R + H_S) phi(t)||`
/// of the continuous clock-conditioned state.
pub fn schrodinger_fd_residual(g: &GlobalState, t: f64, h: f64) -> Result<f64> {
    let grids = Grids::continuous(g)?;
    let at = |s: f64| -> Result<RelativeState> { relative_state(g, &[grids.clock_reading(At::Value(s))?]) };
    let (p, c, m) = (at(t + h)?, at(t)?, at(t - h)?);
    let dt = p.vector.sub(&m.vector)?.scale(C64::new(0.0, 1.0 / (2.0 * h)));
    let hphi = g.energy_operator(&c.roles, Parts::ROD_SYSTEM)?.apply(&c.vector)?;
    Ok(dt.sub(&hphi)?.norm())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `<phi(x_0)|phi(x_0 + dx)>` of the continuous rod-conditioned states along
/// `axis`, normalized so `f(0) = 1`.
pub fn overlap_function(g: &GlobalState, axis: usize, dx: f64) -> Result<C64> {
    let grids = Grids::continuous(g)?;
    let base = grids.rod.get(axis).ok_or_else(|| Error::InvalidInput(format!("no axis {axis}")))?;
    let mut at0 = vec![At::Value(base.origin()); g.axes()];
    let r0 = relative_state(g, &grids.rod_readings(&at0)?)?;
    at0[axis] = At::Value(base.origin() + dx);
    let r1 = relative_state(g, &grids.rod_readings(&at0)?)?;
    Ok(inner(&r0.vector, &r1.vector)? / r0.vector.norm_sqr())
}

/// Convention constant in `delta_x * Delta_p >= kappa`.
pub const RESOLUTION_KAPPA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    /// First `dx > 0` with `|f(dx)| <= threshold`; `None` when there is no crossing within a period.
    pub delta_x: Option<f64>,
    /// Period, the lower bound reported without a crossing.
    pub period: f64,
    pub delta_p: f64,
    pub threshold: f64,
    pub kappa: f64,
    /// `delta_x * delta_p` (period used without a crossing).
    pub product: f64,
    pub satisfied: bool,
}

/// Spread of `P_S` along `axis` in the normalized rod-conditioned state.
pub fn momentum_spread(g: &GlobalState, axis: usize) -> Result<f64> {
    let grids = Grids::continuous(g)?;
    let at = vec![At::Value(0.0); g.axes()];
    let r = relative_state(g, &grids.rod_readings(&at)?)?;
    let v = r.vector.normalized()?;
    let p = g.momentum_operator(&r.roles, axis, Parts::SYSTEM)?;
    let pv = p.apply(&v)?;
    let mean = inner(&v, &pv)?.re;
    let second = pv.norm_sqr();
    Ok((second - mean * mean).max(0.0).sqrt())
}

pub fn spatial_resolution(g: &GlobalState, axis: usize, threshold: f64) -> Result<Resolution> {
    let period = g.rod_spectrum(axis).ok_or_else(|| Error::Unsupported("resolution needs a rod spectrum".into()))?.period();
    let delta_p = momentum_spread(g, axis)?;
    let f = |x: f64| overlap_function(g, axis, x).map(|z| z.norm());
    let steps = 4096;
    let h = period / steps as f64;
    let mut found = None;
    let mut prev = 0.0;
    for k in 1..=steps {
        let x = k as f64 * h;
        if f(x)? <= threshold {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > 1e-13 * period.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if f(mid)? <= threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            found = Some(hi);
            break;
        }
        prev = x;
    }
    let product = found.unwrap_or(period) * delta_p;
    Ok(Resolution {
        delta_x: found,
        period,
        delta_p,
        threshold,
        kappa: RESOLUTION_KAPPA,
        product,
        satisfied: found.is_none() || product >= RESOLUTION_KAPPA,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLimit {
    pub e_rs: f64,
    pub delta_e: f64,
    pub bound: f64,
    /// First orthogonalization time within one clock period.
    pub t_orth: Option<f64>,
    pub satisfied: bool,
}

/// Orthogonality tolerance on `|<phi(t0)|phi(t)>|`.
pub const ORTHOGONAL_TOL: f64 = 1e-9;

/// Clock-level weights `||<E_i|Psi>||^2` and the matching energies `-E_i`
/// of R+S.
fn spectral_weights(g: &GlobalState) -> Result<(Vec<f64>, Vec<f64>)> {
    let slot = g.slot(Role::Clock).ok_or_else(|| Error::Unsupported("no clock".into()))?;
    let clock = g.factor(Role::Clock).expect("slot found");
    let psi = g.dense();
    let mut w = Vec::new();
    let mut e = Vec::new();
    for (i, l) in clock.labels.iter().enumerate() {
        let bra = StateVector::basis(clock.labels.clone(), i)?;
        w.push(condition(&psi, slot, &bra)?.norm_sqr());
        e.push(-l.energy().unwrap_or(0.0));
    }
    Ok((w, e))
}

/// `f(tau) = sum_i w_i e^{-i eps_i tau}`.
pub fn time_overlap(g: &GlobalState, tau: f64) -> Result<C64> {
    let (w, e) = spectral_weights(g)?;
    Ok(w.iter().zip(&e).map(|(wi, ei)| C64::from_polar(*wi, -ei * tau)).sum())
}

pub fn speed_limit_report(g: &GlobalState) -> Result<SpeedLimit> {
    if !g.is_energy_constrained() {
        return Err(Error::Unsupported("speed limit needs an energy-constrained universe".into()));
    }
    let period = g.clock_spectrum().ok_or_else(|| Error::Unsupported("speed limit scan needs a periodic clock".into()))?.period();
    let grids = Grids::continuous(g)?;
    let r = relative_state(g, &[grids.clock_reading(At::Value(0.0))?])?;
    let v = r.vector.normalized()?;
    let h = g.energy_operator(&r.roles, Parts::ROD_SYSTEM)?;
    let hv = h.apply(&v)?;
    let e_rs = inner(&v, &hv)?.re;
    let delta_e = (hv.norm_sqr() - e_rs * e_rs).max(0.0).sqrt();
    let mut bound: f64 = 0.0;
    if e_rs > 0.0 {
        bound = bound.max(PI / (2.0 * e_rs));
    }
    if delta_e > 0.0 {
        bound = bound.max(PI / (2.0 * delta_e));
    }
    let (w, e) = spectral_weights(g)?;
    let f = |tau: f64| -> f64 { w.iter().zip(&e).map(|(wi, ei)| C64::from_polar(*wi, -ei * tau)).sum::<C64>().norm() };
    let t_orth = first_zero(&f, period, 4096);
    let satisfied = t_orth.is_none_or(|t| t >= bound * (1.0 - 1e-9));
    Ok(SpeedLimit { e_rs, delta_e, bound, t_orth, satisfied })
}

/// First `tau` in `(0, period]` where `f` dips to `ORTHOGONAL_TOL`: scan,
/// then ternary refinement of each local minimum.
fn first_zero(f: &dyn Fn(f64) -> f64, period: f64, steps: usize) -> Option<f64> {
    let h = period / steps as f64;
    let vals: Vec<f64> = (0..=steps + 1).map(|k| f(k as f64 * h)).collect();
    for k in 1..=steps {
        if vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1] {
            let (mut lo, mut hi) = ((k - 1) as f64 * h, (k + 1) as f64 * h);
            while hi - lo > 1e-12 * period.max(1.0) {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) <= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t = 0.5 * (lo + hi);
            if f(t) <= ORTHOGONAL_TOL && t > 0.0 {
                return Some(t);
            }
        }
    }
    None
}

/// Closed form for the three-level free-particle universe with real
/// coefficients, `D = d = 3`.
pub fn closed_form_3level(c: [f64; 3], l: f64, big_m: f64, m: f64, t: f64, delta: f64) -> Result<f64> {
    let n2: f64 = c.iter().map(|x| x * x).sum();
    if (n2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("coefficients not normalized: {n2}")));
    }
    let eps = (2.0 * PI / l).powi(2) * (1.0 / (2.0 * big_m) + 1.0 / (2.0 * m));
    let k = 2.0 * PI * delta / l;
    Ok(1.0 / 3.0
        + 2.0 / 3.0 * c[0] * c[1] * (eps * t + k).cos()
        + 2.0 / 3.0 * c[1] * c[2] * (eps * t - k).cos()
        + 2.0 / 3.0 * c[0] * c[2] * (1.0 - 2.0 * k.sin().powi(2)))
}

/// Continuous variant: the same expression with the `1/L` prefactor.
pub fn closed_form_3level_density(c: [f64; 3], l: f64, big_m: f64, m: f64, t: f64, delta: f64) -> Result<f64> {
    Ok(3.0 / l * closed_form_3level(c, l, big_m, m, t, delta)?)
}

/// `||i d_t psi(t, x) - H_S psi(t, x)||` by central differences of the
/// clock-and-rod-conditioned continuous relative state.
pub fn heavy_reference_residual(g: &GlobalState, t: f64, x: &[f64], h: f64) -> Result<f64> {
    let grids = Grids::continuous(g)?;
    let rods = grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>())?;
    let at = |s: f64| -> Result<RelativeState> {
        let mut r = vec![grids.clock_reading(At::Value(s))?];
        r.extend(rods.iter().copied());
        relative_state(g, &r)
    };
    let (p, c, m) = (at(t + h)?, at(t)?, at(t - h)?);
    let dt = p.vector.sub(&m.vector)?.scale(C64::new(0.0, 1.0 / (2.0 * h)));
    let hs = g.energy_operator(&c.roles, Parts::SYSTEM)?.apply(&c.vector)?;
    Ok(dt.sub(&hs)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::momentum_spectrum;
    use crate::universe::{double_constrained_state, momentum_constrained_state};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn closed_form_examples() {
        let l = 2.0 * PI;
        assert!((closed_form_3level([1.0, 0.0, 0.0], l, 1.0, 1.0, 0.7, 0.3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let u = 1.0 / 3f64.sqrt();
        assert!((closed_form_3level([u, u, u], l, 1.0, 1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(closed_form_3level([u, u, u], l, 1.0, 1.0, 0.0, l / 3.0).unwrap().abs() < 1e-14);
        assert!(closed_form_3level([1.0, 1.0, 0.0], l, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn relative_state_phases() {
        let s = momentum_spectrum(3, -1.0, 2.0 * PI).unwrap();
        let cs = [c(0.6), C64::new(0.0, 0.48), c(0.64)];
        let g = momentum_constrained_state(&s, &s, &cs).unwrap();
        let grids = Grids::discrete(&g, None, 3, 3).unwrap();
        let r = relative_state(&g, &grids.rod_readings(&[At::Index(1)]).unwrap()).unwrap();
        let x = 2.0 * PI / 3.0;
        for (k, amp) in r.vector.amplitudes().iter().enumerate() {
            let want = cs[k] * C64::from_polar(1.0, -s.values()[k] * x);
            assert!((amp - want).norm() < 1e-14);
        }
    }

    #[test]
    fn off_grid_reading_rejected() {
        let s = momentum_spectrum(3, -1.0, 2.0 * PI).unwrap();
        let g = momentum_constrained_state(&s, &s, &[c(1.0), c(0.0), c(0.0)]).unwrap();
        let grids = Grids::discrete(&g, None, 3, 3).unwrap();
        let r = grids.rod_readings(&[At::Value(0.5)]).unwrap();
        assert!(matches!(relative_state(&g, &r), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn two_level_speed_limit() {
        let s = momentum_spectrum(2, 0.0, 2.0 * PI).unwrap();
        let rod = momentum_spectrum(2, -1.0, 2.0 * PI).unwrap();
        let w = 1.0 / 2f64.sqrt();
        let g = double_constrained_state(Dispersion::Free { mass: 1.0 }, Dispersion::Free { mass: 1.0 }, &rod, &s, &[c(w), c(w)])
            .unwrap();
        let rep = speed_limit_report(&g).unwrap();
        let eps1 = 1.0;
        assert!((rep.t_orth.unwrap() - PI / eps1).abs() < 1e-9);
        assert!((rep.bound - PI / eps1).abs() < 1e-12);
        assert!((rep.delta_e - eps1 / 2.0).abs() < 1e-12);
    }
}
