//! Single- and two-time measurement statistics: the external-time average of
//! projector expectations, and memory ancillas written at chosen clock
//! readings.

use crate::error::{Error, Result};
use crate::frames::{ClockSpectrum, FrameGrid};
use crate::relational::{frame_bra, povm_weight, At, Grids, Reading};
use crate::tensor::{condition, Label, Propagator, StateVector, C64};
use crate::universe::{EnergyForm, Factor, GlobalState, Parts, Role, Term};

/// Readings `(t_m, x_j, y_l)` as grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementEvent {
    pub clock: usize,
    pub rod: usize,
    pub system: usize,
}

impl MeasurementEvent {
    pub fn new(clock: usize, rod: usize, system: usize) -> Self {
        MeasurementEvent { clock, rod, system }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryRecord {
    /// Clock index at which the memories are written.
    pub clock: usize,
    pub rod_memory: Role,
    pub system_memory: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemoryLayout {
    pub records: Vec<MemoryRecord>,
}

impl MemoryLayout {
    /// Records at strictly increasing clock indices.
    pub fn at(times: &[usize]) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("record times must be strictly increasing".into()));
        }
        let records = times
            .iter()
            .enumerate()
            .map(|(i, &clock)| MemoryRecord { clock, rod_memory: Role::RodMemory(i), system_memory: Role::SystemMemory(i) })
            .collect();
        Ok(MemoryLayout { records })
    }

    pub const READY: Label = Label::Ready;
}

fn single_axis(g: &GlobalState) -> Result<()> {
    if g.axes() != 1 || g.factor(Role::Spin).is_some() {
        return Err(Error::Unsupported("measurement protocols need one axis and no spin".into()));
    }
    if !g.has_clock() {
        return Err(Error::Unsupported("measurement protocols need a clock".into()));
    }
    Ok(())
}

/// Grids with `D = d` everywhere, valid only when the clock factor is the
/// full equally spaced ladder (so its time states are orthogonal).
pub fn orthogonal_grids(g: &GlobalState) -> Result<Grids> {
    single_axis(g)?;
    let c = g.clock_spectrum().ok_or_else(|| Error::Unsupported("orthogonal mode needs a rational clock".into()))?;
    let dc = g.factor(Role::Clock).expect("has clock").dim();
    let clock = g.factor(Role::Clock).expect("has clock");
    let w = c.quantum();
    let equally_spaced = clock.labels.iter().enumerate().all(|(k, l)| {
        let e = l.energy().unwrap_or(f64::NAN);
        (e - c.base_energy() - k as f64 * w).abs() <= 1e-12 * e.abs().max(1.0)
    });
    if !equally_spaced || dc <= c.r_max() as usize {
        return Err(Error::Unsupported(format!("orthogonal mode needs an equally spaced clock; {dc} levels do not form a ladder")));
    }
    let dr = g.factor(Role::Rod(0)).expect("axis").dim();
    let ds = g.factor(Role::System(0)).expect("axis").dim();
    let rod = FrameGrid::discrete(dr, 0.0, g.rod_spectrum(0).map_or(1.0, |s| s.period()))?;
    let system = FrameGrid::discrete(ds, 0.0, g.sys_spectrum(0).map_or(1.0, |s| s.period()))?;
    Ok(Grids { clock: Some(FrameGrid::discrete(dc, 0.0, c.period())?), rod: vec![rod], system: vec![system] })
}

fn event_readings(grids: &Grids, e: &MeasurementEvent) -> Result<[Reading; 3]> {
    Ok([
        grids.clock_reading(At::Index(e.clock))?,
        grids.rod_readings(&[At::Index(e.rod)])?[0],
        grids.system_readings(&[At::Index(e.system)])?[0],
    ])
}

/// Contract readings out of `v` (layout `roles`), highest slot first.
fn contract(g: &GlobalState, v: &StateVector, roles: &[Role], readings: &[Reading]) -> Result<StateVector> {
    let mut out = v.clone();
    let mut order: Vec<(usize, &Reading)> = readings
        .iter()
        .map(|r| roles.iter().position(|x| *x == r.role).map(|s| (s, r)).ok_or_else(|| Error::InvalidInput(format!("no factor {:?}", r.role))))
        .collect::<Result<_>>()?;
    order.sort_by_key(|(s, _)| std::cmp::Reverse(*s));
    for (slot, r) in order {
        out = condition(&out, slot, &frame_bra(g, r)?)?;
    }
    Ok(out)
}

/// Energy sum over the modes `k` of the rod-system sector, with the rod partner of each system level.
fn sector_modes(g: &GlobalState) -> Result<Vec<(f64, f64)>> {
    let s = g.sys_spectrum(0).ok_or_else(|| Error::Unsupported("no system spectrum".into()))?;
    let r = g.rod_spectrum(0).ok_or_else(|| Error::Unsupported("no rod spectrum".into()))?;
    let mut out = Vec::new();
    for &p in s.values() {
        if r.index_of(-p).is_some() {
            out.push((p, g.rod_dispersion().energy(&[-p])? + g.system_dispersion().energy(&[p])?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpptSingle {
    /// `|sum_k c_k e^{-i eps_k t} e^{i p_k (y - x)}|^2 / (D_R D_S)`: joint in `(x, y)` at `t`.
    pub closed_form: f64,
    /// Ratio of the external-time averages of the trace expressions, when the spectrum of the total energy is commensurate.
    pub theta_average: Option<f64>,
    pub theta_samples: usize,
    /// Divided by the rod marginal `1/D_R`: conditioned on `x`.
    pub conditioned: f64,
}

/// Period and sample count for averaging over the external time: one common
/// period of the total-energy spectrum, `4 r_max + 1` samples.
pub fn theta_sampling(g: &GlobalState) -> Option<(f64, usize)> {
    let roles = g.roles();
    let h = g.energy_operator(&roles, Parts::ALL).ok()?.to_operator();
    let mut ev: Vec<f64> = (0..h.matrix().nrows()).map(|i| h.matrix()[(i, i)].re).collect();
    let offdiag = h.matrix().iter().enumerate().any(|(k, z)| k % (h.matrix().nrows() + 1) != 0 && z.norm() > 0.0);
    if offdiag {
        ev = Propagator::new(&h).ok()?.eigenvalues().to_vec();
    }
    let distinct = crate::universe::distinct_levels(ev);
    match ClockSpectrum::from_floats(&distinct) {
        Ok(c) => Some((c.period(), 4 * c.r_max() as usize + 1)),
        Err(e) => {
            log::warn!("external-time average skipped: {e}");
            None
        }
    }
}

pub fn gppt_single(g: &GlobalState, grids: &Grids, e: &MeasurementEvent) -> Result<GpptSingle> {
    gppt_single_with(g, grids, e, None)
}

/// As [`gppt_single`], with an explicit number of external-time samples.
pub fn gppt_single_with(g: &GlobalState, grids: &Grids, e: &MeasurementEvent, samples: Option<usize>) -> Result<GpptSingle> {
    single_axis(g)?;
    let [t, x, y] = event_readings(grids, e)?;
    let (dr, ds) = (x.grid.points().unwrap_or(1) as f64, y.grid.points().unwrap_or(1) as f64);
    let s = crate::relational::phase_sum(g, Some(t.value()?), &[y.value()? - x.value()?])?;
    let closed_form = s.norm_sqr() / (dr * ds);
    let mut theta_average = None;
    let mut theta_samples = 0;
    if let Some((period, n)) = theta_sampling(g) {
        let n = samples.unwrap_or(n);
        let roles = g.roles();
        let h = g.energy_operator(&roles, Parts::ALL)?.to_operator();
        let u = Propagator::new(&h)?;
        let psi = g.dense();
        let wt = povm_weight(g, &t)?;
        let wxy = povm_weight(g, &x)? * povm_weight(g, &y)?;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let v = u.apply(period * k as f64 / n as f64, &psi)?;
            num += wt * wxy * contract(g, &v, &roles, &[t, x, y])?.norm_sqr();
            den += wt * contract(g, &v, &roles, &[t])?.norm_sqr();
        }
        theta_average = Some(num / den);
        theta_samples = n;
    }
    Ok(GpptSingle { closed_form, theta_average, theta_samples, conditioned: closed_form * dr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTime {
    /// Joint value with the `1/(d_R^2 d_S^2)` prefactor.
    pub joint: f64,
    /// Conditioned on both rod readings: `|sum|^2 / d_S^2`.
    pub conditioned: f64,
}

/// `(1/d_R^2 d_S^2) |sum_k e^{-i eps_k (t'' - t')} e^{i p_k (Delta_f - Delta_i)}|^2`.
pub fn gppt_two_time(g: &GlobalState, grids: &Grids, first: &MeasurementEvent, second: &MeasurementEvent) -> Result<TwoTime> {
    single_axis(g)?;
    let [t1, x1, y1] = event_readings(grids, first)?;
    let [t2, x2, y2] = event_readings(grids, second)?;
    let dt = t2.value()? - t1.value()?;
    if dt <= 0.0 {
        return Err(Error::InvalidInput("second measurement must come after the first".into()));
    }
    two_time_closed_form(g, dt, y1.value()? - x1.value()?, y2.value()? - x2.value()?)
}

fn two_time_closed_form(g: &GlobalState, dt: f64, delta_i: f64, delta_f: f64) -> Result<TwoTime> {
    let dr = g.factor(Role::Rod(0)).expect("axis").dim() as f64;
    let ds = g.factor(Role::System(0)).expect("axis").dim() as f64;
    let sign = -g.phase().sign();
    let s: C64 = sector_modes(g)?.iter().map(|&(p, eps)| C64::from_polar(1.0, -eps * dt + sign * p * (delta_f - delta_i))).sum();
    let conditioned = s.norm_sqr() / (ds * ds);
    Ok(TwoTime { joint: conditioned / (dr * dr), conditioned })
}

/// History state with memory records, plus what is needed to query it.
#[derive(Debug, Clone)]
pub struct History {
    pub state: GlobalState,
    pub layout: MemoryLayout,
    pub grids: Grids,
}

/// Dense `(R, S)` vector of `sqrt(d_C) <t_m|Psi>`.
fn clock_slice(g: &GlobalState, grids: &Grids, m: usize) -> Result<StateVector> {
    let t = grids.clock_reading(At::Index(m))?;
    let roles = g.roles();
    let dc = g.factor(Role::Clock).expect("clock").dim() as f64;
    Ok(contract(g, &g.dense(), &roles, &[t])?.scale(C64::new(dc.sqrt(), 0.0)))
}

/// Orthonormal product basis `|x_j>|y_l>` of `R (x) S`, row-major in `(j, l)`.
fn product_basis(g: &GlobalState, grids: &Grids) -> Result<Vec<StateVector>> {
    let mut out = Vec::new();
    let (dr, ds) = (grids.rod[0].points().unwrap_or(0), grids.system[0].points().unwrap_or(0));
    for j in 0..dr {
        for l in 0..ds {
            let x = frame_bra(g, &grids.rod_readings(&[At::Index(j)])?[0])?;
            let y = frame_bra(g, &grids.system_readings(&[At::Index(l)])?[0])?;
            out.push(crate::tensor::tensor(&x, &y));
        }
    }
    Ok(out)
}

/// `sqrt(d_R) Pi_0 v`, projecting onto zero total momentum.
fn sector_record(g: &GlobalState, v: &StateVector) -> Result<StateVector> {
    let fr = g.factor(Role::Rod(0)).expect("axis");
    let fs = g.factor(Role::System(0)).expect("axis");
    let ds = fs.dim();
    let mut amps = v.amplitudes().to_vec();
    for (i, a) in amps.iter_mut().enumerate() {
        let (pr, ps) = (fr.labels[i / ds].momentum(), fs.labels[i % ds].momentum());
        let keep = match (pr, ps) {
            (Some(pr), Some(ps)) => (pr + ps).abs() <= 1e-12 * pr.abs().max(ps.abs()).max(1.0),
            _ => return Err(Error::Unsupported("memory records need momentum labels".into())),
        };
        *a = if keep { *a * (fr.dim() as f64).sqrt() } else { C64::new(0.0, 0.0) };
    }
    StateVector::new(amps, v.shape().to_vec(), v.labels().to_vec(), crate::tensor::Normalization::Unnormalized)
}

/// Write memory records into `g` at the layout's clock readings.
pub fn glm_build(g: &GlobalState, layout: &MemoryLayout) -> Result<History> {
    let grids = orthogonal_grids(g)?;
    if layout.records.len() > 2 {
        return Err(Error::Unsupported("at most two memory records".into()));
    }
    let n = grids.clock.expect("clock").points().expect("discrete");
    for r in &layout.records {
        if r.clock >= n {
            return Err(Error::OffGrid { value: r.clock as f64, points: n });
        }
    }
    if layout.records.windows(2).any(|w| w[1].clock <= w[0].clock) {
        return Err(Error::InvalidInput("record times must be strictly increasing".into()));
    }
    if layout.records.is_empty() {
        return Ok(History { state: g.clone(), layout: layout.clone(), grids });
    }
    let period = grids.clock.expect("clock").period();
    let tm = |m: usize| period * m as f64 / n as f64;
    let rs_roles = [Role::Rod(0), Role::System(0)];
    let h = g.energy_operator(&rs_roles, Parts::ROD_SYSTEM)?.to_operator();
    let u = Propagator::new(&h)?;
    let basis = product_basis(g, &grids)?;
    let records: Vec<StateVector> = basis.iter().map(|b| sector_record(g, b)).collect::<Result<_>>()?;
    let dr = g.factor(Role::Rod(0)).expect("axis").dim();
    let ds = g.factor(Role::System(0)).expect("axis").dim();
    let nb = basis.len();
    let mem_dim = [dr + 1, ds + 1];
    let nrec = layout.records.len();
    // memory outcome (j, l) per record, index d meaning ready
    let mem_len: usize = (0..nrec).map(|_| mem_dim[0] * mem_dim[1]).product();
    let mem_index = |slots: &[(usize, usize)]| -> usize {
        slots.iter().fold(0, |acc, &(a, b)| (acc * mem_dim[0] + a) * mem_dim[1] + b)
    };
    let rs_len = dr * ds;
    // chi[m] over (R, S, memories) flattened
    let mut chi = vec![vec![C64::new(0.0, 0.0); rs_len * mem_len]; n];
    let put = |chi: &mut Vec<C64>, v: &StateVector, w: C64, mem: usize| {
        for (i, a) in v.amplitudes().iter().enumerate() {
            chi[i * mem_len + mem] += w * a;
        }
    };
    let m1 = layout.records[0].clock;
    let phi1 = clock_slice(g, &grids, m1)?;
    let first: Vec<C64> = basis.iter().map(|b| crate::tensor::inner(b, &phi1)).collect::<Result<_>>()?;
    let all_ready: Vec<(usize, usize)> = vec![(dr, ds); nrec];
    for (m, slot) in chi.iter_mut().enumerate() {
        if m < m1 {
            put(slot, &clock_slice(g, &grids, m)?, C64::new(1.0, 0.0), mem_index(&all_ready));
            continue;
        }
        let second = layout.records.get(1).map(|r| r.clock).filter(|&m2| m >= m2);
        for a in 0..nb {
            if first[a] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut mem = all_ready.clone();
            mem[0] = (a / ds, a % ds);
            match second {
                None => {
                    let v = u.apply(tm(m) - tm(m1), &records[a])?;
                    put(slot, &v, first[a], mem_index(&mem));
                }
                Some(m2) => {
                    let mid = u.apply(tm(m2) - tm(m1), &records[a])?;
                    for b in 0..nb {
                        let amp = crate::tensor::inner(&basis[b], &mid)?;
                        if amp == C64::new(0.0, 0.0) {
                            continue;
                        }
                        mem[1] = (b / ds, b % ds);
                        let v = u.apply(tm(m) - tm(m2), &records[b])?;
                        put(slot, &v, first[a] * amp, mem_index(&mem));
                    }
                }
            }
        }
    }
    // |t_m> = (1/sqrt N) sum_n e^{-i E_n t_m} |E_n>
    let clock = g.factor(Role::Clock).expect("clock");
    let energies: Vec<f64> = clock.labels.iter().map(|l| l.energy().unwrap_or(0.0)).collect();
    let block = rs_len * mem_len;
    let mut amps = vec![C64::new(0.0, 0.0); n * block];
    for (m, c) in chi.iter().enumerate() {
        for (k, e) in energies.iter().enumerate() {
            let w = C64::from_polar(1.0 / n as f64, -e * tm(m));
            for (i, a) in c.iter().enumerate() {
                amps[k * block + i] += w * a;
            }
        }
    }
    let mut factors: Vec<Factor> = g.factors().to_vec();
    for r in &layout.records {
        let outcomes = |d: usize| (0..d).map(Label::Outcome).chain(std::iter::once(Label::Ready)).collect::<Vec<_>>();
        factors.push(Factor { role: r.rod_memory, labels: outcomes(dr) });
        factors.push(Factor { role: r.system_memory, labels: outcomes(ds) });
    }
    let shape: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
    let terms: Vec<Term> = amps
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 1e-300)
        .map(|(i, &coeff)| Term { coeff, index: crate::tensor::multi_index(&shape, i) })
        .collect();
    let state = g.derived(factors, terms, EnergyForm::Linear)?;
    Ok(History { state, layout: layout.clone(), grids })
}

/// Contract the clock reading and memory outcomes (`None` = ready) out of
/// the history; returns the remaining `(R, S)` vector.
fn history_slice(h: &History, m: usize, mems: &[(Option<usize>, Option<usize>)]) -> Result<StateVector> {
    let g = &h.state;
    let roles = g.roles();
    let t = h.grids.clock_reading(At::Index(m))?;
    let mut v = g.dense();
    let mut names: Vec<(usize, StateVector)> = Vec::new();
    for (rec, &(a, b)) in h.layout.records.iter().zip(mems) {
        for (role, k) in [(rec.rod_memory, a), (rec.system_memory, b)] {
            let f = g.factor(role).expect("memory factor");
            let idx = k.unwrap_or(f.dim() - 1);
            if idx >= f.dim() - 1 && k.is_some() {
                return Err(Error::IndexOutOfRange { index: idx, size: f.dim() - 1 });
            }
            names.push((roles.iter().position(|r| *r == role).expect("present"), StateVector::basis(f.labels.clone(), idx)?));
        }
    }
    names.sort_by_key(|(s, _)| std::cmp::Reverse(*s));
    for (slot, bra) in names {
        v = condition(&v, slot, &bra)?;
    }
    let clock_slot = roles.iter().position(|r| *r == Role::Clock).expect("clock");
    v = condition(&v, clock_slot, &frame_bra(g, &t)?)?;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmSingle {
    /// `||(<t| <x|_M <y|_M) Psi||^2 / (1/d_C)`.
    pub joint: f64,
    /// Joint divided by `1/d_R`.
    pub conditioned: f64,
}

/// Memory statistics at clock index `m` of a one-record history.
pub fn glm_single_prob(h: &History, m: usize, x: usize, y: usize) -> Result<GlmSingle> {
    if h.layout.records.len() != 1 {
        return Err(Error::InvalidInput(format!("expected one record, found {}", h.layout.records.len())));
    }
    if m < h.layout.records[0].clock {
        return Err(Error::InvalidInput("query precedes the measurement record".into()));
    }
    let dc = h.state.factor(Role::Clock).expect("clock").dim() as f64;
    let dr = h.state.factor(Role::Rod(0)).expect("axis").dim() as f64;
    let joint = history_slice(h, m, &[(Some(x), Some(y))])?.norm_sqr() * dc;
    Ok(GlmSingle { joint, conditioned: joint * dr })
}

/// Probability of memory state `mems` at clock index `m` (ready entries as `None`), times `d_C`.
pub fn memory_marginal(h: &History, m: usize, mems: &[(Option<usize>, Option<usize>)]) -> Result<f64> {
    let dc = h.state.factor(Role::Clock).expect("clock").dim() as f64;
    Ok(history_slice(h, m, mems)?.norm_sqr() * dc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmTwoTime {
    /// Ratio of memory contractions: `P(x'', y'' | x', y')`.
    pub bayes: f64,
    /// Also conditioned on the second rod reading.
    pub conditioned: f64,
    /// `conditioned / d_R^2`, matching the two-time propagator normalization.
    pub joint: f64,
}

/// Two-record statistics read at the second record's clock index.
pub fn glm_two_time_prob(h: &History, first: &MeasurementEvent, second: &MeasurementEvent) -> Result<GlmTwoTime> {
    glm_two_time_at(h, first, second, second.clock)
}

/// As [`glm_two_time_prob`], read at a later clock index `m`.
pub fn glm_two_time_at(h: &History, first: &MeasurementEvent, second: &MeasurementEvent, m: usize) -> Result<GlmTwoTime> {
    let recs = &h.layout.records;
    if recs.len() != 2 || recs[0].clock != first.clock || recs[1].clock != second.clock {
        return Err(Error::InvalidInput("events do not match the memory records".into()));
    }
    if m < second.clock {
        return Err(Error::InvalidInput("query precedes the second record".into()));
    }
    let ds = h.state.factor(Role::System(0)).expect("axis").dim();
    let dr = h.state.factor(Role::Rod(0)).expect("axis").dim() as f64;
    let one = (Some(first.rod), Some(first.system));
    let mut row = 0.0;
    let mut bayes = 0.0;
    let mut total = 0.0;
    for x2 in 0..dr as usize {
        for y2 in 0..ds {
            let p = history_slice(h, m, &[one, (Some(x2), Some(y2))])?.norm_sqr();
            total += p;
            if x2 == second.rod {
                row += p;
                if y2 == second.system {
                    bayes = p;
                }
            }
        }
    }
    if total == 0.0 || row == 0.0 {
        return Err(Error::InvalidInput("first record has zero probability".into()));
    }
    let bayes = bayes / total;
    let conditioned = bayes / (row / total);
    Ok(GlmTwoTime { bayes, conditioned, joint: conditioned / (dr * dr) })
}
