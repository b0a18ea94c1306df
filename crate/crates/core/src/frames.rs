//! Momentum spectra, POVM frame states for rods and clocks, and the
//! rational-ratio clock.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::tensor::{Label, Normalization, StateVector, C64};

/// Largest denominator accepted when reading a float energy ratio as a rational.
pub const MAX_DENOMINATOR: i64 = 10_000;
/// Relative tolerance for rational recognition.
pub const RATIO_TOL: f64 = 1e-12;

/// Equally spaced ladder `p_k = p0 + 2 pi k / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    d: usize,
    p0: f64,
    period: f64,
    values: Vec<f64>,
}

pub fn momentum_spectrum(d: usize, p0: f64, period: f64) -> Result<Spectrum> {
    if d == 0 {
        return Err(Error::InvalidSpectrum("d must be at least 1".into()));
    }
    if !(period > 0.0) || !period.is_finite() || !p0.is_finite() {
        return Err(Error::InvalidSpectrum(format!("period must be positive and finite, got {period}")));
    }
    let values = (0..d).map(|k| p0 + 2.0 * PI * k as f64 / period).collect();
    Ok(Spectrum { d, p0, period, values })
}

impl Spectrum {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn labels(&self) -> Vec<Label> {
        self.values.iter().map(|&p| Label::Momentum(p)).collect()
    }

    /// Index of the level equal to `p`, matched to a fraction of the spacing.
    pub fn index_of(&self, p: f64) -> Option<usize> {
        let k = ((p - self.p0) / self.spacing()).round();
        if k < 0.0 || k >= self.d as f64 {
            return None;
        }
        let k = k as usize;
        let tol = 1e-9 * self.spacing().max(p.abs()).max(1.0);
        ((self.values[k] - p).abs() <= tol).then_some(k)
    }
}

/// Sign of the exponent in frame-state coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// `|x> = sum_k e^{-i p_k x} |p_k>`.
    #[default]
    Standard,
    /// `|x> = sum_k e^{+i p_k x} |p_k>`; relative states then carry plane
    /// waves `e^{+ipx}` and `-i d/dx` acts as `+P` on them.
    PlaneWave,
}

impl PhaseConvention {
    pub fn sign(self) -> f64 {
        match self {
            PhaseConvention::Standard => -1.0,
            PhaseConvention::PlaneWave => 1.0,
        }
    }
}

/// Reading points for a frame: `D` uniform points over one period, or the
/// continuous interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    points: Option<usize>,
    origin: f64,
    period: f64,
}

impl FrameGrid {
    pub fn discrete(points: usize, origin: f64, period: f64) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidGrid("at least one point required".into()));
        }
        if !(period > 0.0) || !period.is_finite() || !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(FrameGrid { points: Some(points), origin, period })
    }

    pub fn continuous(origin: f64, period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() || !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(FrameGrid { points: None, origin, period })
    }

    pub fn points(&self) -> Option<usize> {
        self.points
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_continuous(&self) -> bool {
        self.points.is_none()
    }

    /// `L / D`; the whole period for a continuous grid.
    pub fn step(&self) -> f64 {
        match self.points {
            Some(n) => self.period / n as f64,
            None => self.period,
        }
    }

    /// Value of grid point `j`.
    pub fn value(&self, j: usize) -> Result<f64> {
        match self.points {
            Some(n) if j < n => Ok(self.origin + j as f64 * self.step()),
            Some(n) => Err(Error::IndexOutOfRange { index: j, size: n }),
            None => Err(Error::InvalidGrid("continuous grid has no indexed points".into())),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            Some(n) => (0..n).map(|j| self.origin + j as f64 * self.step()).collect(),
            None => Vec::new(),
        }
    }

    /// Grid index of `x`, or an off-grid error.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let n = self.points.ok_or_else(|| Error::InvalidGrid("continuous grid has no indices".into()))?;
        let u = (x - self.origin) / self.step();
        let j = u.round();
        if (u - j).abs() > 1e-9 || j < 0.0 || j >= n as f64 {
            return Err(Error::OffGrid { value: x, points: n });
        }
        Ok(j as usize)
    }

    /// Map `x` into `[origin, origin + period]`, warning when it moves.
    pub fn wrap(&self, x: f64) -> f64 {
        let hi = self.origin + self.period;
        if x >= self.origin && x <= hi {
            return x;
        }
        let w = self.origin + (x - self.origin).rem_euclid(self.period);
        log::warn!("frame reading {x} outside [{}, {hi}], wrapped to {w}", self.origin);
        w
    }
}

/// `sum_k w e^{sign i v_k x} |v_k>`.
pub fn phase_state(values: &[f64], labels: Vec<Label>, x: f64, sign: f64, weight: f64, norm: Normalization) -> StateVector {
    let amps = values.iter().map(|&v| C64::from_polar(weight, sign * v * x)).collect();
    StateVector::from_factor(amps, labels, norm).expect("labels sized from values")
}

/// Discrete rod state `|x_j> = (1/sqrt d) sum_k e^{-i p_k x_j} |p_k>`.
pub fn frame_state_discrete(s: &Spectrum, g: &FrameGrid, j: usize) -> Result<StateVector> {
    frame_state_discrete_with(s, g, j, PhaseConvention::Standard)
}

pub fn frame_state_discrete_with(s: &Spectrum, g: &FrameGrid, j: usize, conv: PhaseConvention) -> Result<StateVector> {
    let x = g.value(j)?;
    let w = 1.0 / (s.d as f64).sqrt();
    Ok(phase_state(&s.values, s.labels(), x, conv.sign(), w, Normalization::Unit))
}

/// Continuous rod state `|x> = sum_k e^{-i p_k x} |p_k>`, norm^2 = d.
pub fn frame_state_continuous(s: &Spectrum, g: &FrameGrid, x: f64) -> StateVector {
    frame_state_continuous_with(s, g, x, PhaseConvention::Standard)
}

pub fn frame_state_continuous_with(s: &Spectrum, g: &FrameGrid, x: f64, conv: PhaseConvention) -> StateVector {
    let x = g.wrap(x);
    phase_state(&s.values, s.labels(), x, conv.sign(), 1.0, Normalization::Continuous)
}

fn resolution_residual(states: &[StateVector], weight: f64) -> f64 {
    let d = states[0].len();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for s in states {
        let a = s.amplitudes();
        for i in 0..d {
            for k in 0..d {
                m[(i, k)] += a[i] * a[k].conj();
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..d {
        for k in 0..d {
            let target = if i == k { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, k)] * weight - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Max-norm of `(d/D) sum_j |x_j><x_j| - 1`.
pub fn identity_residual(s: &Spectrum, g: &FrameGrid) -> Result<f64> {
    let n = g.points().ok_or_else(|| Error::InvalidGrid("identity residual needs a discrete grid".into()))?;
    if n < s.d {
        return Err(Error::InvalidGrid(format!("D = {n} is smaller than d = {}", s.d)));
    }
    let states: Vec<StateVector> = (0..n).map(|j| frame_state_discrete(s, g, j)).collect::<Result<_>>()?;
    Ok(resolution_residual(&states, s.d as f64 / n as f64))
}

/// `sum_j e^{-i x_j (p_k - p_n)}` over the grid.
pub fn grid_phase_sum(s: &Spectrum, g: &FrameGrid, k: usize, n: usize) -> Result<C64> {
    let dp = s.values[k] - s.values[n];
    Ok(g.values().iter().map(|&x| C64::from_polar(1.0, -x * dp)).sum())
}

/// `int_{y0}^{y0+L} e^{i y (p_k - p_n)} dy`, evaluated in closed form.
pub fn period_integral(s: &Spectrum, origin: f64, k: usize, n: usize) -> C64 {
    if k == n {
        return C64::new(s.period, 0.0);
    }
    let dp = s.values[k] - s.values[n];
    let i = C64::new(0.0, 1.0);
    let hi = (i * dp * (origin + s.period)).exp();
    let lo = (i * dp * origin).exp();
    (hi - lo) / (i * dp)
}

/// Continued-fraction rational approximation with bounded denominator.
pub fn recognize_rational(x: f64, max_denominator: i64, rel_tol: f64) -> Option<Ratio<i64>> {
    if !x.is_finite() {
        return None;
    }
    let tol = rel_tol * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_denominator {
            return None;
        }
        if (h2 as f64 / k2 as f64 - x).abs() <= tol {
            return Some(Ratio::new(h2, k2));
        }
        let frac = y - a as f64;
        if frac == 0.0 {
            return None;
        }
        y = 1.0 / frac;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
    }
    None
}

/// Clock levels `E_i = E_0 + r_i (2 pi / T)` with integer `r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockSpectrum {
    offset: f64,
    unit: f64,
    levels: Vec<Ratio<i64>>,
    ratios: Vec<Ratio<i64>>,
    r: Vec<i64>,
    period: f64,
}

/// Build the clock from exact energies (strictly increasing).
pub fn clock_from_energies(energies: &[Ratio<i64>]) -> Result<ClockSpectrum> {
    if energies.is_empty() {
        return Err(Error::InvalidSpectrum("clock needs at least one level".into()));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpectrum("clock energies must be strictly increasing".into()));
    }
    let e0 = energies[0];
    let levels: Vec<Ratio<i64>> = energies.iter().map(|&e| e - e0).collect();
    let offset = *e0.numer() as f64 / *e0.denom() as f64;
    ClockSpectrum::from_levels(offset, 1.0, levels)
}

impl ClockSpectrum {
    /// `levels` are exact, relative to `offset`, in units of `unit`; `levels[0] == 0`.
    fn from_levels(offset: f64, unit: f64, levels: Vec<Ratio<i64>>) -> Result<Self> {
        if levels.len() == 1 {
            return Ok(ClockSpectrum {
                offset,
                unit,
                levels,
                ratios: vec![Ratio::from_integer(0)],
                r: vec![0],
                period: 2.0 * PI,
            });
        }
        let e1 = levels[1];
        let ratios: Vec<Ratio<i64>> = levels.iter().map(|&e| e / e1).collect();
        let r1 = ratios.iter().fold(1i64, |acc, q| acc.lcm(q.denom()));
        let r: Vec<i64> = ratios
            .iter()
            .map(|q| {
                let v = *q * r1;
                debug_assert!(v.is_integer());
                v.to_integer()
            })
            .collect();
        let e1_phys = unit * (*e1.numer() as f64 / *e1.denom() as f64);
        let period = 2.0 * PI * r1 as f64 / e1_phys;
        Ok(ClockSpectrum { offset, unit, levels, ratios, r, period })
    }

    /// Read float energies (strictly increasing) as rationals in units of the
    /// smallest gap; irrational ratios are rejected.
    pub fn from_floats(energies: &[f64]) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidSpectrum("clock needs at least one level".into()));
        }
        if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpectrum("clock energies must be finite and strictly increasing".into()));
        }
        let e0 = energies[0];
        if energies.len() == 1 {
            return Self::from_levels(e0, 1.0, vec![Ratio::from_integer(0)]);
        }
        let gap = energies.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let mut levels = Vec::with_capacity(energies.len());
        for &e in energies {
            let x = (e - e0) / gap;
            let q = recognize_rational(x, MAX_DENOMINATOR, RATIO_TOL)
                .ok_or(Error::IrrationalRatio { value: x, max_denominator: MAX_DENOMINATOR })?;
            levels.push(q);
        }
        Self::from_levels(e0, gap, levels)
    }

    pub fn d(&self) -> usize {
        self.r.len()
    }

    pub fn ratios(&self) -> &[Ratio<i64>] {
        &self.ratios
    }

    pub fn r(&self) -> &[i64] {
        &self.r
    }

    /// Largest `r_i`.
    pub fn r_max(&self) -> i64 {
        *self.r.iter().max().expect("non-empty")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn base_energy(&self) -> f64 {
        self.offset
    }

    /// `2 pi / T`.
    pub fn quantum(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Exact levels relative to the base energy, in units of [`unit`](Self::unit).
    pub fn exact_levels(&self) -> &[Ratio<i64>] {
        &self.levels
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// `E_i = E_0 + r_i 2 pi / T`.
    pub fn energies(&self) -> Vec<f64> {
        let w = self.quantum();
        self.r.iter().map(|&r| self.offset + r as f64 * w).collect()
    }

    /// Equally spaced levels `r_i = i`.
    pub fn is_ladder(&self) -> bool {
        self.r.iter().enumerate().all(|(i, &r)| r == i as i64)
    }

    /// Smallest number of time points giving an exact identity resolution.
    pub fn default_points(&self) -> usize {
        self.d().max(self.r_max() as usize + 1)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.energies().into_iter().map(Label::Energy).collect()
    }

    /// Discrete time grid over one period starting at `t0`.
    pub fn grid(&self, points: usize, t0: f64) -> Result<FrameGrid> {
        FrameGrid::discrete(points, t0, self.period)
    }
}

fn time_state_raw(c: &ClockSpectrum, g: &FrameGrid, t: f64) -> StateVector {
    let energies = c.energies();
    if g.is_continuous() {
        phase_state(&energies, c.labels(), t, -1.0, 1.0, Normalization::Continuous)
    } else {
        let w = 1.0 / (c.d() as f64).sqrt();
        phase_state(&energies, c.labels(), t, -1.0, w, Normalization::Unit)
    }
}

/// `|t> = (1/sqrt d_C) sum_i e^{-i E_i t} |E_i>` on a discrete grid (t must be a
/// grid point), or the unnormalized continuous form.
pub fn time_state(c: &ClockSpectrum, g: &FrameGrid, t: f64) -> Result<StateVector> {
    if let Some(n) = g.points() {
        if n < c.d() {
            return Err(Error::InvalidGrid(format!("D_C = {n} is smaller than d_C = {}", c.d())));
        }
        g.index_of(t)?;
        Ok(time_state_raw(c, g, t))
    } else {
        Ok(time_state_raw(c, g, g.wrap(t)))
    }
}

/// Time state at grid index `m`.
pub fn time_state_at(c: &ClockSpectrum, g: &FrameGrid, m: usize) -> Result<StateVector> {
    let t = g.value(m)?;
    time_state(c, g, t)
}

/// Max-norm of `(d_C/D_C) sum_m |t_m><t_m| - 1`.
pub fn clock_identity_residual(c: &ClockSpectrum, g: &FrameGrid) -> Result<f64> {
    let n = g.points().ok_or_else(|| Error::InvalidGrid("identity residual needs a discrete grid".into()))?;
    if n < c.d() {
        return Err(Error::InvalidGrid(format!("D_C = {n} is smaller than d_C = {}", c.d())));
    }
    let states: Vec<StateVector> = (0..n).map(|m| time_state_at(c, g, m)).collect::<Result<_>>()?;
    Ok(resolution_residual(&states, c.d() as f64 / n as f64))
}
