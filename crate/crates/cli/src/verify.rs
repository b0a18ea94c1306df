//! Built-in invariant suite, grouped by library module.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use paw_core::frames::{
    clock_from_energies, clock_identity_residual, grid_phase_sum, identity_residual, momentum_spectrum, FrameGrid,
    PhaseConvention, Spectrum,
};
use paw_core::measurements::{
    glm_build, glm_single_prob, gppt_single, gppt_two_time, orthogonal_grids, MeasurementEvent, MemoryLayout,
};
use paw_core::oracle::{bayes_conditional, born_oracle, sector_propagator};
use paw_core::relational::*;
use paw_core::relativistic::{dirac_algebra, dirac_residual, dirac_universe, kg_residual, kg_universe, FrameMode, Sample};
use paw_core::tensor::{LinearOperator, Propagator, StateVector};
use paw_core::universe::{
    oscillator_universe, universe_with, Branch, ClockLayout, ClockMode, Dispersion, GlobalState, MomentumAmplitude,
    OscillatorSpec, QuadratureSpec, UniverseOptions,
};
use paw_core::C64;
use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::build::random_coeffs;
use crate::output::{Check, Status};

pub const MODULES: &[&str] = &["tensor", "frames", "universe", "relational", "measurements", "relativistic"];

/// Deliberate defects for smoke-testing the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Frame bras built with the opposite phase sign.
    PhaseSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub module: &'static str,
    pub check: Check,
}

struct Suite {
    mutation: Mutation,
    seed: u64,
}

type Checks = Vec<Check>;

fn guard(name: &str, r: paw_core::Result<Check>) -> Check {
    r.unwrap_or_else(|e| Check::failed(name, e.to_string()))
}

impl Suite {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1000).wrapping_add(salt))
    }

    fn phase(&self) -> PhaseConvention {
        match self.mutation {
            Mutation::None => PhaseConvention::Standard,
            Mutation::PhaseSign => PhaseConvention::PlaneWave,
        }
    }

    /// `d` system levels from `k0`, rod partners plus `extra`, masses 2 and 1.
    fn free(&self, rng: &mut ChaCha8Rng, d: usize, extra: usize, k0: i32, layout: ClockLayout) -> paw_core::Result<GlobalState> {
        let sys = momentum_spectrum(d, k0 as f64, 2.0 * PI)?;
        let rod = momentum_spectrum(d + extra, -((k0 + d as i32 - 1) as f64), 2.0 * PI)?;
        let c = random_coeffs(rng, d);
        let opts = UniverseOptions { clock_layout: layout, phase: self.phase(), ..Default::default() };
        universe_with(&[(rod, sys)], Dispersion::Free { mass: 2.0 }, Dispersion::Free { mass: 1.0 }, &c, opts)
    }

    fn sym3_axes(&self, n: usize) -> paw_core::Result<Vec<(Spectrum, Spectrum)>> {
        let s = momentum_spectrum(3, -1.0, 2.0 * PI)?;
        Ok(vec![(s.clone(), s); n])
    }

    fn tensor(&self) -> Checks {
        let mut rng = self.rng(1);
        let n = 6;
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) });
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        let mut run = || -> paw_core::Result<Checks> {
            let op = LinearOperator::full(h.clone(), vec![2, 3])?;
            let p = Propagator::new(&op)?;
            let u = p.unitary(0.7);
            let unit = (&u * u.adjoint() - DMatrix::<C64>::identity(n, n)).norm();
            let v = StateVector::from_amplitudes(random_coeffs(&mut rng, n), vec![2, 3])?;
            let applied = p.apply(0.7, &v)?;
            let dense = &u * nalgebra::DVector::from_vec(v.amplitudes().to_vec());
            let diff = applied.amplitudes().iter().zip(dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            Ok(vec![Check::at_most("propagator_unitarity", unit, 1e-12), Check::at_most("propagator_apply", diff, 1e-12)])
        };
        run().unwrap_or_else(|e| vec![Check::failed("propagator", e.to_string())])
    }

    fn frames(&self) -> Checks {
        let run = || -> paw_core::Result<Checks> {
            let mut id: f64 = 0.0;
            let mut sums: f64 = 0.0;
            for d in 1..=4 {
                for n in d..=12 {
                    let s = momentum_spectrum(d, -0.5 * d as f64, 3.0)?;
                    let g = FrameGrid::discrete(n, 0.2, 3.0)?;
                    id = id.max(identity_residual(&s, &g)?);
                    for k in 0..d {
                        for m in 0..d {
                            let want = if k == m { n as f64 } else { 0.0 };
                            sums = sums.max((grid_phase_sum(&s, &g, k, m)? - C64::new(want, 0.0)).norm());
                        }
                    }
                }
            }
            let mut clock: f64 = 0.0;
            for d in 1..=4i64 {
                let c = clock_from_energies(&(0..d).map(|k| Ratio::new(k * (k + 1), 3)).collect::<Vec<_>>())?;
                for n in c.default_points()..c.default_points() + 6 {
                    clock = clock.max(clock_identity_residual(&c, &c.grid(n, 0.0)?)?);
                }
            }
            Ok(vec![
                Check::at_most("identity_resolution", id, 1e-12),
                Check::at_most("clock_identity_resolution", clock, 1e-12),
                Check::at_most("grid_phase_sums", sums, 1e-12),
            ])
        };
        run().unwrap_or_else(|e| vec![Check::failed("frames", e.to_string())])
    }

    fn universe(&self) -> Checks {
        let mut rng = self.rng(3);
        let mut out = Vec::new();
        let constraints = (|| -> paw_core::Result<Check> {
            let mut worst: f64 = 0.0;
            for d in 1..=4 {
                let g = self.free(&mut rng, d, 1, -1, ClockLayout::Levels)?;
                let r = g.report();
                worst = worst.max(r.max_momentum()).max(r.energy.unwrap_or(0.0));
            }
            let axes = self.sym3_axes(3)?;
            let g = universe_with(&axes, Dispersion::Free { mass: 3.0 }, Dispersion::Free { mass: 1.0 }, &random_coeffs(&mut rng, 27), UniverseOptions::default())?;
            worst = worst.max(g.report().max_momentum()).max(g.report().energy.unwrap_or(0.0));
            Ok(Check::at_most("constraint_residuals", worst, 1e-12))
        })();
        out.push(guard("constraint_residuals", constraints));
        match oscillator_universe(&oscillator_spec()) {
            Ok(u) => {
                let r = u.state.report();
                out.push(Check::at_most("oscillator_energy_residual", r.energy.unwrap_or(f64::NAN), 1e-8));
                out.push(Check::skipped(
                    "oscillator_momentum_residual",
                    Some(r.max_momentum()),
                    "momentum and energy constraints do not commute with potentials",
                ));
            }
            Err(e) => out.push(Check::failed("oscillator", e.to_string())),
        }
        out
    }

    fn relational(&self) -> Checks {
        let mut rng = self.rng(4);
        let mut out = Vec::new();
        out.push(guard("bayes_oracle", (|| {
            let mut worst: f64 = 0.0;
            for d in 1..=4 {
                let g = self.free(&mut rng, d, 2, -1, ClockLayout::Levels)?;
                let grids = Grids::discrete(&g, None, d + 2, d + 1)?;
                let nc = grids.clock.map_or(0, |c| c.points().unwrap_or(0));
                for m in 0..nc {
                    for j in 0..d + 2 {
                        for l in 0..d + 1 {
                            let p = conditional_prob_discrete(&g, &grids, &[j], Some(m), &[l])?;
                            let reads = vec![grids.clock_reading(At::Index(m))?, grids.rod_readings(&[At::Index(j)])?[0]];
                            let b = bayes_conditional(&g, &reads, &grids.system_readings(&[At::Index(l)])?)?;
                            worst = worst.max((p - b).abs());
                        }
                    }
                }
            }
            Ok(Check::at_most("bayes_oracle", worst, 1e-12))
        })()));
        out.push(guard("closed_form", (|| {
            let c: Vec<f64> = {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            };
            let cs: Vec<C64> = c.iter().map(|&x| C64::new(x, 0.0)).collect();
            let opts = UniverseOptions { phase: self.phase(), ..Default::default() };
            let g = universe_with(&self.sym3_axes(1)?, Dispersion::Free { mass: 2.0 }, Dispersion::Free { mass: 1.0 }, &cs, opts)?;
            let grids = Grids::discrete(&g, Some(8), 3, 3)?;
            let period = grids.clock.map_or(1.0, |c| c.period());
            let mut worst: f64 = 0.0;
            for m in 0..8 {
                for j in 0..3 {
                    for k in 0..3 {
                        let p = conditional_prob_discrete(&g, &grids, &[j], Some(m), &[k])?;
                        let want = closed_form_3level([c[0], c[1], c[2]], 2.0 * PI, 2.0, 1.0, period * m as f64 / 8.0, 2.0 * PI * (k as f64 - j as f64) / 3.0)?;
                        worst = worst.max((p - want).abs());
                    }
                }
            }
            Ok(Check::at_most("closed_form", worst, 1e-12))
        })()));
        out.push(guard("covariance", (|| {
            let mut worst: f64 = 0.0;
            for d in 2..=4 {
                let g = self.free(&mut rng, d, 0, -1, ClockLayout::Levels)?;
                let grids = Grids::continuous(&g)?;
                let x = |v| grids.rod_readings(&[At::Value(v)]).map(|r| r[0]);
                let t = |v| grids.clock_reading(At::Value(v));
                worst = worst.max(translation_residual(&g, &[t(0.3)?, x(0.1)?], &[t(0.3)?, x(-2.2)?])?);
                worst = worst.max(evolution_residual(&g, &[t(0.1)?], &[t(2.9)?])?);
            }
            let g = universe_with(&self.sym3_axes(3)?, Dispersion::Free { mass: 3.0 }, Dispersion::Free { mass: 1.0 }, &random_coeffs(&mut rng, 27), UniverseOptions::default())?;
            let grids = Grids::continuous(&g)?;
            let a = grids.rod_readings(&[At::Value(0.0), At::Value(0.5), At::Value(1.0)])?;
            let b = grids.rod_readings(&[At::Value(1.5), At::Value(-0.5), At::Value(2.0)])?;
            worst = worst.max(translation_residual(&g, &a, &b)?);
            Ok(Check::at_most("covariance", worst, 1e-12))
        })()));
        out.push(guard("schrodinger_slope", (|| {
            let g = self.free(&mut rng, 3, 0, -1, ClockLayout::Levels)?;
            let hs = [0.04, 0.02, 0.01, 0.005];
            let r: Vec<f64> = hs.iter().map(|&h| schrodinger_fd_residual(&g, 0.5, h)).collect::<paw_core::Result<_>>()?;
            Ok(Check::at_most("schrodinger_slope", (loglog_slope(&hs, &r) - 2.0).abs(), 0.1))
        })()));
        out.push(guard("speed_limit", (|| {
            let mut bad = 0;
            for k in 0..10 {
                let g = self.free(&mut rng, 1 + k % 4, 0, -1, ClockLayout::Levels)?;
                if !speed_limit_report(&g)?.satisfied {
                    bad += 1;
                }
            }
            Ok(Check::holds("speed_limit", bad == 0, (bad > 0).then(|| format!("{bad} violations"))))
        })()));
        out.push(guard("resolution", (|| {
            let mut bad = 0;
            for k in 0..10 {
                let g = self.free(&mut rng, 2 + k % 3, 0, -1, ClockLayout::Levels)?;
                if !spatial_resolution(&g, 0, 0.5)?.satisfied {
                    bad += 1;
                }
            }
            Ok(Check::holds("resolution", bad == 0, (bad > 0).then(|| format!("{bad} violations"))))
        })()));
        out.push(guard("factorization_3plus1", (|| {
            let s = momentum_spectrum(2, 0.0, 2.0 * PI)?;
            let r = momentum_spectrum(2, -1.0, 2.0 * PI)?;
            let per: Vec<Vec<C64>> = (0..3).map(|_| random_coeffs(&mut rng, 2)).collect();
            let mut prod = Vec::new();
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        prod.push(per[0][a] * per[1][b] * per[2][c]);
                    }
                }
            }
            let (dr, ds) = (Dispersion::Free { mass: 2.0 }, Dispersion::Free { mass: 1.0 });
            let g3 = universe_with(&vec![(r.clone(), s.clone()); 3], dr, ds, &prod, UniverseOptions::default())?;
            let (x, y, t) = ([0.2, -0.4, 1.0], [1.1, 0.3, -0.8], 0.6);
            let p3 = conditional_3plus1(&g3, None, x, Some(t), y)?;
            let mut p1 = 1.0;
            for a in 0..3 {
                let g1 = universe_with(&[(r.clone(), s.clone())], dr, ds, &per[a], UniverseOptions::default())?;
                p1 *= conditional_density(&g1, &[x[a]], Some(t), &[y[a]])?;
            }
            Ok(Check::at_most("factorization_3plus1", (p3 - p1).abs(), 1e-12))
        })()));
        out
    }

    fn measurements(&self) -> Checks {
        let mut rng = self.rng(5);
        let mut out = Vec::new();
        out.push(guard("gppt_theta_average", (|| {
            let g = self.free(&mut rng, 3, 0, 1, ClockLayout::Ladder)?;
            let grids = orthogonal_grids(&g)?;
            let mut worst: f64 = 0.0;
            for m in 0..grids.clock.map_or(0, |c| c.points().unwrap_or(0)) {
                for j in 0..3 {
                    for l in 0..3 {
                        let r = gppt_single(&g, &grids, &MeasurementEvent::new(m, j, l))?;
                        worst = worst.max((r.theta_average.unwrap_or(f64::NAN) - r.closed_form).abs());
                    }
                }
            }
            Ok(Check::at_most("gppt_theta_average", worst, 1e-10))
        })()));
        out.push(guard("two_time_propagator", (|| {
            let g = self.free(&mut rng, 2, 0, 1, ClockLayout::PaddedLadder(5))?;
            let grids = orthogonal_grids(&g)?;
            let h = glm_build(&g, &MemoryLayout::at(&[0, 2])?)?;
            let dt = grids.clock.map_or(0.0, |c| c.period() * 2.0 / 5.0);
            let mut worst: f64 = 0.0;
            for k in 0..16usize {
                let (j1, l1, j2, l2) = (k & 1, (k >> 1) & 1, (k >> 2) & 1, (k >> 3) & 1);
                let f = MeasurementEvent::new(0, j1, l1);
                let s = MeasurementEvent::new(2, j2, l2);
                let x1 = grids.rod_readings(&[At::Index(j1)])?[0];
                let y1 = grids.system_readings(&[At::Index(l1)])?[0];
                let x2 = grids.rod_readings(&[At::Index(j2)])?[0];
                let y2 = grids.system_readings(&[At::Index(l2)])?[0];
                let o = sector_propagator(&g, (&x1, &y1), (&x2, &y2), dt)?;
                worst = worst.max((gppt_two_time(&g, &grids, &f, &s)?.joint - o).abs());
                worst = worst.max((paw_core::measurements::glm_two_time_prob(&h, &f, &s)?.joint - o).abs());
            }
            Ok(Check::at_most("two_time_propagator", worst, 1e-10))
        })()));
        out.push(guard("glm_born", (|| {
            let g = self.free(&mut rng, 2, 0, 1, ClockLayout::Ladder)?;
            let grids = orthogonal_grids(&g)?;
            let h = glm_build(&g, &MemoryLayout::at(&[1])?)?;
            let clock = grids.clock.ok_or_else(|| paw_core::Error::Unsupported("no clock".into()))?;
            let t0 = grids.clock_reading(At::Index(0))?;
            let mut worst: f64 = 0.0;
            for j in 0..2 {
                for l in 0..2 {
                    let p = glm_single_prob(&h, 1, j, l)?.joint;
                    let x = grids.rod_readings(&[At::Index(j)])?[0];
                    let y = grids.system_readings(&[At::Index(l)])?[0];
                    let born = born_oracle(&g, &t0, clock.value(1)?, &x, &y)?;
                    let gp = gppt_single(&g, &grids, &MeasurementEvent::new(1, j, l))?.closed_form;
                    worst = worst.max((p - born).abs()).max((p - gp).abs());
                }
            }
            Ok(Check::at_most("glm_born", worst, 1e-10))
        })()));
        out
    }

    fn relativistic(&self) -> Checks {
        let mut rng = self.rng(6);
        let mut out = Vec::new();
        let alg = dirac_algebra();
        let id = DMatrix::<C64>::identity(4, 4);
        let mut anti: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { &id * C64::new(2.0, 0.0) } else { id.scale(0.0) };
                anti = anti.max((&alg.alpha[i] * &alg.alpha[j] + &alg.alpha[j] * &alg.alpha[i] - want).norm());
            }
            anti = anti.max((&alg.alpha[i] * &alg.beta + &alg.beta * &alg.alpha[i]).norm());
        }
        anti = anti.max((&alg.beta * &alg.beta - &id).norm());
        out.push(Check::at_most("dirac_algebra", anti, 1e-14));
        let p = [0.4, -1.3, 0.9];
        let e = (p.iter().map(|x| x * x).sum::<f64>() + 1.0).sqrt();
        let mut ev: Vec<f64> = alg.hamiltonian(&p, 1.0).symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let spec = ev.iter().zip([-e, -e, e, e]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(Check::at_most("dirac_spectrum", spec, 1e-12));
        let axis = || -> paw_core::Result<(Spectrum, Spectrum)> {
            Ok((momentum_spectrum(2, -4.0, PI / 2.0)?, momentum_spectrum(2, 0.0, PI / 2.0)?))
        };
        let samples: Vec<Sample> = (0..3).map(|k| Sample { t: 0.1 + 0.2 * k as f64, x: vec![0.05 + 0.1 * k as f64] }).collect();
        let hs = [0.02, 0.01, 0.005, 0.0025];
        out.push(guard("kg_slope", (|| {
            let opts = UniverseOptions { clock_mode: ClockMode::ContinuousOnly, ..Default::default() };
            let g = kg_universe(&[axis()?], 3.0, Branch::Both, &random_coeffs(&mut rng, 4), FrameMode::Approximate, opts)?;
            let dev: Vec<f64> = hs.iter().map(|&h| kg_residual(&g, &samples, h).map(|r| r.deviation)).collect::<paw_core::Result<_>>()?;
            Ok(Check::at_most("kg_slope", (loglog_slope(&hs, &dev) - 2.0).abs(), 0.1))
        })()));
        out.push(guard("dirac_slope", (|| {
            let g = dirac_universe(&[axis()?], 3.0, &random_coeffs(&mut rng, 8), FrameMode::Approximate, UniverseOptions::default())?;
            let dev: Vec<f64> = hs.iter().map(|&h| dirac_residual(&g, &samples, h).map(|r| r.deviation)).collect::<paw_core::Result<_>>()?;
            Ok(Check::at_most("dirac_slope", (loglog_slope(&hs, &dev) - 2.0).abs(), 0.1))
        })()));
        out
    }
}

fn oscillator_spec() -> OscillatorSpec {
    OscillatorSpec {
        rod_mass: 2.0,
        sys_mass: 1.0,
        rod_frequency: 1.0,
        sys_frequency: 2.0,
        clock_coeffs: None,
        amplitude: MomentumAmplitude::Gaussian { center: 0.0, sigma: 0.7 },
        quadrature: QuadratureSpec::default(),
        truncation: 12,
    }
}

/// Runs the suites whose module name contains `filter` (all when `None`).
pub fn verify(filter: Option<&str>, mutation: Mutation) -> Vec<VerifyResult> {
    let suite = Suite { mutation, seed: 20_240_601 };
    let mut out = Vec::new();
    for &m in MODULES {
        if filter.is_some_and(|f| !m.contains(f)) {
            continue;
        }
        let checks = match m {
            "tensor" => suite.tensor(),
            "frames" => suite.frames(),
            "universe" => suite.universe(),
            "relational" => suite.relational(),
            "measurements" => suite.measurements(),
            "relativistic" => suite.relativistic(),
            _ => unreachable!(),
        };
        out.extend(checks.into_iter().map(|check| VerifyResult { module: m, check }));
    }
    out
}

pub fn failures(results: &[VerifyResult]) -> Vec<&VerifyResult> {
    results.iter().filter(|r| r.check.status == Status::Fail).collect()
}

pub fn line(r: &VerifyResult) -> String {
    let mut s = format!("{} {}::{}", r.check.status.label(), r.module, r.check.name);
    if let Some(v) = r.check.value {
        s.push_str(&format!(" value={v:e}"));
    }
    if let Some(t) = r.check.tolerance {
        s.push_str(&format!(" tol={t:e}"));
    }
    if let Some(d) = &r.check.detail {
        s.push_str(&format!(" ({d})"));
    }
    s
}

