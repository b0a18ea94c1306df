//! One test per acceptance criterion; each prints a PASS/FAIL line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use paw_cli::build::random_coeffs;
use paw_core::frames::*;
use paw_core::measurements::*;
use paw_core::oracle::{bayes_conditional, sector_propagator};
use paw_core::relational::*;
use paw_core::relativistic::*;
use paw_core::tensor::Label;
use paw_core::universe::*;
use paw_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, what: &str, ok: bool, detail: String, start: Instant) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{id} {tag} {what}: {detail} [{:.2}s]", start.elapsed().as_secs_f64());
    ok
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn real_unit(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn sym3(l: f64) -> Spectrum {
    momentum_spectrum(3, -2.0 * PI / l, l).unwrap()
}

fn free(rod: &Spectrum, sys: &Spectrum, masses: (f64, f64), c: &[C64], opts: UniverseOptions) -> GlobalState {
    universe_with(&[(rod.clone(), sys.clone())], Dispersion::Free { mass: masses.0 }, Dispersion::Free { mass: masses.1 }, c, opts)
        .unwrap()
}

/// `d_S` levels from `k0`, rod partners plus `extra` levels below.
fn random_free(r: &mut ChaCha8Rng, ds: usize, extra: usize, k0: i32, l: f64, opts: UniverseOptions) -> GlobalState {
    let step = 2.0 * PI / l;
    let sys = momentum_spectrum(ds, k0 as f64 * step, l).unwrap();
    let rod = momentum_spectrum(ds + extra, -((k0 + ds as i32 - 1) as f64 + extra as f64) * step, l).unwrap();
    let masses: (f64, f64) = (r.gen_range(2..=6) as f64, 1.0);
    free(&rod, &sys, masses, &random_coeffs(r, ds), opts)
}

#[test]
fn crit_01_three_level_closed_form() {
    let start = Instant::now();
    let mut r = rng(101);
    let l = 2.0 * PI;
    let (big_m, m) = (2.0, 1.0);
    let (mut disc, mut exact, mut cont): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let c = real_unit(&mut r, 3);
        let c = [c[0], c[1], c[2]];
        let cs: Vec<C64> = c.iter().map(|&x| C64::new(x, 0.0)).collect();
        let g = free(&sym3(l), &sym3(l), (big_m, m), &cs, UniverseOptions::default());
        let period = g.clock_spectrum().unwrap().period();
        // 64 x 64 (t_m, delta) grid: D_C = D_S = 64, rod at x_0 = 0
        let grids = Grids::discrete(&g, Some(64), 64, 64).unwrap();
        for mi in 0..64 {
            let t = period * mi as f64 / 64.0;
            for li in 0..64 {
                let p = conditional_prob_discrete(&g, &grids, &[0], Some(mi), &[li]).unwrap();
                let delta = l * li as f64 / 64.0;
                let want = closed_form_3level(c, l, big_m, m, t, delta).unwrap();
                disc = disc.max((p * 64.0 / 3.0 - want).abs());
                let pc = conditional_density(&g, &[0.3], Some(t), &[0.3 + delta]).unwrap();
                cont = cont.max((pc - closed_form_3level_density(c, l, big_m, m, t, delta).unwrap()).abs());
            }
        }
        // D = d = 3 on the spatial grids
        let grids = Grids::discrete(&g, Some(64), 3, 3).unwrap();
        for mi in 0..64 {
            for j in 0..3 {
                for k in 0..3 {
                    let p = conditional_prob_discrete(&g, &grids, &[j], Some(mi), &[k]).unwrap();
                    let want = closed_form_3level(c, l, big_m, m, period * mi as f64 / 64.0, l * (k as f64 - j as f64) / 3.0).unwrap();
                    exact = exact.max((p - want).abs());
                }
            }
        }
    }
    let ok = disc <= 1e-12 && exact <= 1e-12 && cont <= 1e-12;
    assert!(verdict(
        "crit_01",
        "three-level closed form",
        ok,
        format!("grid64 (x D_S/d_S) {disc:e}, D=d {exact:e}, density {cont:e}"),
        start
    ));
}

#[test]
fn crit_02_momentum_eigenstate_flatness() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (ds, ns) in [(1usize, 5usize), (3, 7), (4, 4)] {
        for k in 0..ds {
            let mut c = vec![C64::new(0.0, 0.0); ds];
            c[k] = C64::new(0.0, 1.0);
            let l = 3.0;
            let sys = momentum_spectrum(ds, 0.0, l).unwrap();
            let rod = momentum_spectrum(ds, -((ds - 1) as f64) * 2.0 * PI / l, l).unwrap();
            let g = free(&rod, &sys, (2.0, 1.0), &c, UniverseOptions::default());
            let grids = Grids::discrete(&g, None, ds + 1, ns).unwrap();
            let nc = grids.clock.unwrap().points().unwrap();
            for m in 0..nc {
                for j in 0..ds + 1 {
                    for y in 0..ns {
                        let p = conditional_prob_discrete(&g, &grids, &[j], Some(m), &[y]).unwrap();
                        worst = worst.max((p - 1.0 / ns as f64).abs());
                    }
                }
            }
            for (x, t, y) in [(0.0, 0.0, 0.5), (1.3, 2.2, -0.4), (-2.0, 7.5, 2.9)] {
                worst = worst.max((conditional_density(&g, &[x], Some(t), &[y]).unwrap() - 1.0 / l).abs());
            }
            let m0 = momentum_constrained_state(&rod, &sys, &c).unwrap();
            let grids = Grids::discrete(&m0, None, ds, ns).unwrap();
            for y in 0..ns {
                worst = worst.max((conditional_prob_discrete(&m0, &grids, &[0], None, &[y]).unwrap() - 1.0 / ns as f64).abs());
            }
        }
    }
    assert!(verdict("crit_02", "momentum-eigenstate flatness", worst <= 1e-12, format!("max |P - 1/D| {worst:e}"), start));
}

#[test]
fn crit_03_bayes_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(303);
    let mut worst: f64 = 0.0;
    for u in 0..50 {
        let ds = 1 + u % 4;
        let extra = r.gen_range(0..=(6 - ds).min(2));
        let l = r.gen_range(2.0..8.0);
        let k0 = r.gen_range(-2..=1);
        let g = random_free(&mut r, ds, extra, k0, l, UniverseOptions::default());
        let dr = ds + extra;
        let grids = Grids::discrete(&g, None, dr + 1, ds + 1).unwrap();
        let cont = Grids::continuous(&g).unwrap();
        let nc = grids.clock.unwrap().points().unwrap();
        for m in 0..nc {
            for j in 0..dr + 1 {
                for y in 0..ds + 1 {
                    let p = conditional_prob_discrete(&g, &grids, &[j], Some(m), &[y]).unwrap();
                    let reads = vec![grids.clock_reading(At::Index(m)).unwrap(), grids.rod_readings(&[At::Index(j)]).unwrap()[0]];
                    let b = bayes_conditional(&g, &reads, &grids.system_readings(&[At::Index(y)]).unwrap()).unwrap();
                    worst = worst.max((p - b).abs());
                }
            }
        }
        for j in 0..dr + 1 {
            for y in 0..ds + 1 {
                let p = conditional_prob_discrete(&g, &grids, &[j], None, &[y]).unwrap();
                let reads = grids.rod_readings(&[At::Index(j)]).unwrap();
                let b = bayes_conditional(&g, &reads, &grids.system_readings(&[At::Index(y)]).unwrap()).unwrap();
                worst = worst.max((p - b).abs());
            }
        }
        for _ in 0..4 {
            let (x, t, y) = (r.gen_range(-l..l), r.gen_range(0.0..10.0), r.gen_range(-l..l));
            let p = conditional_density(&g, &[x], Some(t), &[y]).unwrap();
            let reads = vec![cont.clock_reading(At::Value(t)).unwrap(), cont.rod_readings(&[At::Value(x)]).unwrap()[0]];
            let b = bayes_conditional(&g, &reads, &cont.system_readings(&[At::Value(y)]).unwrap()).unwrap();
            worst = worst.max((p - b).abs());
            let p = conditional_density(&g, &[x], None, &[y]).unwrap();
            let b = bayes_conditional(&g, &reads[1..], &cont.system_readings(&[At::Value(y)]).unwrap()).unwrap();
            worst = worst.max((p - b).abs());
        }
    }
    assert!(verdict("crit_03", "Bayes-oracle equivalence", worst <= 1e-12, format!("50 universes, max diff {worst:e}"), start));
}

#[test]
fn crit_04_identity_resolutions() {
    let start = Instant::now();
    let (mut mom, mut clock, mut sums): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for d in 1..=8usize {
        let s = momentum_spectrum(d, -1.2, 2.5).unwrap();
        let ladder = clock_from_energies(&(0..d as i64).map(|k| Ratio::new(2 * k + 1, 3)).collect::<Vec<_>>()).unwrap();
        for n in d..=24 {
            let g = FrameGrid::discrete(n, 0.4, 2.5).unwrap();
            mom = mom.max(identity_residual(&s, &g).unwrap());
            clock = clock.max(clock_identity_residual(&ladder, &ladder.grid(n, 0.0).unwrap()).unwrap());
            for k in 0..d {
                for m in 0..d {
                    let want = if k == m { n as f64 } else { 0.0 };
                    sums = sums.max((grid_phase_sum(&s, &g, k, m).unwrap() - C64::new(want, 0.0)).norm());
                    let want = if k == m { 2.5 } else { 0.0 };
                    sums = sums.max((period_integral(&s, 0.4, k, m) - C64::new(want, 0.0)).norm());
                }
            }
        }
        // uneven rational spacing needs D_C > r_max
        let uneven = clock_from_energies(&(0..d as i64).map(|k| Ratio::new(k * k, 2)).collect::<Vec<_>>()).unwrap();
        for n in uneven.default_points()..=24usize.max(uneven.default_points()) {
            clock = clock.max(clock_identity_residual(&uneven, &uneven.grid(n, 0.0).unwrap()).unwrap());
        }
    }
    let ok = mom <= 1e-12 && clock <= 1e-12 && sums <= 1e-12;
    assert!(verdict("crit_04", "identity resolutions", ok, format!("momentum {mom:e}, clock {clock:e}, sums {sums:e}"), start));
}

#[test]
fn crit_05_covariance() {
    let start = Instant::now();
    let mut r = rng(505);
    let (mut tr, mut ev): (f64, f64) = (0.0, 0.0);
    for u in 0..50 {
        if u % 5 == 4 {
            let l = 2.0 * PI;
            let s = momentum_spectrum(2, 0.0, l).unwrap();
            let rod = momentum_spectrum(2, -1.0, l).unwrap();
            let axes = vec![(rod, s); 3];
            let g = universe_with(&axes, Dispersion::Free { mass: 3.0 }, Dispersion::Free { mass: 1.0 }, &random_coeffs(&mut r, 8), UniverseOptions::default()).unwrap();
            let grids = Grids::continuous(&g).unwrap();
            let a: Vec<At> = (0..3).map(|_| At::Value(r.gen_range(-3.0..3.0))).collect();
            let b: Vec<At> = (0..3).map(|_| At::Value(r.gen_range(-3.0..3.0))).collect();
            let t = grids.clock_reading(At::Value(r.gen_range(0.0..5.0))).unwrap();
            let mut ra = vec![t];
            ra.extend(grids.rod_readings(&a).unwrap());
            let mut rb = vec![t];
            rb.extend(grids.rod_readings(&b).unwrap());
            tr = tr.max(translation_residual(&g, &ra, &rb).unwrap());
            let t2 = grids.clock_reading(At::Value(r.gen_range(0.0..5.0))).unwrap();
            ev = ev.max(evolution_residual(&g, &[t], &[t2]).unwrap());
            continue;
        }
        let ds = 1 + u % 4;
        let (k0, l) = (r.gen_range(-2..=1), r.gen_range(2.0..8.0));
        let g = random_free(&mut r, ds, u % 3, k0, l, UniverseOptions::default());
        let grids = Grids::continuous(&g).unwrap();
        let x = |v: f64| grids.rod_readings(&[At::Value(v)]).unwrap()[0];
        let t = |v: f64| grids.clock_reading(At::Value(v)).unwrap();
        let (xa, xb, ta, tb) = (r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(0.0..9.0), r.gen_range(0.0..9.0));
        tr = tr.max(translation_residual(&g, &[x(xa)], &[x(xb)]).unwrap());
        tr = tr.max(translation_residual(&g, &[t(ta), x(xa)], &[t(ta), x(xb)]).unwrap());
        ev = ev.max(evolution_residual(&g, &[t(ta)], &[t(tb)]).unwrap());
    }
    let g = random_free(&mut r, 3, 0, -1, 2.0 * PI, UniverseOptions::default());
    let hs = [0.04, 0.02, 0.01, 0.005];
    let res: Vec<f64> = hs.iter().map(|&h| schrodinger_fd_residual(&g, 0.9, h).unwrap()).collect();
    let slope = loglog_slope(&hs, &res);
    let ok = tr <= 1e-12 && ev <= 1e-12 && (slope - 2.0).abs() <= 0.1;
    assert!(verdict("crit_05", "covariance", ok, format!("translation {tr:e}, evolution {ev:e}, FD slope {slope:.4}"), start));
}

#[test]
fn crit_06_two_time_propagator() {
    let start = Instant::now();
    let mut r = rng(606);
    let (mut worst, mut theta): (f64, f64) = (0.0, 0.0);
    for d in [2usize, 3] {
        let sys = momentum_spectrum(d, 1.0, 2.0 * PI).unwrap();
        let rod = momentum_spectrum(d, -(d as f64), 2.0 * PI).unwrap();
        let opts = UniverseOptions { clock_layout: ClockLayout::PaddedLadder(9), ..Default::default() };
        let g = free(&rod, &sys, (2.0, 1.0), &random_coeffs(&mut r, d), opts);
        let grids = orthogonal_grids(&g).unwrap();
        let clock = grids.clock.unwrap();
        let ev = |m, j, l| MeasurementEvent::new(m, j, l);
        for gap in 1..=8usize {
            let h = glm_build(&g, &MemoryLayout::at(&[0, gap]).unwrap()).unwrap();
            let dt = clock.value(gap).unwrap() - clock.value(0).unwrap();
            for j1 in 0..d {
                for l1 in 0..d {
                    for j2 in 0..d {
                        for l2 in 0..d {
                            let x1 = grids.rod_readings(&[At::Index(j1)]).unwrap()[0];
                            let y1 = grids.system_readings(&[At::Index(l1)]).unwrap()[0];
                            let x2 = grids.rod_readings(&[At::Index(j2)]).unwrap()[0];
                            let y2 = grids.system_readings(&[At::Index(l2)]).unwrap()[0];
                            let o = sector_propagator(&g, (&x1, &y1), (&x2, &y2), dt).unwrap();
                            let gp = gppt_two_time(&g, &grids, &ev(0, j1, l1), &ev(gap, j2, l2)).unwrap();
                            let gl = glm_two_time_prob(&h, &ev(0, j1, l1), &ev(gap, j2, l2)).unwrap();
                            worst = worst.max((gp.joint - o).abs()).max((gl.joint - o).abs());
                        }
                    }
                }
            }
        }
        for m in 0..9 {
            for j in 0..d {
                for l in 0..d {
                    let s = gppt_single(&g, &grids, &ev(m, j, l)).unwrap();
                    theta = theta.max((s.theta_average.unwrap() - s.closed_form).abs());
                }
            }
        }
    }
    let ok = worst <= 1e-10 && theta <= 1e-10;
    assert!(verdict("crit_06", "two-time propagator", ok, format!("GPPT/GLM vs propagator {worst:e}, theta average {theta:e}"), start));
}

#[test]
fn crit_07_speed_limit() {
    let start = Instant::now();
    let mut r = rng(707);
    let mut violations = 0;
    let mut reached = 0;
    for u in 0..100 {
        let k0 = r.gen_range(-2..=1);
        let g = random_free(&mut r, 1 + u % 4, 0, k0, 2.0 * PI, UniverseOptions::default());
        let s = speed_limit_report(&g).unwrap();
        if !s.satisfied {
            violations += 1;
        }
        if s.t_orth.is_some() {
            reached += 1;
        }
    }
    // two equally weighted levels, energies 0 and eps
    let sys = momentum_spectrum(2, 0.0, 2.0 * PI).unwrap();
    let rod = momentum_spectrum(2, -1.0, 2.0 * PI).unwrap();
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let g = free(&rod, &sys, (2.0, 1.0), &[h, h], UniverseOptions::default());
    let s = speed_limit_report(&g).unwrap();
    let eq = (s.t_orth.unwrap() - s.bound).abs();
    let ok = violations == 0 && eq <= 1e-9;
    assert!(verdict(
        "crit_07",
        "speed limit",
        ok,
        format!("{violations} violations in 100 ({reached} reach orthogonality), two-level |t_orth - bound| {eq:e}"),
        start
    ));
}

#[test]
fn crit_08_uncertainty() {
    let start = Instant::now();
    let mut r = rng(808);
    let mut least = f64::INFINITY;
    let mut violations = 0;
    for u in 0..100 {
        let ds = 2 + u % 3;
        let k0 = r.gen_range(-2..=1);
        let g = random_free(&mut r, ds, 0, k0, 2.0 * PI, UniverseOptions::default());
        let res = spatial_resolution(&g, 0, 0.5).unwrap();
        if !res.satisfied {
            violations += 1;
        }
        least = least.min(res.product);
    }
    // |f(dx)| = |cos(k dx / 2)| hits 1/2 at dx = 2 pi / 3k
    let sys = momentum_spectrum(2, 0.0, PI).unwrap();
    let rod = momentum_spectrum(2, -2.0, PI).unwrap();
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let g = free(&rod, &sys, (2.0, 1.0), &[h, h], UniverseOptions::default());
    let res = spatial_resolution(&g, 0, 0.5).unwrap();
    let err = (res.delta_x.unwrap() - 2.0 * PI / 6.0).abs();
    let ok = violations == 0 && err <= 1e-9 && RESOLUTION_KAPPA == 0.5;
    assert!(verdict(
        "crit_08",
        "uncertainty diagnostic",
        ok,
        format!("{violations} violations in 100, min product {least:.4}, two-mode crossing error {err:e}"),
        start
    ));
}

#[test]
fn crit_09_oscillator_universe() {
    let start = Instant::now();
    let spec = OscillatorSpec {
        rod_mass: 2.0,
        sys_mass: 1.0,
        rod_frequency: 1.0,
        sys_frequency: 2.0,
        clock_coeffs: None,
        amplitude: MomentumAmplitude::Gaussian { center: 0.0, sigma: 0.7 },
        quadrature: QuadratureSpec { half_width_sigmas: 8.0, points: 257 },
        truncation: 12,
    };
    let u = oscillator_universe(&spec).unwrap();
    let g = &u.state;
    let rep = g.report();
    let energy = rep.energy.unwrap();
    let momentum = rep.max_momentum();
    let mut density: f64 = 0.0;
    for (x, t) in [(0.0, 0.0), (0.5, 1.1), (-1.2, 3.7)] {
        density = density.max((density_distribution(g, &[x], Some(t)).unwrap().total - 1.0).abs());
    }
    // dense diagonal evolution of the truncated levels
    let grids = Grids::continuous(g).unwrap();
    let mut evolution: f64 = 0.0;
    for (ta, tb) in [(0.0, 0.8), (0.4, 6.3)] {
        let a = relative_state(g, &[grids.clock_reading(At::Value(ta)).unwrap()]).unwrap();
        let b = relative_state(g, &[grids.clock_reading(At::Value(tb)).unwrap()]).unwrap();
        let level = |role| -> Vec<f64> {
            g.factor(role).unwrap().labels.iter().map(|l| if let Label::Level { energy, .. } = l { *energy } else { f64::NAN }).collect()
        };
        let (er, es) = (level(Role::Rod(0)), level(Role::System(0)));
        let n = er.len() * es.len();
        let mut u_mat = DMatrix::<C64>::zeros(n, n);
        for i in 0..er.len() {
            for k in 0..es.len() {
                u_mat[(i * es.len() + k, i * es.len() + k)] = C64::from_polar(1.0, -(er[i] + es[k]) * (tb - ta));
            }
        }
        let moved = &u_mat * DVector::from_vec(a.vector.amplitudes().to_vec());
        let diff = moved.iter().zip(b.vector.amplitudes()).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        evolution = evolution.max(diff);
    }
    let parts = [
        ("energy residual", energy, 1e-8),
        ("momentum residual", momentum, 1e-8),
        ("density integral", density, 1e-6),
        ("evolution vs dense", evolution, 1e-8),
    ];
    let ok = parts.iter().all(|(_, v, tol)| v <= tol);
    let detail: Vec<String> =
        parts.iter().map(|(n, v, tol)| format!("{n} {v:e} ({})", if v <= tol { "ok" } else { "over tolerance" })).collect();
    assert!(verdict("crit_09", "oscillator universe", ok, detail.join(", "), start));
}

#[test]
fn crit_10_three_plus_one_and_relativistic() {
    let start = Instant::now();
    let mut r = rng(1010);
    let l = 2.0 * PI;
    // separable 3+1
    let cs: Vec<Vec<f64>> = (0..3).map(|_| real_unit(&mut r, 3)).collect();
    let mut prod = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                prod.push(C64::new(cs[0][a] * cs[1][b] * cs[2][c], 0.0));
            }
        }
    }
    let s = sym3(l);
    let g3 = universe_3plus1(&[(s.clone(), s.clone()), (s.clone(), s.clone()), (s.clone(), s.clone())], Dispersion::Free { mass: 2.0 }, Dispersion::Free { mass: 1.0 }, &prod).unwrap();
    let mut fact: f64 = 0.0;
    for k in 0..10 {
        let x = [0.1 * k as f64, -0.3, 1.0 + 0.2 * k as f64];
        let y = [1.7, 0.05 * k as f64, -0.9];
        let t = 0.37 * k as f64;
        let p3 = conditional_3plus1(&g3, None, x, Some(t), y).unwrap();
        let p1: f64 = (0..3).map(|a| closed_form_3level_density([cs[a][0], cs[a][1], cs[a][2]], l, 2.0, 1.0, t, y[a] - x[a]).unwrap()).product();
        fact = fact.max((p3 - p1).abs());
    }
    // relativistic finite differences
    let axis = || (momentum_spectrum(2, -4.0, PI / 2.0).unwrap(), momentum_spectrum(2, 0.0, PI / 2.0).unwrap());
    let samples: Vec<Sample> = (0..3).map(|k| Sample { t: 0.1 + 0.2 * k as f64, x: vec![0.05 + 0.1 * k as f64] }).collect();
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let cont = UniverseOptions { clock_mode: ClockMode::ContinuousOnly, ..Default::default() };
    let kg = kg_universe(&[axis()], 3.0, Branch::Both, &random_coeffs(&mut r, 4), FrameMode::Approximate, cont).unwrap();
    let dev: Vec<f64> = hs.iter().map(|&h| kg_residual(&kg, &samples, h).unwrap().deviation).collect();
    let kg_slope = loglog_slope(&hs, &dev);
    let dirac = dirac_universe(&[axis()], 3.0, &random_coeffs(&mut r, 8), FrameMode::Approximate, UniverseOptions::default()).unwrap();
    let dev: Vec<f64> = hs.iter().map(|&h| dirac_residual(&dirac, &samples, h).unwrap().deviation).collect();
    let dirac_slope = loglog_slope(&hs, &dev);
    let ratios = [10.0, 100.0, 1000.0, 10000.0];
    let cp = random_coeffs(&mut r, 2);
    let floors: Vec<f64> = ratios
        .iter()
        .map(|&mm| {
            let g = kg_universe(&[axis()], 3.0, Branch::Positive, &cp, FrameMode::Exact { rod_mass: mm * 3.0 }, cont).unwrap();
            kg_residual(&g, &samples, 0.001).unwrap().floor
        })
        .collect();
    let floor_slope = loglog_slope(&ratios, &floors);
    // Dirac mode spectrum
    let alg = dirac_algebra();
    let mut spec: f64 = 0.0;
    for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [3.0, 0.1, -0.7]] {
        let e = (p.iter().map(|x| x * x).sum::<f64>() + 9.0).sqrt();
        let mut ev: Vec<f64> = alg.hamiltonian(&p, 3.0).symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        spec = spec.max(ev.iter().zip([-e, -e, e, e]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        for (lam, u) in dirac_eigenvectors(&p, 3.0) {
            spec = spec.max((lam.abs() - e).abs());
            let v = DVector::from_vec(u.to_vec());
            spec = spec.max((alg.hamiltonian(&p, 3.0) * &v - &v * C64::new(lam, 0.0)).norm());
        }
    }
    // heavy reference
    let c = random_coeffs(&mut r, 3);
    let heavy: Vec<f64> = ratios
        .iter()
        .map(|&mm| {
            let g = universe_with(&[(s.clone(), s.clone())], Dispersion::Free { mass: mm }, Dispersion::Free { mass: 1.0 }, &c, UniverseOptions::default()).unwrap();
            heavy_reference_residual(&g, 0.4, &[0.2], 1e-4).unwrap()
        })
        .collect();
    let heavy_slope = loglog_slope(&ratios, &heavy);
    let ok = fact <= 1e-12
        && (kg_slope - 2.0).abs() <= 0.1
        && (dirac_slope - 2.0).abs() <= 0.1
        && (floor_slope + 1.0).abs() <= 0.1
        && spec <= 1e-12
        && (heavy_slope + 1.0).abs() <= 0.1;
    assert!(verdict(
        "crit_10",
        "3+1 and relativistic",
        ok,
        format!(
            "factorization {fact:e}, KG slope {kg_slope:.4}, Dirac slope {dirac_slope:.4}, floor vs M slope {floor_slope:.4}, spectrum {spec:e}, heavy-reference slope {heavy_slope:.4}"
        ),
        start
    ));
}

fn bundled() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .collect();
    v.sort();
    v
}

fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn crit_11_cli_determinism() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_paw");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenarios = bundled();
    let mut codes = Vec::new();
    for dir in [a.path(), b.path()] {
        for s in &scenarios {
            let st = Command::new(bin).arg("run").arg(s).env("PAW_OUTPUT_DIR", dir).output().unwrap();
            codes.push(st.status.code());
        }
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let identical = sa == sb && !sa.is_empty();
    let verify = Command::new(bin).arg("verify").output().unwrap();
    let ok = identical && codes.iter().all(|c| *c == Some(0)) && verify.status.code() == Some(0);
    assert!(verdict(
        "crit_11",
        "CLI determinism",
        ok,
        format!(
            "{} scenarios, {} artifacts byte-identical: {identical}, run exit codes {:?}, verify exit {:?}",
            scenarios.len(),
            sa.len(),
            codes,
            verify.status.code()
        ),
        start
    ));
}
