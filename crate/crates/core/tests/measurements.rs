mod common;

use std::f64::consts::PI;

use common::*;
use paw_core::frames::momentum_spectrum;
use paw_core::measurements::*;
use paw_core::oracle::{born_oracle, sector_propagator};
use paw_core::relational::{conditional_prob_discrete, At};
use paw_core::universe::{universe_with, ClockLayout, Dispersion, GlobalState, UniverseOptions};

/// `d` system levels `k0 .. k0+d-1`, rod partners, equally spaced clock of `n` levels.
fn ortho_universe(seed: u64, d: usize, k0: i32, n: Option<usize>) -> GlobalState {
    let mut r = rng(seed);
    let l = 2.0 * PI;
    let sys = momentum_spectrum(d, k0 as f64, l).unwrap();
    let rod = momentum_spectrum(d, -((k0 + d as i32 - 1) as f64), l).unwrap();
    let c = unit_coeffs(&mut r, d);
    let layout = n.map_or(ClockLayout::Ladder, ClockLayout::PaddedLadder);
    let opts = UniverseOptions { clock_layout: layout, ..Default::default() };
    universe_with(&[(rod, sys)], Dispersion::Free { mass: 2.0 }, Dispersion::Free { mass: 1.0 }, &c, opts).unwrap()
}

#[test]
fn gppt_single_theta_and_closed_form() {
    let g = ortho_universe(1, 3, 1, None);
    let grids = orthogonal_grids(&g).unwrap();
    let nc = grids.clock.unwrap().points().unwrap();
    for m in 0..nc {
        let mut total = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                let e = MeasurementEvent::new(m, j, l);
                let r = gppt_single(&g, &grids, &e).unwrap();
                let th = r.theta_average.unwrap();
                assert!((th - r.closed_form).abs() < 1e-10, "{th} {}", r.closed_form);
                let p = conditional_prob_discrete(&g, &grids, &[j], Some(m), &[l]).unwrap();
                assert!((r.closed_form - p / 3.0).abs() < 1e-12);
                total += r.closed_form;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_time_against_propagator() {
    for d in [2usize, 3] {
        let g = ortho_universe(d as u64, d, 1, Some(9));
        let grids = orthogonal_grids(&g).unwrap();
        let layout_h = |a: usize, b: usize| glm_build(&g, &MemoryLayout::at(&[a, b]).unwrap()).unwrap();
        let h = layout_h(0, 3);
        let mut worst: f64 = 0.0;
        for (j1, l1, j2, l2) in (0..d).flat_map(|a| (0..d).flat_map(move |b| (0..d).flat_map(move |c| (0..d).map(move |e| (a, b, c, e))))) {
            let f = MeasurementEvent::new(0, j1, l1);
            let s = MeasurementEvent::new(3, j2, l2);
            let gp = gppt_two_time(&g, &grids, &f, &s).unwrap();
            let rd = |e: &MeasurementEvent| {
                (grids.rod_readings(&[At::Index(e.rod)]).unwrap()[0], grids.system_readings(&[At::Index(e.system)]).unwrap()[0])
            };
            let (x1, y1) = rd(&f);
            let (x2, y2) = rd(&s);
            let dt = grids.clock.unwrap().period() * 3.0 / 9.0;
            let o = sector_propagator(&g, (&x1, &y1), (&x2, &y2), dt).unwrap();
            let gl = glm_two_time_prob(&h, &f, &s).unwrap();
            worst = worst.max((gp.joint - o).abs()).max((gl.joint - o).abs());
        }
        assert!(worst < 1e-10, "d={d}: {worst}");
    }
}

#[test]
fn glm_single_matches_gppt_and_born() {
    let g = ortho_universe(5, 3, 1, None);
    let grids = orthogonal_grids(&g).unwrap();
    let h = glm_build(&g, &MemoryLayout::at(&[2]).unwrap()).unwrap();
    assert!((h.state.dense().norm_sqr() - 1.0).abs() < 1e-12);
    let t0 = grids.clock_reading(At::Index(0)).unwrap();
    let t2 = grids.clock.unwrap().value(2).unwrap();
    let mut total = 0.0;
    for j in 0..3 {
        for l in 0..3 {
            let s = glm_single_prob(&h, 2, j, l).unwrap();
            let gp = gppt_single(&g, &grids, &MeasurementEvent::new(2, j, l)).unwrap();
            assert!((s.joint - gp.closed_form).abs() < 1e-12);
            let x = grids.rod_readings(&[At::Index(j)]).unwrap()[0];
            let y = grids.system_readings(&[At::Index(l)]).unwrap()[0];
            let born = born_oracle(&g, &t0, t2, &x, &y).unwrap();
            assert!((s.joint - born).abs() < 1e-12, "{} {born}", s.joint);
            // later clock readings see the same record
            let later = glm_single_prob(&h, 5, j, l).unwrap();
            assert!((later.joint - s.joint).abs() < 1e-12);
            total += s.joint;
        }
    }
    assert!((total - 1.0).abs() < 1e-12);
    // before the record the memories are ready
    let ready = memory_marginal(&h, 1, &[(None, None)]).unwrap();
    assert!((ready - 1.0).abs() < 1e-12, "{ready}");
}

