//! Analyses named in scenario files.

use paw_core::measurements::{glm_build, gppt_two_time, orthogonal_grids, MeasurementEvent, MemoryLayout};
use paw_core::oracle::{bayes_conditional, sector_propagator};
use paw_core::relational::{
    closed_form_3level, closed_form_3level_density, conditional_prob_discrete, density_distribution, evolution_residual,
    heavy_reference_residual, loglog_slope, schrodinger_fd_residual, spatial_resolution, speed_limit_report,
    translation_residual, At, Grids,
};
use paw_core::relativistic::{dirac_residual, kg_residual, Sample};
use paw_core::universe::{Dispersion, GlobalState};
use paw_core::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::build::{self, three_level};
use crate::config::{AnalysisConfig, ScenarioConfig};
use crate::output::{AnalysisResult, Cell, Check, Table};

pub const PROB_TOL: f64 = 1e-12;
pub const TWO_TIME_TOL: f64 = 1e-10;
pub const DENSITY_TOL: f64 = 1e-6;
pub const SLOPE_TOL: f64 = 0.1;

/// Built universe plus what the analyses need to rebuild variants.
pub struct Context<'a> {
    pub cfg: &'a ScenarioConfig,
    pub state: GlobalState,
    pub coeffs: Option<Vec<C64>>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ScenarioConfig) -> Result<Self, crate::CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let coeffs = build::configured_coeffs(&cfg.universe, &mut rng)?;
        let state = build::build(&cfg.universe, coeffs.as_deref())?;
        Ok(Context { cfg, state, coeffs })
    }
}

type Out = Result<(Vec<Check>, Option<f64>, Option<Table>), String>;

fn e2s(e: paw_core::Error) -> String {
    e.to_string()
}

pub fn run_analysis(ctx: &Context, index: usize, a: &AnalysisConfig) -> AnalysisResult {
    let g = &ctx.state;
    let outcome = match a {
        AnalysisConfig::ConditionalProbDiscrete { clock_points, rod_points, sys_points, rod_index, .. } => {
            conditional_grid(ctx, *clock_points, *rod_points, *sys_points, *rod_index)
        }
        AnalysisConfig::DensityDistribution { x, t, .. } => density(ctx, x, *t),
        AnalysisConfig::SpeedLimitReport { samples, .. } => speed_limit(ctx, index, *samples),
        AnalysisConfig::SpatialResolution { samples, threshold, .. } => resolution(ctx, index, *samples, *threshold),
        AnalysisConfig::Covariance { x_a, x_b, t_a, t_b, .. } => covariance(g, x_a, x_b, *t_a, *t_b),
        AnalysisConfig::SchrodingerFd { t, spacing, .. } => schrodinger(g, *t, spacing),
        AnalysisConfig::TwoTime { first, second, .. } => two_time(g, *first, *second),
        AnalysisConfig::HeavyReferenceResidual { t, x, spacing, .. } => heavy(g, *t, x, *spacing),
        AnalysisConfig::KgResidual { t, x, spacing, .. } => relativistic(g, t, x, *spacing, false),
        AnalysisConfig::DiracResidual { t, x, spacing, .. } => relativistic(g, t, x, *spacing, true),
    };
    let (checks, metric, table) = match outcome {
        Ok(v) => v,
        Err(msg) => (vec![Check::failed("evaluation", msg)], None, None),
    };
    AnalysisResult { name: a.name().to_string(), op: a.op(), tags: tags(ctx, a), checks, metric, table }
}

fn tags(ctx: &Context, a: &AnalysisConfig) -> Vec<&'static str> {
    let u = &ctx.cfg.universe;
    let three_d = ctx.state.axes() == 3;
    let oscillator = matches!(ctx.state.system_dispersion(), Dispersion::Oscillator { .. });
    let closed = ctx.coeffs.as_deref().and_then(|c| three_level(u, c)).is_some();
    match a {
        AnalysisConfig::ConditionalProbDiscrete { .. } if three_d => vec!["Eq95"],
        AnalysisConfig::ConditionalProbDiscrete { .. } if closed => vec!["Eq45", "Eq56"],
        AnalysisConfig::ConditionalProbDiscrete { .. } => vec!["Eq45"],
        AnalysisConfig::DensityDistribution { .. } if oscillator => vec!["Eq65"],
        AnalysisConfig::DensityDistribution { .. } if closed => vec!["Eq48", "Eq56"],
        AnalysisConfig::DensityDistribution { .. } => vec!["Eq48"],
        AnalysisConfig::SpeedLimitReport { .. } => vec!["Eq57", "Eq58"],
        AnalysisConfig::SpatialResolution { .. } => vec!["Eq19", "Eq20"],
        AnalysisConfig::Covariance { .. } if three_d => vec!["Eq42", "Eq36"],
        AnalysisConfig::Covariance { .. } => vec!["Eq13", "Eq36"],
        AnalysisConfig::SchrodingerFd { .. } => vec!["Eq39"],
        AnalysisConfig::TwoTime { .. } => vec!["Eq68", "Eq80"],
        AnalysisConfig::HeavyReferenceResidual { .. } => vec!["Eq50", "Eq51"],
        AnalysisConfig::KgResidual { .. } => vec!["Eq106"],
        AnalysisConfig::DiracResidual { .. } => vec!["Eq113"],
    }
}

fn conditional_grid(ctx: &Context, clock_points: usize, rod_points: usize, sys_points: usize, rod_index: usize) -> Out {
    let g = &ctx.state;
    if g.axes() != 1 {
        return Err("conditional_prob_discrete tables cover one axis".into());
    }
    let grids = Grids::discrete(g, Some(clock_points), rod_points, sys_points).map_err(e2s)?;
    let clock = grids.clock.ok_or("universe has no clock")?;
    let x = grids.rod[0].value(rod_index).map_err(e2s)?;
    let ds = g.factor(paw_core::universe::Role::System(0)).map_or(1, |f| f.dim()) as f64;
    let closed = ctx.coeffs.as_deref().and_then(|c| three_level(&ctx.cfg.universe, c));
    let u = &ctx.cfg.universe;
    let (big_m, m, l) = (build::rod_mass(u).unwrap_or(1.0), u.sys_mass.unwrap_or(1.0), grids.system[0].period());
    let mut table = Table::new(vec!["t", "delta", "probability"]);
    let mut worst_norm: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut worst_bayes: f64 = 0.0;
    let mut bayes_checked = 0;
    let mut total = 0.0;
    for mi in 0..clock_points {
        let t = clock.value(mi).map_err(e2s)?;
        let mut row_sum = 0.0;
        for li in 0..sys_points {
            let y = grids.system[0].value(li).map_err(e2s)?;
            let p = conditional_prob_discrete(g, &grids, &[rod_index], Some(mi), &[li]).map_err(e2s)?;
            if let Some(c) = closed {
                // D_S > d_S spreads the same curve over more points.
                let want = closed_form_3level(c, l, big_m, m, t, y - x).map_err(e2s)? * ds / sys_points as f64;
                worst_closed = worst_closed.max((p - want).abs() * sys_points as f64 / ds);
            }
            if bayes_checked < 256 {
                let reads = vec![grids.clock_reading(At::Index(mi)).map_err(e2s)?, grids.rod_readings(&[At::Index(rod_index)]).map_err(e2s)?[0]];
                let out = grids.system_readings(&[At::Index(li)]).map_err(e2s)?;
                worst_bayes = worst_bayes.max((p - bayes_conditional(g, &reads, &out).map_err(e2s)?).abs());
                bayes_checked += 1;
            }
            row_sum += p;
            table.push(vec![t.into(), (y - x).into(), p.into()]);
        }
        worst_norm = worst_norm.max((row_sum - 1.0).abs());
        total += row_sum;
    }
    table.total = Some(total);
    let mut checks = vec![Check::at_most("normalization", worst_norm, PROB_TOL), Check::at_most("bayes_oracle", worst_bayes, PROB_TOL)];
    if closed.is_some() {
        checks.push(Check::at_most("closed_form", worst_closed, PROB_TOL));
    }
    Ok((checks, Some(worst_closed.max(worst_bayes)), Some(table)))
}

fn density(ctx: &Context, x: &[f64], t: Option<f64>) -> Out {
    let g = &ctx.state;
    let dist = density_distribution(g, x, t).map_err(e2s)?;
    let columns = match g.axes() {
        1 => vec!["y", "density"],
        3 => vec!["y1", "y2", "y3", "density"],
        n => return Err(format!("density tables cover 1 or 3 axes, not {n}")),
    };
    let mut table = Table::new(columns);
    let closed = ctx.coeffs.as_deref().and_then(|c| three_level(&ctx.cfg.universe, c));
    let u = &ctx.cfg.universe;
    let mut worst_closed: f64 = 0.0;
    for (y, p) in dist.grid.iter().zip(&dist.probabilities) {
        if let (Some(c), Some(t)) = (closed, t) {
            let l = g.sys_spectrum(0).map_or(1.0, |s| s.period());
            let want = closed_form_3level_density(c, l, build::rod_mass(u).unwrap_or(1.0), u.sys_mass.unwrap_or(1.0), t, y[0] - x[0])
                .map_err(e2s)?;
            worst_closed = worst_closed.max((p - want).abs());
        }
        let mut row: Vec<Cell> = y.iter().map(|&v| v.into()).collect();
        row.push((*p).into());
        table.push(row);
    }
    table.total = Some(dist.total);
    let mut checks = vec![Check::at_most("normalization", (dist.total - 1.0).abs(), DENSITY_TOL)];
    if closed.is_some() && t.is_some() {
        checks.push(Check::at_most("closed_form", worst_closed, PROB_TOL));
    }
    Ok((checks, Some((dist.total - 1.0).abs()), Some(table)))
}

/// Configured universe first, then `samples - 1` random coefficient sets.
fn variants(ctx: &Context, index: usize, samples: usize) -> Result<Vec<GlobalState>, String> {
    let mut out = vec![ctx.state.clone()];
    let Some(n) = build::coefficient_count(&ctx.cfg.universe).map_err(|e| e.to_string())? else {
        return Ok(out);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed.wrapping_add(1 + index as u64));
    for _ in 1..samples {
        let c = build::random_coeffs(&mut rng, n);
        out.push(build::build(&ctx.cfg.universe, Some(&c)).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn speed_limit(ctx: &Context, index: usize, samples: usize) -> Out {
    let mut table = Table::new(vec!["sample", "e_rs", "delta_e", "bound", "t_orth", "satisfied"]);
    let mut violations = 0;
    let mut slack = f64::INFINITY;
    for (k, g) in variants(ctx, index, samples.max(1))?.iter().enumerate() {
        let s = speed_limit_report(g).map_err(e2s)?;
        if !s.satisfied {
            violations += 1;
        }
        if let Some(t) = s.t_orth {
            slack = slack.min(t / s.bound);
        }
        table.push(vec![k.into(), s.e_rs.into(), s.delta_e.into(), s.bound.into(), s.t_orth.into(), s.satisfied.into()]);
    }
    let checks = vec![
        Check::holds("t_orth_at_least_bound", violations == 0, (violations > 0).then(|| format!("{violations} violations"))),
        Check::measured("min_t_orth_over_bound", if slack.is_finite() { slack } else { f64::NAN }),
    ];
    Ok((checks, slack.is_finite().then_some(slack), Some(table)))
}

fn resolution(ctx: &Context, index: usize, samples: usize, threshold: f64) -> Out {
    let mut table = Table::new(vec!["sample", "delta_x", "delta_p", "product", "satisfied"]);
    let mut violations = 0;
    let mut least = f64::INFINITY;
    for (k, g) in variants(ctx, index, samples.max(1))?.iter().enumerate() {
        for axis in 0..g.axes() {
            let r = spatial_resolution(g, axis, threshold).map_err(e2s)?;
            if !r.satisfied {
                violations += 1;
            }
            least = least.min(r.product);
            table.push(vec![k.into(), r.delta_x.into(), r.delta_p.into(), r.product.into(), r.satisfied.into()]);
        }
    }
    let checks = vec![
        Check::holds("product_at_least_kappa", violations == 0, (violations > 0).then(|| format!("{violations} violations"))),
        Check::measured("min_product", least),
    ];
    Ok((checks, Some(least), Some(table)))
}

fn covariance(g: &GlobalState, x_a: &[f64], x_b: &[f64], t_a: f64, t_b: f64) -> Out {
    let grids = Grids::continuous(g).map_err(e2s)?;
    let rods = |x: &[f64]| grids.rod_readings(&x.iter().map(|&v| At::Value(v)).collect::<Vec<_>>()).map_err(e2s);
    let clock = |t: f64| grids.clock_reading(At::Value(t)).map_err(e2s);
    let tr = translation_residual(g, &rods(x_a)?, &rods(x_b)?).map_err(e2s)?;
    let mut a = vec![clock(t_a)?];
    a.extend(rods(x_a)?);
    let mut b = vec![clock(t_a)?];
    b.extend(rods(x_b)?);
    let tr_clock = translation_residual(g, &a, &b).map_err(e2s)?;
    let ev = evolution_residual(g, &[clock(t_a)?], &[clock(t_b)?]).map_err(e2s)?;
    let mut table = Table::new(vec!["quantity", "value"]);
    table.push(vec![Cell::Text("translation_residual".into()), tr.into()]);
    table.push(vec![Cell::Text("translation_residual_at_t".into()), tr_clock.into()]);
    table.push(vec![Cell::Text("evolution_residual".into()), ev.into()]);
    let checks = vec![
        Check::at_most("translation", tr, PROB_TOL),
        Check::at_most("translation_at_t", tr_clock, PROB_TOL),
        Check::at_most("evolution", ev, PROB_TOL),
    ];
    Ok((checks, Some(tr.max(tr_clock).max(ev)), Some(table)))
}

fn slope_check(name: &str, hs: &[f64], ys: &[f64], target: f64) -> Check {
    let slope = loglog_slope(hs, ys);
    let mut c = Check::at_most(name, (slope - target).abs(), SLOPE_TOL);
    c.detail = Some(format!("slope {slope} target {target}"));
    c
}

fn schrodinger(g: &GlobalState, t: f64, spacing: &[f64]) -> Out {
    if spacing.len() < 2 {
        return Err("schrodinger_fd needs at least two spacings".into());
    }
    let mut table = Table::new(vec!["spacing", "residual"]);
    let mut res = Vec::new();
    for &h in spacing {
        let r = schrodinger_fd_residual(g, t, h).map_err(e2s)?;
        table.push(vec![h.into(), r.into()]);
        res.push(r);
    }
    Ok((vec![slope_check("second_order", spacing, &res, 2.0)], Some(loglog_slope(spacing, &res)), Some(table)))
}

fn two_time(g: &GlobalState, first: usize, second: usize) -> Out {
    let grids = orthogonal_grids(g).map_err(e2s)?;
    let clock = grids.clock.ok_or("universe has no clock")?;
    let dt = clock.value(second).map_err(e2s)? - clock.value(first).map_err(e2s)?;
    let h = glm_build(g, &MemoryLayout::at(&[first, second]).map_err(e2s)?).map_err(e2s)?;
    let dr = grids.rod[0].points().unwrap_or(0);
    let ds = grids.system[0].points().unwrap_or(0);
    let mut table = Table::new(vec!["x1", "y1", "x2", "y2", "gppt", "glm", "propagator"]);
    let mut worst: f64 = 0.0;
    for j1 in 0..dr {
        for l1 in 0..ds {
            for j2 in 0..dr {
                for l2 in 0..ds {
                    let f = MeasurementEvent::new(first, j1, l1);
                    let s = MeasurementEvent::new(second, j2, l2);
                    let gp = gppt_two_time(g, &grids, &f, &s).map_err(e2s)?.joint;
                    let gl = paw_core::measurements::glm_two_time_prob(&h, &f, &s).map_err(e2s)?.joint;
                    let r = |j, l| -> Result<_, String> {
                        Ok((
                            grids.rod_readings(&[At::Index(j)]).map_err(e2s)?[0],
                            grids.system_readings(&[At::Index(l)]).map_err(e2s)?[0],
                        ))
                    };
                    let (x1, y1) = r(j1, l1)?;
                    let (x2, y2) = r(j2, l2)?;
                    let o = sector_propagator(g, (&x1, &y1), (&x2, &y2), dt).map_err(e2s)?;
                    worst = worst.max((gp - o).abs()).max((gl - o).abs());
                    let v = |i: usize, grid: &paw_core::frames::FrameGrid| grid.value(i).unwrap_or(f64::NAN);
                    table.push(vec![
                        v(j1, &grids.rod[0]).into(),
                        v(l1, &grids.system[0]).into(),
                        v(j2, &grids.rod[0]).into(),
                        v(l2, &grids.system[0]).into(),
                        gp.into(),
                        gl.into(),
                        o.into(),
                    ]);
                }
            }
        }
    }
    Ok((vec![Check::at_most("propagator", worst, TWO_TIME_TOL)], Some(worst), Some(table)))
}

fn heavy(g: &GlobalState, t: f64, x: &[f64], spacing: f64) -> Out {
    let r = heavy_reference_residual(g, t, x, spacing).map_err(e2s)?;
    let mut table = Table::new(vec!["quantity", "value"]);
    table.push(vec![Cell::Text("residual".into()), r.into()]);
    Ok((vec![Check::measured("residual", r)], Some(r), Some(table)))
}

fn relativistic(g: &GlobalState, ts: &[f64], xs: &[f64], spacing: f64, dirac: bool) -> Out {
    let samples: Vec<Sample> =
        ts.iter().flat_map(|&t| xs.iter().map(move |&x| Sample { t, x: vec![x; g.axes()] })).collect();
    let r = if dirac { dirac_residual(g, &samples, spacing) } else { kg_residual(g, &samples, spacing) }.map_err(e2s)?;
    let mut table = Table::new(vec!["quantity", "value"]);
    table.push(vec![Cell::Text("residual".into()), r.residual.into()]);
    table.push(vec![Cell::Text("floor".into()), r.floor.into()]);
    table.push(vec![Cell::Text("deviation".into()), r.deviation.into()]);
    let checks = vec![Check::measured("residual", r.residual), Check::measured("floor", r.floor), Check::measured("deviation", r.deviation)];
    Ok((checks, Some(r.deviation), Some(table)))
}
