//! Reference evaluations on full dense matrices: ratio-of-expectations
//! conditional probabilities and direct propagators. These never call the
//! partial contraction used by the main pipeline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::relational::Reading;
use crate::tensor::{kron, Label, LinearOperator, Propagator, C64};
use crate::universe::{position_eigenfunction, Dispersion, GlobalState, Role};

/// Reading ket on a factor, built from its labels.
fn reading_ket(g: &GlobalState, r: &Reading) -> Result<DVector<C64>> {
    let f = g.factor(r.role).ok_or_else(|| Error::InvalidInput(format!("no factor {:?}", r.role)))?;
    let x = r.value()?;
    let d = f.dim();
    let w = if r.is_discrete() { 1.0 / (d as f64).sqrt() } else { 1.0 };
    let sign = g.phase().sign();
    let mut out = DVector::zeros(d);
    for (k, l) in f.labels.iter().enumerate() {
        out[k] = match (r.role, *l) {
            (Role::Clock, l) => C64::from_polar(w, -l.energy().unwrap_or(0.0) * x),
            (_, Label::Momentum(p)) => C64::from_polar(w, sign * p * x),
            (_, Label::Level { n, .. }) => {
                let disp = if matches!(r.role, Role::Rod(_)) { g.rod_dispersion() } else { g.system_dispersion() };
                let Dispersion::Oscillator { mass, frequency } = disp else {
                    return Err(Error::Unsupported("level labels without an oscillator".into()));
                };
                C64::new(position_eigenfunction(n + 1, x, mass, frequency)[n], 0.0)
            }
            _ => return Err(Error::Unsupported(format!("cannot read {:?}", r.role))),
        };
    }
    Ok(out)
}

fn povm(g: &GlobalState, r: &Reading) -> Result<DMatrix<C64>> {
    let f = g.factor(r.role).expect("checked by reading_ket");
    let ket = reading_ket(g, r)?;
    let orthogonal_positions = f.labels.iter().any(|l| matches!(l, Label::Level { .. })) && r.role != Role::Clock;
    let w = match r.grid.points() {
        Some(n) => f.dim() as f64 / n as f64,
        None if orthogonal_positions => 1.0,
        None => 1.0 / r.grid.period(),
    };
    Ok(&ket * ket.adjoint() * C64::new(w, 0.0))
}

/// Kronecker product over the factors of `g`, with `ops` in place of the
/// identity on the named factors.
fn embed_all(g: &GlobalState, ops: &[(Role, DMatrix<C64>)]) -> DMatrix<C64> {
    let mut acc = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for f in g.factors() {
        let m = ops
            .iter()
            .find(|(r, _)| *r == f.role)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| DMatrix::identity(f.dim(), f.dim()));
        acc = kron(&acc, &m);
    }
    acc
}

fn expectation(psi: &DVector<C64>, a: &DMatrix<C64>) -> f64 {
    (psi.adjoint() * a * psi)[(0, 0)].re
}

fn dense_vector(g: &GlobalState) -> DVector<C64> {
    DVector::from_vec(g.dense().into_amplitudes())
}

/// `<Psi|E_readings (x) E_outcome|Psi> / <Psi|E_readings|Psi>` with the POVM
/// elements of each reading.
pub fn bayes_conditional(g: &GlobalState, readings: &[Reading], outcome: &[Reading]) -> Result<f64> {
    let psi = dense_vector(g);
    let mut den_ops = Vec::new();
    for r in readings {
        den_ops.push((r.role, povm(g, r)?));
    }
    let mut num_ops = den_ops.clone();
    for r in outcome {
        num_ops.push((r.role, povm(g, r)?));
    }
    let den = expectation(&psi, &embed_all(g, &den_ops));
    if den <= 0.0 {
        return Err(Error::InvalidInput("readings have zero probability".into()));
    }
    Ok(expectation(&psi, &embed_all(g, &num_ops)) / den)
}

/// Dense `H_R + H_S` on the rod and system factors (momentum labels,
/// single axis) and the projector onto zero total momentum.
fn rod_system_dense(g: &GlobalState) -> Result<(DMatrix<C64>, DMatrix<C64>, Vec<Role>)> {
    let roles = vec![Role::Rod(0), Role::System(0)];
    let fr = g.factor(Role::Rod(0)).ok_or_else(|| Error::Unsupported("no rod".into()))?;
    let fs = g.factor(Role::System(0)).ok_or_else(|| Error::Unsupported("no system".into()))?;
    let (dr, ds) = (fr.dim(), fs.dim());
    let mut h = DMatrix::zeros(dr * ds, dr * ds);
    let mut pi = DMatrix::zeros(dr * ds, dr * ds);
    for a in 0..dr {
        for b in 0..ds {
            let (pr, ps) = match (fr.labels[a].momentum(), fs.labels[b].momentum()) {
                (Some(x), Some(y)) => (x, y),
                _ => return Err(Error::Unsupported("propagator oracle needs momentum labels".into())),
            };
            let i = a * ds + b;
            h[(i, i)] = C64::new(g.rod_dispersion().energy(&[pr])? + g.system_dispersion().energy(&[ps])?, 0.0);
            if (pr + ps).abs() <= 1e-12 * pr.abs().max(ps.abs()).max(1.0) {
                pi[(i, i)] = C64::new(1.0, 0.0);
            }
        }
    }
    Ok((h, pi, roles))
}

fn product_ket(g: &GlobalState, x: &Reading, y: &Reading) -> Result<DVector<C64>> {
    let a = reading_ket(g, x)?;
    let b = reading_ket(g, y)?;
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    Ok(out)
}

/// `|<x'' y''| e^{-i(H_R + H_S) dt} Pi_0 |x' y'>|^2`, with `Pi_0` the projector
/// onto zero total momentum of rod plus system.
pub fn sector_propagator(g: &GlobalState, first: (&Reading, &Reading), second: (&Reading, &Reading), dt: f64) -> Result<f64> {
    let (h, pi, roles) = rod_system_dense(g)?;
    let shape: Vec<usize> = roles.iter().map(|r| g.factor(*r).map_or(0, |f| f.dim())).collect();
    let u = Propagator::new(&LinearOperator::full(h, shape)?)?.unitary(dt);
    let ket = product_ket(g, first.0, first.1)?;
    let bra = product_ket(g, second.0, second.1)?;
    Ok((bra.adjoint() * u * pi * ket)[(0, 0)].norm_sqr())
}

/// Same amplitude without the sector projector.
pub fn full_propagator(g: &GlobalState, first: (&Reading, &Reading), second: (&Reading, &Reading), dt: f64) -> Result<f64> {
    let (h, _, roles) = rod_system_dense(g)?;
    let shape: Vec<usize> = roles.iter().map(|r| g.factor(*r).map_or(0, |f| f.dim())).collect();
    let u = Propagator::new(&LinearOperator::full(h, shape)?)?.unitary(dt);
    let ket = product_ket(g, first.0, first.1)?;
    let bra = product_ket(g, second.0, second.1)?;
    Ok((bra.adjoint() * u * ket)[(0, 0)].norm_sqr())
}

/// Born probability `|<x y|phi(t)>|^2`, with `phi(t) = e^{-i(H_R+H_S) t} phi(0)`
/// evolved densely from the relative state at clock reading `t0`.
pub fn born_oracle(g: &GlobalState, t0: &Reading, t: f64, x: &Reading, y: &Reading) -> Result<f64> {
    let (h, _, roles) = rod_system_dense(g)?;
    let shape: Vec<usize> = roles.iter().map(|r| g.factor(*r).map_or(0, |f| f.dim())).collect();
    let clock = reading_ket(g, t0)?;
    let dc = clock.len();
    let psi = dense_vector(g);
    let rest = psi.len() / dc;
    let mut phi0 = DVector::zeros(rest);
    for c in 0..dc {
        for i in 0..rest {
            phi0[i] += clock[c].conj() * psi[c * rest + i];
        }
    }
    let n = phi0.norm();
    if n == 0.0 {
        return Err(Error::InvalidInput("clock reading has zero probability".into()));
    }
    phi0 /= C64::new(n, 0.0);
    let u = Propagator::new(&LinearOperator::full(h, shape)?)?.unitary(t - t0.value()?);
    let ket = product_ket(g, x, y)?;
    Ok((ket.adjoint() * u * phi0)[(0, 0)].norm_sqr())
}
