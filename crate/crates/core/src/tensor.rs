//! Dense complex state vectors over labelled tensor-product bases, slot-local
//! operators, partial contraction and Hermitian evolution.
//!
//! Flat indices are row-major over `shape`: the last factor varies fastest.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance used when checking that an operator is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Physical meaning of one basis element of a factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Momentum(f64),
    Energy(f64),
    /// Clock level carrying both an energy and a momentum.
    ClockLevel { energy: f64, momentum: f64 },
    /// Oscillator level `n` with its energy.
    Level { n: usize, energy: f64 },
    /// Memory record of outcome `k`.
    Outcome(usize),
    /// Memory ready state.
    Ready,
    Spin(usize),
    /// Plain computational-basis index.
    Index(usize),
}

impl Label {
    pub fn momentum(&self) -> Option<f64> {
        match *self {
            Label::Momentum(p) => Some(p),
            Label::ClockLevel { momentum, .. } => Some(momentum),
            _ => None,
        }
    }

    pub fn energy(&self) -> Option<f64> {
        match *self {
            Label::Energy(e) => Some(e),
            Label::ClockLevel { energy, .. } => Some(energy),
            Label::Level { energy, .. } => Some(energy),
            _ => None,
        }
    }
}

/// Normalization convention a vector was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Unit norm.
    Unit,
    /// Continuous frame state: no 1/sqrt(d), norm^2 equals the dimension.
    Continuous,
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    shape: Vec<usize>,
    labels: Vec<Vec<Label>>,
    normalization: Normalization,
}

fn index_labels(shape: &[usize]) -> Vec<Vec<Label>> {
    shape
        .iter()
        .map(|&d| (0..d).map(Label::Index).collect())
        .collect()
}

impl StateVector {
    pub fn new(
        amps: Vec<C64>,
        shape: Vec<usize>,
        labels: Vec<Vec<Label>>,
        normalization: Normalization,
    ) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != amps.len() {
            return Err(Error::InvalidInput(format!(
                "shape {:?} needs {} amplitudes, got {}",
                shape,
                n,
                amps.len()
            )));
        }
        if labels.len() != shape.len() || labels.iter().zip(&shape).any(|(l, &d)| l.len() != d) {
            return Err(Error::InvalidInput("labels do not match shape".into()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite amplitude".into()));
        }
        Ok(StateVector { amps, shape, labels, normalization })
    }

    /// Single-factor vector.
    pub fn from_factor(amps: Vec<C64>, labels: Vec<Label>, normalization: Normalization) -> Result<Self> {
        let d = amps.len();
        Self::new(amps, vec![d], vec![labels], normalization)
    }

    /// Vector with plain index labels; normalization flag inferred from the norm.
    pub fn from_amplitudes(amps: Vec<C64>, shape: Vec<usize>) -> Result<Self> {
        let labels = index_labels(&shape);
        let mut v = Self::new(amps, shape, labels, Normalization::Unnormalized)?;
        if (v.norm() - 1.0).abs() <= 1e-12 {
            v.normalization = Normalization::Unit;
        }
        Ok(v)
    }

    pub fn basis(labels: Vec<Label>, k: usize) -> Result<Self> {
        if k >= labels.len() {
            return Err(Error::IndexOutOfRange { index: k, size: labels.len() });
        }
        let mut amps = vec![C64::new(0.0, 0.0); labels.len()];
        amps[k] = C64::new(1.0, 0.0);
        Self::from_factor(amps, labels, Normalization::Unit)
    }

    pub fn zeros(shape: Vec<usize>, labels: Vec<Vec<Label>>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(vec![C64::new(0.0, 0.0); n], shape, labels, Normalization::Unnormalized)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[Vec<Label>] {
        &self.labels
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Multiply every amplitude by `s`; the result is flagged unnormalized
    /// unless `s` has unit modulus.
    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for a in &mut out.amps {
            *a *= s;
        }
        if (s.norm() - 1.0).abs() > 1e-15 {
            out.normalization = Normalization::Unnormalized;
        }
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        let mut out = self.scale(C64::new(1.0 / n, 0.0));
        out.normalization = Normalization::Unit;
        Ok(out)
    }

    /// `self - other`, shapes must match.
    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.check_same_shape(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect();
        Ok(StateVector { amps, normalization: Normalization::Unnormalized, ..self.clone() })
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.check_same_shape(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect();
        Ok(StateVector { amps, normalization: Normalization::Unnormalized, ..self.clone() })
    }

    fn check_same_shape(&self, other: &StateVector) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), found: other.shape.clone() });
        }
        Ok(())
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        flat_index(&self.shape, multi)
    }

    pub fn get(&self, multi: &[usize]) -> C64 {
        self.amps[self.flat_index(multi)]
    }
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub fn flat_index(shape: &[usize], multi: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), multi.len());
    multi.iter().zip(strides(shape)).map(|(i, s)| i * s).sum()
}

pub fn multi_index(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for i in (0..shape.len()).rev() {
        out[i] = flat % shape[i];
        flat /= shape[i];
    }
    out
}

/// Outer product; shapes and labels concatenate.
pub fn tensor(a: &StateVector, b: &StateVector) -> StateVector {
    let mut amps = Vec::with_capacity(a.len() * b.len());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    let normalization = match (a.normalization, b.normalization) {
        (Normalization::Unit, Normalization::Unit) => Normalization::Unit,
        (Normalization::Continuous, Normalization::Continuous)
        | (Normalization::Continuous, Normalization::Unit)
        | (Normalization::Unit, Normalization::Continuous) => Normalization::Continuous,
        _ => Normalization::Unnormalized,
    };
    StateVector {
        amps,
        shape: a.shape.iter().chain(&b.shape).copied().collect(),
        labels: a.labels.iter().chain(&b.labels).cloned().collect(),
        normalization,
    }
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.check_same_shape(b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Partial contraction `(<bra| on slot) |global>`; the slot is removed from
/// the result, which is left unnormalized.
pub fn condition(global: &StateVector, slot: usize, bra: &StateVector) -> Result<StateVector> {
    let rank = global.rank();
    if slot >= rank {
        return Err(Error::SlotOutOfRange { slot, rank });
    }
    let d = global.shape[slot];
    if bra.len() != d {
        return Err(Error::ShapeMismatch { expected: vec![d], found: bra.shape.clone() });
    }
    let outer: usize = global.shape[..slot].iter().product();
    let inner_n: usize = global.shape[slot + 1..].iter().product();
    let mut amps = vec![C64::new(0.0, 0.0); outer * inner_n];
    for o in 0..outer {
        for (k, b) in bra.amps.iter().enumerate() {
            let bc = b.conj();
            if bc == C64::new(0.0, 0.0) {
                continue;
            }
            let base = (o * d + k) * inner_n;
            let dst = &mut amps[o * inner_n..(o + 1) * inner_n];
            for (i, x) in dst.iter_mut().enumerate() {
                *x += bc * global.amps[base + i];
            }
        }
    }
    let mut shape = global.shape.clone();
    shape.remove(slot);
    let mut labels = global.labels.clone();
    labels.remove(slot);
    Ok(StateVector { amps, shape, labels, normalization: Normalization::Unnormalized })
}

/// Square matrix acting on a subset of the slots of a fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    matrix: DMatrix<C64>,
    domain_shape: Vec<usize>,
    slots: Vec<usize>,
    hermitian: bool,
}

/// max |A - A^dagger|.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<C64>, domain_shape: Vec<usize>, slots: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput("operator matrix must be square".into()));
        }
        let mut seen = vec![false; domain_shape.len()];
        for &s in &slots {
            if s >= domain_shape.len() {
                return Err(Error::SlotOutOfRange { slot: s, rank: domain_shape.len() });
            }
            if seen[s] {
                return Err(Error::InvalidInput(format!("slot {s} listed twice")));
            }
            seen[s] = true;
        }
        let dim: usize = slots.iter().map(|&s| domain_shape[s]).product();
        if dim != matrix.nrows() {
            return Err(Error::ShapeMismatch {
                expected: slots.iter().map(|&s| domain_shape[s]).collect(),
                found: vec![matrix.nrows()],
            });
        }
        Ok(LinearOperator { matrix, domain_shape, slots, hermitian: false })
    }

    /// Operator acting on every slot of `shape`.
    pub fn full(matrix: DMatrix<C64>, shape: Vec<usize>) -> Result<Self> {
        let slots = (0..shape.len()).collect();
        Self::new(matrix, shape, slots)
    }

    /// Like [`new`](Self::new) but verifies and records hermiticity.
    pub fn hermitian(matrix: DMatrix<C64>, domain_shape: Vec<usize>, slots: Vec<usize>) -> Result<Self> {
        let mut op = Self::new(matrix, domain_shape, slots)?;
        let deviation = hermitian_deviation(&op.matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Diagonal operator on all slots, with entries `f(multi_index)`.
    pub fn diagonal_fn(shape: Vec<usize>, f: impl Fn(&[usize]) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(f(&multi_index(&shape, i)), 0.0);
        }
        let slots = (0..shape.len()).collect();
        LinearOperator { matrix: m, domain_shape: shape, slots, hermitian: true }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn domain_shape(&self) -> &[usize] {
        &self.domain_shape
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Same operator written as a matrix on the whole domain.
    pub fn to_full(&self) -> LinearOperator {
        LinearOperator {
            matrix: embed(&self.matrix, &self.slots, &self.domain_shape),
            domain_shape: self.domain_shape.clone(),
            slots: (0..self.domain_shape.len()).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.shape != self.domain_shape {
            return Err(Error::ShapeMismatch { expected: self.domain_shape.clone(), found: v.shape.clone() });
        }
        let amps = apply_on_slots(&self.matrix, &self.slots, &self.domain_shape, &v.amps);
        Ok(StateVector { amps, normalization: Normalization::Unnormalized, ..v.clone() })
    }

    pub fn add(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.domain_shape != other.domain_shape {
            return Err(Error::ShapeMismatch { expected: self.domain_shape.clone(), found: other.domain_shape.clone() });
        }
        let a = self.to_full();
        let b = other.to_full();
        Ok(LinearOperator {
            matrix: a.matrix + b.matrix,
            domain_shape: a.domain_shape,
            slots: a.slots,
            hermitian: self.hermitian && other.hermitian,
        })
    }
}

/// Offsets of the targeted sub-block and of the spectator indices.
fn slot_offsets(slots: &[usize], shape: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let st = strides(shape);
    let sub_shape: Vec<usize> = slots.iter().map(|&s| shape[s]).collect();
    let sub_n: usize = sub_shape.iter().product();
    let targeted: Vec<usize> = (0..sub_n)
        .map(|k| {
            multi_index(&sub_shape, k)
                .iter()
                .zip(slots)
                .map(|(i, &s)| i * st[s])
                .sum()
        })
        .collect();
    let rest: Vec<usize> = (0..shape.len()).filter(|i| !slots.contains(i)).collect();
    let rest_shape: Vec<usize> = rest.iter().map(|&s| shape[s]).collect();
    let rest_n: usize = rest_shape.iter().product();
    let spectators: Vec<usize> = (0..rest_n)
        .map(|k| {
            multi_index(&rest_shape, k)
                .iter()
                .zip(&rest)
                .map(|(i, &s)| i * st[s])
                .sum()
        })
        .collect();
    (targeted, spectators)
}

fn apply_on_slots(m: &DMatrix<C64>, slots: &[usize], shape: &[usize], amps: &[C64]) -> Vec<C64> {
    let (targeted, spectators) = slot_offsets(slots, shape);
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    for &base in &spectators {
        for (r, &or) in targeted.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, &oc) in targeted.iter().enumerate() {
                acc += m[(r, c)] * amps[base + oc];
            }
            out[base + or] = acc;
        }
    }
    out
}

/// Embed a matrix on `slots` into the full space of `shape` (identity on the
/// other slots).
pub fn embed(local: &DMatrix<C64>, slots: &[usize], shape: &[usize]) -> DMatrix<C64> {
    let n: usize = shape.iter().product();
    let (targeted, spectators) = slot_offsets(slots, shape);
    let mut m = DMatrix::zeros(n, n);
    for &base in &spectators {
        for (r, &or) in targeted.iter().enumerate() {
            for (c, &oc) in targeted.iter().enumerate() {
                m[(base + or, base + oc)] = local[(r, c)];
            }
        }
    }
    m
}

/// Kronecker product `a (x) b`, consistent with row-major flat indices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut m = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    m[(i * br + k, j * bc + l)] = x * b[(k, l)];
                }
            }
        }
    }
    m
}

/// Sum of a full-space diagonal and slot-local operators, applied without
/// forming the full matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSum {
    shape: Vec<usize>,
    diagonal: Vec<f64>,
    locals: Vec<LinearOperator>,
}

impl OperatorSum {
    pub fn new(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        OperatorSum { shape, diagonal: vec![0.0; n], locals: Vec::new() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Add `f(multi_index)` on the diagonal.
    pub fn add_diagonal(&mut self, f: impl Fn(&[usize]) -> f64) {
        for (i, d) in self.diagonal.iter_mut().enumerate() {
            *d += f(&multi_index(&self.shape, i));
        }
    }

    pub fn add_local(&mut self, op: LinearOperator) -> Result<()> {
        if op.domain_shape != self.shape {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), found: op.domain_shape.clone() });
        }
        self.locals.push(op);
        Ok(())
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.shape != self.shape {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), found: v.shape.clone() });
        }
        let mut amps: Vec<C64> = v.amps.iter().zip(&self.diagonal).map(|(a, d)| a * d).collect();
        for op in &self.locals {
            let part = apply_on_slots(&op.matrix, &op.slots, &op.domain_shape, &v.amps);
            for (a, p) in amps.iter_mut().zip(part) {
                *a += p;
            }
        }
        Ok(StateVector { amps, normalization: Normalization::Unnormalized, ..v.clone() })
    }

    /// Dense matrix on the whole space.
    pub fn to_operator(&self) -> LinearOperator {
        let n = self.diagonal.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, d) in self.diagonal.iter().enumerate() {
            m[(i, i)] = C64::new(*d, 0.0);
        }
        let mut hermitian = true;
        for op in &self.locals {
            m += embed(&op.matrix, &op.slots, &op.domain_shape);
            hermitian &= op.hermitian;
        }
        LinearOperator { matrix: m, domain_shape: self.shape.clone(), slots: (0..self.shape.len()).collect(), hermitian }
    }
}

/// Eigendecomposition of a Hermitian operator, reusable for many times.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    domain_shape: Vec<usize>,
    slots: Vec<usize>,
}

impl Propagator {
    pub fn new(h: &LinearOperator) -> Result<Self> {
        let deviation = hermitian_deviation(&h.matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        // Symmetrize so rounding in the input cannot leak into the spectrum.
        let sym = (&h.matrix + h.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        Ok(Propagator {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            domain_shape: h.domain_shape.clone(),
            slots: h.slots.clone(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `exp(-iHt)` as a matrix on the targeted slots.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let ph = C64::from_polar(1.0, -lam * t);
            for i in 0..n {
                scaled[(i, j)] *= ph;
            }
        }
        scaled * v.adjoint()
    }

    pub fn apply(&self, t: f64, v: &StateVector) -> Result<StateVector> {
        if v.shape != self.domain_shape {
            return Err(Error::ShapeMismatch { expected: self.domain_shape.clone(), found: v.shape.clone() });
        }
        // V diag(e^{-i lambda t}) V^dagger, applied factor by factor
        let (targeted, spectators) = slot_offsets(&self.slots, &self.domain_shape);
        let v_mat = &self.eigenvectors;
        let phases: Vec<C64> = self.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, -lam * t)).collect();
        let mut amps = v.amps.clone();
        let n = targeted.len();
        let mut coef = vec![C64::new(0.0, 0.0); n];
        for &base in &spectators {
            for (j, c) in coef.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (i, &oi) in targeted.iter().enumerate() {
                    acc += v_mat[(i, j)].conj() * v.amps[base + oi];
                }
                *c = acc * phases[j];
            }
            for (i, &oi) in targeted.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, c) in coef.iter().enumerate() {
                    acc += v_mat[(i, j)] * c;
                }
                amps[base + oi] = acc;
            }
        }
        Ok(StateVector { amps, ..v.clone() })
    }
}

/// `exp(-iHt) v`.
pub fn evolve(h: &LinearOperator, t: f64, v: &StateVector) -> Result<StateVector> {
    Propagator::new(h)?.apply(t, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn v(amps: &[C64]) -> StateVector {
        StateVector::from_amplitudes(amps.to_vec(), vec![amps.len()]).unwrap()
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let a = v(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = v(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let ab = tensor(&a, &b);
        assert_eq!(ab.shape(), &[2, 2]);
        assert_eq!(ab.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn tensor_plus_minus() {
        let s = 1.0 / 2f64.sqrt();
        let ab = tensor(&v(&[c(s, 0.0), c(s, 0.0)]), &v(&[c(s, 0.0), c(-s, 0.0)]));
        let want = [0.5, -0.5, 0.5, -0.5];
        for (x, w) in ab.amplitudes().iter().zip(want) {
            assert!((x - c(w, 0.0)).norm() < 1e-15);
        }
        assert_eq!(ab.normalization(), Normalization::Unit);
    }

    #[test]
    fn inner_products() {
        let s = 1.0 / 2f64.sqrt();
        let a = v(&[c(s, 0.0), c(0.0, s)]);
        assert!((inner(&a, &a).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let e0 = v(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let e1 = v(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(inner(&e0, &e1).unwrap(), c(0.0, 0.0));
        let e3 = v(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(inner(&e0, &e3), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn condition_basis() {
        let e0 = v(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let e1 = v(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let w = v(&[c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 1.0)]);
        let g = tensor(&e0, &w);
        let r = condition(&g, 0, &e0).unwrap();
        assert_eq!(r.amplitudes(), w.amplitudes());
        let z = condition(&g, 0, &e1).unwrap();
        assert!(z.norm() == 0.0);
        assert!(matches!(condition(&g, 2, &e0), Err(Error::SlotOutOfRange { .. })));
    }

    #[test]
    fn condition_middle_slot() {
        let a = v(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let b = v(&[c(0.0, 1.0), c(3.0, 0.0), c(1.0, 1.0)]);
        let d = v(&[c(5.0, 0.0), c(0.0, -1.0)]);
        let g = tensor(&tensor(&a, &b), &d);
        let bra = v(&[c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)]);
        let r = condition(&g, 1, &bra).unwrap();
        let k = inner(&bra, &b).unwrap();
        let want = tensor(&a, &d).scale(k);
        assert!(r.sub(&want).unwrap().norm() < 1e-13);
    }

    #[test]
    fn evolve_phase_and_identity() {
        let h = LinearOperator::diagonal_fn(vec![2], |i| [0.7, -1.3][i[0]]);
        let e0 = v(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let out = evolve(&h, 2.5, &e0).unwrap();
        assert!((out.amplitudes()[0] - C64::from_polar(1.0, -0.7 * 2.5)).norm() < 1e-14);
        let same = evolve(&h, 0.0, &e0).unwrap();
        assert!(same.sub(&e0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let op = LinearOperator::new(m, vec![2], vec![0]).unwrap();
        let e0 = v(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(evolve(&op, 1.0, &e0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn slot_operator_matches_kron() {
        let shape = vec![2, 3];
        let local = DMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let op = LinearOperator::new(local.clone(), shape.clone(), vec![1]).unwrap();
        let full = kron(&DMatrix::identity(2, 2), &local);
        assert_eq!(op.to_full().matrix(), &full);
        let first = LinearOperator::new(DMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64)), shape, vec![0]).unwrap();
        let want = kron(&DMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64)), &DMatrix::identity(3, 3));
        assert_eq!(first.to_full().matrix(), &want);
    }

    #[test]
    fn index_round_trip() {
        let shape = [3, 4, 2];
        for f in 0..24 {
            assert_eq!(flat_index(&shape, &multi_index(&shape, f)), f);
        }
    }
}
