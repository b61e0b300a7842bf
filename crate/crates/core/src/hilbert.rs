//! Operator algebra on the atom ⊗ resonator ⊗ qubit space.
//!
//! The composite basis is ordered atom-slowest:
//! `index = ((atom · N) + n) · 2 + q`, with atom levels `g, e, r, s`,
//! Fock index `n < N` and qubit levels `g̃, ẽ`.

use std::ops::{Add, AddAssign, Sub};

use nalgebra::DMatrix;
use ndarray::{linalg::kron, Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::{cis, re, Real, C};

pub type Matrix<T> = Array2<C<T>>;
pub type Ket<T> = Array1<C<T>>;

/// Elementwise Hermiticity tolerance for density matrices.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Tolerance on the norm of amplitude vectors handed to state factories.
pub const NORM_TOL: f64 = 1e-10;

/// Tolerance widened to the working precision of `T`.
pub(crate) fn tol<T: Real>(base: f64) -> T {
    T::lit(base).max(T::epsilon() * T::lit(1e3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subsystem {
    Atom,
    Resonator,
    Qubit,
}

/// Atomic levels: low-lying `g`, `e` and Rydberg `r`, `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomLevel {
    G = 0,
    E = 1,
    R = 2,
    S = 3,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 4] = [AtomLevel::G, AtomLevel::E, AtomLevel::R, AtomLevel::S];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Superconducting qubit levels `g̃`, `ẽ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitLevel {
    Ground = 0,
    Excited = 1,
}

impl QubitLevel {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Shape of the three-factor Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertLayout {
    fock_dim: usize,
}

impl HilbertLayout {
    pub const ATOM_DIM: usize = 4;
    pub const QUBIT_DIM: usize = 2;

    pub fn new(fock_dim: usize) -> Result<Self> {
        if fock_dim < 2 {
            return Err(Error::InvalidLayout(fock_dim));
        }
        Ok(Self { fock_dim })
    }

    #[inline]
    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    #[inline]
    pub fn total_dim(&self) -> usize {
        Self::ATOM_DIM * self.fock_dim * Self::QUBIT_DIM
    }

    pub fn dim_of(&self, subsystem: Subsystem) -> usize {
        match subsystem {
            Subsystem::Atom => Self::ATOM_DIM,
            Subsystem::Resonator => self.fock_dim,
            Subsystem::Qubit => Self::QUBIT_DIM,
        }
    }

    /// Flattened index of `|atom, n, q⟩`.
    #[inline]
    pub fn index(&self, atom: usize, n: usize, qubit: usize) -> usize {
        debug_assert!(atom < Self::ATOM_DIM && n < self.fock_dim && qubit < Self::QUBIT_DIM);
        (atom * self.fock_dim + n) * Self::QUBIT_DIM + qubit
    }

    /// Inverse of [`HilbertLayout::index`].
    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize, usize) {
        let qubit = index % Self::QUBIT_DIM;
        let rest = index / Self::QUBIT_DIM;
        (rest / self.fock_dim, rest % self.fock_dim, qubit)
    }

    fn local_index(&self, index: usize, subsystem: Subsystem) -> (usize, usize) {
        // (kept-subsystem index, index of the traced-out remainder)
        let (a, n, q) = self.split(index);
        match subsystem {
            Subsystem::Atom => (a, n * Self::QUBIT_DIM + q),
            Subsystem::Resonator => (n, a * Self::QUBIT_DIM + q),
            Subsystem::Qubit => (q, a * self.fock_dim + n),
        }
    }
}

/// Input state of the superconducting qubit,
/// `cos(θ/2)|ẽ⟩ + e^{iφ} sin(θ/2)|g̃⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochAngle<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> BlochAngle<T> {
    pub fn new(theta: T, phi: T) -> Self {
        Self { theta, phi }
    }

    /// Amplitudes in qubit basis order `[g̃, ẽ]`.
    pub fn qubit_amplitudes(&self) -> [C<T>; 2] {
        let half = self.theta / T::lit(2.0);
        [cis(self.phi) * half.sin(), re(half.cos())]
    }
}

pub fn basis_ket<T: Real>(dim: usize, index: usize) -> Ket<T> {
    let mut v = Ket::zeros(dim);
    v[index] = C::new(T::one(), T::zero());
    v
}

/// `|ket⟩⟨bra|`
pub fn outer<T: Real>(ket: &Ket<T>, bra: &Ket<T>) -> Matrix<T> {
    Array2::from_shape_fn((ket.len(), bra.len()), |(i, j)| ket[i] * bra[j].conj())
}

/// `|to⟩⟨from|` on a `dim`-level system.
pub fn transition<T: Real>(dim: usize, to: usize, from: usize) -> Matrix<T> {
    let mut m = Matrix::zeros((dim, dim));
    m[[to, from]] = C::new(T::one(), T::zero());
    m
}

pub fn identity<T: Real>(dim: usize) -> Matrix<T> {
    Array2::from_shape_fn((dim, dim), |(i, j)| if i == j { re(T::one()) } else { re(T::zero()) })
}

pub fn dagger<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn max_abs<T: Real>(m: &Matrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermiticity_defect<T: Real>(m: &Matrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub(crate) fn trace<T: Real>(m: &Matrix<T>) -> C<T> {
    m.diag().iter().fold(re(T::zero()), |acc, &z| acc + z)
}

fn require_square<T>(m: &Array2<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    Ok(m.nrows())
}

/// Kronecker product, left factor varying slowest.
pub fn tensor<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    require_square(a)?;
    require_square(b)?;
    Ok(kron(a, b))
}

/// Truncated resonator lowering operator, `⟨n−1|a|n⟩ = √n`.
pub fn annihilation<T: Real>(fock_dim: usize) -> Result<Matrix<T>> {
    if fock_dim < 2 {
        return Err(Error::InvalidLayout(fock_dim));
    }
    let mut a = Matrix::zeros((fock_dim, fock_dim));
    for n in 1..fock_dim {
        a[[n - 1, n]] = re(T::from_usize_lossy(n).sqrt());
    }
    Ok(a)
}

/// Dense operator on the full composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeOperator<T> {
    layout: HilbertLayout,
    entries: Matrix<T>,
}

impl<T: Real> CompositeOperator<T> {
    pub fn new(layout: HilbertLayout, entries: Matrix<T>) -> Result<Self> {
        let n = require_square(&entries)?;
        if n != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: n });
        }
        Ok(Self { layout, entries })
    }

    pub fn zeros(layout: HilbertLayout) -> Self {
        let n = layout.total_dim();
        Self { layout, entries: Matrix::zeros((n, n)) }
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        Self { layout, entries: identity(layout.total_dim()) }
    }

    /// `atom ⊗ resonator ⊗ qubit` from three local factors.
    pub fn product(
        layout: HilbertLayout,
        atom: &Matrix<T>,
        resonator: &Matrix<T>,
        qubit: &Matrix<T>,
    ) -> Result<Self> {
        check_local(atom, Subsystem::Atom, &layout)?;
        check_local(resonator, Subsystem::Resonator, &layout)?;
        check_local(qubit, Subsystem::Qubit, &layout)?;
        Self::new(layout, kron(&kron(atom, resonator), qubit))
    }

    #[inline]
    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    #[inline]
    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix<T> {
        self.entries
    }

    #[inline]
    pub fn element(&self, row: usize, col: usize) -> C<T> {
        self.entries[[row, col]]
    }

    pub fn dagger(&self) -> Self {
        Self { layout: self.layout, entries: dagger(&self.entries) }
    }

    /// `max |H − H†|` over all entries.
    pub fn hermiticity_defect(&self) -> T {
        hermiticity_defect(&self.entries)
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.entries)
    }

    pub fn trace(&self) -> C<T> {
        trace(&self.entries)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        Self { layout: self.layout, entries: self.entries.dot(&rhs.entries) }
    }

    /// `[self, rhs]`
    pub fn commutator(&self, rhs: &Self) -> Self {
        let ab = self.entries.dot(&rhs.entries);
        let ba = rhs.entries.dot(&self.entries);
        Self { layout: self.layout, entries: ab - ba }
    }

    pub fn scaled(&self, factor: C<T>) -> Self {
        Self { layout: self.layout, entries: self.entries.mapv(|z| z * factor) }
    }

    pub fn apply(&self, v: &Ket<T>) -> Ket<T> {
        self.entries.dot(v)
    }
}

impl<T: Real> Add<&CompositeOperator<T>> for &CompositeOperator<T> {
    type Output = CompositeOperator<T>;

    fn add(self, rhs: &CompositeOperator<T>) -> CompositeOperator<T> {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        CompositeOperator { layout: self.layout, entries: &self.entries + &rhs.entries }
    }
}

impl<T: Real> Add for CompositeOperator<T> {
    type Output = CompositeOperator<T>;

    fn add(self, rhs: CompositeOperator<T>) -> CompositeOperator<T> {
        &self + &rhs
    }
}

impl<T: Real> Sub<&CompositeOperator<T>> for &CompositeOperator<T> {
    type Output = CompositeOperator<T>;

    fn sub(self, rhs: &CompositeOperator<T>) -> CompositeOperator<T> {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        CompositeOperator { layout: self.layout, entries: &self.entries - &rhs.entries }
    }
}

impl<T: Real> AddAssign<&CompositeOperator<T>> for CompositeOperator<T> {
    fn add_assign(&mut self, rhs: &CompositeOperator<T>) {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        self.entries += &rhs.entries;
    }
}

fn check_local<T: Real>(local: &Matrix<T>, subsystem: Subsystem, layout: &HilbertLayout) -> Result<()> {
    let n = require_square(local)?;
    let expected = layout.dim_of(subsystem);
    if n != expected {
        return Err(Error::DimensionMismatch { expected, found: n });
    }
    Ok(())
}

/// Lifts a single-subsystem operator to the composite space.
pub fn embed<T: Real>(
    local: &Matrix<T>,
    subsystem: Subsystem,
    layout: HilbertLayout,
) -> Result<CompositeOperator<T>> {
    check_local(local, subsystem, &layout)?;
    let ia = identity(HilbertLayout::ATOM_DIM);
    let ir = identity(layout.fock_dim());
    let iq = identity(HilbertLayout::QUBIT_DIM);
    match subsystem {
        Subsystem::Atom => CompositeOperator::product(layout, local, &ir, &iq),
        Subsystem::Resonator => CompositeOperator::product(layout, &ia, local, &iq),
        Subsystem::Qubit => CompositeOperator::product(layout, &ia, &ir, local),
    }
}

/// Density matrix on the full layout or on a single subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    layout: Option<HilbertLayout>,
    entries: Matrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validated density matrix without composite structure (e.g. a reduced state).
    pub fn new(entries: Matrix<T>) -> Result<Self> {
        require_square(&entries)?;
        let rho = Self { layout: None, entries };
        rho.validate()?;
        Ok(rho)
    }

    /// Validated density matrix on the full composite layout.
    pub fn on_layout(layout: HilbertLayout, entries: Matrix<T>) -> Result<Self> {
        let n = require_square(&entries)?;
        if n != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: n });
        }
        let rho = Self { layout: Some(layout), entries };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(layout: Option<HilbertLayout>, entries: Matrix<T>) -> Self {
        Self { layout, entries }
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn from_pure(ket: &Ket<T>) -> Result<Self> {
        check_normalized(ket.as_slice().expect("contiguous ket"), "state")?;
        Self::new(outer(ket, ket))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn layout(&self) -> Option<HilbertLayout> {
        self.layout
    }

    #[inline]
    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix<T> {
        self.entries
    }

    pub fn trace(&self) -> C<T> {
        trace(&self.entries)
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> T {
        // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.entries.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn hermiticity_defect(&self) -> T {
        hermiticity_defect(&self.entries)
    }

    /// Smallest eigenvalue of the Hermitian part, computed in double precision.
    ///
    /// Identically zero rows split off as exact zero eigenvalues; the rest
    /// goes through the real symmetric embedding `[[A, −B], [B, A]]` of
    /// `A + iB`, whose spectrum is that of `A + iB` with multiplicity two.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let herm = |i: usize, j: usize| {
            let a = self.entries[[i, j]];
            let b = self.entries[[j, i]];
            (0.5 * (a.re.as_f64() + b.re.as_f64()), 0.5 * (a.im.as_f64() - b.im.as_f64()))
        };
        let support: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| herm(i, j) != (0.0, 0.0))).collect();
        let k = support.len();
        let floor = if k < n { 0.0 } else { f64::INFINITY };
        if k == 0 {
            return floor;
        }
        let m = DMatrix::from_fn(2 * k, 2 * k, |i, j| {
            let (re, im) = herm(support[i % k], support[j % k]);
            match (i < k, j < k) {
                (true, true) | (false, false) => re,
                (true, false) => -im,
                (false, true) => im,
            }
        });
        m.symmetric_eigenvalues().iter().cloned().fold(floor, f64::min)
    }

    /// `Tr(op · ρ)`
    pub fn expectation(&self, op: &Matrix<T>) -> C<T> {
        let n = self.dim();
        assert_eq!(op.nrows(), n, "operator dimension differs from state");
        let mut acc = re(T::zero());
        for i in 0..n {
            for k in 0..n {
                acc += op[[i, k]] * self.entries[[k, i]];
            }
        }
        acc
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol(HERMITICITY_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - re(T::one())).norm() > tol(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {} + {}i differs from 1", tr.re, tr.im)));
        }
        let lowest = self.min_eigenvalue();
        if lowest < -tol::<T>(POSITIVITY_TOL).as_f64() {
            return Err(Error::InvalidState(format!("negative eigenvalue {lowest:e}")));
        }
        Ok(())
    }
}

/// Reduced state of one subsystem.
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: Subsystem) -> Result<DensityMatrix<T>> {
    let layout = rho
        .layout
        .ok_or_else(|| Error::Parameter("partial trace needs a state on the full layout".into()))?;
    let kept = layout.dim_of(keep);
    let mut out = Matrix::zeros((kept, kept));
    let n = layout.total_dim();
    let m = &rho.entries;
    for i in 0..n {
        let (ki, ri) = layout.local_index(i, keep);
        for j in 0..n {
            let (kj, rj) = layout.local_index(j, keep);
            if ri == rj {
                out[[ki, kj]] += m[[i, j]];
            }
        }
    }
    Ok(DensityMatrix { layout: None, entries: out })
}

/// Geometric photon-number distribution truncated at `fock_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalDistribution<T> {
    /// Raw weights `n̄ⁿ/(n̄+1)ⁿ⁺¹` for `n < fock_dim`.
    pub weights: Vec<T>,
    /// Probability mass beyond the cutoff.
    pub discarded_weight: T,
}

pub fn thermal_distribution<T: Real>(nbar: T, fock_dim: usize) -> Result<ThermalDistribution<T>> {
    if !(nbar >= T::zero()) || !nbar.is_finite() {
        return Err(Error::Parameter(format!("mean thermal photon number must be >= 0, got {nbar}")));
    }
    if fock_dim < 2 {
        return Err(Error::InvalidLayout(fock_dim));
    }
    let ratio = nbar / (nbar + T::one());
    let mut weights = Vec::with_capacity(fock_dim);
    let mut w = T::one() / (nbar + T::one());
    for _ in 0..fock_dim {
        weights.push(w);
        w = w * ratio;
    }
    // tail Σ_{n≥N} p_n = (n̄/(n̄+1))^N
    let discarded_weight = ratio.powi(fock_dim as i32);
    Ok(ThermalDistribution { weights, discarded_weight })
}

/// Resonator thermal state, renormalized after truncation.
pub fn thermal_state<T: Real>(nbar: T, fock_dim: usize) -> Result<DensityMatrix<T>> {
    let dist = thermal_distribution(nbar, fock_dim)?;
    let total = dist.weights.iter().fold(T::zero(), |a, &w| a + w);
    let mut m = Matrix::zeros((fock_dim, fock_dim));
    for (n, w) in dist.weights.iter().enumerate() {
        m[[n, n]] = re(*w / total);
    }
    Ok(DensityMatrix { layout: None, entries: m })
}

fn check_normalized<T: Real>(amps: &[C<T>], what: &str) -> Result<()> {
    let norm = amps.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    if (norm - T::one()).abs() > tol(NORM_TOL) {
        return Err(Error::Parameter(format!("{what} amplitudes not normalized (|ψ|² = {norm})")));
    }
    Ok(())
}

/// Pure product state `|atom⟩ ⊗ |resonator⟩ ⊗ |qubit⟩`.
pub fn pure_state<T: Real>(
    atom: &[C<T>],
    resonator: &[C<T>],
    qubit: &[C<T>],
    layout: HilbertLayout,
) -> Result<DensityMatrix<T>> {
    let ket = product_ket(atom, resonator, qubit, layout)?;
    Ok(DensityMatrix { layout: Some(layout), entries: outer(&ket, &ket) })
}

/// Tensor product ket of three normalized local amplitude vectors.
pub fn product_ket<T: Real>(
    atom: &[C<T>],
    resonator: &[C<T>],
    qubit: &[C<T>],
    layout: HilbertLayout,
) -> Result<Ket<T>> {
    for (amps, sub, name) in [
        (atom, Subsystem::Atom, "atom"),
        (resonator, Subsystem::Resonator, "resonator"),
        (qubit, Subsystem::Qubit, "qubit"),
    ] {
        if amps.len() != layout.dim_of(sub) {
            return Err(Error::DimensionMismatch { expected: layout.dim_of(sub), found: amps.len() });
        }
        check_normalized(amps, name)?;
    }
    let mut ket = Ket::zeros(layout.total_dim());
    for (a, &ca) in atom.iter().enumerate() {
        for (n, &cn) in resonator.iter().enumerate() {
            for (q, &cq) in qubit.iter().enumerate() {
                ket[layout.index(a, n, q)] = ca * cn * cq;
            }
        }
    }
    Ok(ket)
}

/// `ρ_atom ⊗ ρ_resonator ⊗ ρ_qubit`.
pub fn product_state<T: Real>(
    atom: &DensityMatrix<T>,
    resonator: &DensityMatrix<T>,
    qubit: &DensityMatrix<T>,
    layout: HilbertLayout,
) -> Result<DensityMatrix<T>> {
    let op = CompositeOperator::product(layout, &atom.entries, &resonator.entries, &qubit.entries)?;
    Ok(DensityMatrix { layout: Some(layout), entries: op.into_entries() })
}

/// Unit vector over a local basis, handy for [`pure_state`].
pub fn unit_amplitudes<T: Real>(dim: usize, index: usize) -> Vec<C<T>> {
    basis_ket::<T>(dim, index).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn layout(n: usize) -> HilbertLayout {
        HilbertLayout::new(n).unwrap()
    }

    fn diag(values: &[f64]) -> Matrix<f64> {
        let mut m = Matrix::zeros((values.len(), values.len()));
        for (i, v) in values.iter().enumerate() {
            m[[i, i]] = re(*v);
        }
        m
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let t = tensor(&identity::<f64>(2), &identity(3)).unwrap();
        assert_eq!(t, identity(6));
    }

    #[test]
    fn tensor_keeps_left_factor_slowest() {
        let t = tensor(&diag(&[1.0, 2.0]), &identity(2)).unwrap();
        assert_eq!(t, diag(&[1.0, 1.0, 2.0, 2.0]));
    }

    #[test]
    fn tensor_rejects_non_square() {
        let bad = Matrix::<f64>::zeros((2, 3));
        assert!(matches!(tensor(&bad, &identity(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn atom_transition_moves_basis_vector() {
        let l = layout(3);
        let e_s = embed(&transition::<f64>(4, AtomLevel::E.index(), AtomLevel::S.index()), Subsystem::Atom, l).unwrap();
        let v = basis_ket::<f64>(l.total_dim(), l.index(3, 0, 0));
        let out = e_s.apply(&v);
        assert_eq!(out, basis_ket(l.total_dim(), l.index(1, 0, 0)));
        // index arithmetic: ((1·3)+0)·2+0 = 6
        assert_eq!(l.index(1, 0, 0), 6);
    }

    #[test]
    fn split_inverts_index() {
        let l = layout(5);
        for i in 0..l.total_dim() {
            let (a, n, q) = l.split(i);
            assert_eq!(l.index(a, n, q), i);
        }
    }

    #[test]
    fn annihilation_matrix_elements() {
        let a2 = annihilation::<f64>(2).unwrap();
        assert_eq!(a2, ndarray::array![[re(0.0), re(1.0)], [re(0.0), re(0.0)]]);
        let a3 = annihilation::<f64>(3).unwrap();
        assert_abs_diff_eq!(a3[[1, 2]].re, 2f64.sqrt(), epsilon = 1e-15);
        let n = dagger(&a3).dot(&a3);
        for k in 0..3 {
            assert_abs_diff_eq!(n[[k, k]].re, k as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn annihilation_rejects_tiny_cutoff() {
        assert!(matches!(annihilation::<f64>(1), Err(Error::InvalidLayout(1))));
        assert!(HilbertLayout::new(1).is_err());
    }

    #[test]
    fn embed_identity_and_counting() {
        let l = layout(4);
        let id = embed(&identity::<f64>(4), Subsystem::Atom, l).unwrap();
        assert_eq!(id, CompositeOperator::identity(l));
        let pe = embed(&transition::<f64>(2, 1, 1), Subsystem::Qubit, l).unwrap();
        assert_abs_diff_eq!(pe.trace().re, 16.0, epsilon = 1e-14);
        assert!(embed(&identity::<f64>(3), Subsystem::Qubit, l).is_err());
    }

    #[test]
    fn truncated_commutator_fails_only_at_top_level() {
        let n = 5;
        let l = layout(n);
        let a = embed(&annihilation::<f64>(n).unwrap(), Subsystem::Resonator, l).unwrap();
        let comm = a.commutator(&a.dagger());
        for i in 0..l.total_dim() {
            let (_, k, _) = l.split(i);
            // [a, a†] = 1 below the cutoff, 1 − N at the top level
            let expected = if k == n - 1 { 1.0 - n as f64 } else { 1.0 };
            assert_abs_diff_eq!(comm.element(i, i).re, expected, epsilon = 1e-13);
        }
        let off = comm.entries().indexed_iter().filter(|((i, j), _)| i != j).fold(0.0f64, |m, (_, z)| m.max(z.norm()));
        assert!(off < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let l = layout(3);
        let atom = DensityMatrix::new(diag(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let res = thermal_state(0.5, 3).unwrap();
        let q = DensityMatrix::new(diag(&[0.25, 0.75])).unwrap();
        let rho = product_state(&atom, &res, &q, l).unwrap();
        let back = partial_trace(&rho, Subsystem::Atom).unwrap();
        for (x, y) in back.entries().iter().zip(atom.entries().iter()) {
            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-14);
        }
        let back_r = partial_trace(&rho, Subsystem::Resonator).unwrap();
        assert_abs_diff_eq!(back_r.entries()[[1, 1]].re, res.entries()[[1, 1]].re, epsilon = 1e-14);
        let back_q = partial_trace(&rho, Subsystem::Qubit).unwrap();
        assert_abs_diff_eq!(back_q.entries()[[1, 1]].re, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_state() {
        let l = layout(2);
        let s = 0.5f64.sqrt();
        let mut ket = Ket::zeros(l.total_dim());
        ket[l.index(AtomLevel::R.index(), 0, QubitLevel::Excited.index())] = re(s);
        ket[l.index(AtomLevel::S.index(), 0, QubitLevel::Ground.index())] = re(s);
        let rho = DensityMatrix::on_layout(l, outer(&ket, &ket)).unwrap();
        let at = partial_trace(&rho, Subsystem::Atom).unwrap();
        assert_abs_diff_eq!(at.entries()[[2, 2]].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(at.entries()[[3, 3]].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(at.entries()[[2, 3]].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(at.trace().re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn thermal_vacuum_limit() {
        let rho = thermal_state(0.0f64, 6).unwrap();
        assert_eq!(rho.entries()[[0, 0]], re(1.0));
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn thermal_weights_and_tail() {
        let d = thermal_distribution(0.6f64, 12).unwrap();
        assert_abs_diff_eq!(d.weights[0], 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(d.weights[1], 0.6 / 2.56, epsilon = 1e-15);
        assert!((d.weights[1] - 0.2344).abs() < 1e-4);
        assert!(d.discarded_weight < 1e-4);
        let rho = thermal_state(0.6f64, 12).unwrap();
        assert!((rho.trace().re - 1.0).abs() <= 1e-8);
        rho.validate().unwrap();
        assert!(thermal_state(-0.1f64, 4).is_err());
    }

    #[test]
    fn thermal_diagonal_strictly_decreasing() {
        let rho = thermal_state(2.5f64, 10).unwrap();
        for n in 1..10 {
            assert!(rho.entries()[[n, n]].re < rho.entries()[[n - 1, n - 1]].re);
        }
    }

    #[test]
    fn pure_state_basis_projector() {
        let l = layout(4);
        let rho = pure_state(
            &unit_amplitudes::<f64>(4, AtomLevel::R.index()),
            &unit_amplitudes(4, 0),
            &unit_amplitudes(2, QubitLevel::Excited.index()),
            l,
        )
        .unwrap();
        let idx = (2 * 4) * 2 + 1;
        assert_eq!(rho.entries()[[idx, idx]], re(1.0));
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_state_equal_superposition() {
        let l = layout(3);
        let bloch = BlochAngle::new(std::f64::consts::FRAC_PI_2, 0.0);
        let rho = pure_state(&unit_amplitudes(4, 2), &unit_amplitudes(3, 0), &bloch.qubit_amplitudes(), l).unwrap();
        let ie = l.index(2, 0, 1);
        let ig = l.index(2, 0, 0);
        for (i, j) in [(ie, ie), (ig, ig), (ie, ig), (ig, ie)] {
            assert_abs_diff_eq!(rho.entries()[[i, j]].re, 0.5, epsilon = 1e-15);
        }
        rho.validate().unwrap();
    }

    #[test]
    fn pure_state_rejects_unnormalized() {
        let l = layout(2);
        let err = pure_state(&[re(1.0), re(1.0), re(0.0), re(0.0)], &unit_amplitudes(2, 0), &unit_amplitudes(2, 0), l);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn density_validation_catches_violations() {
        assert!(DensityMatrix::new(diag(&[0.5, 0.6])).is_err());
        assert!(DensityMatrix::new(diag(&[1.2, -0.2])).is_err());
        let mut m = diag(&[0.5, 0.5]);
        m[[0, 1]] = C::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }
}
