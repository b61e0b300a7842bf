//! Target states, transfer fidelity and observables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, AtomLevel, DensityMatrix, HilbertLayout, QubitLevel, Subsystem};
use crate::scalar::{cis, re, Real, C};
use crate::BlochAngle;

/// Phase convention of the target state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFrame {
    /// `cos(θ/2)|e⟩ + e^{iφ} sin(θ/2)|g⟩`.
    Standard,
    /// As `Standard`, with the `|g⟩` amplitude multiplied by `i`.
    RotatedGround,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetState<T> {
    /// Amplitudes over `[g, e, r, s]`; the Rydberg entries are always zero.
    pub amplitudes: [C<T>; 4],
    pub frame: TargetFrame,
}

impl<T: Real> TargetState<T> {
    /// Same state with a global phase `e^{iα}`.
    pub fn with_global_phase(&self, alpha: T) -> Self {
        let p = cis(alpha);
        Self { amplitudes: self.amplitudes.map(|a| a * p), frame: self.frame }
    }
}

pub fn target_state<T: Real>(bloch: BlochAngle<T>, frame: TargetFrame) -> TargetState<T> {
    let half = bloch.theta / T::lit(2.0);
    let mut ground = cis(bloch.phi) * half.sin();
    if frame == TargetFrame::RotatedGround {
        ground = ground * C::new(T::zero(), T::one());
    }
    let zero = re(T::zero());
    let mut amplitudes = [zero; 4];
    amplitudes[AtomLevel::G.index()] = ground;
    amplitudes[AtomLevel::E.index()] = re(half.cos());
    TargetState { amplitudes, frame }
}

/// `√⟨target|ρ_at|target⟩` for a reduced 4×4 atomic state.
pub fn fidelity<T: Real>(rho_at: &DensityMatrix<T>, target: &TargetState<T>) -> Result<T> {
    if rho_at.dim() != HilbertLayout::ATOM_DIM {
        return Err(Error::DimensionMismatch { expected: HilbertLayout::ATOM_DIM, found: rho_at.dim() });
    }
    Ok(overlap(rho_at, target).max(T::zero()).sqrt())
}

/// `⟨target|ρ_at|target⟩`, linear in `ρ_at`.
pub(crate) fn overlap<T: Real>(rho_at: &DensityMatrix<T>, target: &TargetState<T>) -> T {
    let m = rho_at.entries();
    let t = &target.amplitudes;
    let mut acc = re(T::zero());
    for i in 0..4 {
        for j in 0..4 {
            acc += t[i].conj() * m[[i, j]] * t[j];
        }
    }
    acc.re
}

/// Fidelity of a full-space state after tracing out resonator and qubit.
pub fn fidelity_of_full<T: Real>(rho: &DensityMatrix<T>, target: &TargetState<T>) -> Result<T> {
    fidelity(&partial_trace(rho, Subsystem::Atom)?, target)
}

/// Expectation values read off a full-space state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observables<T> {
    pub n_mean: T,
    pub p_g: T,
    pub p_e: T,
    pub p_r: T,
    pub p_s: T,
    pub p_qubit_ground: T,
    pub p_qubit_excited: T,
}

pub fn observables<T: Real>(rho: &DensityMatrix<T>) -> Result<Observables<T>> {
    let layout = rho
        .layout()
        .ok_or_else(|| Error::Parameter("observables need a state on the full layout".into()))?;
    let m = rho.entries();
    let mut atom = [T::zero(); 4];
    let mut qubit = [T::zero(); 2];
    let mut n_mean = T::zero();
    for i in 0..layout.total_dim() {
        let p = m[[i, i]].re;
        let (a, n, q) = layout.split(i);
        atom[a] += p;
        qubit[q] += p;
        n_mean += p * T::from_usize_lossy(n);
    }
    Ok(Observables {
        n_mean,
        p_g: atom[AtomLevel::G.index()],
        p_e: atom[AtomLevel::E.index()],
        p_r: atom[AtomLevel::R.index()],
        p_s: atom[AtomLevel::S.index()],
        p_qubit_ground: qubit[QubitLevel::Ground.index()],
        p_qubit_excited: qubit[QubitLevel::Excited.index()],
    })
}
