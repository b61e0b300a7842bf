//! Closed-form dynamics of both ideal protocols.
//!
//! These are the independent reference the numerical integrator is checked
//! against, and the source of the stage-1 transfer times.

use crate::error::{Error, Result};
use crate::hilbert::{AtomLevel, HilbertLayout, Ket, QubitLevel, NORM_TOL};
use crate::model::ProtocolKind;
use crate::scalar::{cis, im, re, Real, C};
use crate::BlochAngle;

/// Resonant transfer time `τ_R = (2/λ̃) arcsin((λ̃⁴ / 4λ_i²λ_sq²)^{1/4})`.
///
/// The argument of the arcsine exceeds one unless `λ_i = λ_sq`, so only the
/// equal-coupling case yields a real time, `π/(√2 λ)`.
pub fn resonant_transfer_time<T: Real>(lambda_i: T, lambda_sq: T) -> Result<T> {
    let lambda_tilde = lambda_i.hypot(lambda_sq);
    if lambda_tilde == T::zero() {
        return Err(Error::DegenerateModel("both couplings vanish".into()));
    }
    let scale = lambda_i.abs().max(lambda_sq.abs());
    let equal = (lambda_i - lambda_sq).abs() <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) * scale;
    if equal {
        // arcsin(1) = π/2
        return Ok(T::PI() / lambda_tilde);
    }
    let no_solution = || Error::NoRealTransferTime { lambda_i: lambda_i.as_f64(), lambda_sq: lambda_sq.as_f64() };
    let denom = T::lit(4.0) * lambda_i * lambda_i * lambda_sq * lambda_sq;
    if denom == T::zero() {
        return Err(no_solution());
    }
    let arg = (lambda_tilde.powi(4) / denom).sqrt().sqrt();
    if arg > T::one() {
        return Err(no_solution());
    }
    Ok(T::lit(2.0) / lambda_tilde * arg.asin())
}

/// Dispersive transfer time from `χ τ_D = π/2`.
pub fn dispersive_transfer_time<T: Real>(chi: T) -> Result<T> {
    if chi == T::zero() || !chi.is_finite() {
        return Err(Error::DegenerateModel(format!("effective coupling chi = {chi}")));
    }
    Ok(T::FRAC_PI_2() / chi.abs())
}

/// Amplitudes of `c_e|r,0,ẽ⟩ + c_g|r,0,g̃⟩ + α₁|r,1,g̃⟩ + α₀|s,0,g̃⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonantCoefficients<T> {
    pub c_e: C<T>,
    pub c_g: C<T>,
    pub alpha_1: C<T>,
    pub alpha_0: C<T>,
    pub lambda_tilde: T,
}

impl<T: Real> ResonantCoefficients<T> {
    pub fn norm_sqr(&self) -> T {
        self.c_e.norm_sqr() + self.c_g.norm_sqr() + self.alpha_1.norm_sqr() + self.alpha_0.norm_sqr()
    }

    /// Full state vector on `layout`.
    pub fn state_ket(&self, layout: HilbertLayout) -> Ket<T> {
        let (r, s) = (AtomLevel::R.index(), AtomLevel::S.index());
        let (g, e) = (QubitLevel::Ground.index(), QubitLevel::Excited.index());
        let mut ket = Ket::zeros(layout.total_dim());
        ket[layout.index(r, 0, e)] = self.c_e;
        ket[layout.index(r, 0, g)] = self.c_g;
        ket[layout.index(r, 1, g)] = self.alpha_1;
        ket[layout.index(s, 0, g)] = self.alpha_0;
        ket
    }
}

/// Resonant stage-1 state at time `t`, starting from `|r,0⟩ ⊗ |sq⟩`.
pub fn resonant_coefficients<T: Real>(
    lambda_i: T,
    lambda_sq: T,
    bloch: BlochAngle<T>,
    t: T,
) -> Result<ResonantCoefficients<T>> {
    let lambda_tilde = lambda_i.hypot(lambda_sq);
    if lambda_tilde == T::zero() {
        return Err(Error::DegenerateModel("both couplings vanish".into()));
    }
    if t < T::zero() {
        return Err(Error::Parameter(format!("time must be >= 0, got {t}")));
    }
    let two = T::lit(2.0);
    let cos_half = (bloch.theta / two).cos();
    let sin_half = (bloch.theta / two).sin();
    let lt2 = lambda_tilde * lambda_tilde;
    let phase = lambda_tilde * t;
    let c_e = cos_half * (lambda_sq * lambda_sq * phase.cos() + lambda_i * lambda_i) / lt2;
    let alpha_1 = -cos_half * lambda_sq * phase.sin() / lambda_tilde;
    let half_sin = (phase / two).sin();
    let alpha_0 = -cos_half * two * lambda_i * lambda_sq / lt2 * half_sin * half_sin;
    Ok(ResonantCoefficients {
        c_e: re(c_e),
        c_g: cis(bloch.phi) * sin_half,
        alpha_1: im(alpha_1),
        alpha_0: re(alpha_0),
        lambda_tilde,
    })
}

/// `(c_ẽn, c_g̃n, c_sn)` for one Fock index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveTerm<T> {
    pub c_excited: C<T>,
    pub c_ground: C<T>,
    pub c_s: C<T>,
}

/// `Σ_n c_ẽn|r,n,ẽ⟩ + c_g̃n|r,n,g̃⟩ + c_sn|s,n,g̃⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersiveCoefficients<T> {
    pub terms: Vec<DispersiveTerm<T>>,
}

impl<T: Real> DispersiveCoefficients<T> {
    pub fn norm_sqr(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, c| acc + c.c_excited.norm_sqr() + c.c_ground.norm_sqr() + c.c_s.norm_sqr())
    }

    pub fn state_ket(&self, layout: HilbertLayout) -> Result<Ket<T>> {
        if self.terms.len() > layout.fock_dim() {
            return Err(Error::DimensionMismatch { expected: layout.fock_dim(), found: self.terms.len() });
        }
        let (r, s) = (AtomLevel::R.index(), AtomLevel::S.index());
        let (g, e) = (QubitLevel::Ground.index(), QubitLevel::Excited.index());
        let mut ket = Ket::zeros(layout.total_dim());
        for (n, c) in self.terms.iter().enumerate() {
            ket[layout.index(r, n, e)] = c.c_excited;
            ket[layout.index(r, n, g)] = c.c_ground;
            ket[layout.index(s, n, g)] = c.c_s;
        }
        Ok(ket)
    }
}

/// Stage-1 state under the effective dispersive Hamiltonian, starting from
/// `|r⟩ ⊗ Σ a_n|n⟩ ⊗ |sq⟩`.
pub fn dispersive_coefficients<T: Real>(
    chi: T,
    bloch: BlochAngle<T>,
    fock_amplitudes: &[C<T>],
    t: T,
) -> Result<DispersiveCoefficients<T>> {
    let norm = fock_amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    if (norm - T::one()).abs() > crate::hilbert::tol(NORM_TOL) {
        return Err(Error::Parameter(format!("resonator amplitudes not normalized (Σ|a_n|² = {norm})")));
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let cos_half = (bloch.theta / two).cos();
    let sin_half = (bloch.theta / two).sin();
    let rot = cis(-two * chi * t);
    let one = re(T::one());
    let terms = fock_amplitudes
        .iter()
        .enumerate()
        .map(|(n, &a)| DispersiveTerm {
            c_excited: a * (rot + one) * (half * cos_half),
            c_ground: a * cis(two * T::from_usize_lossy(n) * chi * t + bloch.phi) * sin_half,
            c_s: a * (rot - one) * (half * cos_half),
        })
        .collect();
    Ok(DispersiveCoefficients { terms })
}

/// Atomic amplitudes `[g, e, r, s]` after an ideal, resonator-free laser
/// pulse with areas `ΩT` on `e ↔ s` and `Ω̃T` on `g ↔ r`.
pub fn laser_pulse<T: Real>(atom: [C<T>; 4], area: T, area_tilde: T) -> [C<T>; 4] {
    let [g, e, r, s] = atom;
    // exp(−iθσ_x) = cos θ − i sin θ σ_x
    let (c1, s1) = (re(area.cos()), im(-area.sin()));
    let (c2, s2) = (re(area_tilde.cos()), im(-area_tilde.sin()));
    [c2 * g + s2 * r, c1 * e + s1 * s, s2 * g + c2 * r, s1 * e + c1 * s]
}

/// Atomic state `[g, e, r, s]` at the end of the ideal protocol.
///
/// Both protocols leave `e^{iφ} sin(θ/2)|r⟩ − cos(θ/2)|s⟩` after stage 1
/// (vacuum or even-parity resonator), and the `π/2`, `3π/2` pulses map this
/// to `i[cos(θ/2)|e⟩ + e^{iφ} sin(θ/2)|g⟩]`.
pub fn ideal_final_state<T: Real>(kind: ProtocolKind, bloch: BlochAngle<T>) -> [C<T>; 4] {
    let two = T::lit(2.0);
    let cos_half = (bloch.theta / two).cos();
    let sin_half = (bloch.theta / two).sin();
    let zero = re(T::zero());
    let after_stage_one = match kind {
        // Both stage-1 maps coincide on the vacuum: c_e = α₁ = 0, α₀ = −cos(θ/2)
        // for the resonant case, c_ẽ0 = 0, c_s0 = −cos(θ/2) for the dispersive one.
        ProtocolKind::Resonant | ProtocolKind::Dispersive => {
            [zero, zero, cis(bloch.phi) * sin_half, re(-cos_half)]
        }
    };
    laser_pulse(after_stage_one, T::FRAC_PI_2(), T::lit(3.0) * T::FRAC_PI_2())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParityReport {
    pub factorizable: bool,
    pub parity: Parity,
}

/// Whether a resonator state factorizes out at `τ_D` (definite photon parity).
pub fn parity_factorization_check<T: Real>(fock_amplitudes: &[C<T>]) -> ParityReport {
    let threshold = T::lit(1e-12);
    let vanishes = |odd: bool| {
        fock_amplitudes
            .iter()
            .enumerate()
            .filter(|(n, _)| (n % 2 == 1) == odd)
            .all(|(_, a)| a.norm() <= threshold)
    };
    let parity = if vanishes(true) {
        Parity::Even
    } else if vanishes(false) {
        Parity::Odd
    } else {
        Parity::Mixed
    };
    ParityReport { factorizable: parity != Parity::Mixed, parity }
}
