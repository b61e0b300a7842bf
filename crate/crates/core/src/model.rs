//! Interaction-picture generators, dissipation channels and protocol timing.
//!
//! All rates and couplings are angular frequencies in rad/µs; times are µs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, dagger, embed, identity, transition, AtomLevel, CompositeOperator, HilbertLayout,
    Matrix, QubitLevel, Subsystem,
};
use crate::scalar::{cis, re, Real};

/// Converts an ordinary frequency in MHz to rad/µs.
pub fn angular<T: Real>(freq_mhz: T) -> T {
    T::TAU() * freq_mhz
}

/// Physical parameters of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub lambda_i: T,
    pub lambda_sq: T,
    /// Ω, drives `|e⟩ ↔ |s⟩`.
    pub omega_laser: T,
    /// Ω̃, drives `|g⟩ ↔ |r⟩`.
    pub omega_laser_tilde: T,
    pub delta: T,
    pub kappa: T,
    pub gamma_r: T,
    pub gamma_s: T,
    pub gamma_sq: T,
    pub gamma_phi: T,
    pub nbar: T,
    pub fock_dim: usize,
}

impl<T: Real> ModelParams<T> {
    pub const DEFAULT_FOCK_DIM: usize = 10;
    pub const THERMAL_FOCK_DIM: usize = 15;

    /// Ideal scenario with equal couplings, `Ω̃ = 3Ω` and no detuning.
    pub fn new(lambda: T, omega: T) -> Self {
        Self {
            lambda_i: lambda,
            lambda_sq: lambda,
            omega_laser: omega,
            omega_laser_tilde: T::lit(3.0) * omega,
            delta: T::zero(),
            kappa: T::zero(),
            gamma_r: T::zero(),
            gamma_s: T::zero(),
            gamma_sq: T::zero(),
            gamma_phi: T::zero(),
            nbar: T::zero(),
            fock_dim: Self::DEFAULT_FOCK_DIM,
        }
    }

    pub fn with_detuning(mut self, delta: T) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_fock_dim(mut self, fock_dim: usize) -> Self {
        self.fock_dim = fock_dim;
        self
    }

    /// Sets `κ, γ_r, γ_s, γ_sq, γ_φ`.
    pub fn with_rates(mut self, kappa: T, gamma_r: T, gamma_s: T, gamma_sq: T, gamma_phi: T) -> Self {
        self.kappa = kappa;
        self.gamma_r = gamma_r;
        self.gamma_s = gamma_s;
        self.gamma_sq = gamma_sq;
        self.gamma_phi = gamma_phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_i", self.lambda_i),
            ("lambda_sq", self.lambda_sq),
            ("omega_laser", self.omega_laser),
            ("omega_laser_tilde", self.omega_laser_tilde),
            ("kappa", self.kappa),
            ("gamma_r", self.gamma_r),
            ("gamma_s", self.gamma_s),
            ("gamma_sq", self.gamma_sq),
            ("gamma_phi", self.gamma_phi),
            ("nbar", self.nbar),
        ];
        for (name, value) in named {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(Error::Parameter(format!("{name} must be a finite value >= 0, got {value}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::Parameter("delta must be finite".into()));
        }
        HilbertLayout::new(self.fock_dim)?;
        Ok(())
    }

    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::new(self.fock_dim)
    }

    /// `λ̃ = √(λ_i² + λ_sq²)`
    pub fn lambda_tilde(&self) -> T {
        self.lambda_i.hypot(self.lambda_sq)
    }

    pub fn couplings_equal(&self) -> bool {
        let scale = self.lambda_i.abs().max(self.lambda_sq.abs()).max(T::min_positive_value());
        (self.lambda_i - self.lambda_sq).abs() <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) * scale
    }

    /// Common coupling `λ`, requiring `λ_i = λ_sq`.
    pub fn common_coupling(&self) -> Result<T> {
        if !self.couplings_equal() {
            return Err(Error::Configuration(format!(
                "dispersive model requires lambda_i = lambda_sq (got {} and {})",
                self.lambda_i, self.lambda_sq
            )));
        }
        Ok(self.lambda_i)
    }

    /// `χ = λ²/δ`
    pub fn chi(&self) -> Result<T> {
        let lambda = self.common_coupling()?;
        if self.delta == T::zero() {
            return Err(Error::Configuration("dispersive coupling needs delta != 0".into()));
        }
        Ok(lambda * lambda / self.delta)
    }

    pub fn is_dissipative(&self) -> bool {
        [self.kappa, self.gamma_r, self.gamma_s, self.gamma_sq, self.gamma_phi]
            .iter()
            .any(|&r| r > T::zero())
    }

    /// Fastest frequency (in MHz) present in the generator.
    pub fn fastest_frequency(&self) -> T {
        self.lambda_tilde()
            .max(self.omega_laser)
            .max(self.omega_laser_tilde)
            .max(self.delta.abs())
            .max(self.kappa)
            / T::TAU()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Resonant,
    Dispersive,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Resonant => "resonant",
            ProtocolKind::Dispersive => "dispersive",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resonant" => Ok(Self::Resonant),
            "dispersive" => Ok(Self::Dispersive),
            other => Err(Error::Configuration(format!("unknown protocol kind '{other}'"))),
        }
    }
}

/// Stage-1 duration `tau`, laser pulse length `pulse` and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolSchedule<T> {
    pub kind: ProtocolKind,
    pub tau: T,
    pub pulse: T,
    pub total: T,
}

impl<T: Real> ProtocolSchedule<T> {
    pub fn new(kind: ProtocolKind, tau: T, pulse: T) -> Self {
        Self { kind, tau, pulse, total: tau + pulse }
    }
}

pub fn make_schedule<T: Real>(params: &ModelParams<T>, kind: ProtocolKind) -> Result<ProtocolSchedule<T>> {
    params.validate()?;
    if params.omega_laser <= T::zero() {
        return Err(Error::Configuration("laser Rabi frequency must be > 0".into()));
    }
    let tau = match kind {
        ProtocolKind::Resonant => analytic::resonant_transfer_time(params.lambda_i, params.lambda_sq)?,
        ProtocolKind::Dispersive => analytic::dispersive_transfer_time(params.chi()?)?,
    };
    // Ω T = π/2
    let pulse = T::FRAC_PI_2() / params.omega_laser;
    Ok(ProtocolSchedule::new(kind, tau, pulse))
}

fn atom_op<T: Real>(to: AtomLevel, from: AtomLevel) -> Matrix<T> {
    transition(HilbertLayout::ATOM_DIM, to.index(), from.index())
}

fn qubit_op<T: Real>(to: QubitLevel, from: QubitLevel) -> Matrix<T> {
    transition(HilbertLayout::QUBIT_DIM, to.index(), from.index())
}

/// `a† |r⟩⟨s|` and `a† |g̃⟩⟨ẽ|`, the photon-emitting halves of both couplings.
fn raising_parts<T: Real>(layout: HilbertLayout) -> Result<(CompositeOperator<T>, CompositeOperator<T>)> {
    let a_dag = dagger(&annihilation::<T>(layout.fock_dim())?);
    let atom = CompositeOperator::product(
        layout,
        &atom_op(AtomLevel::R, AtomLevel::S),
        &a_dag,
        &identity(HilbertLayout::QUBIT_DIM),
    )?;
    let qubit = CompositeOperator::product(
        layout,
        &identity(HilbertLayout::ATOM_DIM),
        &a_dag,
        &qubit_op(QubitLevel::Ground, QubitLevel::Excited),
    )?;
    Ok((atom, qubit))
}

/// Resonant interaction-picture Hamiltonian
/// `λ_i(a†|r⟩⟨s| + h.c.) + λ_sq(a†|g̃⟩⟨ẽ| + h.c.)`.
pub fn h_resonant<T: Real>(params: &ModelParams<T>) -> Result<CompositeOperator<T>> {
    let layout = params.layout()?;
    let (atom, qubit) = raising_parts::<T>(layout)?;
    let atom = &atom + &atom.dagger();
    let qubit = &qubit + &qubit.dagger();
    Ok(&atom.scaled(re(params.lambda_i)) + &qubit.scaled(re(params.lambda_sq)))
}

/// Laser drive `Ω(|e⟩⟨s| + h.c.) + Ω̃(|r⟩⟨g| + h.c.)`.
pub fn h_laser<T: Real>(params: &ModelParams<T>) -> Result<CompositeOperator<T>> {
    let layout = params.layout()?;
    let es = atom_op::<T>(AtomLevel::E, AtomLevel::S) + atom_op(AtomLevel::S, AtomLevel::E);
    let rg = atom_op::<T>(AtomLevel::R, AtomLevel::G) + atom_op(AtomLevel::G, AtomLevel::R);
    let local = es.mapv(|z| z * params.omega_laser) + rg.mapv(|z| z * params.omega_laser_tilde);
    embed(&local, Subsystem::Atom, layout)
}

/// Co-rotating coupling operator `λ a†(|r⟩⟨s| + |g̃⟩⟨ẽ|)`; the detuned
/// Hamiltonian is `e^{iδt}` times this plus its adjoint.
fn detuned_coupling<T: Real>(params: &ModelParams<T>) -> Result<CompositeOperator<T>> {
    let lambda = params.common_coupling()?;
    let (atom, qubit) = raising_parts::<T>(params.layout()?)?;
    Ok((atom + qubit).scaled(re(lambda)))
}

/// Detuned interaction-picture Hamiltonian at time `t`.
pub fn h_dispersive_full<T: Real>(params: &ModelParams<T>, t: T) -> Result<CompositeOperator<T>> {
    let op = detuned_coupling(params)?;
    Ok(Modulation::Rotating(params.delta).apply(&op, t))
}

/// Second-order effective Hamiltonian of the detuned coupling.
///
/// `aa†` is taken as `a†a + 1` so the top Fock level keeps its physical value.
pub fn h_dispersive_effective<T: Real>(params: &ModelParams<T>) -> Result<CompositeOperator<T>> {
    let chi = params.chi()?;
    let layout = params.layout()?;
    let n = layout.fock_dim();
    let a = annihilation::<T>(n)?;
    let number = dagger(&a).dot(&a);
    let number_plus_one = &number + &identity(n);
    let iq = identity(HilbertLayout::QUBIT_DIM);
    let ia = identity(HilbertLayout::ATOM_DIM);

    let ss = atom_op::<T>(AtomLevel::S, AtomLevel::S);
    let rr = atom_op::<T>(AtomLevel::R, AtomLevel::R);
    let ee = qubit_op::<T>(QubitLevel::Excited, QubitLevel::Excited);
    let gg = qubit_op::<T>(QubitLevel::Ground, QubitLevel::Ground);

    let shifts = &(&CompositeOperator::product(layout, &ss, &number_plus_one, &iq)?
        - &CompositeOperator::product(layout, &rr, &number, &iq)?)
        + &(&CompositeOperator::product(layout, &ia, &number_plus_one, &ee)?
            - &CompositeOperator::product(layout, &ia, &number, &gg)?);
    let flip = CompositeOperator::product(
        layout,
        &atom_op(AtomLevel::R, AtomLevel::S),
        &identity(n),
        &qubit_op(QubitLevel::Excited, QubitLevel::Ground),
    )?;
    let exchange = &flip + &flip.dagger();
    Ok((shifts + exchange).scaled(re(chi)))
}

/// Excitation number `a†a + |s⟩⟨s| + |ẽ⟩⟨ẽ|`, conserved by the resonant coupling.
pub fn excitation_number<T: Real>(layout: HilbertLayout) -> Result<CompositeOperator<T>> {
    let a = annihilation::<T>(layout.fock_dim())?;
    let photons = embed(&dagger(&a).dot(&a), Subsystem::Resonator, layout)?;
    let s = embed(&atom_op(AtomLevel::S, AtomLevel::S), Subsystem::Atom, layout)?;
    let e = embed(&qubit_op(QubitLevel::Excited, QubitLevel::Excited), Subsystem::Qubit, layout)?;
    Ok(&(&photons + &s) + &e)
}

/// Time dependence of a Hamiltonian term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulation<T> {
    /// The operator itself, which must be Hermitian.
    Static,
    /// `e^{iωt} O + e^{−iωt} O†`.
    Rotating(T),
}

impl<T: Real> Modulation<T> {
    pub fn apply(&self, op: &CompositeOperator<T>, t: T) -> CompositeOperator<T> {
        match *self {
            Modulation::Static => op.clone(),
            Modulation::Rotating(freq) => {
                let phase = cis(freq * t);
                let forward = op.scaled(phase);
                &forward + &forward.dagger()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerm<T> {
    pub op: CompositeOperator<T>,
    pub modulation: Modulation<T>,
    /// Heaviside switch-on time, with `u(0) = 1`; `None` means always on.
    pub onset: Option<T>,
}

impl<T: Real> HamiltonianTerm<T> {
    pub fn active_at(&self, t: T) -> bool {
        self.onset.is_none_or(|s| t >= s)
    }
}

/// Which stage-1 coupling model to use for the dispersive protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingModel {
    /// The explicitly time-dependent detuned Hamiltonian.
    #[default]
    Microscopic,
    /// The static effective Hamiltonian (validation only).
    Effective,
}

/// Piecewise generator `H(t) = Σ_k u(t − onset_k) · term_k(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolHamiltonian<T> {
    layout: HilbertLayout,
    terms: Vec<HamiltonianTerm<T>>,
}

impl<T: Real> ProtocolHamiltonian<T> {
    pub fn new(layout: HilbertLayout) -> Self {
        Self { layout, terms: Vec::new() }
    }

    pub fn push(&mut self, op: CompositeOperator<T>, modulation: Modulation<T>, onset: Option<T>) -> Result<()> {
        if op.layout() != self.layout {
            return Err(Error::DimensionMismatch { expected: self.layout.total_dim(), found: op.layout().total_dim() });
        }
        self.terms.push(HamiltonianTerm { op, modulation, onset });
        Ok(())
    }

    /// Stage-1 coupling followed by the laser pulse from `schedule.tau` on.
    pub fn for_protocol(params: &ModelParams<T>, schedule: &ProtocolSchedule<T>) -> Result<Self> {
        Self::for_protocol_with(params, schedule, CouplingModel::Microscopic)
    }

    pub fn for_protocol_with(
        params: &ModelParams<T>,
        schedule: &ProtocolSchedule<T>,
        model: CouplingModel,
    ) -> Result<Self> {
        params.validate()?;
        let mut h = Self::new(params.layout()?);
        match (schedule.kind, model) {
            (ProtocolKind::Resonant, _) => h.push(h_resonant(params)?, Modulation::Static, None)?,
            (ProtocolKind::Dispersive, CouplingModel::Microscopic) => {
                h.push(detuned_coupling(params)?, Modulation::Rotating(params.delta), None)?
            }
            (ProtocolKind::Dispersive, CouplingModel::Effective) => {
                h.push(h_dispersive_effective(params)?, Modulation::Static, None)?
            }
        }
        h.push(h_laser(params)?, Modulation::Static, Some(schedule.tau))?;
        Ok(h)
    }

    #[inline]
    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn terms(&self) -> &[HamiltonianTerm<T>] {
        &self.terms
    }

    /// Dense `H(t)`.
    pub fn at(&self, t: T) -> CompositeOperator<T> {
        self.terms
            .iter()
            .filter(|term| term.active_at(t))
            .fold(CompositeOperator::zeros(self.layout), |acc, term| &acc + &term.modulation.apply(&term.op, t))
    }

    /// Sorted distinct switch-on times.
    pub fn onsets(&self) -> Vec<T> {
        let mut out: Vec<T> = self.terms.iter().filter_map(|t| t.onset).collect();
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite onset"));
        out.dedup();
        out
    }
}

/// `H(t)` of the protocol described by `schedule`.
pub fn h_of_t<T: Real>(params: &ModelParams<T>, schedule: &ProtocolSchedule<T>, t: T) -> Result<CompositeOperator<T>> {
    Ok(ProtocolHamiltonian::for_protocol(params, schedule)?.at(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    ResonatorDecay,
    RydbergRDecay,
    RydbergSDecay,
    QubitRelaxation,
    QubitDephasing,
}

/// Lindblad channel `rate · D[op]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOperator<T> {
    pub channel: Channel,
    pub rate: T,
    pub op: CompositeOperator<T>,
}

/// Nonzero-rate channels: `κD[a]`, `γ_r D[|g⟩⟨r|]`, `γ_s D[|e⟩⟨s|]`,
/// `γ_sq D[|g̃⟩⟨ẽ|]`, `γ_φ D[σ̃_z]`.
pub fn collapse_operators<T: Real>(params: &ModelParams<T>) -> Result<Vec<CollapseOperator<T>>> {
    params.validate()?;
    let layout = params.layout()?;
    let sigma_z = qubit_op::<T>(QubitLevel::Excited, QubitLevel::Excited) - qubit_op(QubitLevel::Ground, QubitLevel::Ground);
    let channels: [(Channel, T, Matrix<T>, Subsystem); 5] = [
        (Channel::ResonatorDecay, params.kappa, annihilation(layout.fock_dim())?, Subsystem::Resonator),
        (Channel::RydbergRDecay, params.gamma_r, atom_op(AtomLevel::G, AtomLevel::R), Subsystem::Atom),
        (Channel::RydbergSDecay, params.gamma_s, atom_op(AtomLevel::E, AtomLevel::S), Subsystem::Atom),
        (Channel::QubitRelaxation, params.gamma_sq, qubit_op(QubitLevel::Ground, QubitLevel::Excited), Subsystem::Qubit),
        (Channel::QubitDephasing, params.gamma_phi, sigma_z, Subsystem::Qubit),
    ];
    channels
        .into_iter()
        .filter(|(_, rate, _, _)| *rate > T::zero())
        .map(|(channel, rate, local, sub)| Ok(CollapseOperator { channel, rate, op: embed(&local, sub, layout)? }))
        .collect()
}
