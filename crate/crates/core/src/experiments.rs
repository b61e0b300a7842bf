//! Scenario runners for every figure and headline number: single-run
//! dynamics, Bloch-sphere sweeps, noisy (λ, Ω) maps, thermal sweeps and the
//! numerical self-validation suite.
//!
//! Grid points run on a bounded rayon pool; results are gathered by grid
//! index, so output never depends on the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{dispersive_coefficients, resonant_coefficients};
use crate::error::{Error, Result};
use crate::evolve::{evolve_lindblad, evolve_state, propagate};
use crate::hilbert::{
    outer, partial_trace, product_ket, thermal_state, unit_amplitudes, AtomLevel, DensityMatrix, HilbertLayout, Ket,
    Matrix, QubitLevel, Subsystem,
};
use crate::metrics::{overlap, target_state, TargetFrame, TargetState};
use crate::model::{
    collapse_operators, h_dispersive_effective, h_resonant, make_schedule, CouplingModel, Modulation,
    ProtocolHamiltonian, ProtocolKind,
};
use crate::scalar::{re, C};
use crate::{BlochAngle, Config, Density, Params, Schedule, Trajectory};

/// Phase frame of the target for `kind`.
///
/// Both protocols end in `i[cos(θ/2)|e⟩ + e^{iφ} sin(θ/2)|g⟩]`, which is the
/// standard target up to a global phase.
pub fn target_frame(_kind: ProtocolKind) -> TargetFrame {
    TargetFrame::Standard
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonatorInit {
    Vacuum,
    Thermal { nbar: f64 },
}

impl ResonatorInit {
    pub fn from_nbar(nbar: f64) -> Self {
        if nbar > 0.0 {
            Self::Thermal { nbar }
        } else {
            Self::Vacuum
        }
    }
}

/// One fully specified protocol run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: Params,
    pub kind: ProtocolKind,
    pub bloch: BlochAngle<f64>,
    pub resonator: ResonatorInit,
    pub coupling: CouplingModel,
}

impl Scenario {
    pub fn new(params: Params, kind: ProtocolKind, bloch: BlochAngle<f64>) -> Self {
        let resonator = ResonatorInit::from_nbar(params.nbar);
        Self { params, kind, bloch, resonator, coupling: CouplingModel::Microscopic }
    }

    pub fn with_resonator(mut self, init: ResonatorInit) -> Self {
        self.resonator = init;
        self
    }

    pub fn with_coupling(mut self, coupling: CouplingModel) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn schedule(&self) -> Result<Schedule> {
        make_schedule(&self.params, self.kind)
    }

    pub fn target(&self) -> TargetState<f64> {
        target_state(self.bloch, target_frame(self.kind))
    }

    /// `|r⟩⟨r| ⊗ ρ_res ⊗ |ψ_sq⟩⟨ψ_sq|`.
    pub fn initial_state(&self) -> Result<Density> {
        let layout = self.params.layout()?;
        initial_state(layout, self.bloch, self.resonator)
    }

    pub fn run(&self, config: &Config) -> Result<Trajectory> {
        let schedule = self.schedule()?;
        let h = ProtocolHamiltonian::for_protocol_with(&self.params, &schedule, self.coupling)?;
        let collapse = collapse_operators(&self.params)?;
        evolve_lindblad(&h, &collapse, &self.initial_state()?, &schedule, config, &self.target())
    }

    /// Default integrator settings for this scenario.
    pub fn default_config(&self) -> Result<Config> {
        Ok(Config::for_protocol(&self.params, &self.schedule()?))
    }

    /// Fidelity at `τ + T`, without intermediate sampling.
    pub fn final_fidelity(&self) -> Result<f64> {
        let cfg = self.default_config()?.endpoints_only();
        Ok(self.run(&cfg)?.final_fidelity())
    }
}

pub fn initial_state(layout: HilbertLayout, bloch: BlochAngle<f64>, init: ResonatorInit) -> Result<Density> {
    let atom = unit_amplitudes(HilbertLayout::ATOM_DIM, AtomLevel::R.index());
    let qubit = bloch.qubit_amplitudes();
    match init {
        ResonatorInit::Vacuum => crate::hilbert::pure_state(&atom, &unit_amplitudes(layout.fock_dim(), 0), &qubit, layout),
        ResonatorInit::Thermal { nbar } => {
            let atom_rho = DensityMatrix::new(outer(&Ket::from(atom.clone()), &Ket::from(atom)))?;
            let q = Ket::from(qubit.to_vec());
            let qubit_rho = DensityMatrix::new(outer(&q, &q))?;
            let res = thermal_state(nbar, layout.fock_dim())?;
            crate::hilbert::product_state(&atom_rho, &res, &qubit_rho, layout)
        }
    }
}

/// Sampled trajectory over `[0, τ + T]`, 400 samples.
pub fn run_dynamics(params: &Params, kind: ProtocolKind, bloch: BlochAngle<f64>, init: ResonatorInit) -> Result<Trajectory> {
    let scenario = Scenario::new(params.clone(), kind, bloch).with_resonator(init);
    scenario.run(&scenario.default_config()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// `(θ, φ)` over the Bloch sphere.
    Bloch,
    /// `(λ/κ, Ω/κ)`.
    Heatmap,
    /// `(n̄, λ/κ)`.
    Thermal,
}

impl SweepKind {
    /// CSV header of the emitted table.
    pub fn columns(self) -> [&'static str; 3] {
        match self {
            Self::Bloch => ["theta_rad", "phi_rad", "fidelity"],
            Self::Heatmap => ["lambda_over_kappa", "omega_over_kappa", "fidelity"],
            Self::Thermal => ["nbar", "lambda_over_kappa", "fidelity"],
        }
    }
}

/// Two-axis grid, traversed row-major (first axis slowest).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub kind: SweepKind,
    pub scenario: String,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

fn strictly_increasing(axis: &[f64], name: &str) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Configuration(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration(format!("{name} axis must be finite and strictly increasing")));
    }
    Ok(())
}

impl SweepGrid {
    pub const DEFAULT_THETA_STEPS: usize = 25;
    pub const DEFAULT_PHI_STEPS: usize = 48;

    /// θ over `[0, π]` inclusive, φ over `[0, 2π)`.
    pub fn bloch(theta_steps: usize, phi_steps: usize) -> Result<Self> {
        if theta_steps < 2 || phi_steps < 1 {
            return Err(Error::Configuration(format!(
                "bloch grid needs theta_steps >= 2 and phi_steps >= 1 (got {theta_steps}, {phi_steps})"
            )));
        }
        let tau = std::f64::consts::TAU;
        Ok(Self {
            kind: SweepKind::Bloch,
            scenario: String::new(),
            first: linspace(0.0, std::f64::consts::PI, theta_steps),
            second: (0..phi_steps).map(|j| tau * j as f64 / phi_steps as f64).collect(),
        })
    }

    pub fn heatmap(lambda_axis: Vec<f64>, omega_axis: Vec<f64>) -> Result<Self> {
        strictly_increasing(&lambda_axis, "lambda/kappa")?;
        strictly_increasing(&omega_axis, "omega/kappa")?;
        if lambda_axis[0] <= 0.0 || omega_axis[0] <= 0.0 {
            return Err(Error::Configuration("heatmap axes must be positive".into()));
        }
        Ok(Self { kind: SweepKind::Heatmap, scenario: String::new(), first: lambda_axis, second: omega_axis })
    }

    /// Default 40 × 40 map over `λ/κ ∈ [0.5, 12]`, `Ω/κ ∈ [0.5, 40]`.
    pub fn default_heatmap() -> Self {
        Self::heatmap(linspace(0.5, 12.0, 40), linspace(0.5, 40.0, 40)).expect("valid default axes")
    }

    pub fn thermal(nbar_list: Vec<f64>, lambda_axis: Vec<f64>) -> Result<Self> {
        strictly_increasing(&nbar_list, "nbar")?;
        strictly_increasing(&lambda_axis, "lambda/kappa")?;
        if nbar_list[0] < 0.0 || lambda_axis[0] <= 0.0 {
            return Err(Error::Configuration("thermal axes must be nonnegative (nbar) and positive (lambda)".into()));
        }
        Ok(Self { kind: SweepKind::Thermal, scenario: String::new(), first: nbar_list, second: lambda_axis })
    }

    /// `n̄ ∈ {0, 0.6}`, `λ/κ ∈ [1, 12]` with 23 points.
    pub fn default_thermal() -> Self {
        Self::thermal(vec![0.0, 0.6], linspace(1.0, 12.0, 23)).expect("valid default axes")
    }

    pub fn with_scenario(mut self, tag: impl Into<String>) -> Self {
        self.scenario = tag.into();
        self
    }

    pub fn cardinality(&self) -> usize {
        self.first.len() * self.second.len()
    }

    pub fn point(&self, index: usize) -> (f64, f64) {
        let n = self.second.len();
        (self.first[index / n], self.second[index % n])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.first.iter().flat_map(move |&a| self.second.iter().map(move |&b| (a, b)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub extremum: Extremum,
    pub value: f64,
    pub index: usize,
    pub location: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub values: Vec<f64>,
    pub summary: SweepSummary,
}

/// Extremum over `values`; ties keep the first grid index.
pub fn summarize(grid: &SweepGrid, values: &[f64], extremum: Extremum) -> SweepSummary {
    let better = |a: f64, b: f64| match extremum {
        Extremum::Min => a < b,
        Extremum::Max => a > b,
    };
    let mut index = 0;
    for (i, &v) in values.iter().enumerate() {
        if better(v, values[index]) {
            index = i;
        }
    }
    SweepSummary { extremum, value: values[index], index, location: grid.point(index) }
}

impl SweepResult {
    pub fn new(grid: SweepGrid, values: Vec<f64>, extremum: Extremum) -> Result<Self> {
        if values.len() != grid.cardinality() {
            return Err(Error::DimensionMismatch { expected: grid.cardinality(), found: values.len() });
        }
        let summary = summarize(&grid, &values, extremum);
        Ok(Self { grid, values, summary })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.second.len() + j]
    }

    /// Values along the first axis at a fixed second-axis index.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.grid.first.len()).map(|i| self.value(i, j)).collect()
    }

    /// Values along the second axis at a fixed first-axis index.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.second.len();
        &self.values[i * n..(i + 1) * n]
    }
}

/// Parallel execution options shared by all sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepOptions {
    pub workers: usize,
    /// `δ/λ` used for dispersive points.
    pub detuning_over_lambda: f64,
    /// `Ω/λ` used by thermal sweeps.
    pub omega_over_lambda: f64,
    /// `Ω̃/Ω`.
    pub omega_tilde_over_omega: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { workers: 1, detuning_over_lambda: 12.0, omega_over_lambda: 3.0, omega_tilde_over_omega: 3.0 }
    }
}

impl SweepOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))
    }

    /// Parameters at coupling `lambda` and drive `omega`, other rates from `base`.
    pub fn scaled_params(&self, base: &Params, kind: ProtocolKind, lambda: f64, omega: f64) -> Params {
        Params {
            lambda_i: lambda,
            lambda_sq: lambda,
            omega_laser: omega,
            omega_laser_tilde: self.omega_tilde_over_omega * omega,
            delta: match kind {
                ProtocolKind::Dispersive => self.detuning_over_lambda * lambda,
                ProtocolKind::Resonant => 0.0,
            },
            ..base.clone()
        }
    }
}

fn run_indexed<F>(options: &SweepOptions, count: usize, task: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let pool = options.pool()?;
    let results: Vec<Result<f64>> = pool.install(|| (0..count).into_par_iter().map(&task).collect());
    results.into_iter().collect()
}

/// Reduced atomic states after the full protocol for the four Hermitian
/// qubit inputs `P_ẽ, P_g̃, X, Y` (atom in `|r⟩`, resonator vacuum).
fn bloch_basis_responses(params: &Params, kind: ProtocolKind, options: &SweepOptions) -> Result<Vec<DensityMatrix<f64>>> {
    let layout = params.layout()?;
    let schedule = make_schedule(params, kind)?;
    let h = ProtocolHamiltonian::for_protocol(params, &schedule)?;
    let collapse = collapse_operators(params)?;
    let cfg = Config::for_protocol(params, &schedule);
    let (g, e) = (QubitLevel::Ground.index(), QubitLevel::Excited.index());
    let r0 = layout.index(AtomLevel::R.index(), 0, 0);
    let inputs: [[(usize, usize, C<f64>); 2]; 4] = [
        [(e, e, re(1.0)), (e, e, re(0.0))],
        [(g, g, re(1.0)), (g, g, re(0.0))],
        [(g, e, re(1.0)), (e, g, re(1.0))],
        [(g, e, C::new(0.0, 1.0)), (e, g, C::new(0.0, -1.0))],
    ];
    let pool = options.pool()?;
    let out: Vec<Result<DensityMatrix<f64>>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|entries| {
                let mut rho0: Matrix<f64> = Matrix::zeros((layout.total_dim(), layout.total_dim()));
                for &(i, j, v) in entries {
                    rho0[[r0 + i, r0 + j]] += v;
                }
                let rho = propagate(&h, &collapse, &rho0, 0.0, schedule.total, &cfg)?;
                partial_trace(&DensityMatrix::from_parts_unchecked(Some(layout), rho), Subsystem::Atom)
            })
            .collect()
    });
    out.into_iter().collect()
}

/// Final fidelity over the Bloch sphere, resonator initially in vacuum.
///
/// The protocol map is linear in the input state, so four propagations of a
/// Hermitian operator basis cover every grid point.
pub fn bloch_sweep(params: &Params, kind: ProtocolKind, grid: &SweepGrid, options: &SweepOptions) -> Result<SweepResult> {
    if grid.kind != SweepKind::Bloch {
        return Err(Error::Configuration("bloch_sweep needs a Bloch grid".into()));
    }
    let responses = bloch_basis_responses(params, kind, options)?;
    let frame = target_frame(kind);
    let values = grid
        .points()
        .map(|(theta, phi)| {
            let target = target_state(BlochAngle::new(theta, phi), frame);
            let o: Vec<f64> = responses.iter().map(|m| overlap(m, &target)).collect();
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let f2 = c * c * o[0] + s * s * o[1] + s * c * (phi.cos() * o[2] + phi.sin() * o[3]);
            f2.max(0.0).sqrt()
        })
        .collect();
    SweepResult::new(grid.clone(), values, Extremum::Min)
}

/// Bloch sweep with one independent evolution per grid point.
pub fn bloch_sweep_direct(
    params: &Params,
    kind: ProtocolKind,
    grid: &SweepGrid,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if grid.kind != SweepKind::Bloch {
        return Err(Error::Configuration("bloch_sweep needs a Bloch grid".into()));
    }
    let values = run_indexed(options, grid.cardinality(), |i| {
        let (theta, phi) = grid.point(i);
        Scenario::new(params.clone(), kind, BlochAngle::new(theta, phi))
            .with_resonator(ResonatorInit::Vacuum)
            .final_fidelity()
    })?;
    SweepResult::new(grid.clone(), values, Extremum::Min)
}

/// Final fidelity over `(λ/κ, Ω/κ)` with the dissipative rates of `base`.
pub fn noise_heatmap(
    base: &Params,
    kind: ProtocolKind,
    bloch: BlochAngle<f64>,
    grid: &SweepGrid,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if grid.kind != SweepKind::Heatmap {
        return Err(Error::Configuration("noise_heatmap needs a heatmap grid".into()));
    }
    if !(base.kappa > 0.0) {
        return Err(Error::Configuration("noise_heatmap needs kappa > 0".into()));
    }
    let kappa = base.kappa;
    let values = run_indexed(options, grid.cardinality(), |i| {
        let (l, o) = grid.point(i);
        let params = options.scaled_params(base, kind, l * kappa, o * kappa);
        Scenario::new(params, kind, bloch).with_resonator(ResonatorInit::Vacuum).final_fidelity()
    })?;
    SweepResult::new(grid.clone(), values, Extremum::Max)
}

/// Final fidelity over `(n̄, λ/κ)` with `Ω = (Ω/λ)·λ`, `δ = (δ/λ)·λ`.
pub fn thermal_sweep(
    base: &Params,
    kind: ProtocolKind,
    bloch: BlochAngle<f64>,
    grid: &SweepGrid,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if grid.kind != SweepKind::Thermal {
        return Err(Error::Configuration("thermal_sweep needs a thermal grid".into()));
    }
    if !(base.kappa > 0.0) {
        return Err(Error::Configuration("thermal_sweep needs kappa > 0".into()));
    }
    let kappa = base.kappa;
    let values = run_indexed(options, grid.cardinality(), |i| {
        let (nbar, l) = grid.point(i);
        let lambda = l * kappa;
        let params = options.scaled_params(base, kind, lambda, options.omega_over_lambda * lambda);
        Scenario::new(params, kind, bloch).with_resonator(ResonatorInit::from_nbar(nbar)).final_fidelity()
    })?;
    SweepResult::new(grid.clone(), values, Extremum::Max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured < tolerance }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Deterministic low-discrepancy points in `[0, 1)³`.
pub fn sample_points(count: usize) -> Vec<[f64; 3]> {
    // generalized golden ratio for three dimensions
    let g = 1.220_744_084_605_759_5_f64;
    let alpha = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (1..=count)
        .map(|k| alpha.map(|a| (0.5 + a * k as f64).fract()))
        .collect()
}

fn tight_config() -> Config {
    Config::default().with_tolerances(1e-11, 1e-13)
}

fn max_amplitude_error(a: &Ket<f64>, b: &Ket<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Numerical stage-1 evolution of `|r,0⟩⊗|sq⟩` against the closed form.
pub fn resonant_oracle_error(params: &Params, samples: &[[f64; 3]]) -> Result<f64> {
    let layout = params.layout()?;
    let mut h = ProtocolHamiltonian::new(layout);
    h.push(h_resonant(params)?, Modulation::Static, None)?;
    let horizon = make_schedule(params, ProtocolKind::Resonant)?.tau;
    let mut worst = 0.0f64;
    for &[u, v, w] in samples {
        let bloch = BlochAngle::new(u * std::f64::consts::PI, v * std::f64::consts::TAU);
        let t = w * horizon;
        let psi0 = product_ket(
            &unit_amplitudes(4, AtomLevel::R.index()),
            &unit_amplitudes(layout.fock_dim(), 0),
            &bloch.qubit_amplitudes(),
            layout,
        )?;
        let numeric = evolve_state(&h, &psi0, 0.0, t, &tight_config())?;
        let exact = resonant_coefficients(params.lambda_i, params.lambda_sq, bloch, t)?.state_ket(layout);
        worst = worst.max(max_amplitude_error(&numeric, &exact));
    }
    Ok(worst)
}

/// Effective-Hamiltonian stage-1 evolution against the closed form, from
/// a resonator superposition spanning the first three Fock states.
pub fn dispersive_oracle_error(params: &Params, samples: &[[f64; 3]]) -> Result<f64> {
    let layout = params.layout()?;
    if layout.fock_dim() < 3 {
        return Err(Error::Configuration("dispersive oracle needs fock_dim >= 3".into()));
    }
    let mut h = ProtocolHamiltonian::new(layout);
    h.push(h_dispersive_effective(params)?, Modulation::Static, None)?;
    let chi = params.chi()?;
    let horizon = make_schedule(params, ProtocolKind::Dispersive)?.tau;
    let mut fock = vec![re(0.0); layout.fock_dim()];
    fock[0] = re(0.5f64.sqrt());
    fock[1] = re(0.5);
    fock[2] = C::new(0.0, 0.5);
    let mut worst = 0.0f64;
    for &[u, v, w] in samples {
        let bloch = BlochAngle::new(u * std::f64::consts::PI, v * std::f64::consts::TAU);
        let t = w * horizon;
        let psi0 = product_ket(&unit_amplitudes(4, AtomLevel::R.index()), &fock, &bloch.qubit_amplitudes(), layout)?;
        let numeric = evolve_state(&h, &psi0, 0.0, t, &tight_config())?;
        let exact = dispersive_coefficients(chi, bloch, &fock, t)?.state_ket(layout)?;
        worst = worst.max(max_amplitude_error(&numeric, &exact));
    }
    Ok(worst)
}

/// Runs the oracle and convergence properties on every parameter set.
pub fn validate(menu: &[Params], options: &SweepOptions) -> Result<ValidationReport> {
    let samples = sample_points(20);
    let mut report = ValidationReport::default();
    for (k, base) in menu.iter().enumerate() {
        let tag = |s: &str| format!("{s}[{k}]");
        let lambda = base.common_coupling()?;
        let ideal = Params { fock_dim: base.fock_dim.max(3), ..Params::new(lambda, base.omega_laser) };
        let dispersive = ideal.clone().with_detuning(options.detuning_over_lambda * lambda);

        report.checks.push(PropertyCheck::below(tag("resonant_oracle"), resonant_oracle_error(&ideal, &samples)?, 1e-8));
        report
            .checks
            .push(PropertyCheck::below(tag("dispersive_oracle"), dispersive_oracle_error(&dispersive, &samples)?, 1e-8));

        let angles = [BlochAngle::new(0.0, 0.0), BlochAngle::new(std::f64::consts::FRAC_PI_2, 0.0)];
        let gap = run_indexed(options, angles.len(), |i| {
            let full = Scenario::new(dispersive.clone(), ProtocolKind::Dispersive, angles[i]);
            let eff = full.clone().with_coupling(CouplingModel::Effective);
            Ok((full.final_fidelity()? - eff.final_fidelity()?).abs())
        })?;
        report.checks.push(PropertyCheck::below(tag("effective_vs_full_gap"), gap.iter().cloned().fold(0.0, f64::max), 0.01));

        let probe = Scenario::new(ideal.clone(), ProtocolKind::Resonant, angles[1]);
        let reference = probe.final_fidelity()?;
        let bigger = Scenario::new(Params { fock_dim: ideal.fock_dim + 5, ..ideal.clone() }, ProtocolKind::Resonant, angles[1]);
        report
            .checks
            .push(PropertyCheck::below(tag("fock_convergence_vacuum"), (bigger.final_fidelity()? - reference).abs(), 1e-6));

        let mut halved = probe.default_config()?.endpoints_only();
        halved.max_step = halved.max_step.map(|h| h / 2.0);
        let step = (probe.run(&halved)?.final_fidelity() - reference).abs();
        report.checks.push(PropertyCheck::below(tag("step_halving"), step, 1e-7));

        if base.kappa > 0.0 {
            let noisy = Params { fock_dim: Params::THERMAL_FOCK_DIM, nbar: 0.6, ..dispersive.clone() }.with_rates(
                base.kappa,
                base.gamma_r,
                base.gamma_s,
                base.gamma_sq,
                base.gamma_phi,
            );
            let fids = run_indexed(options, 2, |i| {
                let p = Params { fock_dim: noisy.fock_dim + 5 * i, ..noisy.clone() };
                Scenario::new(p, ProtocolKind::Dispersive, angles[1]).final_fidelity()
            })?;
            report.checks.push(PropertyCheck::below(tag("fock_convergence_thermal"), (fids[1] - fids[0]).abs(), 1e-3));
        }
    }
    Ok(report)
}
