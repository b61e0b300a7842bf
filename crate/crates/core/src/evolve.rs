//! Unitary and Lindblad time evolution.
//!
//! The density matrix is integrated as a flat complex vector with an
//! adaptive Dormand–Prince 5(4) scheme. Generators are compiled into sparse
//! row form once per integration span; spans are split at every Heaviside
//! switch-on so the right-hand side is smooth inside each span.

use log::warn;

use crate::error::{Error, Result};
use crate::hilbert::{dagger, partial_trace, DensityMatrix, Ket, Matrix, Subsystem};
use crate::metrics::{fidelity, observables, TargetState};
use crate::model::{CollapseOperator, Modulation, ModelParams, ProtocolHamiltonian, ProtocolKind, ProtocolSchedule};
use crate::scalar::{re, Real, C};

/// Positivity violations below this raise a diagnostics warning.
pub const POSITIVITY_WARN: f64 = -1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Upper bound on the step size (µs).
    pub max_step: Option<T>,
    /// Output sampling interval (µs); `None` records only the span endpoints.
    pub sample_dt: Option<T>,
    pub max_steps: usize,
    /// Track the smallest eigenvalue of ρ at every sample.
    pub check_positivity: bool,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-8),
            abs_tol: T::lit(1e-10),
            max_step: None,
            sample_dt: None,
            max_steps: 2_000_000,
            check_positivity: false,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    /// At least twenty steps per period of the fastest frequency driving
    /// `kind`; the detuning only enters the dispersive generator.
    pub fn max_step_for(params: &ModelParams<T>, kind: ProtocolKind) -> T {
        let f_max = match kind {
            ProtocolKind::Dispersive => params.fastest_frequency(),
            ProtocolKind::Resonant => ModelParams { delta: T::zero(), ..params.clone() }.fastest_frequency(),
        };
        T::lit(0.05) / f_max
    }

    /// Defaults for one protocol run: step cap from the model, 400 samples.
    pub fn for_protocol(params: &ModelParams<T>, schedule: &ProtocolSchedule<T>) -> Self {
        Self {
            max_step: Some(Self::max_step_for(params, schedule.kind)),
            sample_dt: Some(schedule.total / T::lit(400.0)),
            check_positivity: true,
            ..Self::default()
        }
    }

    /// Drops intermediate sampling; only the endpoints are recorded.
    pub fn endpoints_only(mut self) -> Self {
        self.sample_dt = None;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

/// Sampled time series of one evolution.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub fidelity: Vec<T>,
    pub n_mean: Vec<T>,
    pub p_g: Vec<T>,
    pub p_e: Vec<T>,
    pub p_r: Vec<T>,
    pub p_s: Vec<T>,
    pub purity: Vec<T>,
    pub final_state: DensityMatrix<T>,
    /// Lowest eigenvalue seen at the samples, when tracked.
    pub min_eigenvalue: Option<f64>,
    pub max_trace_error: T,
    pub max_hermiticity_defect: T,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_fidelity(&self) -> T {
        *self.fidelity.last().expect("non-empty trajectory")
    }

    pub fn final_p_e(&self) -> T {
        *self.p_e.last().expect("non-empty trajectory")
    }

    pub fn final_p_g(&self) -> T {
        *self.p_g.last().expect("non-empty trajectory")
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug)]
struct SparseMatrix<T> {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> SparseMatrix<T> {
    fn from_dense(m: &Matrix<T>) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v.re != T::zero() || v.im != T::zero() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    /// `out[r, :] += scale · (self · x)[r, :]` for row-major `x` with `width` columns.
    fn mul_rows_acc(&self, scale: C<T>, x: &[C<T>], width: usize, out: &mut [C<T>]) {
        for r in 0..self.row_ptr.len() - 1 {
            let dst = &mut out[r * width..(r + 1) * width];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let w = scale * self.vals[k];
                let src = &x[self.cols[k] * width..(self.cols[k] + 1) * width];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Active generator on one integration span:
/// `K(t) = K_static + Σ (e^{iωt} A + e^{−iωt} A†)` with
/// `K_static = H_static − (i/2) Σ γ O†O`, plus the jump operators.
struct SpanGenerator<T> {
    dim: usize,
    static_part: SparseMatrix<T>,
    rotating: Vec<(T, SparseMatrix<T>, SparseMatrix<T>)>,
    /// Jump operators with their conjugated triplets `(k, l, conj O_kl)`.
    jumps: Vec<(T, SparseMatrix<T>, Vec<(usize, usize, C<T>)>)>,
    scratch: std::cell::RefCell<Vec<C<T>>>,
}

impl<T: Real> SpanGenerator<T> {
    fn build(h: &ProtocolHamiltonian<T>, collapse: &[CollapseOperator<T>], span_start: T) -> Self {
        let dim = h.layout().total_dim();
        let mut static_dense: Matrix<T> = Matrix::zeros((dim, dim));
        let mut rotating = Vec::new();
        for term in h.terms().iter().filter(|t| t.active_at(span_start)) {
            match term.modulation {
                Modulation::Static => static_dense += term.op.entries(),
                Modulation::Rotating(freq) => rotating.push((
                    freq,
                    SparseMatrix::from_dense(term.op.entries()),
                    SparseMatrix::from_dense(&dagger(term.op.entries())),
                )),
            }
        }
        let half = C::new(T::zero(), T::lit(-0.5));
        let mut jumps = Vec::with_capacity(collapse.len());
        for c in collapse {
            let o = c.op.entries();
            let odo = dagger(o).dot(o);
            static_dense.zip_mut_with(&odo, |k, &x| *k += half * c.rate * x);
            let sparse = SparseMatrix::from_dense(o);
            let mut conj = Vec::with_capacity(sparse.vals.len());
            for r in 0..dim {
                for k in sparse.row_ptr[r]..sparse.row_ptr[r + 1] {
                    conj.push((r, sparse.cols[k], sparse.vals[k].conj()));
                }
            }
            jumps.push((c.rate, sparse, conj));
        }
        let n2 = dim * dim;
        Self {
            dim,
            static_part: SparseMatrix::from_dense(&static_dense),
            rotating,
            jumps,
            scratch: std::cell::RefCell::new(vec![re(T::zero()); n2]),
        }
    }

    /// `−i K(t) x` accumulated into `out` for `x` with `width` columns.
    fn apply_k(&self, t: T, x: &[C<T>], width: usize, out: &mut [C<T>]) {
        let minus_i = C::new(T::zero(), -T::one());
        self.static_part.mul_rows_acc(minus_i, x, width, out);
        for (freq, fwd, back) in &self.rotating {
            let phase = C::new((*freq * t).cos(), (*freq * t).sin());
            fwd.mul_rows_acc(minus_i * phase, x, width, out);
            back.mul_rows_acc(minus_i * phase.conj(), x, width, out);
        }
    }

    /// Lindblad right-hand side for Hermitian `rho`.
    fn master(&self, t: T, rho: &[C<T>], out: &mut [C<T>]) {
        let n = self.dim;
        out.iter_mut().for_each(|z| *z = re(T::zero()));
        // Y = −iKρ + ½ Σ γ OρO†, then ρ̇ = Y + Y†
        self.apply_k(t, rho, n, out);
        if !self.jumps.is_empty() {
            let mut w = self.scratch.borrow_mut();
            for (rate, o, conj) in &self.jumps {
                w.iter_mut().for_each(|z| *z = re(T::zero()));
                o.mul_rows_acc(re(T::one()), rho, n, &mut w);
                // (Oρ)O† row by row
                let half = T::lit(0.5) * *rate;
                for (dst, src) in out.chunks_exact_mut(n).zip(w.chunks_exact(n)) {
                    for &(k, l, v) in conj {
                        dst[k] += src[l] * v * half;
                    }
                }
            }
        }
        for i in 0..n {
            let d = out[i * n + i];
            out[i * n + i] = re(d.re + d.re);
            for j in i + 1..n {
                let a = out[i * n + j];
                let b = out[j * n + i];
                out[i * n + j] = a + b.conj();
                out[j * n + i] = b + a.conj();
            }
        }
    }

    /// Schrödinger right-hand side `−iH(t)ψ` (no jump terms).
    fn schrodinger(&self, t: T, psi: &[C<T>], out: &mut [C<T>]) {
        out.iter_mut().for_each(|z| *z = re(T::zero()));
        self.apply_k(t, psi, 1, out);
    }
}

#[derive(Clone, Copy)]
enum Equation {
    Master,
    Schrodinger,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DormandPrince<T> {
    k: [Vec<C<T>>; 7],
    stage: Vec<C<T>>,
    y_new: Vec<C<T>>,
    /// `k[0]` holds `f(t, y)` for the current point.
    fsal: bool,
    h: Option<T>,
    accepted: usize,
    rejected: usize,
}

impl<T: Real> DormandPrince<T> {
    fn new(len: usize) -> Self {
        let zero = vec![re(T::zero()); len];
        Self {
            k: std::array::from_fn(|_| zero.clone()),
            stage: zero.clone(),
            y_new: zero,
            fsal: false,
            h: None,
            accepted: 0,
            rejected: 0,
        }
    }

    fn eval(gen: &SpanGenerator<T>, eq: Equation, t: T, y: &[C<T>], out: &mut [C<T>]) {
        match eq {
            Equation::Master => gen.master(t, y, out),
            Equation::Schrodinger => gen.schrodinger(t, y, out),
        }
    }

    fn combine(&mut self, y: &[C<T>], h: T, coeffs: &[(usize, f64)]) {
        let w: Vec<(usize, T)> = coeffs.iter().map(|&(i, a)| (i, h * T::lit(a))).collect();
        for (idx, s) in self.stage.iter_mut().enumerate() {
            let mut acc = y[idx];
            for &(i, a) in &w {
                acc += self.k[i][idx] * a;
            }
            *s = acc;
        }
    }

    /// Integrates `y` from `t0` to `t1` on one smooth span.
    fn advance(
        &mut self,
        gen: &SpanGenerator<T>,
        eq: Equation,
        t0: T,
        t1: T,
        y: &mut Vec<C<T>>,
        cfg: &IntegratorConfig<T>,
    ) -> Result<()> {
        let span = t1 - t0;
        if span <= T::zero() {
            return Ok(());
        }
        let cap = cfg.max_step.unwrap_or(span).min(span);
        if !self.fsal {
            Self::eval(gen, eq, t0, y, &mut self.k[0]);
            self.fsal = true;
        }
        let mut h = match self.h {
            Some(h) => h.min(cap),
            None => {
                let scale = |v: &[C<T>]| {
                    let s = v.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
                    (s / T::from_usize_lossy(v.len().max(1))).sqrt()
                };
                let d0 = scale(y);
                let d1 = scale(&self.k[0]);
                let guess = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
                guess.min(cap)
            }
        };
        let mut t = t0;
        let len = y.len();
        let min_h = T::epsilon() * T::lit(16.0) * t1.abs().max(T::one());
        while t < t1 {
            if self.accepted + self.rejected >= cfg.max_steps {
                return Err(Error::Integration {
                    last_good_time: t.as_f64(),
                    reason: format!("step budget of {} exhausted", cfg.max_steps),
                });
            }
            let remaining = t1 - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step < min_h && !last {
                return Err(Error::Integration { last_good_time: t.as_f64(), reason: format!("step size underflow ({step:e})") });
            }

            self.combine(y, step, &[(0, A21)]);
            Self::eval(gen, eq, t + T::lit(C2) * step, &self.stage, &mut self.k[1]);
            self.combine(y, step, &[(0, A31), (1, A32)]);
            Self::eval(gen, eq, t + T::lit(C3) * step, &self.stage, &mut self.k[2]);
            self.combine(y, step, &[(0, A41), (1, A42), (2, A43)]);
            Self::eval(gen, eq, t + T::lit(C4) * step, &self.stage, &mut self.k[3]);
            self.combine(y, step, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            Self::eval(gen, eq, t + T::lit(C5) * step, &self.stage, &mut self.k[4]);
            self.combine(y, step, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            Self::eval(gen, eq, t + step, &self.stage, &mut self.k[5]);
            self.combine(y, step, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            std::mem::swap(&mut self.stage, &mut self.y_new);
            let t_new = if last { t1 } else { t + step };
            Self::eval(gen, eq, t_new, &self.y_new, &mut self.k[6]);

            let e = [E1, E3, E4, E5, E6, E7].map(|x| step * T::lit(x));
            let mut sum = T::zero();
            for idx in 0..len {
                let err = self.k[0][idx] * e[0]
                    + self.k[2][idx] * e[1]
                    + self.k[3][idx] * e[2]
                    + self.k[4][idx] * e[3]
                    + self.k[5][idx] * e[4]
                    + self.k[6][idx] * e[5];
                let sc = cfg.abs_tol + cfg.rel_tol * y[idx].norm().max(self.y_new[idx].norm());
                sum += (err.norm() / sc).powi(2);
            }
            let err = (sum / T::from_usize_lossy(len)).sqrt();

            if err <= T::one() {
                std::mem::swap(y, &mut self.y_new);
                self.k.swap(0, 6);
                t = t_new;
                self.accepted += 1;
                let grow = if err == T::zero() { T::lit(5.0) } else { (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)) };
                let proposed = (step * grow.max(T::lit(0.2))).min(cap);
                // keep the natural step when the last one was clipped to land on t1
                h = if last { h.max(proposed).min(cap) } else { proposed };
            } else {
                self.rejected += 1;
                h = step * (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2));
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

fn breakpoints<T: Real>(h: &ProtocolHamiltonian<T>, t0: T, t1: T) -> Vec<T> {
    let mut pts = vec![t0];
    pts.extend(h.onsets().into_iter().filter(|&s| s > t0 && s < t1));
    pts.push(t1);
    pts
}

fn flatten<T: Real>(m: &Matrix<T>) -> Vec<C<T>> {
    m.iter().copied().collect()
}

fn unflatten<T: Real>(v: Vec<C<T>>, dim: usize) -> Matrix<T> {
    Matrix::from_shape_vec((dim, dim), v).expect("square state")
}

/// Propagates a Hermitian operator through `[t0, t1]` under the master
/// equation; the map is linear, so any Hermitian input is allowed.
pub fn propagate<T: Real>(
    h: &ProtocolHamiltonian<T>,
    collapse: &[CollapseOperator<T>],
    rho: &Matrix<T>,
    t0: T,
    t1: T,
    config: &IntegratorConfig<T>,
) -> Result<Matrix<T>> {
    let dim = h.layout().total_dim();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.nrows() });
    }
    let mut y = flatten(rho);
    let mut stepper = DormandPrince::new(y.len());
    let pts = breakpoints(h, t0, t1);
    for w in pts.windows(2) {
        let gen = SpanGenerator::build(h, collapse, w[0]);
        stepper.fsal = false;
        stepper.advance(&gen, Equation::Master, w[0], w[1], &mut y, config)?;
    }
    Ok(unflatten(y, dim))
}

/// Schrödinger evolution of a state vector through `[t0, t1]`.
pub fn evolve_state<T: Real>(
    h: &ProtocolHamiltonian<T>,
    psi: &Ket<T>,
    t0: T,
    t1: T,
    config: &IntegratorConfig<T>,
) -> Result<Ket<T>> {
    let dim = h.layout().total_dim();
    if psi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
    }
    let mut y: Vec<C<T>> = psi.to_vec();
    let mut stepper = DormandPrince::new(dim);
    for w in breakpoints(h, t0, t1).windows(2) {
        let gen = SpanGenerator::build(h, &[], w[0]);
        stepper.fsal = false;
        stepper.advance(&gen, Equation::Schrodinger, w[0], w[1], &mut y, config)?;
    }
    Ok(Ket::from(y))
}

/// Closed-system evolution `ρ̇ = −i[H(t), ρ]` over `[0, schedule.total]`.
pub fn evolve_von_neumann<T: Real>(
    h: &ProtocolHamiltonian<T>,
    rho0: &DensityMatrix<T>,
    schedule: &ProtocolSchedule<T>,
    config: &IntegratorConfig<T>,
    target: &TargetState<T>,
) -> Result<TrajectoryRecord<T>> {
    evolve_lindblad(h, &[], rho0, schedule, config, target)
}

struct Stop<T> {
    t: T,
    record: bool,
}

fn stops<T: Real>(h: &ProtocolHamiltonian<T>, total: T, sample_dt: Option<T>) -> Vec<Stop<T>> {
    let mut out: Vec<Stop<T>> = Vec::new();
    match sample_dt {
        Some(dt) if dt > T::zero() => {
            let count = (total / dt).round().to_usize().unwrap_or(0).max(1);
            for k in 1..=count {
                let t = if k == count { total } else { T::from_usize_lossy(k) * dt };
                out.push(Stop { t, record: true });
            }
        }
        _ => out.push(Stop { t: total, record: true }),
    }
    let eps = total * T::lit(1e-12);
    for b in h.onsets().into_iter().filter(|&s| s > T::zero() && s < total) {
        if let Some(s) = out.iter_mut().find(|s| (s.t - b).abs() <= eps) {
            s.t = b;
        } else {
            out.push(Stop { t: b, record: false });
        }
    }
    out.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite time"));
    out
}

/// Open-system evolution under `H(t)` and the given Lindblad channels.
pub fn evolve_lindblad<T: Real>(
    h: &ProtocolHamiltonian<T>,
    collapse: &[CollapseOperator<T>],
    rho0: &DensityMatrix<T>,
    schedule: &ProtocolSchedule<T>,
    config: &IntegratorConfig<T>,
    target: &TargetState<T>,
) -> Result<TrajectoryRecord<T>> {
    let layout = h.layout();
    if rho0.layout() != Some(layout) {
        return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: rho0.dim() });
    }
    for c in collapse {
        if c.op.layout() != layout {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: c.op.layout().total_dim() });
        }
    }
    let dim = layout.total_dim();
    let onsets = h.onsets();
    let mut rec = Recorder::new(config.check_positivity);
    rec.record(T::zero(), rho0, target)?;

    let mut y = flatten(rho0.entries());
    let mut stepper = DormandPrince::new(y.len());
    let mut t = T::zero();
    let mut active_span: Option<usize> = None;
    let mut gen: Option<SpanGenerator<T>> = None;
    for stop in stops(h, schedule.total, config.sample_dt) {
        let span = onsets.iter().filter(|&&s| s <= t).count();
        if active_span != Some(span) {
            gen = Some(SpanGenerator::build(h, collapse, t));
            stepper.fsal = false;
            active_span = Some(span);
        }
        stepper.advance(gen.as_ref().expect("generator"), Equation::Master, t, stop.t, &mut y, config)?;
        t = stop.t;
        if stop.record {
            let rho = DensityMatrix::from_parts_unchecked(Some(layout), unflatten(y.clone(), dim));
            rec.record(t, &rho, target)?;
        }
    }
    let final_state = DensityMatrix::from_parts_unchecked(Some(layout), unflatten(y, dim));
    Ok(rec.finish(final_state, stepper.accepted, stepper.rejected))
}

struct Recorder<T> {
    times: Vec<T>,
    fidelity: Vec<T>,
    n_mean: Vec<T>,
    p: [Vec<T>; 4],
    purity: Vec<T>,
    check_positivity: bool,
    min_eig: Option<f64>,
    trace_err: T,
    herm: T,
}

impl<T: Real> Recorder<T> {
    fn new(check_positivity: bool) -> Self {
        Self {
            times: Vec::new(),
            fidelity: Vec::new(),
            n_mean: Vec::new(),
            p: Default::default(),
            purity: Vec::new(),
            check_positivity,
            min_eig: None,
            trace_err: T::zero(),
            herm: T::zero(),
        }
    }

    fn record(&mut self, t: T, rho: &DensityMatrix<T>, target: &TargetState<T>) -> Result<()> {
        let obs = observables(rho)?;
        let at = partial_trace(rho, Subsystem::Atom)?;
        self.times.push(t);
        self.fidelity.push(fidelity(&at, target)?);
        self.n_mean.push(obs.n_mean);
        self.p[0].push(obs.p_g);
        self.p[1].push(obs.p_e);
        self.p[2].push(obs.p_r);
        self.p[3].push(obs.p_s);
        self.purity.push(rho.purity());
        self.trace_err = self.trace_err.max((rho.trace() - re(T::one())).norm());
        self.herm = self.herm.max(rho.hermiticity_defect());
        if self.check_positivity {
            let lowest = rho.min_eigenvalue();
            if lowest < POSITIVITY_WARN {
                warn!("density matrix eigenvalue {lowest:e} at t = {t} us");
            }
            self.min_eig = Some(self.min_eig.map_or(lowest, |m| m.min(lowest)));
        }
        Ok(())
    }

    fn finish(self, final_state: DensityMatrix<T>, accepted: usize, rejected: usize) -> TrajectoryRecord<T> {
        let [p_g, p_e, p_r, p_s] = self.p;
        TrajectoryRecord {
            times: self.times,
            fidelity: self.fidelity,
            n_mean: self.n_mean,
            p_g,
            p_e,
            p_r,
            p_s,
            purity: self.purity,
            final_state,
            min_eigenvalue: self.min_eig,
            max_trace_error: self.trace_err,
            max_hermiticity_defect: self.herm,
            accepted_steps: accepted,
            rejected_steps: rejected,
        }
    }
}

/// Dense reference `D[O]ρ = OρO† − ½{O†O, ρ}`.
pub fn dissipator<T: Real>(op: &Matrix<T>, rho: &Matrix<T>) -> Matrix<T> {
    let od = dagger(op);
    let odo = od.dot(op);
    let half = re(T::lit(0.5));
    op.dot(rho).dot(&od) - (odo.dot(rho) + rho.dot(&odo)).mapv(|z| z * half)
}

/// Dense reference right-hand side `−i[H, ρ] + Σ γ D[O]ρ`.
pub fn lindblad_rhs_dense<T: Real>(h: &Matrix<T>, collapse: &[CollapseOperator<T>], rho: &Matrix<T>) -> Matrix<T> {
    let minus_i = C::new(T::zero(), -T::one());
    let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| z * minus_i);
    for c in collapse {
        let d = dissipator(c.op.entries(), rho);
        out.zip_mut_with(&d, |o, &x| *o += x * c.rate);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, embed, pure_state, unit_amplitudes, CompositeOperator, HilbertLayout};
    use crate::metrics::{target_state, TargetFrame};
    use crate::model::{collapse_operators, make_schedule, Channel};
    use crate::BlochAngle;
    use approx::assert_abs_diff_eq;

    fn target() -> TargetState<f64> {
        target_state(BlochAngle::new(0.0, 0.0), TargetFrame::Standard)
    }

    #[test]
    fn sparse_rhs_matches_dense_reference() {
        let lambda = 2.0 * std::f64::consts::PI * 8.0;
        let p = ModelParams::new(lambda, 0.6 * lambda)
            .with_detuning(6.0 * lambda)
            .with_fock_dim(3)
            .with_rates(2.0, 0.1, 0.2, 0.3, 0.4);
        let sched = make_schedule(&p, ProtocolKind::Dispersive).unwrap();
        let h = ProtocolHamiltonian::for_protocol(&p, &sched).unwrap();
        let collapse = collapse_operators(&p).unwrap();
        let l = p.layout().unwrap();
        let rho = thermal_like(l);
        for t in [0.01, sched.tau + 0.3 * sched.pulse] {
            let gen = SpanGenerator::build(&h, &collapse, t);
            let mut out = vec![re(0.0); l.total_dim().pow(2)];
            gen.master(t, rho.as_slice().unwrap(), &mut out);
            let reference = lindblad_rhs_dense(h.at(t).entries(), &collapse, &rho);
            let diff = reference.iter().zip(&out).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(diff < 1e-10, "diff = {diff}");
        }
    }

    fn thermal_like(l: HilbertLayout) -> Matrix<f64> {
        // arbitrary full-rank Hermitian state
        let n = l.total_dim();
        let raw = Matrix::from_shape_fn((n, n), |(i, j)| C::new(((i * 7 + j * 3) % 11) as f64 / 11.0, ((i + 2 * j) % 5) as f64 / 9.0));
        let m = raw.dot(&dagger(&raw));
        let tr = crate::hilbert::trace(&m);
        m.mapv(|z| z / tr)
    }

    #[test]
    fn zero_hamiltonian_is_stationary() {
        let l = HilbertLayout::new(3).unwrap();
        let h = ProtocolHamiltonian::new(l);
        let rho0 = pure_state(&unit_amplitudes(4, 2), &unit_amplitudes(3, 0), &BlochAngle::new(1.0, 0.3).qubit_amplitudes(), l).unwrap();
        let sched = ProtocolSchedule::new(ProtocolKind::Resonant, 0.3, 0.2);
        let cfg = IntegratorConfig { sample_dt: Some(0.05), ..Default::default() };
        let rec = evolve_von_neumann(&h, &rho0, &sched, &cfg, &target()).unwrap();
        assert_eq!(rec.len(), 11);
        let diff = (rec.final_state.entries() - rho0.entries()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn cavity_decay_law() {
        let l = HilbertLayout::new(4).unwrap();
        let kappa = 2.3;
        let a = embed(&annihilation::<f64>(4).unwrap(), Subsystem::Resonator, l).unwrap();
        let collapse = vec![CollapseOperator { channel: Channel::ResonatorDecay, rate: kappa, op: a }];
        let rho0 = pure_state(&unit_amplitudes(4, 0), &unit_amplitudes(4, 1), &unit_amplitudes(2, 0), l).unwrap();
        let sched = ProtocolSchedule::new(ProtocolKind::Resonant, 0.5, 0.5);
        let cfg = IntegratorConfig { sample_dt: Some(0.1), ..Default::default() };
        let rec = evolve_lindblad(&ProtocolHamiltonian::new(l), &collapse, &rho0, &sched, &cfg, &target()).unwrap();
        for (t, n) in rec.times.iter().zip(&rec.n_mean) {
            assert_abs_diff_eq!(*n, (-kappa * t).exp(), epsilon = 1e-6);
        }
        assert!(rec.max_trace_error < 1e-8);
    }

    #[test]
    fn split_spans_match_single_call() {
        let lambda = 2.0 * std::f64::consts::PI * 8.0;
        let p = ModelParams::new(lambda, lambda).with_fock_dim(3).with_rates(3.0, 0.0, 0.0, 0.5, 0.0);
        let sched = make_schedule(&p, ProtocolKind::Resonant).unwrap();
        let h = ProtocolHamiltonian::for_protocol(&p, &sched).unwrap();
        let c = collapse_operators(&p).unwrap();
        let l = p.layout().unwrap();
        let rho0 = pure_state(&unit_amplitudes(4, 2), &unit_amplitudes(3, 0), &BlochAngle::new(1.2, 0.4).qubit_amplitudes(), l).unwrap();
        let cfg = IntegratorConfig::default().with_tolerances(1e-11, 1e-13);
        let whole = propagate(&h, &c, rho0.entries(), 0.0, sched.total, &cfg).unwrap();
        let first = propagate(&h, &c, rho0.entries(), 0.0, sched.tau, &cfg).unwrap();
        let second = propagate(&h, &c, &first, sched.tau, sched.total, &cfg).unwrap();
        let diff = (&whole - &second).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff < 1e-9, "diff = {diff}");
    }

    #[test]
    fn rejects_mismatched_layouts() {
        let l = HilbertLayout::new(3).unwrap();
        let other = HilbertLayout::new(4).unwrap();
        let h = ProtocolHamiltonian::new(l);
        let rho0 = pure_state(&unit_amplitudes(4, 0), &unit_amplitudes(4, 0), &unit_amplitudes(2, 0), other).unwrap();
        let sched = ProtocolSchedule::new(ProtocolKind::Resonant, 0.1, 0.1);
        assert!(evolve_von_neumann(&h, &rho0, &sched, &IntegratorConfig::default(), &target()).is_err());
        let _ = CompositeOperator::<f64>::zeros(l);
    }

    #[test]
    fn step_budget_exhaustion_reports_time() {
        let lambda = 2.0 * std::f64::consts::PI * 8.0;
        let p = ModelParams::new(lambda, lambda).with_fock_dim(2);
        let sched = make_schedule(&p, ProtocolKind::Resonant).unwrap();
        let h = ProtocolHamiltonian::for_protocol(&p, &sched).unwrap();
        let l = p.layout().unwrap();
        let rho0 = pure_state(&unit_amplitudes(4, 2), &unit_amplitudes(2, 0), &unit_amplitudes(2, 1), l).unwrap();
        let cfg = IntegratorConfig { max_steps: 3, max_step: Some(1e-4), ..Default::default() };
        match evolve_von_neumann(&h, &rho0, &sched, &cfg, &target()) {
            Err(Error::Integration { last_good_time, .. }) => assert!(last_good_time >= 0.0 && last_good_time < sched.total),
            other => panic!("expected integration error, got {other:?}"),
        }
    }
}
