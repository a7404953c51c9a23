use super::integrator::{integrate, IntegrationStats, IntegratorConfig, OdeSystem};
use crate::error::{Error, Result};
use crate::model::{CollapseOp, TimeDependentHamiltonian};
use crate::tensor::{embed, make_boson_ops, CsrMatrix, DensityMatrix, Operator, SpaceSignature, StateVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

pub const TRACE_DRIFT_TOL: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(ω, entries scaled by e^{iωt}, entries scaled by e^{−iωt})`
type Oscillating = (f64, Vec<(usize, C64)>, Vec<(usize, C64)>);

/// Non-Hermitian generator `G(t) = −iH(t) − ½ Σ L†L` on a fixed sparsity
/// pattern, with the jump operators kept alongside.
#[derive(Clone, Debug)]
pub struct Generator {
    g: CsrMatrix,
    base: Vec<C64>,
    oscillating: Vec<Oscillating>,
    jumps: Vec<CsrMatrix>,
    t_cached: f64,
    max_frequency: f64,
}

impl Generator {
    pub fn new(h: &TimeDependentHamiltonian, collapse: &[CollapseOp]) -> Result<Self> {
        let sig = h.signature();
        let d = sig.total_dim();
        for c in collapse {
            if c.op.signature() != sig {
                return Err(Error::SignatureMismatch(format!("collapse {} on {} vs {}", c.label, c.op.signature(), sig)));
            }
        }
        let h0 = h.h0.csr();
        let jumps: Vec<CsrMatrix> = collapse.iter().map(|c| c.jump().csr()).collect();
        let mut static_part = h0.scale(-I);
        for l in &jumps {
            static_part = static_part.add(&l.adjoint().matmul(l).scale(C64::new(-0.5, 0.0)));
        }
        let terms: Vec<(f64, CsrMatrix, CsrMatrix)> =
            h.terms.iter().map(|(w, a)| (*w, a.csr().scale(-I), a.csr().adjoint().scale(-I))).collect();

        // Structural union; magnitudes avoid accidental cancellation.
        let mut trips: Vec<(usize, usize, C64)> = static_part.triplets().map(|(i, j, v)| (i, j, C64::new(v.norm() + 1.0, 0.0))).collect();
        for (_, p, m) in &terms {
            trips.extend(p.triplets().chain(m.triplets()).map(|(i, j, v)| (i, j, C64::new(v.norm() + 1.0, 0.0))));
        }
        let pattern = CsrMatrix::from_triplets(d, d, trips);
        let mut base = vec![ZERO; pattern.nnz()];
        for (i, j, v) in static_part.triplets() {
            base[pattern.position(i, j).unwrap()] += v;
        }
        let locate = |m: &CsrMatrix| -> Vec<(usize, C64)> { m.triplets().map(|(i, j, v)| (pattern.position(i, j).unwrap(), v)).collect() };
        let oscillating = terms.iter().map(|(w, p, m)| (*w, locate(p), locate(m))).collect();
        let mut g = pattern;
        g.values_mut().copy_from_slice(&base);
        let mut out = Self { g, base, oscillating, jumps, t_cached: f64::NAN, max_frequency: h.max_frequency() };
        out.update(0.0);
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_lossless(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        self.max_frequency
    }

    /// Step ceiling of one twentieth of the fastest oscillation period.
    pub fn step_ceiling(&self) -> f64 {
        if self.max_frequency > 0.0 {
            2.0 * PI / self.max_frequency / 20.0
        } else {
            f64::INFINITY
        }
    }

    fn update(&mut self, t: f64) {
        if t == self.t_cached || self.oscillating.is_empty() && !self.t_cached.is_nan() {
            return;
        }
        let vals = self.g.values_mut();
        vals.copy_from_slice(&self.base);
        for (w, plus, minus) in &self.oscillating {
            let ph = C64::from_polar(1.0, w * t);
            for (p, v) in plus {
                vals[*p] += ph * v;
            }
            let phc = ph.conj();
            for (p, v) in minus {
                vals[*p] += phc * v;
            }
        }
        self.t_cached = t;
    }

    pub fn generator_at(&mut self, t: f64) -> &CsrMatrix {
        self.update(t);
        &self.g
    }
}

/// Jump operator with at most one entry per row: row `i` holds `val[i]` at
/// column `col[i]` (zero for empty rows). `shift` is set when every entry
/// sits at `col = row + shift`.
#[derive(Clone, Debug)]
struct Monomial {
    col: Vec<usize>,
    val: Vec<C64>,
    conj: Vec<C64>,
    shift: Option<isize>,
}

impl Monomial {
    fn from_csr(m: &CsrMatrix) -> Option<Self> {
        let n = m.nrows();
        let mut col = vec![0; n];
        let mut val = vec![ZERO; n];
        let mut shift: Option<Option<isize>> = None;
        for i in 0..n {
            let (lo, hi) = (m.indptr()[i], m.indptr()[i + 1]);
            match hi - lo {
                0 => {}
                1 => {
                    col[i] = m.indices()[lo];
                    val[i] = m.values()[lo];
                    let s = col[i] as isize - i as isize;
                    shift = match shift {
                        None => Some(Some(s)),
                        Some(Some(prev)) if prev == s => Some(Some(s)),
                        _ => Some(None),
                    };
                }
                _ => return None,
            }
        }
        let conj = val.iter().map(|v| v.conj()).collect();
        Some(Self { col, val, conj, shift: shift.unwrap_or(Some(0)) })
    }

    /// `o[j] += c · y[col[i], col[j]] · conj(val[j])`.
    fn add_row(&self, y: &[C64], d: usize, i: usize, scale: f64, o: &mut [C64]) {
        let a = self.val[i] * scale;
        if a == ZERO {
            return;
        }
        let rk = &y[self.col[i] * d..(self.col[i] + 1) * d];
        match self.shift {
            Some(s) => {
                let lo = (-s).max(0) as usize;
                let hi = ((d as isize - s).min(d as isize)).max(lo as isize) as usize;
                let src = &rk[(lo as isize + s) as usize..(hi as isize + s) as usize];
                o[lo..hi].iter_mut().zip(src).zip(&self.conj[lo..hi]).for_each(|((oj, r), c)| *oj += a * r * c);
            }
            None => {
                for (j, oj) in o.iter_mut().enumerate() {
                    *oj += a * rk[self.col[j]] * self.conj[j];
                }
            }
        }
    }
}

/// `dρ/dt = Gρ + ρG† + Σ LρL†` on a row-major `d × d` matrix, one output row
/// at a time. With `hermitian` set the state must stay Hermitian and the
/// right action is taken as the adjoint of the left one.
pub struct LindbladRhs {
    gen: Generator,
    monomials: Vec<Monomial>,
    general: Vec<CsrMatrix>,
    pub hermitian: bool,
}

impl LindbladRhs {
    pub fn new(gen: Generator) -> Self {
        let mut monomials = Vec::new();
        let mut general = Vec::new();
        for l in &gen.jumps {
            match Monomial::from_csr(l) {
                Some(m) => monomials.push(m),
                None => general.push(l.clone()),
            }
        }
        Self { gen, monomials, general, hermitian: false }
    }

    /// `o = (Gρ)_i + s (Σ LρL†)_i`, plus `(ρG†)_i` unless `hermitian`.
    fn row(&self, y: &[C64], i: usize, jump_scale: f64, o: &mut [C64]) {
        let d = self.gen.dim();
        let g = &self.gen.g;
        o.iter_mut().for_each(|v| *v = ZERO);
        for (k, gk) in g.row(i) {
            o.iter_mut().zip(&y[k * d..(k + 1) * d]).for_each(|(a, b)| *a += gk * b);
        }
        if !self.hermitian {
            let r = &y[i * d..(i + 1) * d];
            for (j, oj) in o.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (l, gl) in g.row(j) {
                    acc += r[l] * gl.conj();
                }
                *oj += acc;
            }
        }
        for m in &self.monomials {
            m.add_row(y, d, i, jump_scale, o);
        }
        if !self.general.is_empty() {
            let mut tmp = vec![ZERO; d];
            for l in &self.general {
                tmp.iter_mut().for_each(|v| *v = ZERO);
                for (k, lk) in l.row(i) {
                    tmp.iter_mut().zip(&y[k * d..(k + 1) * d]).for_each(|(a, b)| *a += lk * jump_scale * b);
                }
                for (j, oj) in o.iter_mut().enumerate() {
                    for (c, lc) in l.row(j) {
                        *oj += tmp[c] * lc.conj();
                    }
                }
            }
        }
    }
}

impl OdeSystem for LindbladRhs {
    fn dim(&self) -> usize {
        let d = self.gen.dim();
        d * d
    }

    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.gen.dim();
        self.gen.update(t);
        // Hermitian: rows hold Gρ + ½ΣLρL†, and X + X† completes the sum.
        let scale = if self.hermitian { 0.5 } else { 1.0 };
        let this = &*self;
        let body = |(i, o): (usize, &mut [C64])| this.row(y, i, scale, o);
        if d * d >= super::integrator::PAR_MIN {
            dy.par_chunks_mut(d).enumerate().for_each(body);
        } else {
            dy.chunks_mut(d).enumerate().for_each(body);
        }
        if self.hermitian {
            add_adjoint(dy, d);
        }
    }
}

/// `m ← m + m†` in place.
fn add_adjoint(m: &mut [C64], d: usize) {
    const TILE: usize = 64;
    for bi in (0..d).step_by(TILE) {
        for bj in (0..=bi).step_by(TILE) {
            for i in bi..(bi + TILE).min(d) {
                for j in bj..(bj + TILE).min(i) {
                    let v = m[i * d + j] + m[j * d + i].conj();
                    m[i * d + j] = v;
                    m[j * d + i] = v.conj();
                }
            }
        }
    }
    for i in 0..d {
        m[i * d + i] = C64::new(2.0 * m[i * d + i].re, 0.0);
    }
}

/// Largest `|y_ij − conj(y_ji)|` relative to the largest entry.
fn relative_hermiticity(y: &[C64], d: usize) -> f64 {
    let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((y[i * d + j] - y[j * d + i].conj()).norm());
        }
    }
    worst / scale
}

/// Right-hand side for `y`, using the Hermitian half when `y` is Hermitian
/// to rounding; `y` is then made exactly Hermitian.
fn lindblad_rhs_for(gen: Generator, y: &mut [C64]) -> LindbladRhs {
    let d = gen.dim();
    let mut rhs = LindbladRhs::new(gen);
    if relative_hermiticity(y, d) <= 1e-13 {
        for i in 0..d {
            for j in i + 1..d {
                let v = 0.5 * (y[i * d + j] + y[j * d + i].conj());
                y[i * d + j] = v;
                y[j * d + i] = v.conj();
            }
            y[i * d + i].im = 0.0;
        }
        rhs.hermitian = true;
    }
    rhs
}

/// `dψ/dt = −iH(t)ψ`
pub struct SchrodingerRhs {
    gen: Generator,
}

impl SchrodingerRhs {
    pub fn new(gen: Generator) -> Result<Self> {
        if !gen.is_lossless() {
            return Err(Error::InvalidParameter("pure-state evolution needs an empty collapse list".into()));
        }
        Ok(Self { gen })
    }
}

impl OdeSystem for SchrodingerRhs {
    fn dim(&self) -> usize {
        self.gen.dim()
    }

    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.gen.update(t);
        dy.iter_mut().for_each(|v| *v = ZERO);
        self.gen.g.mul_vec_acc(C64::new(1.0, 0.0), y, dy);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn signature(&self) -> &SpaceSignature {
        match self {
            QuantumState::Pure(s) => s.signature(),
            QuantumState::Mixed(r) => r.signature(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => s.to_density(),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        match self {
            QuantumState::Pure(s) => s.expectation(op),
            QuantumState::Mixed(r) => r.expectation(op),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Pure(s) => s.norm().powi(2),
            QuantumState::Mixed(r) => r.trace().re,
        }
    }
}

/// One master-equation run.
#[derive(Clone, Debug)]
pub struct EvolutionTask {
    pub hamiltonian: TimeDependentHamiltonian,
    pub collapse: Vec<CollapseOp>,
    pub initial: QuantumState,
    pub t_final: f64,
    /// Initial step guess.
    pub dt_hint: f64,
    /// Observables recorded every `sample_interval` and at `t_final`.
    pub record: Vec<(String, Operator)>,
    pub sample_interval: Option<f64>,
    pub integrator: IntegratorConfig,
}

impl EvolutionTask {
    pub fn new(hamiltonian: TimeDependentHamiltonian, collapse: Vec<CollapseOp>, initial: QuantumState, t_final: f64) -> Self {
        Self {
            hamiltonian,
            collapse,
            initial,
            t_final,
            dt_hint: 0.0,
            record: Vec::new(),
            sample_interval: None,
            integrator: IntegratorConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidParameter(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.dt_hint > self.t_final {
            return Err(Error::InvalidParameter("dt_hint exceeds t_final".into()));
        }
        if self.initial.signature() != self.hamiltonian.signature() {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.initial.signature(), self.hamiltonian.signature())));
        }
        for (name, op) in &self.record {
            if op.signature() != self.hamiltonian.signature() {
                return Err(Error::SignatureMismatch(format!("observable {name}")));
            }
        }
        Ok(())
    }

    fn sample_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        if let Some(dt) = self.sample_interval.filter(|dt| *dt > 0.0) {
            let n = (self.t_final / dt).floor() as usize;
            times.extend((0..=n).map(|k| k as f64 * dt).filter(|t| *t < self.t_final * (1.0 - 1e-12)));
        }
        times.push(self.t_final);
        times
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub state: QuantumState,
    pub times: Vec<f64>,
    /// One series per recorded observable, real part of the expectation.
    pub traces: Vec<(String, Vec<f64>)>,
    pub stats: IntegrationStats,
}

/// Integrate the task's master equation (or Schrödinger equation for a pure
/// initial state with no collapse operators).
pub fn evolve_lindblad(task: &EvolutionTask) -> Result<EvolutionResult> {
    task.validate()?;
    let gen = Generator::new(&task.hamiltonian, &task.collapse)?;
    let mut cfg = task.integrator.clone();
    cfg.h_max = cfg.h_max.min(gen.step_ceiling());
    if task.dt_hint > 0.0 {
        cfg.h_init = Some(task.dt_hint);
    }
    let times = task.sample_times();
    let mut traces: Vec<(String, Vec<f64>)> = task.record.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
    let mut stats = IntegrationStats::default();
    let sig = task.initial.signature().clone();

    let record = |state: &QuantumState, traces: &mut Vec<(String, Vec<f64>)>| -> Result<()> {
        for ((_, op), (_, series)) in task.record.iter().zip(traces.iter_mut()) {
            series.push(state.expectation(op)?.re);
        }
        Ok(())
    };

    let pure = matches!(task.initial, QuantumState::Pure(_)) && task.collapse.is_empty();
    let (mut y, mut sys): (Vec<C64>, Box<dyn OdeSystem>) = if pure {
        let QuantumState::Pure(s) = &task.initial else { unreachable!() };
        (s.amplitudes().to_vec(), Box::new(SchrodingerRhs::new(gen)?))
    } else {
        let mut y = task.initial.to_density().into_data();
        let rhs = lindblad_rhs_for(gen, &mut y);
        (y, Box::new(rhs))
    };
    let wrap = |y: &[C64]| -> Result<QuantumState> {
        Ok(if pure {
            QuantumState::Pure(StateVector::unnormalized(sig.clone(), y.to_vec())?)
        } else {
            QuantumState::Mixed(DensityMatrix::unchecked(sig.clone(), y.to_vec())?)
        })
    };
    let tr0 = task.initial.trace();
    let mut t = 0.0;
    let mut state = task.initial.clone();
    for &ts in &times {
        if ts - t > 1e-12 * t.max(1.0) {
            let st = integrate(sys.as_mut(), &cfg, t, ts, &mut y)?;
            cfg.h_init = Some(st.last_h);
            stats.merge(&st);
            t = ts;
        }
        state = wrap(&y)?;
        let drift = (state.trace() - tr0).abs();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift { drift });
        }
        record(&state, &mut traces)?;
    }
    Ok(EvolutionResult { state, times, traces, stats })
}

/// Evolve an arbitrary (possibly non-Hermitian) operator and return it at
/// each of `times` (ascending, measured from 0).
pub fn evolve_operator(
    gen: Generator,
    initial: Vec<C64>,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Vec<C64>>, IntegrationStats)> {
    let mut cfg = cfg.clone();
    cfg.h_max = cfg.h_max.min(gen.step_ceiling());
    let d = gen.dim();
    let mut y = initial;
    let mut sys = lindblad_rhs_for(gen, &mut y);
    let trace = |y: &[C64]| -> C64 { (0..d).map(|i| y[i * d + i]).sum() };
    let tr0 = trace(&y);
    let mut out = vec![Vec::new(); times.len()];
    let mut stats = IntegrationStats::default();
    let mut t = 0.0;
    for k in ascending(times)? {
        let ts = times[k];
        if ts - t > 1e-12 * t.max(1.0) {
            let st = integrate(&mut sys, &cfg, t, ts, &mut y)?;
            cfg.h_init = Some(st.last_h);
            stats.merge(&st);
            t = ts;
        }
        let drift = (trace(&y) - tr0).norm();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift { drift });
        }
        out[k] = y.clone();
    }
    Ok((out, stats))
}

/// Visiting order of `times`, which may be unsorted but not negative.
fn ascending(times: &[f64]) -> Result<Vec<usize>> {
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || t.is_infinite()) {
        return Err(Error::InvalidParameter(format!("sample time {t} must be finite and >= 0")));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    Ok(order)
}

/// Pure-state counterpart of [`evolve_operator`].
pub fn evolve_ket(gen: Generator, initial: Vec<C64>, times: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<Vec<C64>>, IntegrationStats)> {
    let mut cfg = cfg.clone();
    cfg.h_max = cfg.h_max.min(gen.step_ceiling());
    let mut sys = SchrodingerRhs::new(gen)?;
    let mut y = initial;
    let mut out = vec![Vec::new(); times.len()];
    let mut stats = IntegrationStats::default();
    let mut t = 0.0;
    for k in ascending(times)? {
        let ts = times[k];
        if ts - t > 1e-12 * t.max(1.0) {
            let st = integrate(&mut sys, &cfg, t, ts, &mut y)?;
            cfg.h_init = Some(st.last_h);
            stats.merge(&st);
            t = ts;
        }
        out[k] = y.clone();
    }
    Ok((out, stats))
}

/// `e^{−iHt}` applied to a state, for static Hermitian `H`.
pub fn propagate_exact(h: &Operator, state: &QuantumState, t: f64) -> Result<QuantumState> {
    if !h.hermitian_flag() {
        let deviation = h.hermiticity_deviation();
        if deviation > crate::tensor::operator::HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
    }
    if h.signature() != state.signature() {
        return Err(Error::SignatureMismatch(format!("{} vs {}", h.signature(), state.signature())));
    }
    let m = h.csr().scale(C64::new(0.0, -t));
    match state {
        QuantumState::Pure(s) => {
            let out = expm_action(&m, s.amplitudes());
            Ok(QuantumState::Pure(StateVector::unnormalized(s.signature().clone(), out)?))
        }
        QuantumState::Mixed(r) => {
            // U ρ U† = U (U ρ†)† for Hermitian ρ; apply column by column.
            let d = r.dim();
            let half = apply_to_columns(&m, r.data(), d);
            let adj: Vec<C64> = (0..d * d).map(|k| half[(k % d) * d + k / d].conj()).collect();
            let full = apply_to_columns(&m, &adj, d);
            Ok(QuantumState::Mixed(DensityMatrix::unchecked(r.signature().clone(), full)?))
        }
    }
}

fn apply_to_columns(m: &CsrMatrix, x: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    let mut col = vec![ZERO; d];
    for j in 0..d {
        for i in 0..d {
            col[i] = x[i * d + j];
        }
        let r = expm_action(m, &col);
        for i in 0..d {
            out[i * d + j] = r[i];
        }
    }
    out
}

/// `e^{M} v` by scaled Taylor series.
pub fn expm_action(m: &CsrMatrix, v: &[C64]) -> Vec<C64> {
    let nrm = m.norm1();
    let substeps = nrm.ceil().max(1.0) as usize;
    let scale = C64::new(1.0 / substeps as f64, 0.0);
    let ms = m.scale(scale);
    let mut x = v.to_vec();
    for _ in 0..substeps {
        let mut term = x.clone();
        let mut acc = x.clone();
        for k in 1..60 {
            let mut next = ms.mul_vec(&term);
            let inv = 1.0 / k as f64;
            next.iter_mut().for_each(|z| *z *= inv);
            let tn = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            acc.iter_mut().zip(&next).for_each(|(a, b)| *a += b);
            term = next;
            let an = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if tn <= 1e-17 * an.max(1e-300) {
                break;
            }
        }
        x = acc;
    }
    x
}

/// `Tr(a†a ρ)` for the mode `label`.
pub fn mean_photon(rho: &DensityMatrix, label: &str) -> Result<f64> {
    let sig = rho.signature();
    let (_, _, n) = make_boson_ops(sig.dim_of(label)?)?;
    Ok(rho.expectation(&embed(&n, label, sig)?)?.re)
}
