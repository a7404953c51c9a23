use super::plan::StepPlan;
use super::states::{block_ket, ideal_expansion, ideal_state_after_step, target_expansion, Frame, QubitKet};
use crate::dynamics::{
    compose_block_channels, evolve_lindblad, expansion_expectation, extract_channel, mean_photon, EvolutionTask,
    IntegratorConfig, KetExpansion, OperatorExpansion, QuantumChannel, QuantumState, Stage, StageChain,
};
use crate::error::{Error, Result};
use crate::model::{
    block_signature, blocks_signature, build_collapse_ops, build_h_eff_td, build_h_i1, build_h_i2, build_h_i3,
    build_h_i4_td, cavity_label, nve_label, stage1_signature, SystemParams, TimeDependentHamiltonian, COUPLER,
};
use crate::tensor::{
    fidelity_pure_target, make_boson_ops, DensityMatrix, Operator, SpaceSignature, StateVector, EXCITED, GROUND,
};
use log::info;
use num_complex::Complex64 as C64;
use std::time::{Duration, Instant};

/// Largest global dimension the brute-force engine accepts.
pub const BRUTE_DIM_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Per-block channels composed over the entangled input.
    Factorized,
    /// Global density matrix on every block at once.
    Brute,
    /// Factorized, with step 4 under the effective Hamiltonian.
    Effective,
}

#[derive(Clone, Debug)]
pub struct ProtocolMode {
    pub engine: Engine,
    pub lossy: bool,
    /// Replace steps 1–3 by their ideal action.
    pub ideal_preparation: bool,
    /// Extra step-4 sample times (from the start of step 4).
    pub samples: Vec<f64>,
    /// Also compute the isolated fidelities of steps 1–3.
    pub step_fidelities: bool,
    pub integrator: IntegratorConfig,
}

impl Default for ProtocolMode {
    fn default() -> Self {
        Self {
            engine: Engine::Factorized,
            lossy: true,
            ideal_preparation: false,
            samples: Vec::new(),
            step_fidelities: false,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    /// Against the fixed target at t4.
    pub fidelity: f64,
    /// `√⟨b₁†b₁⟩`
    pub beta_abs: f64,
    pub mean_photon: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub engine: Engine,
    pub lossy: bool,
    pub ideal_preparation: bool,
    pub plan: StepPlan,
    pub fidelity: f64,
    pub step_fidelities: Option<[f64; 3]>,
    /// Ideal ensemble amplitude of block 1 at t4, including its phase.
    pub beta_target: C64,
    pub beta_abs: f64,
    pub mean_photon: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub wall: Duration,
}

fn effective_params(p: &SystemParams, lossy: bool) -> SystemParams {
    if lossy {
        p.clone()
    } else {
        p.lossless()
    }
}

fn stage(p: &SystemParams, h: TimeDependentHamiltonian, duration: f64) -> Result<Stage> {
    let collapse = build_collapse_ops(p, h.signature())?;
    Ok(Stage::new(h, collapse, duration))
}

fn stage2(p: &SystemParams, sig: &SpaceSignature, t: f64) -> Result<Stage> {
    stage(p, TimeDependentHamiltonian::fixed(build_h_i2(p, sig)?), t)
}

fn stage3(p: &SystemParams, sig: &SpaceSignature, t: f64) -> Result<Stage> {
    stage(p, TimeDependentHamiltonian::fixed(build_h_i3(p, sig)?), t)
}

fn stage4(p: &SystemParams, sig: &SpaceSignature, t: f64, effective: bool) -> Result<Stage> {
    let h = if effective { build_h_eff_td(p, sig)? } else { build_h_i4_td(p, sig)? };
    let fill = (1..=p.n_blocks())
        .map(nve_label)
        .filter(|l| sig.contains(l))
        .map(|l| vacuum(&l, p.n_b))
        .collect::<Result<Vec<_>>>()?;
    Ok(stage(p, h, t)?.with_fill(fill))
}

fn vacuum(label: &str, dim: usize) -> Result<StateVector> {
    StateVector::basis(&SpaceSignature::new([(label, dim)])?, &[])
}

/// Step 1 on the coupler and cavities, starting from `|e⟩_A|0…0⟩`.
pub fn run_stage1(p: &SystemParams, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    let sig = stage1_signature(p);
    let init = StateVector::basis(&sig, &[(COUPLER, EXCITED)])?;
    let plan_t1 = StepPlan::preparation_only(p).t1;
    let h = TimeDependentHamiltonian::fixed(build_h_i1(p, &sig)?);
    let mut task = EvolutionTask::new(h, build_collapse_ops(p, &sig)?, QuantumState::Pure(init), plan_t1);
    task.integrator = cfg.clone();
    Ok(evolve_lindblad(&task)?.state.to_density())
}

/// Cavity state after discarding the coupler. It is projected on `|g⟩`;
/// with `relax` > 0 that fraction of its excited population decays into `|g⟩`.
pub fn reduce_coupler(rho: &DensityMatrix, relax: f64) -> Result<DensityMatrix> {
    let sig = rho.signature();
    let pos = sig.position(COUPLER)?;
    if pos != 0 {
        return Err(Error::SignatureMismatch(format!("coupler must be the first factor of {sig}")));
    }
    let rest: Vec<&str> = sig.labels().skip(1).collect();
    let rsig = sig.keep(&rest)?;
    let d = rsig.total_dim();
    let full = rho.dim();
    let mut data = vec![C64::new(0.0, 0.0); d * d];
    for (level, w) in [(GROUND, 1.0), (EXCITED, relax)] {
        if w == 0.0 {
            continue;
        }
        let off = level * d;
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] += w * rho.data()[(off + i) * full + off + j];
            }
        }
    }
    DensityMatrix::unchecked(rsig, data)
}

/// Isolated fidelity of step `k` ∈ 1..=3 fed with the ideal output of the
/// previous step. Uses the rates in `p` as given.
pub fn step_fidelity(p: &SystemParams, k: usize, cfg: &IntegratorConfig) -> Result<f64> {
    match k {
        1 => {
            let rho = run_stage1(p, cfg)?;
            fidelity_pure_target(&rho, &ideal_state_after_step(1, p)?)
        }
        2 | 3 => {
            let input = ideal_expansion(p, k - 1)?;
            let target = ideal_expansion(p, k)?;
            let plan = StepPlan::preparation_only(p);
            let mut channels = Vec::with_capacity(p.n_blocks());
            for j in 1..=p.n_blocks() {
                let sig = block_signature(p, j, false);
                let st = if k == 2 { stage2(p, &sig, plan.t2[j - 1])? } else { stage3(p, &sig, plan.t3[j - 1])? };
                let d = st.duration;
                let chain = StageChain::new(vec![st], cfg.clone());
                channels.push(extract_channel(&chain, &input.kets[j - 1], &[d])?.remove(0));
            }
            let refs: Vec<&QuantumChannel> = channels.iter().collect();
            compose_block_channels(&refs, &input.to_operator()?, &target)
        }
        _ => Err(Error::InvalidParameter(format!("step fidelity is defined for steps 1..=3, got {k}"))),
    }
}

fn coupler_relaxation(p: &SystemParams, plan: &StepPlan) -> f64 {
    if !p.idle_decoherence {
        return 0.0;
    }
    let rest = (1..=p.n_blocks()).map(|j| plan.total(j) - plan.t1).fold(0.0, f64::max);
    1.0 - (-p.gamma_a * rest).exp()
}

/// Run the four-step protocol and score it against the ideal state.
pub fn run_protocol(p: &SystemParams, mode: &ProtocolMode) -> Result<ProtocolResult> {
    p.validate()?;
    let start = Instant::now();
    let plan = StepPlan::new(p)?;
    let q = effective_params(p, mode.lossy);
    let (fidelity, trace) = match mode.engine {
        Engine::Factorized | Engine::Effective => run_factorized(&q, &plan, mode)?,
        Engine::Brute => run_brute(&q, &plan, mode)?,
    };
    let step_fidelities = if mode.step_fidelities {
        let mut f = [0.0; 3];
        for (k, v) in f.iter_mut().enumerate() {
            *v = step_fidelity(&q, k + 1, &mode.integrator)?;
        }
        Some(f)
    } else {
        None
    };
    let last = trace.first().cloned().expect("t4 sample");
    let wall = start.elapsed();
    info!("protocol {:?} lossy={} F={fidelity:.6} in {:.2?}", mode.engine, mode.lossy, wall);
    Ok(ProtocolResult {
        engine: mode.engine,
        lossy: mode.lossy,
        ideal_preparation: mode.ideal_preparation,
        beta_target: super::plan::beta_of_t(p.block(1), plan.t4[0]),
        plan,
        fidelity,
        step_fidelities,
        beta_abs: last.beta_abs,
        mean_photon: last.mean_photon,
        trace: trace.into_iter().skip(1).collect(),
        wall,
    })
}

fn frame(mode: &ProtocolMode) -> Frame {
    if mode.engine == Engine::Effective {
        Frame::Effective
    } else {
        Frame::Interaction
    }
}

/// Input expansion and per-block channel input kets for step 2 onwards.
fn prepared_input(q: &SystemParams, plan: &StepPlan, mode: &ProtocolMode) -> Result<(OperatorExpansion, Vec<Vec<StateVector>>)> {
    if mode.ideal_preparation {
        let e = ideal_expansion(q, 3)?;
        return Ok((e.to_operator()?, e.kets));
    }
    let rho_c = reduce_coupler(&run_stage1(q, &mode.integrator)?, coupler_relaxation(q, plan))?;
    let sigs: Vec<SpaceSignature> = (1..=q.n_blocks()).map(|j| rho_c.signature().keep(&[&cavity_label(j)])).collect::<Result<_>>()?;
    let input = OperatorExpansion::from_density(&rho_c, &sigs, |_, n| (n < 2).then_some(n), 1e-15)?;
    let kets = (1..=q.n_blocks())
        .map(|j| Ok(vec![block_ket(q, j, QubitKet::Ground, 0, None, one())?, block_ket(q, j, QubitKet::Ground, 1, None, one())?]))
        .collect::<Result<_>>()?;
    Ok((input, kets))
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn block_chain(q: &SystemParams, plan: &StepPlan, j: usize, mode: &ProtocolMode) -> Result<StageChain> {
    let mut stages = Vec::new();
    if !mode.ideal_preparation {
        let sig = block_signature(q, j, false);
        stages.push(stage2(q, &sig, plan.t2[j - 1])?);
        stages.push(stage3(q, &sig, plan.t3[j - 1])?);
    }
    let sig4 = block_signature(q, j, true);
    stages.push(stage4(q, &sig4, plan.t4[j - 1], mode.engine == Engine::Effective)?);
    Ok(StageChain::new(stages, mode.integrator.clone()))
}

fn relabel_channel(ch: &QuantumChannel, sig: &SpaceSignature, inputs: &[StateVector]) -> Result<QuantumChannel> {
    Ok(QuantumChannel {
        signature: sig.clone(),
        inputs: inputs.to_vec(),
        outputs: ch.outputs.iter().map(|o| o.reinterpret(sig.clone())).collect::<Result<_>>()?,
        time: ch.time,
    })
}

/// Index 0 is t4 itself, followed by `mode.samples`.
fn run_factorized(q: &SystemParams, plan: &StepPlan, mode: &ProtocolMode) -> Result<(f64, Vec<TracePoint>)> {
    let (input, in_kets) = prepared_input(q, plan, mode)?;
    // per block: channels at [t4_j, samples...]
    let mut per_block: Vec<Vec<QuantumChannel>> = Vec::with_capacity(q.n_blocks());
    let identical = q.blocks_identical();
    for j in 1..=q.n_blocks() {
        if identical && j > 1 {
            let sig = block_signature(q, j, true);
            let first = &per_block[0];
            let relabeled = first.iter().map(|c| relabel_channel(c, &sig, &in_kets[j - 1])).collect::<Result<_>>()?;
            per_block.push(relabeled);
            continue;
        }
        let chain = block_chain(q, plan, j, mode)?;
        let mut times = vec![plan.t4[j - 1]];
        times.extend(&mode.samples);
        per_block.push(extract_channel(&chain, &in_kets[j - 1], &times)?);
    }
    let target = target_expansion(q, &plan.t4, frame(mode))?;
    let n_samples = 1 + mode.samples.len();
    let (n_c, n_b) = (make_boson_ops(q.n_c)?.2, make_boson_ops(q.n_b)?.2);
    let mut trace = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let chans: Vec<&QuantumChannel> = per_block.iter().map(|c| &c[s]).collect();
        let f = compose_block_channels(&chans, &input, &target)?;
        let local = |j: usize, op: &Operator, label: String| -> Result<f64> {
            let sig = block_signature(q, j, true);
            let emb = crate::tensor::embed(&op.relabel(&label)?, &label, &sig)?;
            let mut ops: Vec<Option<&Operator>> = vec![None; q.n_blocks()];
            ops[j - 1] = Some(&emb);
            Ok(expansion_expectation(&chans, &input, &ops)?.re)
        };
        let photons = (1..=q.n_blocks()).map(|j| local(j, &n_c, cavity_label(j))).collect::<Result<Vec<_>>>()?;
        let nb1 = local(1, &n_b, nve_label(1))?;
        trace.push(TracePoint { t: chans[0].time, fidelity: f, beta_abs: nb1.max(0.0).sqrt(), mean_photon: photons });
    }
    Ok((trace[0].fidelity, trace))
}

fn run_brute(q: &SystemParams, plan: &StepPlan, mode: &ProtocolMode) -> Result<(f64, Vec<TracePoint>)> {
    let sig4 = blocks_signature(q, true);
    if sig4.total_dim() > BRUTE_DIM_LIMIT {
        return Err(Error::TooLarge { dim: sig4.total_dim(), limit: BRUTE_DIM_LIMIT });
    }
    let same = |v: &[f64]| v.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15);
    if !(same(&plan.t2) && same(&plan.t3) && same(&plan.t4)) {
        return Err(Error::InvalidParameter("brute-force engine needs equal step durations on every block".into()));
    }
    let sig23 = blocks_signature(q, false);
    let mut stages = Vec::new();
    let rho0 = if mode.ideal_preparation {
        ideal_expansion(q, 3)?.to_state()?.to_density()
    } else {
        stages.push(stage2(q, &sig23, plan.t2[0])?);
        stages.push(stage3(q, &sig23, plan.t3[0])?);
        let rho_c = reduce_coupler(&run_stage1(q, &mode.integrator)?, coupler_relaxation(q, plan))?;
        let fill = (1..=q.n_blocks())
            .map(|j| StateVector::basis(&SpaceSignature::new([(crate::model::qubit_label(j), 2)])?, &[(&crate::model::qubit_label(j), GROUND)]))
            .collect::<Result<Vec<_>>>()?;
        rho_c.pad_to(&sig23, &fill)?
    };
    stages.push(stage4(q, &sig4, plan.t4[0], false)?);
    let chain = StageChain::new(stages, mode.integrator.clone());
    let mut times = vec![plan.t4[0]];
    times.extend(&mode.samples);
    let outs = chain.evolve(&rho0, &times)?;
    let target = target_expansion(q, &plan.t4, Frame::Interaction)?.to_state()?;
    let mut trace = Vec::with_capacity(outs.len());
    for (rho, &t) in outs.iter().zip(&times) {
        let photons = (1..=q.n_blocks()).map(|j| mean_photon(rho, &cavity_label(j))).collect::<Result<Vec<_>>>()?;
        trace.push(TracePoint {
            t,
            fidelity: fidelity_pure_target(rho, &target)?,
            beta_abs: mean_photon(rho, &nve_label(1))?.max(0.0).sqrt(),
            mean_photon: photons,
        });
    }
    Ok((trace[0].fidelity, trace))
}

/// Target used by the factorized engine, exposed for diagnostics.
pub fn protocol_target(p: &SystemParams, mode: &ProtocolMode) -> Result<KetExpansion> {
    target_expansion(p, &StepPlan::new(p)?.t4, frame(mode))
}
