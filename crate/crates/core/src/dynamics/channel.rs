use super::integrator::IntegratorConfig;
use super::lindblad::{evolve_operator, Generator};
use crate::error::{Error, Result};
use crate::model::{CollapseOp, TimeDependentHamiltonian};
use crate::tensor::{DensityMatrix, SpaceSignature, StateVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

pub const CHANNEL_TOL: f64 = 1e-8;

/// One segment of evolution under a fixed generator.
#[derive(Clone, Debug)]
pub struct Stage {
    pub hamiltonian: TimeDependentHamiltonian,
    pub collapse: Vec<CollapseOp>,
    pub duration: f64,
    /// Single-factor states for factors this stage adds to the previous space.
    pub fill: Vec<StateVector>,
}

impl Stage {
    pub fn new(hamiltonian: TimeDependentHamiltonian, collapse: Vec<CollapseOp>, duration: f64) -> Self {
        Self { hamiltonian, collapse, duration, fill: Vec::new() }
    }

    pub fn with_fill(mut self, fill: Vec<StateVector>) -> Self {
        self.fill = fill;
        self
    }

    pub fn signature(&self) -> &SpaceSignature {
        self.hamiltonian.signature()
    }
}

/// Stages applied in sequence; the input space is the first stage's space
/// minus any factors it fills in.
#[derive(Clone, Debug)]
pub struct StageChain {
    pub stages: Vec<Stage>,
    pub integrator: IntegratorConfig,
}

impl StageChain {
    pub fn new(stages: Vec<Stage>, integrator: IntegratorConfig) -> Self {
        Self { stages, integrator }
    }

    pub fn output_signature(&self) -> &SpaceSignature {
        self.stages.last().expect("empty stage chain").signature()
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Evolve `rho` through every stage; returns the operator at each of
    /// `samples` (times measured from the start of the last stage).
    pub fn evolve(&self, rho: &DensityMatrix, samples: &[f64]) -> Result<Vec<DensityMatrix>> {
        if self.stages.is_empty() {
            return Err(Error::InvalidParameter("empty stage chain".into()));
        }
        let mut cur = rho.clone();
        let n = self.stages.len();
        for (k, stage) in self.stages.iter().enumerate() {
            let sig = stage.signature();
            if cur.signature() != sig {
                cur = cur.pad_to(sig, &stage.fill)?;
            }
            let gen = Generator::new(&stage.hamiltonian, &stage.collapse)?;
            let times: Vec<f64> = if k + 1 == n { samples.to_vec() } else { vec![stage.duration] };
            let (outs, _) = evolve_operator(gen, cur.clone().into_data(), &times, &self.integrator)?;
            if k + 1 == n {
                return outs.into_iter().map(|d| DensityMatrix::unchecked(sig.clone(), d)).collect();
            }
            cur = DensityMatrix::unchecked(sig.clone(), outs.into_iter().next().unwrap())?;
        }
        unreachable!()
    }
}

/// Completely positive map known through its action on `|u⟩⟨v|` for a set
/// of input kets.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    pub signature: SpaceSignature,
    pub inputs: Vec<StateVector>,
    /// `outputs[u * n + v]` is the image of `|u⟩⟨v|`.
    pub outputs: Vec<DensityMatrix>,
    pub time: f64,
}

impl QuantumChannel {
    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn output(&self, u: usize, v: usize) -> &DensityMatrix {
        &self.outputs[u * self.inputs.len() + v]
    }

    /// Channel that returns its inputs unchanged.
    pub fn identity(inputs: Vec<StateVector>) -> Result<Self> {
        let signature = inputs.first().ok_or_else(|| Error::InvalidParameter("no channel inputs".into()))?.signature().clone();
        let mut outputs = Vec::new();
        for u in &inputs {
            for v in &inputs {
                outputs.push(DensityMatrix::outer(u, v)?);
            }
        }
        Ok(Self { signature, inputs, outputs, time: 0.0 })
    }

    /// Image of `Σ c_uv |u⟩⟨v|`.
    pub fn apply(&self, coeffs: &[(usize, usize, C64)]) -> Result<DensityMatrix> {
        let mut out = DensityMatrix::zeros(&self.signature);
        for &(u, v, c) in coeffs {
            out.add_scaled(c, self.output(u, v))?;
        }
        Ok(out)
    }

    /// Largest deviation from trace preservation over `|u⟩⟨v|` (should map
    /// to δ_uv times the input overlap).
    pub fn trace_defect(&self) -> f64 {
        let n = self.n_inputs();
        let mut worst: f64 = 0.0;
        for u in 0..n {
            for v in 0..n {
                let expect = self.inputs[v].inner(&self.inputs[u]).unwrap();
                worst = worst.max((self.output(u, v).trace() - expect).norm());
            }
        }
        worst
    }

    /// Largest deviation of `E(|u⟩⟨v|)† − E(|v⟩⟨u|)`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n_inputs();
        let mut worst: f64 = 0.0;
        for u in 0..n {
            for v in u..n {
                let a = self.output(u, v).adjoint();
                let b = self.output(v, u);
                let d = a.data().iter().zip(b.data()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Run the chain on every `|u⟩⟨v|` with `u ≤ v` and fill the rest by
/// adjoints. One channel per sample time.
pub fn extract_channel(chain: &StageChain, inputs: &[StateVector], samples: &[f64]) -> Result<Vec<QuantumChannel>> {
    let n = inputs.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no channel inputs".into()));
    }
    let sig0 = inputs[0].signature();
    if inputs.iter().any(|s| s.signature() != sig0) {
        return Err(Error::SignatureMismatch("channel inputs live on different spaces".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u..n).map(move |v| (u, v))).collect();
    let runs: Vec<Vec<DensityMatrix>> = pairs
        .par_iter()
        .map(|&(u, v)| chain.evolve(&DensityMatrix::outer(&inputs[u], &inputs[v])?, samples))
        .collect::<Result<_>>()?;
    let signature = chain.output_signature().clone();
    let mut channels = Vec::with_capacity(samples.len());
    for (s, &t) in samples.iter().enumerate() {
        let mut outputs = vec![DensityMatrix::zeros(&signature); n * n];
        for (&(u, v), run) in pairs.iter().zip(&runs) {
            outputs[u * n + v] = run[s].clone();
            if u != v {
                outputs[v * n + u] = run[s].adjoint();
            }
        }
        channels.push(QuantumChannel { signature: signature.clone(), inputs: inputs.to_vec(), outputs, time: t });
    }
    Ok(channels)
}
