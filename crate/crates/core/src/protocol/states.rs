use super::plan::{alpha_of_t, beta_of_t, StepPlan};
use crate::dynamics::KetExpansion;
use crate::error::{Error, Result};
use crate::model::{block_signature, cavity_label, nve_label, qubit_label, stage1_signature, SystemParams, COUPLER};
use crate::tensor::{coherent_state, SpaceSignature, StateVector, EXCITED, GROUND};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

/// Single-qubit state in the `(e, g)` basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitKet {
    Excited,
    Ground,
    /// (|e⟩ + |g⟩)/√2
    Plus,
    /// (|e⟩ − |g⟩)/√2
    Minus,
}

impl QubitKet {
    pub fn amplitudes(self) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let mut a = [zero; 2];
        match self {
            QubitKet::Excited => a[EXCITED] = one,
            QubitKet::Ground => a[GROUND] = one,
            QubitKet::Plus => {
                a[EXCITED] = h;
                a[GROUND] = h;
            }
            QubitKet::Minus => {
                a[EXCITED] = h;
                a[GROUND] = -h;
            }
        }
        a
    }

    /// Eigenvalue of σ_x for `Plus`/`Minus`.
    pub fn sign(self) -> f64 {
        if self == QubitKet::Minus {
            -1.0
        } else {
            1.0
        }
    }
}

fn single(label: &str, amps: Vec<C64>) -> Result<StateVector> {
    StateVector::new(SpaceSignature::new([(label, amps.len())])?, amps)
}

fn fock(label: &str, dim: usize, n: usize) -> Result<StateVector> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[n] = C64::new(1.0, 0.0);
    single(label, v)
}

/// `|q⟩_j |n⟩_cj` and, when `nve` is given, `⊗ |nve⟩_bj`, times `phase`.
pub fn block_ket(p: &SystemParams, j: usize, q: QubitKet, n: usize, nve: Option<C64>, phase: C64) -> Result<StateVector> {
    let mut v = single(&qubit_label(j), q.amplitudes().to_vec())?.tensor(&fock(&cavity_label(j), p.n_c, n)?)?;
    if let Some(beta) = nve {
        v = v.tensor(&coherent_state(beta, p.n_b)?.relabel(&nve_label(j))?)?;
    }
    debug_assert_eq!(v.signature(), &block_signature(p, j, nve.is_some()));
    Ok(v.scale(phase))
}

/// W-type expansion: branch k puts ket 1 on block k and ket 0 elsewhere.
fn w_expansion(kets: Vec<Vec<StateVector>>) -> KetExpansion {
    let n = kets.len();
    let c = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let branches = (0..n).map(|k| (c, (0..n).map(|j| usize::from(j == k)).collect())).collect();
    KetExpansion { kets, branches }
}

/// Per-block picture of the ideal state after step `k` ∈ {1, 2, 3} (coupler
/// omitted; it sits in |g⟩ from step 1 on).
pub fn ideal_expansion(p: &SystemParams, k: usize) -> Result<KetExpansion> {
    let one = C64::new(1.0, 0.0);
    let (rest, marked, n_marked) = match k {
        1 => (QubitKet::Ground, QubitKet::Ground, 1),
        2 => (QubitKet::Ground, QubitKet::Excited, 0),
        3 => (QubitKet::Plus, QubitKet::Minus, 0),
        _ => return Err(Error::InvalidParameter(format!("no block expansion for step {k}"))),
    };
    let kets = (1..=p.n_blocks())
        .map(|j| Ok(vec![block_ket(p, j, rest, 0, None, one)?, block_ket(p, j, marked, n_marked, None, one)?]))
        .collect::<Result<_>>()?;
    Ok(w_expansion(kets))
}

/// Frame in which step-4 targets are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Interaction picture of the full step-4 Hamiltonian: amplitude β = α e^{iχt}
    /// and qubit phase e^{−isΩt}.
    Interaction,
    /// Frame of the effective Hamiltonian: amplitude α, no qubit phase.
    Effective,
}

/// Ideal step-4 state with each block `j` at its own step-4 time `times[j-1]`.
/// The driven-oscillator phase is common to all branches and omitted.
pub fn target_expansion(p: &SystemParams, times: &[f64], frame: Frame) -> Result<KetExpansion> {
    if times.len() != p.n_blocks() {
        return Err(Error::DimensionMismatch { expected: p.n_blocks(), found: times.len() });
    }
    let kets = (1..=p.n_blocks())
        .map(|j| {
            let b = p.block(j);
            let t = times[j - 1];
            let amp = match frame {
                Frame::Interaction => beta_of_t(b, t),
                Frame::Effective => alpha_of_t(b, t),
            };
            [QubitKet::Plus, QubitKet::Minus]
                .into_iter()
                .map(|q| {
                    let s = q.sign();
                    let phase = match frame {
                        Frame::Interaction => C64::from_polar(1.0, -s * b.omega * t),
                        Frame::Effective => C64::new(1.0, 0.0),
                    };
                    block_ket(p, j, q, 0, Some(amp * s), phase)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(w_expansion(kets))
}

/// Ideal state after step `k` ∈ 1..=4. Step 1 lives on the coupler and
/// cavities; later steps on the blocks without the coupler.
pub fn ideal_state_after_step(k: usize, p: &SystemParams) -> Result<StateVector> {
    match k {
        1 => {
            let sig = stage1_signature(p);
            let c = C64::new(1.0 / (p.n_blocks() as f64).sqrt(), 0.0);
            let mut amps = vec![C64::new(0.0, 0.0); sig.total_dim()];
            for j in 1..=p.n_blocks() {
                let mut levels = vec![(COUPLER.to_string(), GROUND)];
                levels.push((cavity_label(j), 1));
                let refs: Vec<(&str, usize)> = levels.iter().map(|(l, n)| (l.as_str(), *n)).collect();
                amps[sig.basis_index(&refs)?] = c;
            }
            StateVector::new(sig, amps)
        }
        2 | 3 => ideal_expansion(p, k)?.to_state(),
        4 => {
            let plan = StepPlan::new(p)?;
            target_expansion(p, &plan.t4, Frame::Interaction)?.to_state()
        }
        _ => Err(Error::InvalidParameter(format!("step {k} is not in 1..=4"))),
    }
}

/// `(1/N) Σ_k (−1)^{m_k} |β … −β (k-th) … β⟩` on ensembles `b1..bn`, with
/// the exact normalization. A vanishing superposition is an error.
pub fn ideal_w_state(n: usize, m: &[usize], beta: C64, dim: usize) -> Result<StateVector> {
    if m.len() != n || n == 0 {
        return Err(Error::DimensionMismatch { expected: n, found: m.len() });
    }
    let plus = coherent_state(beta, dim)?;
    let minus = coherent_state(-beta, dim)?;
    let mut total: Option<StateVector> = None;
    for k in 0..n {
        let mut v = if k == 0 { &minus } else { &plus }.relabel(&nve_label(1))?;
        for j in 1..n {
            v = v.tensor(&if j == k { &minus } else { &plus }.relabel(&nve_label(j + 1))?)?;
        }
        let sign = if m[k].is_multiple_of(2) { 1.0 } else { -1.0 };
        let v = v.scale(C64::new(sign, 0.0));
        total = Some(match total {
            None => StateVector::unnormalized(v.signature().clone(), v.into_amplitudes())?,
            Some(t) => t.add(&v)?,
        });
    }
    let total = total.unwrap();
    if total.norm() < 1e-12 {
        return Err(Error::InvalidParameter("degenerate W superposition (zero norm)".into()));
    }
    total.normalize()
}

/// Outcome of projecting the intracavity qubits.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub probability: f64,
    /// Remaining factors; normalized unless `degenerate`.
    pub state: StateVector,
    pub degenerate: bool,
}

/// Project qubits `q1..qn` onto levels `outcome` (`EXCITED`/`GROUND`).
pub fn measure_intracavity_qubits(state: &StateVector, outcome: &[usize]) -> Result<Measurement> {
    let sig = state.signature();
    let qubits: Vec<usize> = sig.factors().iter().enumerate().filter(|(_, (l, _))| l.starts_with('q')).map(|(i, _)| i).collect();
    if qubits.len() != outcome.len() {
        return Err(Error::DimensionMismatch { expected: qubits.len(), found: outcome.len() });
    }
    if let Some(&bad) = outcome.iter().find(|&&m| m > 1) {
        return Err(Error::InvalidParameter(format!("qubit level {bad} is not 0 (e) or 1 (g)")));
    }
    let rest_labels: Vec<&str> =
        sig.factors().iter().enumerate().filter(|(i, _)| !qubits.contains(i)).map(|(_, (l, _))| l.as_str()).collect();
    if rest_labels.is_empty() {
        return Err(Error::InvalidParameter("nothing left after measuring every factor".into()));
    }
    let rest = sig.keep(&rest_labels)?;
    let mut amps = vec![C64::new(0.0, 0.0); rest.total_dim()];
    for (i, a) in state.amplitudes().iter().enumerate() {
        let d = sig.digits(i);
        if qubits.iter().zip(outcome).any(|(&q, &m)| d[q] != m) {
            continue;
        }
        let kept: Vec<usize> = d.iter().enumerate().filter(|(k, _)| !qubits.contains(k)).map(|(_, &x)| x).collect();
        amps[rest.index(&kept)] = *a;
    }
    let v = StateVector::unnormalized(rest, amps)?;
    let probability = v.norm().powi(2);
    if probability < 1e-14 {
        return Ok(Measurement { probability, state: v, degenerate: true });
    }
    Ok(Measurement { probability, state: v.normalize()?, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::partial_trace;

    fn small() -> SystemParams {
        let mut p = SystemParams::default();
        p.n_c = 2;
        p.n_b = 12;
        p
    }

    #[test]
    fn step_one_amplitudes() {
        let p = SystemParams::default();
        let psi = ideal_state_after_step(1, &p).unwrap();
        let sig = psi.signature();
        for j in 1..=3 {
            let c = cavity_label(j);
            let i = sig.basis_index(&[(COUPLER, GROUND), (&c, 1)]).unwrap();
            assert!((psi.amplitudes()[i].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_three_branches_have_one_minus() {
        let p = small();
        let e = ideal_expansion(&p, 3).unwrap();
        for (_, idx) in &e.branches {
            assert_eq!(idx.iter().filter(|&&i| i == 1).count(), 1);
        }
        let psi = e.to_state().unwrap();
        let plus = block_ket(&p, 1, QubitKet::Plus, 0, None, C64::new(1.0, 0.0)).unwrap();
        let minus = block_ket(&p, 2, QubitKet::Minus, 0, None, C64::new(1.0, 0.0)).unwrap();
        let p3 = block_ket(&p, 3, QubitKet::Plus, 0, None, C64::new(1.0, 0.0)).unwrap();
        let branch = plus.tensor(&minus).unwrap().tensor(&p3).unwrap();
        assert!((psi.inner(&branch).unwrap().re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn step_four_at_zero_amplitude_is_step_three_with_vacuum() {
        let p = small();
        let t = target_expansion(&p, &[0.0; 3], Frame::Interaction).unwrap().to_state().unwrap();
        let s3 = ideal_expansion(&p, 3).unwrap();
        let vac: Vec<Vec<StateVector>> = s3
            .kets
            .iter()
            .enumerate()
            .map(|(j, ks)| {
                ks.iter().map(|k| k.tensor(&fock(&nve_label(j + 1), p.n_b, 0).unwrap()).unwrap()).collect()
            })
            .collect();
        let padded = KetExpansion { kets: vac, branches: s3.branches.clone() }.to_state().unwrap();
        assert!((t.inner(&padded).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branch_phases_are_common() {
        // Each branch has σ_x eigenvalues (+, +, −), so e^{−iΩ Σ s t} is a global phase.
        let p = small();
        let t = 0.3;
        let e = target_expansion(&p, &[t; 3], Frame::Interaction).unwrap();
        let om = p.block(1).omega;
        let psi = e.to_state().unwrap();
        let global = C64::from_polar(1.0, -om * t);
        // Rebuild without qubit phases and compare up to the global phase.
        let mut bare = e.clone();
        for (j, ks) in bare.kets.iter_mut().enumerate() {
            for (i, k) in ks.iter_mut().enumerate() {
                let s = if i == 0 { 1.0 } else { -1.0 };
                *k = k.scale(C64::from_polar(1.0, s * p.block(j + 1).omega * t));
            }
        }
        let bare = bare.to_state().unwrap();
        assert!((psi.inner(&bare.scale(global)).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn measurement_probabilities_and_pairing() {
        let mut p = SystemParams::default();
        p.n_c = 2;
        let t = super::super::plan::solve_t4(p.block(1), 1.2).unwrap();
        let phi = target_expansion(&p, &[t; 3], Frame::Effective).unwrap().to_state().unwrap();
        let s = (-2.0f64 * 1.44).exp();
        let mut total = 0.0;
        for bits in 0..8usize {
            let m: Vec<usize> = (0..3).map(|k| (bits >> k) & 1).collect();
            total += measure_intracavity_qubits(&phi, &m).unwrap().probability;
        }
        assert!((total - 1.0).abs() < 1e-10);
        let eee = measure_intracavity_qubits(&phi, &[EXCITED; 3]).unwrap();
        assert!((eee.probability - (0.125 + s * s / 4.0)).abs() < 1e-9, "{}", eee.probability);
        let ggg = measure_intracavity_qubits(&phi, &[GROUND; 3]).unwrap();
        let ov = eee.state.inner(&ggg.state).unwrap();
        assert!((ov + 1.0).norm() < 1e-10, "{ov}");
        // Ensemble part equals the W state at the achieved amplitude.
        let rho = partial_trace(&eee.state.to_density(), &["b1", "b2", "b3"]).unwrap();
        let alpha = alpha_of_t(p.block(1), t);
        let w = ideal_w_state(3, &[0, 0, 0], alpha, p.n_b).unwrap();
        let f = crate::tensor::fidelity_pure_target(&rho, &w).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn w_state_gram_norm() {
        let beta = C64::new(1.2, 0.0);
        let dim = 14;
        let s = (-2.0 * beta.norm_sqr()).exp();
        // Unnormalized norm² from the 3×3 Gram matrix with ⟨β^(k)|β^(l)⟩ = s².
        let plus = coherent_state(beta, dim).unwrap();
        let minus = coherent_state(-beta, dim).unwrap();
        let ov = plus.inner(&minus).unwrap().re;
        assert!((ov - s).abs() < 1e-6);
        let w = ideal_w_state(3, &[1, 1, 1], beta, dim).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let unnorm = 3.0 + 6.0 * ov * ov;
        assert!((unnorm - (3.0 + 6.0 * s * s)).abs() < 1e-6);
        assert!(ideal_w_state(2, &[0, 1], C64::new(0.0, 0.0), 4).is_err());
        let large = ideal_w_state(3, &[0, 0, 0], C64::new(3.0, 0.0), 30).unwrap();
        let branch = coherent_state(C64::new(-3.0, 0.0), 30)
            .unwrap()
            .relabel("b1")
            .unwrap()
            .tensor(&coherent_state(C64::new(3.0, 0.0), 30).unwrap().relabel("b2").unwrap())
            .unwrap()
            .tensor(&coherent_state(C64::new(3.0, 0.0), 30).unwrap().relabel("b3").unwrap())
            .unwrap();
        assert!((large.inner(&branch).unwrap().re - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    }
}
