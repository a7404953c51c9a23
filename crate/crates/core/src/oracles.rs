//! Closed-form evolutions used as references for the numerical engines.
//! Amplitudes are built by direct index arithmetic, without the operator code.

use crate::dynamics::{evolve_ket, propagate_exact, Generator, IntegratorConfig, QuantumState};
use crate::error::Result;
use crate::model::{
    build_h_eff_td, build_h_i1, build_h_i2, build_h_i3, stage1_signature, BlockParams, SystemParams,
    TimeDependentHamiltonian,
};
use crate::protocol::{alpha_of_t, run_protocol, state_transfer, Engine, ProtocolMode};
use crate::tensor::{SpaceSignature, StateVector, EXCITED, GROUND};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `cos(√3 g_A t)|e⟩_A|000⟩ − i sin(√3 g_A t)|g⟩_A|W⟩_c` on `[A, c1, c2, c3]`.
pub fn oracle_step1(g_a: f64, t: f64, n_c: usize) -> Result<StateVector> {
    let sig = SpaceSignature::new([("A", 2), ("c1", n_c), ("c2", n_c), ("c3", n_c)])?;
    let mut amps = vec![C64::new(0.0, 0.0); sig.total_dim()];
    let block = n_c * n_c * n_c;
    let th = 3f64.sqrt() * g_a * t;
    amps[EXCITED * block] = C64::new(th.cos(), 0.0);
    for stride in [n_c * n_c, n_c, 1] {
        amps[GROUND * block + stride] = -I * th.sin() / 3f64.sqrt();
    }
    StateVector::new(sig, amps)
}

/// Amplitudes on `(|g, n⟩, |e, n−1⟩)` starting from `|g, n⟩`.
pub fn oracle_jc(g_r: f64, n: usize, t: f64) -> (C64, C64) {
    let th = (n as f64).sqrt() * g_r * t;
    (C64::new(th.cos(), 0.0), -I * th.sin())
}

/// Step-3 rotation in the `(e, g)` basis; column k is the image of basis ket k.
pub fn oracle_rotation(omega_eg: f64, phi: f64, t: f64) -> [[C64; 2]; 2] {
    let (s, c) = (omega_eg * t).sin_cos();
    let mut u = [[C64::new(0.0, 0.0); 2]; 2];
    u[EXCITED][EXCITED] = C64::new(c, 0.0);
    u[GROUND][GROUND] = C64::new(c, 0.0);
    u[GROUND][EXCITED] = -I * C64::from_polar(1.0, phi) * s;
    u[EXCITED][GROUND] = -I * C64::from_polar(1.0, -phi) * s;
    u
}

/// Driven-oscillator solution for one σ_x eigenbranch: the ensemble is in
/// `e^{iθ} |sign · α(t)⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Displacement {
    pub amplitude: C64,
    pub phase: f64,
}

pub fn oracle_displacement(b: &BlockParams, t: f64, sign: f64) -> Displacement {
    let lambda = b.lambda();
    let d = b.big_delta();
    let x = d * t;
    // θ = (λ²/Δ)(t − sin(Δt)/Δ), with its small-Δ series.
    let phase = if x.abs() < 1e-3 {
        lambda * lambda * d * t.powi(3) / 6.0 * (1.0 - x * x / 20.0)
    } else {
        lambda * lambda / d * (t - x.sin() / d)
    };
    Displacement { amplitude: sign * alpha_of_t(b, t), phase }
}

/// `(cavity, ensemble)` amplitudes of the beam splitter `g_b(a†b + ab†)`
/// acting on `|0⟩|β⟩`.
pub fn oracle_transfer(g_b: f64, beta: C64, t: f64) -> (C64, C64) {
    let (s, c) = (g_b * t).sin_cos();
    (-I * beta * s, beta * c)
}

fn coherent_amps(alpha: C64, dim: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub params: String,
    /// `deviation` is a lower bound to clear rather than an upper one.
    pub at_least: bool,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        if self.at_least {
            self.deviation >= self.tolerance
        } else {
            self.deviation <= self.tolerance
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.at_least { ">=" } else { "<=" };
        let verdict = if self.passed() { "ok" } else { "FAILED" };
        write!(f, "{}: {:.3e} {rel} {:.1e} [{}] {verdict}", self.name, self.deviation, self.tolerance, self.params)
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn exact(h: &crate::tensor::Operator, psi: &StateVector, t: f64) -> Result<Vec<C64>> {
    match propagate_exact(h, &QuantumState::Pure(psi.clone()), t)? {
        QuantumState::Pure(v) => Ok(v.into_amplitudes()),
        QuantumState::Mixed(_) => unreachable!("pure input stays pure"),
    }
}

pub fn check_step1(p: &SystemParams) -> Result<OracleReport> {
    let q = p.lossless();
    let sig = stage1_signature(&q);
    let h = build_h_i1(&q, &sig)?;
    let init = StateVector::basis(&sig, &[("A", EXCITED)])?;
    let t1 = PI / (2.0 * 3f64.sqrt() * q.g_a);
    let mut dev: f64 = 0.0;
    for t in [0.0, 0.3 * t1, t1, 1.7 * t1] {
        dev = dev.max(max_diff(&exact(&h, &init, t)?, oracle_step1(q.g_a, t, q.n_c)?.amplitudes()));
    }
    Ok(OracleReport { name: "step1".into(), deviation: dev, tolerance: 1e-10, params: format!("g_A={:.4} rad/us", q.g_a), at_least: false })
}

pub fn check_jc(p: &SystemParams) -> Result<OracleReport> {
    let mut q = p.lossless();
    q.n_c = 4;
    let sig = SpaceSignature::new([("q1", 2), ("c1", 4)])?;
    let h = build_h_i2(&q, &sig)?;
    let g_r = q.block(1).g_r;
    let mut dev: f64 = 0.0;
    for n in 0..4 {
        for t in [0.0, 0.013, PI / (2.0 * g_r), 0.11] {
            let out = exact(&h, &StateVector::basis(&sig, &[("q1", GROUND), ("c1", n)])?, t)?;
            let (a, b) = oracle_jc(g_r, n, t);
            let mut expect = vec![C64::new(0.0, 0.0); 8];
            expect[GROUND * 4 + n] = a;
            if n > 0 {
                expect[EXCITED * 4 + n - 1] = b;
            }
            dev = dev.max(max_diff(&out, &expect));
        }
    }
    Ok(OracleReport { name: "jc".into(), deviation: dev, tolerance: 1e-10, params: format!("g_r={g_r:.4} rad/us, n=0..3"), at_least: false })
}

pub fn check_rotation(p: &SystemParams) -> Result<OracleReport> {
    let q = p.lossless();
    let sig = SpaceSignature::new([("q1", 2)])?;
    let b = q.block(1);
    let mut dev: f64 = 0.0;
    for phi in [b.phi, 0.0, 0.7] {
        let mut qq = q.clone();
        qq.block_mut(1).phi = phi;
        let h = build_h_i3(&qq, &sig)?;
        for t in [0.0, PI / (4.0 * b.omega_eg), 0.009] {
            let u = oracle_rotation(b.omega_eg, phi, t);
            for k in [EXCITED, GROUND] {
                let mut e = vec![C64::new(0.0, 0.0); 2];
                e[k] = C64::new(1.0, 0.0);
                let out = exact(&h, &StateVector::new(sig.clone(), e)?, t)?;
                dev = dev.max(max_diff(&out, &[u[0][k], u[1][k]]));
            }
        }
    }
    Ok(OracleReport { name: "rotation".into(), deviation: dev, tolerance: 1e-10, params: format!("Omega_eg={:.4} rad/us", b.omega_eg), at_least: false })
}

pub fn check_transfer(p: &SystemParams) -> Result<OracleReport> {
    let mut q = p.lossless();
    // Large enough that components with more than n_c − 1 total quanta are negligible.
    q.n_c = 30;
    q.n_b = 30;
    let g_b = q.block(1).g_b;
    let beta = C64::new(q.target_beta, 0.0);
    let mut dev: f64 = 0.0;
    for t in [0.0, PI / (4.0 * g_b), PI / (2.0 * g_b)] {
        let r = state_transfer(&q, beta, Some(t))?;
        let (ac, ab) = oracle_transfer(g_b, beta, t);
        let (vc, vb) = (coherent_amps(ac, 30), coherent_amps(ab, 30));
        let expect: Vec<C64> = vc.iter().flat_map(|x| vb.iter().map(move |y| x * y)).collect();
        dev = dev.max(max_diff(r.final_state.amplitudes(), &expect));
    }
    Ok(OracleReport { name: "transfer".into(), deviation: dev, tolerance: 1e-10, params: format!("g_b={g_b:.4} rad/us, beta={}", q.target_beta), at_least: false })
}

/// Effective-Hamiltonian integration against the driven-oscillator solution.
pub fn check_displacement(p: &SystemParams) -> Result<OracleReport> {
    let mut q = p.lossless();
    q.n_b = 20;
    let b = q.block(1).clone();
    let sig = SpaceSignature::new([("q1", 2), ("b1", 20)])?;
    let h: TimeDependentHamiltonian = build_h_eff_td(&q, &sig)?;
    let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-14);
    let t4 = crate::protocol::solve_t4(&b, q.target_beta)?;
    let times = [0.25 * t4, t4, 1.3 * t4];
    let mut dev: f64 = 0.0;
    for (sign, qubit) in [(1.0, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]), (-1.0, [FRAC_1_SQRT_2, -FRAC_1_SQRT_2])] {
        let mut init = vec![C64::new(0.0, 0.0); 40];
        init[EXCITED * 20] = C64::new(qubit[EXCITED], 0.0);
        init[GROUND * 20] = C64::new(qubit[GROUND], 0.0);
        let (outs, _) = evolve_ket(Generator::new(&h, &[])?, init, &times, &cfg)?;
        for (out, &t) in outs.iter().zip(&times) {
            let d = oracle_displacement(&b, t, sign);
            let nve = coherent_amps(d.amplitude, 20);
            let ph = C64::from_polar(1.0, d.phase);
            let expect: Vec<C64> = qubit.iter().flat_map(|&x| nve.iter().map(move |y| ph * x * y)).collect();
            dev = dev.max(max_diff(out, &expect));
        }
    }
    Ok(OracleReport { name: "displacement".into(), deviation: dev, tolerance: 1e-8, params: format!("lambda={:.4}, Delta={:.4} rad/us", b.lambda(), b.big_delta()), at_least: false })
}

/// Lossless step 4 under the full Hamiltonian scored against the effective
/// target. Reported as a fidelity that must reach 0.99.
pub fn check_full_vs_effective(p: &SystemParams) -> Result<OracleReport> {
    let mode = ProtocolMode { engine: Engine::Factorized, lossy: false, ideal_preparation: true, ..Default::default() };
    let r = run_protocol(p, &mode)?;
    Ok(OracleReport { name: "full-vs-effective".into(), deviation: r.fidelity, tolerance: 0.99, params: format!("D={:.2}", p.block(1).reduced_detuning()), at_least: true })
}

pub fn oracle_suite(p: &SystemParams) -> Result<Vec<OracleReport>> {
    Ok(vec![check_step1(p)?, check_jc(p)?, check_rotation(p)?, check_transfer(p)?, check_displacement(p)?, check_full_vs_effective(p)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step1_endpoints() {
        let g = 2.0 * PI * 50.0;
        let s0 = oracle_step1(g, 0.0, 3).unwrap();
        assert_eq!(s0.amplitudes()[0], C64::new(1.0, 0.0));
        let t1 = PI / (2.0 * 3f64.sqrt() * g);
        let s1 = oracle_step1(g, t1, 3).unwrap();
        assert!(s1.amplitudes()[0].norm() < 1e-15);
        assert!((s1.amplitudes()[27 + 9] - (-I / 3f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn jc_and_rotation_closed_forms() {
        let g = 1.7;
        let (a, b) = oracle_jc(g, 1, PI / (2.0 * g));
        assert!(a.norm() < 1e-15 && (b + I).norm() < 1e-15);
        assert_eq!(oracle_jc(g, 0, 3.0), (C64::new(1.0, 0.0), C64::new(0.0, 0.0)));
        let t2 = PI / (2.0 * 2f64.sqrt() * g);
        assert!(oracle_jc(g, 2, t2).0.norm() < 1e-15);
        let om = 3.0;
        let u = oracle_rotation(om, -PI / 2.0, PI / (4.0 * om));
        let h = FRAC_1_SQRT_2;
        assert!((u[EXCITED][EXCITED] - h).norm() < 1e-15 && (u[GROUND][EXCITED] + h).norm() < 1e-15);
        assert!((u[EXCITED][GROUND] - h).norm() < 1e-15 && (u[GROUND][GROUND] - h).norm() < 1e-15);
    }

    #[test]
    fn transfer_endpoints() {
        let beta = C64::new(1.2, 0.3);
        assert_eq!(oracle_transfer(2.0, beta, 0.0), (C64::new(0.0, 0.0), beta));
        let (c, b) = oracle_transfer(2.0, beta, PI / 4.0);
        assert!((c + I * beta).norm() < 1e-15 && b.norm() < 1e-15);
    }

    #[test]
    fn displacement_branches_are_opposite() {
        let b = BlockParams::default();
        assert_eq!(oracle_displacement(&b, 0.0, 1.0).amplitude, C64::new(0.0, 0.0));
        let p = oracle_displacement(&b, 0.4, 1.0);
        let m = oracle_displacement(&b, 0.4, -1.0);
        assert_eq!(p.amplitude, -m.amplitude);
        assert_eq!(p.phase, m.phase);
    }

    #[test]
    fn engines_match_oracles() {
        let p = SystemParams::default();
        for r in [check_step1(&p), check_jc(&p), check_rotation(&p), check_transfer(&p), check_displacement(&p)] {
            let r = r.unwrap();
            assert!(r.passed(), "{r}");
        }
    }

    proptest! {
        #[test]
        fn unitarity_and_energy(om in 0.1f64..10.0, phi in -3.2f64..3.2, t in 0.0f64..2.0, g in 0.1f64..5.0) {
            let u = oracle_rotation(om, phi, t);
            for a in 0..2 {
                for b in 0..2 {
                    let dot: C64 = (0..2).map(|k| u[k][a].conj() * u[k][b]).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - expect).norm() < 1e-12);
                }
            }
            let beta = C64::new(1.2, -0.4);
            let (c, b) = oracle_transfer(g, beta, t);
            prop_assert!((c.norm_sqr() + b.norm_sqr() - beta.norm_sqr()).abs() < 1e-12);
            let s = oracle_step1(g, t, 2).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }
}
