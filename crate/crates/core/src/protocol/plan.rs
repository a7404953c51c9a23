use crate::error::{Error, Result};
use crate::model::{BlockParams, SystemParams};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// `(λ/Δ)(e^{iΔt} − 1)`, continuous through Δ = 0 where it becomes `iλt`.
pub fn alpha_of_t(b: &BlockParams, t: f64) -> C64 {
    let lambda = b.lambda();
    let x = b.big_delta() * t;
    if x == 0.0 {
        return C64::new(0.0, lambda * t);
    }
    let half = (0.5 * x).sin();
    lambda * t * C64::new(-2.0 * half * half / x, x.sin() / x)
}

/// NVE amplitude in the interaction frame, `α(t) e^{iχt}` with χ = g_b²/δ_b.
pub fn beta_of_t(b: &BlockParams, t: f64) -> C64 {
    alpha_of_t(b, t) * C64::from_polar(1.0, b.stark() * t)
}

/// Smallest positive t with |α(t)| = target.
pub fn solve_t4(b: &BlockParams, target: f64) -> Result<f64> {
    if target < 0.0 {
        return Err(Error::InvalidParameter(format!("target amplitude {target} is negative")));
    }
    let lambda = b.lambda();
    let delta = b.big_delta();
    if delta == 0.0 {
        return Ok(target / lambda);
    }
    let bound = b.alpha_bound();
    if target > bound {
        return Err(Error::Infeasible { target, bound });
    }
    Ok(2.0 / delta.abs() * (target / bound).min(1.0).asin())
}

/// Durations of the four steps. Steps 2–4 may differ per block.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPlan {
    pub t1: f64,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
    pub t4: Vec<f64>,
    /// Ensemble Stark shift g_b²/δ_b per block.
    pub stark: Vec<f64>,
    /// Drive Rabi frequency Ω per block, fixing the qubit frame phase.
    pub drive: Vec<f64>,
}

impl StepPlan {
    pub fn new(p: &SystemParams) -> Result<Self> {
        let mut plan = Self::preparation_only(p);
        plan.t4 = p.blocks.iter().map(|b| solve_t4(b, p.target_beta)).collect::<Result<_>>()?;
        Ok(plan)
    }

    /// Steps 1–3 only; `t4` is left empty.
    pub fn preparation_only(p: &SystemParams) -> Self {
        Self {
            t1: PI / (2.0 * (p.n_blocks() as f64).sqrt() * p.g_a),
            t2: p.blocks.iter().map(|b| PI / (2.0 * b.g_r)).collect(),
            t3: p.blocks.iter().map(|b| PI / (4.0 * b.omega_eg)).collect(),
            t4: Vec::new(),
            stark: p.blocks.iter().map(|b| b.stark()).collect(),
            drive: p.blocks.iter().map(|b| b.omega).collect(),
        }
    }

    /// Length of steps 1–3 for block `j` (1-based).
    pub fn preparation(&self, j: usize) -> f64 {
        self.t1 + self.t2[j - 1] + self.t3[j - 1]
    }

    pub fn total(&self, j: usize) -> f64 {
        self.preparation(j) + self.t4[j - 1]
    }
}
