use crate::error::{Error, Result};
use log::warn;
use std::f64::consts::PI;

/// Angular frequency in rad/μs from ν = ω/2π in MHz.
pub fn mhz(nu: f64) -> f64 {
    2.0 * PI * nu
}

/// ν = ω/2π in MHz from an angular frequency in rad/μs.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Decay rate in 1/μs from a lifetime in μs; an infinite lifetime gives 0.
pub fn rate_from_lifetime(tau_us: f64) -> f64 {
    if tau_us.is_infinite() {
        0.0
    } else {
        1.0 / tau_us
    }
}

/// Parameters of one qubit–cavity–ensemble block. Frequencies in rad/μs,
/// rates in 1/μs.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub g_r: f64,
    pub g: f64,
    pub g_b: f64,
    pub omega_eg: f64,
    pub omega: f64,
    pub phi: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
}

impl BlockParams {
    /// Dispersive coupling λ = (g g_b / 4)(1/δ_a + 1/δ_b).
    pub fn lambda(&self) -> f64 {
        self.g * self.g_b / 4.0 * (1.0 / self.delta_a + 1.0 / self.delta_b)
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_a - self.delta_b
    }

    /// Vacuum Stark shift of the ensemble mode, g_b²/δ_b.
    pub fn stark(&self) -> f64 {
        self.g_b * self.g_b / self.delta_b
    }

    /// Effective detuning Δ = δ_c − g_b²/δ_b.
    pub fn big_delta(&self) -> f64 {
        self.delta_c() - self.stark()
    }

    /// Largest displacement amplitude reachable, 2λ/|Δ| (infinite at Δ = 0).
    pub fn alpha_bound(&self) -> f64 {
        let d = self.big_delta();
        if d == 0.0 {
            f64::INFINITY
        } else {
            2.0 * self.lambda() / d.abs()
        }
    }

    pub fn reduced_detuning(&self) -> f64 {
        self.delta_b / self.g_b
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [("kappa", self.kappa), ("kappa_prime", self.kappa_prime), ("gamma", self.gamma), ("gamma_phi", self.gamma_phi)];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        let couplings = [("g_r", self.g_r), ("g", self.g), ("g_b", self.g_b), ("omega_eg", self.omega_eg), ("omega", self.omega)];
        for (name, v) in couplings {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("delta_a", self.delta_a), ("delta_b", self.delta_b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, ratio) in [("delta_a/g", self.delta_a / self.g), ("delta_b/g_b", self.delta_b / self.g_b)] {
            if ratio < 3.0 {
                return Err(Error::InvalidParameter(format!("{name} = {ratio:.3} is outside the dispersive regime (< 3)")));
            }
            if ratio < 5.0 {
                warn!("{name} = {ratio:.3} is only weakly dispersive");
            }
        }
        Ok(())
    }
}

impl Default for BlockParams {
    fn default() -> Self {
        let g = mhz(5.0);
        let g_b = mhz(4.0);
        Self {
            g_r: mhz(5.0),
            g,
            g_b,
            omega_eg: mhz(50.0),
            omega: mhz(100.0),
            phi: -PI / 2.0,
            delta_a: 7.2 * g,
            delta_b: 9.0 * g_b,
            kappa: rate_from_lifetime(1.0),
            kappa_prime: rate_from_lifetime(1000.0),
            gamma: rate_from_lifetime(25.0),
            gamma_phi: rate_from_lifetime(15.0),
        }
    }
}

/// Every constant of the model. Per-block values live in `blocks`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub g_a: f64,
    pub gamma_a: f64,
    pub gamma_phi_a: f64,
    pub blocks: Vec<BlockParams>,
    pub n_c: usize,
    pub n_b: usize,
    pub target_beta: f64,
    /// Apply coupler-qubit relaxation while it idles after step 1.
    pub idle_decoherence: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::uniform(3, BlockParams::default())
    }
}

impl SystemParams {
    pub fn uniform(n_blocks: usize, block: BlockParams) -> Self {
        Self {
            g_a: mhz(50.0),
            gamma_a: block.gamma,
            gamma_phi_a: block.gamma_phi,
            blocks: vec![block; n_blocks],
            n_c: 3,
            n_b: 12,
            target_beta: 1.2,
            idle_decoherence: false,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block `j`, 1-based as in the labels `q1`, `c1`, `b1`.
    pub fn block(&self, j: usize) -> &BlockParams {
        &self.blocks[j - 1]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut BlockParams {
        &mut self.blocks[j - 1]
    }

    /// Apply `f` to every block.
    pub fn for_blocks(&mut self, f: impl Fn(&mut BlockParams)) {
        self.blocks.iter_mut().for_each(f);
    }

    pub fn blocks_identical(&self) -> bool {
        self.blocks.windows(2).all(|w| w[0] == w[1])
    }

    /// Zero every decay and dephasing rate.
    pub fn lossless(&self) -> Self {
        let mut p = self.clone();
        p.gamma_a = 0.0;
        p.gamma_phi_a = 0.0;
        p.for_blocks(|b| {
            b.kappa = 0.0;
            b.kappa_prime = 0.0;
            b.gamma = 0.0;
            b.gamma_phi = 0.0;
        });
        p
    }

    /// Set δ_b = D g_b on every block; with `track_delta_a`, δ_a follows δ_b.
    pub fn with_reduced_detuning(&self, d: f64, track_delta_a: bool) -> Self {
        let mut p = self.clone();
        p.for_blocks(|b| {
            b.delta_b = d * b.g_b;
            if track_delta_a {
                b.delta_a = b.delta_b;
            }
        });
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidParameter("at least one block is required".into()));
        }
        if self.blocks.len() > 5 {
            return Err(Error::InvalidParameter(format!("{} blocks exceeds the supported maximum of 5", self.blocks.len())));
        }
        if !(self.g_a > 0.0) {
            return Err(Error::InvalidParameter(format!("g_a must be positive, got {}", self.g_a)));
        }
        for (name, v) in [("gamma_a", self.gamma_a), ("gamma_phi_a", self.gamma_phi_a)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        if self.n_c < 2 {
            return Err(Error::InvalidDimension { what: "n_c".into(), dim: self.n_c });
        }
        if self.n_b < 2 {
            return Err(Error::InvalidDimension { what: "n_b".into(), dim: self.n_b });
        }
        if !(self.target_beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("target_beta must be >= 0, got {}", self.target_beta)));
        }
        self.blocks.iter().try_for_each(BlockParams::validate)
    }
}
