use crate::dynamics::{mean_photon, propagate_exact, QuantumState};
use crate::error::{Error, Result};
use crate::tensor::{coherent_state, embed, make_boson_ops, Operator, SpaceSignature, StateVector};
use crate::model::SystemParams;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct StateTransfer {
    pub t: f64,
    pub initial: StateVector,
    pub final_state: StateVector,
    /// Overlap with `|−iβ sin(g_b t)⟩_c |β cos(g_b t)⟩_b`, the exact image.
    pub fidelity: f64,
    /// Overlap with `|iβ⟩_c |0⟩_b`.
    pub fidelity_conjugate: f64,
    pub photons_cavity: f64,
    pub photons_nve: f64,
}

/// Resonant beam splitter `g_b(a†b + ab†)` on one cavity (`n_c` levels) and
/// one ensemble (`n_b` levels), starting from `|0⟩_c|β⟩_b`.
pub fn state_transfer(p: &SystemParams, beta: C64, t: Option<f64>) -> Result<StateTransfer> {
    let g_b = p.block(1).g_b;
    if !(g_b > 0.0) {
        return Err(Error::InvalidParameter(format!("g_b must be positive, got {g_b}")));
    }
    let t = t.unwrap_or(PI / (2.0 * g_b));
    let sig = SpaceSignature::new([("c", p.n_c), ("b", p.n_b)])?;
    let (a, ad, _) = make_boson_ops(p.n_c)?;
    let (b, bd, _) = make_boson_ops(p.n_b)?;
    let (a, ad) = (embed(&a.relabel("c")?, "c", &sig)?, embed(&ad.relabel("c")?, "c", &sig)?);
    let (b, bd) = (embed(&b.relabel("b")?, "b", &sig)?, embed(&bd.relabel("b")?, "b", &sig)?);
    let h: Operator = ad.mul(&b)?.add(&a.mul(&bd)?)?.scale_re(g_b).into_hermitian()?;
    let vac_c = coherent_state(C64::new(0.0, 0.0), p.n_c)?.relabel("c")?;
    let initial = vac_c.tensor(&coherent_state(beta, p.n_b)?.relabel("b")?)?;
    let final_state = match propagate_exact(&h, &QuantumState::Pure(initial.clone()), t)? {
        QuantumState::Pure(v) => v,
        QuantumState::Mixed(_) => unreachable!("pure input stays pure"),
    };
    let (s, c) = (g_b * t).sin_cos();
    let exact = coherent_state(C64::new(0.0, -1.0) * beta * s, p.n_c)?
        .relabel("c")?
        .tensor(&coherent_state(beta * c, p.n_b)?.relabel("b")?)?;
    let conj = coherent_state(C64::new(0.0, 1.0) * beta, p.n_c)?
        .relabel("c")?
        .tensor(&coherent_state(C64::new(0.0, 0.0), p.n_b)?.relabel("b")?)?;
    let rho = final_state.to_density();
    Ok(StateTransfer {
        t,
        fidelity: exact.inner(&final_state)?.norm(),
        fidelity_conjugate: conj.inner(&final_state)?.norm(),
        photons_cavity: mean_photon(&rho, "c")?,
        photons_nve: mean_photon(&rho, "b")?,
        initial,
        final_state,
    })
}
