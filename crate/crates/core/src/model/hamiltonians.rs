use super::params::{BlockParams, SystemParams};
use crate::error::{Error, Result};
use crate::tensor::{embed, make_boson_ops, make_qubit_ops, Operator, SpaceSignature};
use log::warn;
use num_complex::Complex64 as C64;

pub const COUPLER: &str = "A";

pub fn qubit_label(j: usize) -> String {
    format!("q{j}")
}

pub fn cavity_label(j: usize) -> String {
    format!("c{j}")
}

pub fn nve_label(j: usize) -> String {
    format!("b{j}")
}

/// Coupler qubit and all cavities.
pub fn stage1_signature(p: &SystemParams) -> SpaceSignature {
    let mut f = vec![(COUPLER.to_string(), 2)];
    f.extend((1..=p.n_blocks()).map(|j| (cavity_label(j), p.n_c)));
    SpaceSignature::new(f).unwrap()
}

/// Qubit, cavity and (optionally) ensemble of block `j`.
pub fn block_signature(p: &SystemParams, j: usize, with_nve: bool) -> SpaceSignature {
    let mut f = vec![(qubit_label(j), 2), (cavity_label(j), p.n_c)];
    if with_nve {
        f.push((nve_label(j), p.n_b));
    }
    SpaceSignature::new(f).unwrap()
}

/// All blocks side by side, block-major.
pub fn blocks_signature(p: &SystemParams, with_nve: bool) -> SpaceSignature {
    let f: Vec<(String, usize)> =
        (1..=p.n_blocks()).flat_map(|j| block_signature(p, j, with_nve).factors().to_vec()).collect();
    SpaceSignature::new(f).unwrap()
}

/// `H(t) = H0 + Σ_k (e^{iω_k t} A_k + e^{−iω_k t} A_k†)`
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    pub h0: Operator,
    pub terms: Vec<(f64, Operator)>,
}

impl TimeDependentHamiltonian {
    pub fn fixed(h0: Operator) -> Self {
        Self { h0, terms: Vec::new() }
    }

    pub fn signature(&self) -> &SpaceSignature {
        self.h0.signature()
    }

    pub fn is_static(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w.abs()).fold(0.0, f64::max)
    }

    pub fn at(&self, t: f64) -> Result<Operator> {
        let mut h = self.h0.clone();
        for (w, a) in &self.terms {
            let ph = C64::from_polar(1.0, w * t);
            h = h.add(&a.scale(ph))?.add(&a.adjoint().scale(ph.conj()))?;
        }
        h.into_hermitian()
    }
}

fn on(sig: &SpaceSignature, label: &str, op: &Operator) -> Result<Operator> {
    embed(op, label, sig)
}

fn boson(sig: &SpaceSignature, label: &str) -> Result<(Operator, Operator)> {
    let (a, ad, _) = make_boson_ops(sig.dim_of(label)?)?;
    Ok((on(sig, label, &a)?, on(sig, label, &ad)?))
}

/// Blocks with at least one factor in `sig`; each must carry all of `needs`.
fn blocks_in(p: &SystemParams, sig: &SpaceSignature, needs: &[fn(usize) -> String]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for j in 1..=p.n_blocks() {
        let labels: Vec<String> = needs.iter().map(|f| f(j)).collect();
        let present = labels.iter().filter(|l| sig.contains(l)).count();
        if present == 0 {
            continue;
        }
        if let Some(missing) = labels.iter().find(|l| !sig.contains(l)) {
            return Err(Error::MissingFactor(missing.clone()));
        }
        out.push(j);
    }
    if out.is_empty() {
        return Err(Error::MissingFactor(needs.iter().map(|f| f(1)).collect::<Vec<_>>().join("+")));
    }
    Ok(out)
}

/// `Σ_j g_A (a_j† σ_A⁻ + a_j σ_A⁺)`
pub fn build_h_i1(p: &SystemParams, sig: &SpaceSignature) -> Result<Operator> {
    if !sig.contains(COUPLER) {
        return Err(Error::MissingFactor(COUPLER.into()));
    }
    for j in 1..=p.n_blocks() {
        if !sig.contains(&cavity_label(j)) {
            return Err(Error::MissingFactor(cavity_label(j)));
        }
    }
    let q = make_qubit_ops();
    let sm = on(sig, COUPLER, &q.minus)?;
    let sp = on(sig, COUPLER, &q.plus)?;
    let mut h = Operator::zeros(sig);
    for j in 1..=p.n_blocks() {
        let (a, ad) = boson(sig, &cavity_label(j))?;
        h = h.add(&ad.mul(&sm)?.add(&a.mul(&sp)?)?.scale_re(p.g_a))?;
    }
    h.into_hermitian()
}

/// `Σ_j g_r (a_j† σ_j⁻ + a_j σ_j⁺)` over the blocks present in `sig`.
pub fn build_h_i2(p: &SystemParams, sig: &SpaceSignature) -> Result<Operator> {
    let q = make_qubit_ops();
    let mut h = Operator::zeros(sig);
    for j in blocks_in(p, sig, &[qubit_label, cavity_label])? {
        let (a, ad) = boson(sig, &cavity_label(j))?;
        let sm = on(sig, &qubit_label(j), &q.minus)?;
        let sp = on(sig, &qubit_label(j), &q.plus)?;
        h = h.add(&ad.mul(&sm)?.add(&a.mul(&sp)?)?.scale_re(p.block(j).g_r))?;
    }
    h.into_hermitian()
}

/// `Σ_j Ω_eg (e^{iφ}|g⟩_j⟨e| + h.c.)`
pub fn build_h_i3(p: &SystemParams, sig: &SpaceSignature) -> Result<Operator> {
    let q = make_qubit_ops();
    let mut h = Operator::zeros(sig);
    for j in blocks_in(p, sig, &[qubit_label])? {
        let b = p.block(j);
        let sm = on(sig, &qubit_label(j), &q.minus)?;
        let ph = C64::from_polar(b.omega_eg, b.phi);
        h = h.add(&sm.scale(ph))?.add(&sm.adjoint().scale(ph.conj()))?;
    }
    h.into_hermitian()
}

fn check_dispersive(b: &BlockParams) {
    for (name, ratio) in [("delta_a/g", b.delta_a / b.g), ("delta_b/g_b", b.delta_b / b.g_b)] {
        if ratio < 5.0 {
            warn!("{name} = {ratio:.3}: dispersive approximation is marginal");
        }
    }
}

/// Step-4 interaction-picture Hamiltonian as a function of time.
pub fn build_h_i4_td(p: &SystemParams, sig: &SpaceSignature) -> Result<TimeDependentHamiltonian> {
    let q = make_qubit_ops();
    let mut h0 = Operator::zeros(sig);
    let mut terms = Vec::new();
    for j in blocks_in(p, sig, &[qubit_label, cavity_label, nve_label])? {
        let b = p.block(j);
        check_dispersive(b);
        let (_, ad) = boson(sig, &cavity_label(j))?;
        let (bb, _) = boson(sig, &nve_label(j))?;
        let sm = on(sig, &qubit_label(j), &q.minus)?;
        let sx = on(sig, &qubit_label(j), &q.x)?;
        terms.push((b.delta_a, ad.mul(&sm)?.scale_re(b.g)));
        terms.push((b.delta_b, ad.mul(&bb)?.scale_re(b.g_b)));
        h0 = h0.add(&sx.scale_re(b.omega))?;
    }
    Ok(TimeDependentHamiltonian { h0: h0.into_hermitian()?, terms })
}

pub fn build_h_i4(p: &SystemParams, sig: &SpaceSignature, t: f64) -> Result<Operator> {
    build_h_i4_td(p, sig)?.at(t)
}

/// `−Σ_j λ σ̃_z (b e^{−iΔt} + b† e^{iΔt})` with σ̃_z = |+⟩⟨+| − |−⟩⟨−|.
pub fn build_h_eff_td(p: &SystemParams, sig: &SpaceSignature) -> Result<TimeDependentHamiltonian> {
    let q = make_qubit_ops();
    let mut terms = Vec::new();
    for j in blocks_in(p, sig, &[qubit_label, nve_label])? {
        let b = p.block(j);
        let (_, bd) = boson(sig, &nve_label(j))?;
        let sz = on(sig, &qubit_label(j), &q.x)?;
        terms.push((b.big_delta(), sz.mul(&bd)?.scale_re(-b.lambda())));
    }
    Ok(TimeDependentHamiltonian { h0: Operator::zeros(sig), terms })
}

pub fn build_h_eff(p: &SystemParams, sig: &SpaceSignature, t: f64) -> Result<Operator> {
    build_h_eff_td(p, sig)?.at(t)
}

/// Lindblad jump operator `√rate · op`.
#[derive(Clone, Debug)]
pub struct CollapseOp {
    pub label: String,
    pub op: Operator,
    pub rate: f64,
}

impl CollapseOp {
    pub fn jump(&self) -> Operator {
        self.op.scale_re(self.rate.sqrt())
    }
}

/// Dissipators for every factor present in `sig`; zero rates are skipped.
pub fn build_collapse_ops(p: &SystemParams, sig: &SpaceSignature) -> Result<Vec<CollapseOp>> {
    let q = make_qubit_ops();
    let mut out = Vec::new();
    let mut push = |label: String, op: Operator, rate: f64| {
        if rate > 0.0 {
            out.push(CollapseOp { label, op, rate });
        }
    };
    if sig.contains(COUPLER) {
        push(format!("relax:{COUPLER}"), on(sig, COUPLER, &q.minus)?, p.gamma_a);
        push(format!("dephase:{COUPLER}"), on(sig, COUPLER, &q.z)?, p.gamma_phi_a);
    }
    for j in 1..=p.n_blocks() {
        let b = p.block(j);
        let (ql, cl, bl) = (qubit_label(j), cavity_label(j), nve_label(j));
        if sig.contains(&ql) {
            push(format!("relax:{ql}"), on(sig, &ql, &q.minus)?, b.gamma);
            push(format!("dephase:{ql}"), on(sig, &ql, &q.z)?, b.gamma_phi);
        }
        if sig.contains(&cl) {
            push(format!("decay:{cl}"), boson(sig, &cl)?.0, b.kappa);
        }
        if sig.contains(&bl) {
            push(format!("decay:{bl}"), boson(sig, &bl)?.0, b.kappa_prime);
        }
    }
    Ok(out)
}
