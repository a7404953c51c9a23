use crate::error::{Error, Result};
use crate::tensor::linalg::hermitian_eigenvalues;
use crate::tensor::{embed, make_boson_ops, make_qubit_ops, CsrMatrix, Operator, SpaceSignature, GROUND};
use num_complex::Complex64 as C64;

/// `N` two-level spins (|m_s = 0⟩, |m_s = +1⟩) coupled to one cavity mode.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMicroModel {
    pub couplings: Vec<f64>,
    pub delta: f64,
}

impl EnsembleMicroModel {
    pub fn equal(n: usize, g: f64) -> Self {
        Self { couplings: vec![g; n], delta: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    /// Root-mean-square coupling ḡ.
    pub fn g_rms(&self) -> f64 {
        (self.couplings.iter().map(|g| g * g).sum::<f64>() / self.n() as f64).sqrt()
    }

    /// Collective coupling √N ḡ.
    pub fn g_collective(&self) -> f64 {
        (self.n() as f64).sqrt() * self.g_rms()
    }

    /// Cavity with `cavity_dim` levels followed by spins `s1..sN`.
    pub fn signature(&self, cavity_dim: usize) -> SpaceSignature {
        let mut f = vec![("c".to_string(), cavity_dim)];
        f.extend((1..=self.n()).map(|k| (format!("s{k}"), 2)));
        SpaceSignature::new(f).unwrap()
    }

    fn validate(&self) -> Result<()> {
        if self.couplings.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one spin".into()));
        }
        if self.couplings.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter("non-finite spin coupling".into()));
        }
        Ok(())
    }
}

/// `Σ_k g_k (a† τ_k⁻ + a τ_k⁺)` on `sig` (cavity `c`, spins `s1..sN`).
pub fn build_micro_hamiltonian(m: &EnsembleMicroModel, sig: &SpaceSignature) -> Result<Operator> {
    m.validate()?;
    let q = make_qubit_ops();
    let (a, ad, _) = make_boson_ops(sig.dim_of("c")?)?;
    let (a, ad) = (embed(&a, "c", sig)?, embed(&ad, "c", sig)?);
    let mut h = Operator::zeros(sig);
    for (k, g) in m.couplings.iter().enumerate() {
        let label = format!("s{}", k + 1);
        let tm = embed(&q.minus, &label, sig)?;
        let tp = embed(&q.plus, &label, sig)?;
        h = h.add(&ad.mul(&tm)?.add(&a.mul(&tp)?)?.scale_re(*g))?;
    }
    h.into_hermitian()
}

/// Spectrum of the one-excitation block of the micro-model.
#[derive(Clone, Debug, PartialEq)]
pub struct BrightStateReport {
    pub bright_coupling: f64,
    pub expected: f64,
    pub dark_states: usize,
    pub eigenvalues: Vec<f64>,
}

pub fn bright_state_coupling(m: &EnsembleMicroModel) -> Result<BrightStateReport> {
    let sig = m.signature(2);
    let h = build_micro_hamiltonian(m, &sig)?;
    let all_ground: Vec<(String, usize)> = (1..=m.n()).map(|k| (format!("s{k}"), GROUND)).collect();
    let levels = |cav: usize, flip: Option<usize>| -> Result<usize> {
        let mut l: Vec<(&str, usize)> = all_ground.iter().map(|(s, v)| (s.as_str(), *v)).collect();
        if let Some(k) = flip {
            l[k].1 = 1 - GROUND;
        }
        l.push(("c", cav));
        sig.basis_index(&l)
    };
    let mut basis = vec![levels(1, None)?];
    for k in 0..m.n() {
        basis.push(levels(0, Some(k))?);
    }
    let n = basis.len();
    let block = nalgebra::DMatrix::from_fn(n, n, |i, j| h.get(basis[i], basis[j]));
    let ev = hermitian_eigenvalues(&block);
    let bright_coupling = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dark_states = ev.iter().filter(|v| v.abs() < 1e-10 * bright_coupling.max(1.0)).count();
    Ok(BrightStateReport { bright_coupling, expected: m.g_collective(), dark_states, eigenvalues: ev })
}

/// Collective ladder elements ⟨S_{n+1}|b†|S_n⟩ against the bosonic √(n+1).
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveModeReport {
    pub n_spins: usize,
    /// `(n, micro-model element, √(n+1), relative deviation)`
    pub rows: Vec<(usize, f64, f64, f64)>,
    pub max_deviation: f64,
}

pub fn collective_mode_check(m: &EnsembleMicroModel, n_max: usize) -> Result<CollectiveModeReport> {
    m.validate()?;
    if n_max >= m.n() {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} must be below the spin count {}", m.n())));
    }
    let spins = SpaceSignature::new((1..=m.n()).map(|k| (format!("s{k}"), 2)))?;
    let q = make_qubit_ops();
    let gc = m.g_collective();
    let mut bd = CsrMatrix::zeros(spins.total_dim(), spins.total_dim());
    for (k, g) in m.couplings.iter().enumerate() {
        bd = bd.add(&embed(&q.plus, &format!("s{}", k + 1), &spins)?.csr().scale(C64::new(g / gc, 0.0)));
    }
    let mut state = vec![C64::new(0.0, 0.0); spins.total_dim()];
    let ground: Vec<(String, usize)> = (1..=m.n()).map(|k| (format!("s{k}"), GROUND)).collect();
    let l: Vec<(&str, usize)> = ground.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    state[spins.basis_index(&l)?] = C64::new(1.0, 0.0);
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let next = bd.mul_vec(&state);
        let elem = next.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let boson = ((n + 1) as f64).sqrt();
        rows.push((n, elem, boson, (elem - boson).abs() / boson));
        state = next.into_iter().map(|v| v / elem).collect();
    }
    let max_deviation = rows.iter().fold(0.0f64, |a, r| a.max(r.3));
    Ok(CollectiveModeReport { n_spins: m.n(), rows, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::linalg::unitary_propagator;
    use crate::tensor::{StateVector, EXCITED};

    #[test]
    fn single_spin_is_jaynes_cummings() {
        let m = EnsembleMicroModel::equal(1, 0.7);
        let sig = m.signature(3);
        let h = build_micro_hamiltonian(&m, &sig).unwrap();
        let i = sig.basis_index(&[("c", 1), ("s1", GROUND)]).unwrap();
        let j = sig.basis_index(&[("c", 0), ("s1", EXCITED)]).unwrap();
        assert!((h.get(i, j).re - 0.7).abs() < 1e-15);
        let k = sig.basis_index(&[("c", 2), ("s1", GROUND)]).unwrap();
        let l = sig.basis_index(&[("c", 1), ("s1", EXCITED)]).unwrap();
        assert!((h.get(k, l).re - 0.7 * 2f64.sqrt()).abs() < 1e-15);

        let t = std::f64::consts::PI / (2.0 * 0.7);
        let u = unitary_propagator(&h.dense(), t);
        let psi = StateVector::basis(&sig, &[("c", 1), ("s1", GROUND)]).unwrap();
        let out = &u * nalgebra::DVector::from_column_slice(psi.amplitudes());
        assert!((out[j] - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn bright_state_of_four_equal_spins() {
        let m = EnsembleMicroModel::equal(4, 0.3);
        let r = bright_state_coupling(&m).unwrap();
        assert!((r.bright_coupling - 0.6).abs() < 1e-12);
        assert_eq!(r.dark_states, 3);
    }

    #[test]
    fn bright_state_with_unequal_couplings() {
        let m = EnsembleMicroModel { couplings: vec![0.1, 0.25, 0.4], delta: 0.0 };
        let r = bright_state_coupling(&m).unwrap();
        let expect = (0.01f64 + 0.0625 + 0.16).sqrt();
        assert!((r.bright_coupling - expect).abs() < 1e-12);
        assert!((r.expected - expect).abs() < 1e-15);
        assert_eq!(r.dark_states, 2);
    }

    #[test]
    fn collective_ladder_deviation() {
        let r = collective_mode_check(&EnsembleMicroModel::equal(6, 1.0), 1).unwrap();
        assert!(r.rows[0].3 < 1e-12);
        assert!((r.rows[1].3 - (1.0 - (5.0f64 / 6.0).sqrt())).abs() < 1e-12);
        assert!((r.rows[1].3 - 0.0871).abs() < 1e-4);
        assert!(collective_mode_check(&EnsembleMicroModel::equal(2, 1.0), 2).is_err());
    }
}
