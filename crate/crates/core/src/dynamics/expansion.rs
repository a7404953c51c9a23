use super::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::tensor::{DensityMatrix, Operator, SpaceSignature, StateVector};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `Σ_k c_k ⊗_j |t_{k,j}⟩` with per-block ket tables.
#[derive(Clone, Debug)]
pub struct KetExpansion {
    /// Kets available on each block.
    pub kets: Vec<Vec<StateVector>>,
    /// `(c_k, index into kets[j] for each block j)`
    pub branches: Vec<(C64, Vec<usize>)>,
}

impl KetExpansion {
    pub fn n_blocks(&self) -> usize {
        self.kets.len()
    }

    fn check(&self) -> Result<()> {
        for (_, idx) in &self.branches {
            if idx.len() != self.kets.len() {
                return Err(Error::DimensionMismatch { expected: self.kets.len(), found: idx.len() });
            }
            for (j, &i) in idx.iter().enumerate() {
                if i >= self.kets[j].len() {
                    return Err(Error::InvalidParameter(format!("branch ket {i} missing on block {j}")));
                }
            }
        }
        Ok(())
    }

    /// `⟨self|other⟩`, assuming both use the same ket tables.
    fn inner_same_tables(&self, other: &Self) -> Result<C64> {
        let grams = self.grams(&other.kets)?;
        let mut acc = ZERO;
        for (ca, ia) in &self.branches {
            for (cb, ib) in &other.branches {
                let mut p = ca.conj() * cb;
                for j in 0..self.kets.len() {
                    p *= grams[j][ia[j]][ib[j]];
                }
                acc += p;
            }
        }
        Ok(acc)
    }

    fn grams(&self, other: &[Vec<StateVector>]) -> Result<Vec<Vec<Vec<C64>>>> {
        self.kets
            .iter()
            .zip(other)
            .map(|(a, b)| a.iter().map(|x| b.iter().map(|y| x.inner(y)).collect::<Result<Vec<_>>>()).collect())
            .collect()
    }

    pub fn norm_sqr(&self) -> Result<f64> {
        self.check()?;
        Ok(self.inner_same_tables(self)?.re)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr()?.sqrt();
        if n == 0.0 {
            return Err(Error::InvalidParameter("zero-norm expansion".into()));
        }
        Ok(Self { kets: self.kets.clone(), branches: self.branches.iter().map(|(c, i)| (c / n, i.clone())).collect() })
    }

    /// Global vector on the block-major concatenation of the block spaces.
    pub fn to_state(&self) -> Result<StateVector> {
        self.check()?;
        let mut total: Option<StateVector> = None;
        for (c, idx) in &self.branches {
            let mut v = self.kets[0][idx[0]].clone();
            for j in 1..self.kets.len() {
                v = v.tensor(&self.kets[j][idx[j]])?;
            }
            let v = v.scale(*c);
            total = Some(match total {
                None => v,
                Some(t) => t.add(&v)?,
            });
        }
        total.ok_or_else(|| Error::InvalidParameter("empty expansion".into()))
    }

    /// `|ψ⟩⟨ψ|` as an operator expansion over the same ket tables.
    pub fn to_operator(&self) -> Result<OperatorExpansion> {
        self.check()?;
        let mut terms = Vec::with_capacity(self.branches.len().pow(2));
        for (ca, ia) in &self.branches {
            for (cb, ib) in &self.branches {
                terms.push((ca * cb.conj(), ia.iter().zip(ib).map(|(&a, &b)| (a, b)).collect()));
            }
        }
        Ok(OperatorExpansion { terms })
    }
}

/// `Σ_t r_t ⊗_j |u_{t,j}⟩⟨v_{t,j}|` over per-block channel inputs.
#[derive(Clone, Debug, Default)]
pub struct OperatorExpansion {
    pub terms: Vec<(C64, Vec<(usize, usize)>)>,
}

impl OperatorExpansion {
    /// Product-basis decomposition of a density matrix on the block-major
    /// concatenation of `block_sigs`; `index_of(j, level)` maps a basis
    /// level of block `j` to its channel-input index.
    pub fn from_density(
        rho: &DensityMatrix,
        block_sigs: &[SpaceSignature],
        index_of: impl Fn(usize, usize) -> Option<usize>,
        threshold: f64,
    ) -> Result<Self> {
        let dims: Vec<usize> = block_sigs.iter().map(|s| s.total_dim()).collect();
        let total: usize = dims.iter().product();
        if total != rho.dim() {
            return Err(Error::DimensionMismatch { expected: total, found: rho.dim() });
        }
        let split = |mut i: usize| {
            let mut out = vec![0; dims.len()];
            for j in (0..dims.len()).rev() {
                out[j] = i % dims[j];
                i /= dims[j];
            }
            out
        };
        let mut terms = Vec::new();
        for i in 0..total {
            for k in 0..total {
                let v = rho.get(i, k);
                if v.norm() <= threshold {
                    continue;
                }
                let (a, b) = (split(i), split(k));
                let mut idx = Vec::with_capacity(dims.len());
                for j in 0..dims.len() {
                    match (index_of(j, a[j]), index_of(j, b[j])) {
                        (Some(x), Some(y)) => idx.push((x, y)),
                        _ => return Err(Error::InvalidParameter(format!("weight {v} outside the channel input space of block {j}"))),
                    }
                }
                terms.push((v, idx));
            }
        }
        Ok(Self { terms })
    }
}

/// `⟨ψ_target| (⊗_j E_j)(ρ_in) |ψ_target⟩` without forming the global state.
pub fn expansion_overlap(channels: &[&QuantumChannel], input: &OperatorExpansion, target: &KetExpansion) -> Result<f64> {
    target.check()?;
    if channels.len() != target.n_blocks() {
        return Err(Error::DimensionMismatch { expected: target.n_blocks(), found: channels.len() });
    }
    // m[j][(a, b)][(u, v)] = ⟨t_a| E_j(|u⟩⟨v|) |t_b⟩
    let mut tables = Vec::with_capacity(channels.len());
    for (j, ch) in channels.iter().enumerate() {
        let kets = &target.kets[j];
        let nin = ch.n_inputs();
        let mut m = vec![ZERO; kets.len() * kets.len() * nin * nin];
        let used: Vec<bool> = {
            let mut used = vec![false; nin * nin];
            for (_, idx) in &input.terms {
                let (u, v) = idx[j];
                used[u * nin + v] = true;
            }
            used
        };
        for u in 0..nin {
            for v in 0..nin {
                if !used[u * nin + v] {
                    continue;
                }
                let out = ch.output(u, v);
                for a in 0..kets.len() {
                    for b in 0..kets.len() {
                        m[((a * kets.len() + b) * nin + u) * nin + v] = sandwich_pair(out, &kets[a], &kets[b])?;
                    }
                }
            }
        }
        tables.push((m, kets.len(), nin));
    }
    let mut acc = ZERO;
    for (ca, ia) in &target.branches {
        for (cb, ib) in &target.branches {
            let w = ca.conj() * cb;
            for (r, idx) in &input.terms {
                let mut p = w * r;
                for (j, (m, nk, nin)) in tables.iter().enumerate() {
                    let (u, v) = idx[j];
                    p *= m[((ia[j] * nk + ib[j]) * nin + u) * nin + v];
                }
                acc += p;
            }
        }
    }
    Ok(acc.re)
}

/// Fidelity `√⟨ψ|ρ|ψ⟩` of the composed block channels against a target.
pub fn compose_block_channels(channels: &[&QuantumChannel], input: &OperatorExpansion, target: &KetExpansion) -> Result<f64> {
    Ok(expansion_overlap(channels, input, target)?.max(0.0).sqrt().min(1.0))
}

/// `Tr[(⊗_j O_j) (⊗_j E_j)(ρ_in)]`; `None` stands for the identity.
pub fn expansion_expectation(channels: &[&QuantumChannel], input: &OperatorExpansion, ops: &[Option<&Operator>]) -> Result<C64> {
    let mut tables = Vec::with_capacity(channels.len());
    for (j, ch) in channels.iter().enumerate() {
        let nin = ch.n_inputs();
        let mut t = vec![ZERO; nin * nin];
        for u in 0..nin {
            for v in 0..nin {
                let out = ch.output(u, v);
                t[u * nin + v] = match ops[j] {
                    Some(op) => out.expectation(op)?,
                    None => out.trace(),
                };
            }
        }
        tables.push((t, nin));
    }
    let mut acc = ZERO;
    for (r, idx) in &input.terms {
        let mut p = *r;
        for (j, (t, nin)) in tables.iter().enumerate() {
            let (u, v) = idx[j];
            p *= t[u * nin + v];
        }
        acc += p;
    }
    Ok(acc)
}

/// `⟨a|X|b⟩`
fn sandwich_pair(x: &DensityMatrix, a: &StateVector, b: &StateVector) -> Result<C64> {
    if x.signature() != a.signature() || a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(format!("{} vs {}", x.signature(), a.signature())));
    }
    let d = x.dim();
    let (av, bv) = (a.amplitudes(), b.amplitudes());
    let mut acc = ZERO;
    for i in 0..d {
        if av[i] == ZERO {
            continue;
        }
        let row = &x.data()[i * d..(i + 1) * d];
        let s: C64 = row.iter().zip(bv).map(|(r, y)| r * y).sum();
        acc += av[i].conj() * s;
    }
    Ok(acc)
}

/// Per-block channels applied to an input expansion, returned as a global
/// density matrix on the block-major concatenation. Only for small spaces.
pub fn apply_block_channels(channels: &[&QuantumChannel], input: &OperatorExpansion) -> Result<DensityMatrix> {
    let mut total: Option<DensityMatrix> = None;
    for (r, idx) in &input.terms {
        let mut term = channels[0].output(idx[0].0, idx[0].1).clone();
        for j in 1..channels.len() {
            term = term.tensor(channels[j].output(idx[j].0, idx[j].1))?;
        }
        match total.as_mut() {
            None => total = Some(term.scale(*r)),
            Some(t) => t.add_scaled(*r, &term)?,
        }
    }
    total.ok_or_else(|| Error::InvalidParameter("empty expansion".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{fidelity_pure_target, EXCITED, GROUND};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn qubit_kets(label: &str) -> Vec<StateVector> {
        let sig = SpaceSignature::new([(label, 2)]).unwrap();
        let h = 0.5f64.sqrt();
        vec![
            StateVector::new(sig.clone(), vec![c(h), c(h)]).unwrap(),
            StateVector::new(sig, vec![c(h), c(-h)]).unwrap(),
        ]
    }

    fn w_like() -> KetExpansion {
        let kets: Vec<Vec<StateVector>> = (1..=3).map(|j| qubit_kets(&format!("q{j}"))).collect();
        let s = 1.0 / 3f64.sqrt();
        KetExpansion { kets, branches: vec![(c(s), vec![1, 0, 0]), (c(s), vec![0, 1, 0]), (c(s), vec![0, 0, 1])] }
    }

    #[test]
    fn identity_channels_reproduce_target() {
        let target = w_like();
        assert!((target.norm_sqr().unwrap() - 1.0).abs() < 1e-14);
        let chans: Vec<QuantumChannel> = target.kets.iter().map(|k| QuantumChannel::identity(k.clone()).unwrap()).collect();
        let refs: Vec<&QuantumChannel> = chans.iter().collect();
        let f = compose_block_channels(&refs, &target.to_operator().unwrap(), &target).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarized_block_matches_closed_form() {
        let target = w_like();
        let mut chans: Vec<QuantumChannel> = target.kets.iter().map(|k| QuantumChannel::identity(k.clone()).unwrap()).collect();
        // Block 1 fully depolarized: E(|u⟩⟨v|) = δ_uv I/2.
        let sig = chans[0].signature.clone();
        let half = DensityMatrix::maximally_mixed(&sig);
        for u in 0..2 {
            for v in 0..2 {
                chans[0].outputs[u * 2 + v] = if u == v { half.clone() } else { DensityMatrix::zeros(&sig) };
            }
        }
        let refs: Vec<&QuantumChannel> = chans.iter().collect();
        let f = compose_block_channels(&refs, &target.to_operator().unwrap(), &target).unwrap();
        // ⟨ψ|I/2 ⊗ Tr_1 ψ|ψ⟩ = (‖ψ_−‖⁴ + ‖ψ_+‖⁴)/2 = (1/9 + 4/9)/2.
        assert!((f * f - 5.0 / 18.0).abs() < 1e-14, "{}", f * f);
        let global = apply_block_channels(&refs, &target.to_operator().unwrap()).unwrap();
        let psi = target.to_state().unwrap();
        assert!((fidelity_pure_target(&global, &psi).unwrap() - f).abs() < 1e-14);
    }

    #[test]
    fn operator_expansion_from_density() {
        let sig_a = SpaceSignature::new([("a", 2)]).unwrap();
        let sig_b = SpaceSignature::new([("b", 2)]).unwrap();
        let ka = StateVector::basis(&sig_a, &[("a", GROUND)]).unwrap();
        let kb = StateVector::basis(&sig_b, &[("b", EXCITED)]).unwrap();
        let rho = ka.tensor(&kb).unwrap().to_density();
        let exp = OperatorExpansion::from_density(&rho, &[sig_a, sig_b], |_, l| Some(l), 1e-14).unwrap();
        assert_eq!(exp.terms, vec![(c(1.0), vec![(GROUND, GROUND), (EXCITED, EXCITED)])]);
    }
}
