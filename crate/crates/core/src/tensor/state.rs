use super::operator::Operator;
use super::signature::SpaceSignature;
use crate::error::{Error, Result};
use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub const NORM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Poisson tail above which a truncated coherent state is refused.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-4;
pub const COHERENT_TAIL_WARN: f64 = 1e-8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    signature: SpaceSignature,
    amps: Vec<C64>,
    normalized: bool,
}

impl StateVector {
    pub fn new(signature: SpaceSignature, amps: Vec<C64>) -> Result<Self> {
        let s = Self::unnormalized(signature, amps)?;
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("state norm {n} is not 1")));
        }
        Ok(Self { normalized: true, ..s })
    }

    /// A vector that is allowed to carry any norm, e.g. a post-selected branch.
    pub fn unnormalized(signature: SpaceSignature, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != signature.total_dim() {
            return Err(Error::DimensionMismatch { expected: signature.total_dim(), found: amps.len() });
        }
        Ok(Self { signature, amps, normalized: false })
    }

    pub fn basis(signature: &SpaceSignature, levels: &[(&str, usize)]) -> Result<Self> {
        let mut amps = vec![ZERO; signature.total_dim()];
        amps[signature.basis_index(levels)?] = C64::new(1.0, 0.0);
        Self::new(signature.clone(), amps)
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        Ok(Self { signature: self.signature.clone(), amps: self.amps.iter().map(|a| a / n).collect(), normalized: true })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, other.signature)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { signature: self.signature.clone(), amps: self.amps.iter().map(|a| a * c).collect(), normalized: false }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, other.signature)));
        }
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect();
        Ok(Self { signature: self.signature.clone(), amps, normalized: false })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let sig = self.signature.concat(&other.signature)?;
        let amps = self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)).collect();
        Ok(Self { signature: sig, amps, normalized: self.normalized && other.normalized })
    }

    pub fn relabel(&self, label: &str) -> Result<Self> {
        if self.signature.len() != 1 {
            return Err(Error::SignatureMismatch(format!("relabel needs one factor, got {}", self.signature)));
        }
        Ok(Self { signature: SpaceSignature::new([(label, self.dim())])?, ..self.clone() })
    }

    /// Same amplitudes on a signature with identical dims but other labels.
    pub fn reinterpret(&self, signature: SpaceSignature) -> Result<Self> {
        if signature.dims() != self.signature.dims() {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, signature)));
        }
        Ok(Self { signature, ..self.clone() })
    }

    pub fn apply(&self, op: &Operator) -> Result<Self> {
        if op.signature() != &self.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", op.signature(), self.signature)));
        }
        Ok(Self { signature: self.signature.clone(), amps: op.apply(&self.amps), normalized: false })
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.inner(&self.apply(op)?)
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.dim();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix { signature: self.signature.clone(), data }
    }
}

/// Density operator, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    signature: SpaceSignature,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// Checked constructor: Hermitian, unit trace and positive within tolerance.
    pub fn new(signature: SpaceSignature, data: Vec<C64>) -> Result<Self> {
        let rho = Self::unchecked(signature, data)?;
        let dev = rho.hermiticity_deviation();
        if dev > DENSITY_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let drift = (rho.trace().re - 1.0).abs();
        if drift > TRACE_TOL {
            return Err(Error::TraceDrift { drift });
        }
        let lo = rho.min_eigenvalue();
        if lo < -POSITIVITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix has eigenvalue {lo:.3e}")));
        }
        Ok(rho)
    }

    /// Any square matrix on the space; used for channel outputs and
    /// post-selected branches.
    pub fn unchecked(signature: SpaceSignature, data: Vec<C64>) -> Result<Self> {
        let d = signature.total_dim();
        if data.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: data.len() });
        }
        Ok(Self { signature, data })
    }

    pub fn zeros(signature: &SpaceSignature) -> Self {
        let d = signature.total_dim();
        Self { signature: signature.clone(), data: vec![ZERO; d * d] }
    }

    pub fn maximally_mixed(signature: &SpaceSignature) -> Self {
        let d = signature.total_dim();
        let mut rho = Self::zeros(signature);
        for i in 0..d {
            rho.data[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        rho
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &StateVector, v: &StateVector) -> Result<Self> {
        if u.signature() != v.signature() {
            return Err(Error::SignatureMismatch(format!("{} vs {}", u.signature(), v.signature())));
        }
        let d = u.dim();
        let (a, b) = (u.amplitudes(), v.amplitudes());
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = a[i] * b[j].conj();
            }
        }
        Ok(Self { signature: u.signature().clone(), data })
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.signature.total_dim()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.data)
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        Self { signature: self.signature.clone(), data }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { signature: self.signature.clone(), data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add_scaled(&mut self, c: C64, other: &Self) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, other.signature)));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Tr(op ρ)`
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.signature() != &self.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", op.signature(), self.signature)));
        }
        let d = self.dim();
        let csr = op.csr();
        let mut acc = ZERO;
        for i in 0..d {
            for (k, v) in csr.row(i) {
                acc += v * self.data[k * d + i];
            }
        }
        Ok(acc)
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn sandwich(&self, psi: &StateVector) -> Result<C64> {
        if psi.signature() != &self.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", psi.signature(), self.signature)));
        }
        let d = self.dim();
        let a = psi.amplitudes();
        let mut acc = ZERO;
        for i in 0..d {
            if a[i] == ZERO {
                continue;
            }
            let row = &self.data[i * d..(i + 1) * d];
            let s: C64 = row.iter().zip(a).map(|(r, b)| r * b).sum();
            acc += a[i].conj() * s;
        }
        Ok(acc)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let sig = self.signature.concat(&other.signature)?;
        let (d1, d2) = (self.dim(), other.dim());
        let d = d1 * d2;
        let mut data = vec![ZERO; d * d];
        for i in 0..d1 {
            for j in 0..d1 {
                let a = self.data[i * d1 + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..d2 {
                    for l in 0..d2 {
                        data[(i * d2 + k) * d + j * d2 + l] = a * other.data[k * d2 + l];
                    }
                }
            }
        }
        Ok(Self { signature: sig, data })
    }

    /// Same entries on a signature with identical dims but other labels.
    pub fn reinterpret(&self, signature: SpaceSignature) -> Result<Self> {
        if signature.dims() != self.signature.dims() {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, signature)));
        }
        Ok(Self { signature, data: self.data.clone() })
    }

    /// Reorder or extend onto `target`: factors missing from this state are
    /// supplied by `fill` (label, pure state).
    pub fn pad_to(&self, target: &SpaceSignature, fill: &[StateVector]) -> Result<Self> {
        let mut rho = self.clone();
        for f in fill {
            rho = rho.tensor(&f.to_density())?;
        }
        rho.permute_to(target)
    }

    /// Same operator with factors reordered to match `target`.
    pub fn permute_to(&self, target: &SpaceSignature) -> Result<Self> {
        if target.len() != self.signature.len() {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, target)));
        }
        let perm: Vec<usize> = target.labels().map(|l| self.signature.position(l)).collect::<Result<_>>()?;
        for (k, &p) in perm.iter().enumerate() {
            if self.signature.factors()[p].1 != target.factors()[k].1 {
                return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, target)));
            }
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(Self { signature: target.clone(), data: self.data.clone() });
        }
        let d = self.dim();
        let map: Vec<usize> = (0..d)
            .map(|i| {
                let digits = target.digits(i);
                let mut src = vec![0; digits.len()];
                for (k, &p) in perm.iter().enumerate() {
                    src[p] = digits[k];
                }
                self.signature.index(&src)
            })
            .collect();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = self.data[map[i] * d + map[j]];
            }
        }
        Ok(Self { signature: target.clone(), data })
    }
}

/// Coherent state `|α⟩` on `dim` Fock levels, renormalized after truncation.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    coherent_state_with_tol(alpha, dim, COHERENT_TAIL_WARN)
}

pub fn coherent_state_with_tol(alpha: C64, dim: usize, warn_tol: f64) -> Result<StateVector> {
    if dim < 1 {
        return Err(Error::InvalidDimension { what: "coherent state".into(), dim });
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > COHERENT_TAIL_LIMIT {
        return Err(Error::Truncation { alpha_abs: alpha.norm(), dim, tail });
    }
    if tail > warn_tol {
        warn!("coherent state |alpha|={:.4} on {dim} levels loses Poisson tail {tail:.3e}", alpha.norm());
    }
    let scale = kept.sqrt();
    debug!("coherent state renormalized by {scale:.12}");
    let sig = SpaceSignature::new([("mode", dim)])?;
    StateVector::new(sig, amps.into_iter().map(|a| a / scale).collect())
}

/// `√⟨ψ|ρ|ψ⟩`, clamped to [0, 1].
pub fn fidelity_pure_target(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    let v = rho.sandwich(psi)?.re;
    Ok(v.max(0.0).sqrt().min(1.0))
}

/// Trace out every factor not named in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("partial trace needs at least one kept factor".into()));
    }
    let sig = rho.signature();
    let out_sig = sig.keep(keep)?;
    let kept_pos: Vec<usize> = out_sig.labels().map(|l| sig.position(l)).collect::<Result<_>>()?;
    let traced_pos: Vec<usize> = (0..sig.len()).filter(|k| !kept_pos.contains(k)).collect();
    let dims = sig.dims();
    let traced_sig = SpaceSignature::new(traced_pos.iter().map(|&k| (sig.factors()[k].0.clone(), dims[k])))?;
    let dk = out_sig.total_dim();
    let dt = traced_sig.total_dim();
    let d = sig.total_dim();
    let compose = |a: usize, t: usize| {
        let (ad, td) = (out_sig.digits(a), traced_sig.digits(t));
        let mut digits = vec![0; dims.len()];
        for (k, &p) in kept_pos.iter().enumerate() {
            digits[p] = ad[k];
        }
        for (k, &p) in traced_pos.iter().enumerate() {
            digits[p] = td[k];
        }
        sig.index(&digits)
    };
    let idx: Vec<usize> = (0..dk).flat_map(|a| (0..dt).map(move |t| (a, t))).map(|(a, t)| compose(a, t)).collect();
    let mut data = vec![ZERO; dk * dk];
    for a in 0..dk {
        for b in 0..dk {
            let mut s = ZERO;
            for t in 0..dt {
                s += rho.data()[idx[a * dt + t] * d + idx[b * dt + t]];
            }
            data[a * dk + b] = s;
        }
    }
    DensityMatrix::unchecked(out_sig, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::linalg::expm;
    use crate::tensor::operator::make_boson_ops;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coherent_vacuum_and_mean() {
        let v = coherent_state(c(0.0, 0.0), 5).unwrap();
        assert_eq!(v.amplitudes()[0], c(1.0, 0.0));
        let s = coherent_state(c(1.2, 0.0), 12).unwrap().relabel("b").unwrap();
        let (_, _, n) = make_boson_ops(12).unwrap();
        let mean = s.expectation(&n.relabel("b").unwrap()).unwrap().re;
        assert!((mean - 1.44).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn coherent_overlap_of_opposite_amplitudes() {
        let p = coherent_state(c(1.2, 0.0), 14).unwrap();
        let m = coherent_state(c(-1.2, 0.0), 14).unwrap();
        let ov = p.inner(&m).unwrap();
        assert!((ov.re - (-2.88f64).exp()).abs() < 1e-6);
        assert!((ov.re - 0.0561).abs() < 1e-4);
    }

    #[test]
    fn coherent_truncation_limits() {
        assert!(matches!(coherent_state(c(3.0, 0.0), 4), Err(Error::Truncation { .. })));
        assert!(coherent_state(c(1.2, 0.0), 9).is_ok());
    }

    #[test]
    fn displacement_of_vacuum_matches_coherent_state() {
        let alpha = c(0.9, -0.7);
        let a2 = alpha.norm_sqr();
        let dim = (a2 + 6.0 * a2.sqrt() + 10.0).ceil() as usize;
        let (a, ad, _) = make_boson_ops(dim).unwrap();
        let gen = ad.dense() * alpha - a.dense() * alpha.conj();
        let u = expm(&gen);
        let target = coherent_state(alpha, dim).unwrap();
        for n in 0..dim {
            assert!((u[(n, 0)] - target.amplitudes()[n]).norm() < 1e-6);
        }
    }

    #[test]
    fn fidelity_examples() {
        let sig = SpaceSignature::new([("q", 2), ("r", 3)]).unwrap();
        let psi = StateVector::basis(&sig, &[("r", 1)]).unwrap();
        assert!((fidelity_pure_target(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(&sig);
        assert!((fidelity_pure_target(&mixed, &psi).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        let other = StateVector::basis(&sig, &[("r", 2)]).unwrap();
        let phi = psi.scale(c(0.9, 0.0)).add(&other.scale(c(0.0, 0.19f64.sqrt()))).unwrap();
        assert!((fidelity_pure_target(&phi.to_density(), &psi).unwrap() - 0.9).abs() < 1e-12);
        let bad = StateVector::basis(&SpaceSignature::new([("q", 6)]).unwrap(), &[]).unwrap();
        assert!(fidelity_pure_target(&mixed, &bad).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let a = SpaceSignature::new([("a", 2)]).unwrap();
        let b = SpaceSignature::new([("b", 3)]).unwrap();
        let pa = StateVector::new(a.clone(), vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let pb = StateVector::new(b.clone(), vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = pa.tensor(&pb).unwrap().to_density();
        let ra = partial_trace(&rho, &["a"]).unwrap();
        for (x, y) in ra.data().iter().zip(pa.to_density().data()) {
            assert!((x - y).norm() < 1e-15);
        }
        let rb = partial_trace(&rho, &["b"]).unwrap();
        assert_eq!(rb.signature(), &b);

        let sig = SpaceSignature::new([("x", 2), ("y", 2)]).unwrap();
        let h = 0.5f64.sqrt();
        let bell = StateVector::new(sig, vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
        let r = partial_trace(&bell.to_density(), &["y"]).unwrap();
        for (x, y) in r.data().iter().zip([c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]) {
            assert!((x - y).norm() < 1e-15);
        }
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &["z"]).is_err());
    }

    #[test]
    fn permute_swaps_factors() {
        let a = StateVector::basis(&SpaceSignature::new([("a", 2)]).unwrap(), &[("a", 1)]).unwrap();
        let b = StateVector::basis(&SpaceSignature::new([("b", 3)]).unwrap(), &[("b", 2)]).unwrap();
        let ab = a.tensor(&b).unwrap().to_density();
        let target = SpaceSignature::new([("b", 3), ("a", 2)]).unwrap();
        let ba = ab.permute_to(&target).unwrap();
        let expect = b.tensor(&a).unwrap().to_density();
        assert_eq!(ba.data(), expect.data());
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = Vec<C64>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_filter_map("nonzero", |v| {
            let amps: Vec<C64> = v.into_iter().map(|(r, i)| c(r, i)).collect();
            let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            (n > 1e-3).then(|| amps.into_iter().map(|a| a / n).collect())
        })
    }

    proptest! {
        #[test]
        fn fidelity_ignores_global_phase(amps in arb_state(6), other in arb_state(6), theta in 0.0f64..6.3) {
            let sig = SpaceSignature::new([("q", 2), ("r", 3)]).unwrap();
            let psi = StateVector::new(sig.clone(), amps).unwrap();
            let rho = StateVector::new(sig, other).unwrap().to_density();
            let f1 = fidelity_pure_target(&rho, &psi).unwrap();
            let f2 = fidelity_pure_target(&rho, &psi.scale(C64::from_polar(1.0, theta))).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&f1));
        }

        #[test]
        fn partial_trace_preserves_trace(amps in arb_state(12)) {
            let sig = SpaceSignature::new([("a", 2), ("b", 3), ("c", 2)]).unwrap();
            let rho = StateVector::new(sig, amps).unwrap().to_density();
            for keep in [&["a"][..], &["b", "c"], &["a", "c"]] {
                let r = partial_trace(&rho, keep).unwrap();
                prop_assert!((r.trace() - rho.trace()).norm() < 1e-12);
                prop_assert!(r.hermiticity_deviation() < 1e-12);
            }
        }
    }
}
