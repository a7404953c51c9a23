use super::signature::SpaceSignature;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Total dimension below which operators are held densely.
pub const DENSE_LIMIT: usize = 256;

/// Hermiticity tolerance used when an operator is flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Qubit basis ordering: index 0 is the excited state.
pub const EXCITED: usize = 0;
pub const GROUND: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix),
}

/// Matrix on a labeled tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    signature: SpaceSignature,
    storage: Storage,
    hermitian: bool,
}

impl Operator {
    pub fn from_csr(signature: SpaceSignature, m: CsrMatrix) -> Result<Self> {
        let d = signature.total_dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let storage = if d < DENSE_LIMIT { Storage::Dense(m.to_dense()) } else { Storage::Sparse(m) };
        Ok(Self { signature, storage, hermitian: false })
    }

    pub fn from_dense(signature: SpaceSignature, m: DMatrix<C64>) -> Result<Self> {
        Self::from_csr(signature, CsrMatrix::from_dense(&m))
    }

    pub fn identity(signature: &SpaceSignature) -> Self {
        let d = signature.total_dim();
        Self::from_csr(signature.clone(), CsrMatrix::identity(d)).unwrap().assume_hermitian()
    }

    pub fn zeros(signature: &SpaceSignature) -> Self {
        let d = signature.total_dim();
        Self::from_csr(signature.clone(), CsrMatrix::zeros(d, d)).unwrap().assume_hermitian()
    }

    /// Single-factor operator from row-major entries.
    pub fn local(label: &str, dim: usize, rows: &[C64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: rows.len() });
        }
        let sig = SpaceSignature::new([(label, dim)])?;
        Self::from_dense(sig, DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.signature.total_dim()
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    pub fn csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    pub fn dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(m) => m.get(i, j),
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => (m - m.adjoint()).iter().fold(0.0, |a, v| a.max(v.norm())),
            Storage::Sparse(m) => m.hermiticity_deviation(),
        }
    }

    /// Flag as Hermitian after checking to `HERMITIAN_TOL`.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        self.hermitian = true;
        Ok(self)
    }

    fn assume_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(format!("{} vs {}", self.signature, other.signature)));
        }
        Ok(())
    }

    fn rebuild(&self, m: CsrMatrix) -> Self {
        Self::from_csr(self.signature.clone(), m).unwrap()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(self.rebuild(self.csr().add(&other.csr())))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(self.rebuild(self.csr().sub(&other.csr())))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.rebuild(self.csr().scale(c));
        out.hermitian = self.hermitian && c.im == 0.0;
        out
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(self.rebuild(self.csr().matmul(&other.csr())))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.rebuild(self.csr().adjoint());
        out.hermitian = self.hermitian;
        out
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match &self.storage {
            Storage::Dense(m) => {
                let v = m * nalgebra::DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
            Storage::Sparse(m) => m.mul_vec(x),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.csr().max_abs_diff(&other.csr())
    }

    /// Kronecker product on the concatenated signature.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let sig = self.signature.concat(&other.signature)?;
        let mut out = Self::from_csr(sig, self.csr().kron(&other.csr()))?;
        out.hermitian = self.hermitian && other.hermitian;
        Ok(out)
    }

    /// Restrict an operator on a single factor to a new label.
    pub fn relabel(&self, label: &str) -> Result<Self> {
        if self.signature.len() != 1 {
            return Err(Error::SignatureMismatch(format!("relabel needs one factor, got {}", self.signature)));
        }
        let sig = SpaceSignature::new([(label, self.dim())])?;
        Ok(Self { signature: sig, storage: self.storage.clone(), hermitian: self.hermitian })
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` placed on `target_label`.
pub fn embed(op: &Operator, target_label: &str, sig: &SpaceSignature) -> Result<Operator> {
    let k = sig.position(target_label)?;
    let dims = sig.dims();
    if op.dim() != dims[k] {
        return Err(Error::DimensionMismatch { expected: dims[k], found: op.dim() });
    }
    let left: usize = dims[..k].iter().product();
    let right: usize = dims[k + 1..].iter().product();
    let m = CsrMatrix::identity(left).kron(&op.csr()).kron(&CsrMatrix::identity(right));
    let mut out = Operator::from_csr(sig.clone(), m)?;
    out.hermitian = op.hermitian;
    Ok(out)
}

/// Truncated ladder operators `(a, a†, a†a)` on `dim` Fock levels.
pub fn make_boson_ops(dim: usize) -> Result<(Operator, Operator, Operator)> {
    if dim < 2 {
        return Err(Error::InvalidDimension { what: "boson".into(), dim });
    }
    let sig = SpaceSignature::new([("mode", dim)])?;
    let a = CsrMatrix::from_triplets(dim, dim, (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))));
    let ad = a.adjoint();
    let n = ad.matmul(&a);
    Ok((
        Operator::from_csr(sig.clone(), a)?,
        Operator::from_csr(sig.clone(), ad)?,
        Operator::from_csr(sig, n)?.into_hermitian()?,
    ))
}

/// Two-level operators in the `(|e⟩, |g⟩)` basis.
#[derive(Clone, Debug)]
pub struct QubitOps {
    pub minus: Operator,
    pub plus: Operator,
    pub z: Operator,
    pub x: Operator,
    pub proj_g: Operator,
    pub proj_e: Operator,
}

pub fn make_qubit_ops() -> QubitOps {
    let unit = |i: usize, j: usize| {
        let sig = SpaceSignature::new([("qubit", 2)]).unwrap();
        Operator::from_csr(sig, CsrMatrix::from_triplets(2, 2, [(i, j, C64::new(1.0, 0.0))])).unwrap()
    };
    let minus = unit(GROUND, EXCITED);
    let plus = unit(EXCITED, GROUND);
    let proj_e = unit(EXCITED, EXCITED).assume_hermitian();
    let proj_g = unit(GROUND, GROUND).assume_hermitian();
    let z = proj_e.sub(&proj_g).unwrap().assume_hermitian();
    let x = plus.add(&minus).unwrap().assume_hermitian();
    QubitOps { minus, plus, z, x, proj_g, proj_e }
}
