use crate::error::{Error, Result};
use std::fmt;

/// Ordered list of labeled tensor factors. The first factor is the slowest
/// varying digit of a flat index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceSignature {
    factors: Vec<(String, usize)>,
}

impl SpaceSignature {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> = factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (k, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::InvalidDimension { what: label.clone(), dim: *dim });
            }
            if factors[..k].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.1).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.0.as_str())
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.1).product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.0 == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors.iter().position(|f| f.0 == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].1)
    }

    /// Flat-index stride of each factor.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.factors[k + 1].1;
        }
        s
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            d[k] = index % self.factors[k].1;
            index /= self.factors[k].1;
        }
        d
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.factors).fold(0, |acc, (d, f)| acc * f.1 + d)
    }

    /// Flat index of a basis state given as `(label, level)` pairs; unnamed
    /// factors sit at level 0.
    pub fn basis_index(&self, levels: &[(&str, usize)]) -> Result<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (label, level) in levels {
            let k = self.position(label)?;
            if *level >= self.factors[k].1 {
                return Err(Error::InvalidDimension { what: label.to_string(), dim: *level });
            }
            digits[k] = *level;
        }
        Ok(self.index(&digits))
    }

    /// Sub-signature with the named factors, kept in this signature's order.
    pub fn keep(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.position(l)?;
        }
        Ok(Self { factors: self.factors.iter().filter(|f| labels.contains(&f.0.as_str())).cloned().collect() })
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.factors.iter().chain(&other.factors).cloned())
    }
}

impl fmt::Display for SpaceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_roundtrip_first_factor_slowest() {
        let sig = SpaceSignature::new([("a", 2), ("b", 3), ("c", 4)]).unwrap();
        assert_eq!(sig.total_dim(), 24);
        assert_eq!(sig.strides(), vec![12, 4, 1]);
        assert_eq!(sig.index(&[1, 2, 3]), 23);
        for i in 0..24 {
            assert_eq!(sig.index(&sig.digits(i)), i);
        }
        assert_eq!(sig.basis_index(&[("b", 1)]).unwrap(), 4);
    }

    #[test]
    fn rejects_duplicates_and_zero_dims() {
        assert_eq!(SpaceSignature::new([("a", 2), ("a", 2)]), Err(Error::DuplicateLabel("a".into())));
        assert!(SpaceSignature::new([("a", 0)]).is_err());
        let sig = SpaceSignature::new([("a", 2), ("b", 3)]).unwrap();
        assert_eq!(sig.position("z"), Err(Error::UnknownLabel("z".into())));
        assert_eq!(sig.keep(&["b"]).unwrap().dims(), vec![3]);
    }
}
