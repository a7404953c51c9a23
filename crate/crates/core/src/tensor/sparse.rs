//! Compressed sparse row storage for complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Complex matrix in compressed sparse row form.
///
/// Column indices within a row are sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Build from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut trips: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        trips.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<C64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of: Vec<usize> = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if v != C64::new(0.0, 0.0) {
                keep_idx.push(c);
                keep_val.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let (nr, nc) = m.shape();
        let trips = (0..nr).flat_map(|i| (0..nc).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(nr, nc, trips.filter(|t| t.2 != C64::new(0.0, 0.0)).collect::<Vec<_>>())
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Position of `(i, j)` in the value buffer, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.position(i, j).map_or(C64::new(0.0, 0.0), |k| self.values[k])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch in add");
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "shape mismatch in matmul");
        let mut trips = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &cols {
                trips.push((i, j, acc[j]));
                acc[j] = C64::new(0.0, 0.0);
                touched[j] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the slow digit.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.nrows, other.ncols);
        let trips = self.triplets().flat_map(|(i, j, a)| {
            other.triplets().map(move |(k, l, b)| (i * r2 + k, j * c2 + l, a * b))
        });
        Self::from_triplets(self.nrows * r2, self.ncols * c2, trips.collect::<Vec<_>>())
    }

    /// `y += alpha * A x`
    pub fn mul_vec_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi += alpha * s;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_acc(C64::new(1.0, 0.0), x, &mut y);
        y
    }

    /// `out += A X` for a row-major dense `X` with `m` columns.
    pub fn left_mul_dense_acc(&self, x: &[C64], m: usize, out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols * m);
        debug_assert_eq!(out.len(), self.nrows * m);
        for i in 0..self.nrows {
            let orow = &mut out[i * m..(i + 1) * m];
            for k in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[k];
                let xrow = &x[self.indices[k] * m..(self.indices[k] + 1) * m];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += a * xv;
                }
            }
        }
    }

    /// `out += X A†` for a row-major dense `X` with `self.ncols` columns.
    pub fn right_mul_adjoint_acc(&self, x: &[C64], nrows_x: usize, out: &mut [C64]) {
        let n = self.ncols;
        let m = self.nrows;
        debug_assert_eq!(x.len(), nrows_x * n);
        debug_assert_eq!(out.len(), nrows_x * m);
        for i in 0..nrows_x {
            let xrow = &x[i * n..(i + 1) * n];
            let orow = &mut out[i * m..(i + 1) * m];
            for (j, o) in orow.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for k in self.indptr[j]..self.indptr[j + 1] {
                    s += xrow[self.indices[k]] * self.values[k].conj();
                }
                *o += s;
            }
        }
    }

    /// Largest absolute deviation from Hermiticity.
    pub fn hermiticity_deviation(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            cols[j] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn row_major(m: &DMatrix<C64>) -> Vec<C64> {
        m.transpose().as_slice().to_vec()
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 1.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let b = DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(1.0, 0.0), c(3.0, 0.0), c(0.0, 0.0)]);
        let k = CsrMatrix::from_dense(&a).kron(&CsrMatrix::from_dense(&b)).to_dense();
        assert_eq!(k, a.kronecker(&b));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 2 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_kernels_agree_with_dense_products() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.5), c(0.0, 0.0), c(2.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 1.0)],
        );
        let x = DMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.0), c(0.0, 2.0), c(1.0, 1.0), c(-1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(1.0, -1.0)],
        );
        let s = CsrMatrix::from_dense(&a);
        let xr = row_major(&x);
        let mut out = vec![c(0.0, 0.0); 9];
        s.left_mul_dense_acc(&xr, 3, &mut out);
        for (o, e) in out.iter().zip(row_major(&(&a * &x))) {
            assert!((o - e).norm() < 1e-14);
        }
        let mut out = vec![c(0.0, 0.0); 9];
        s.right_mul_adjoint_acc(&xr, 3, &mut out);
        for (o, e) in out.iter().zip(row_major(&(&x * a.adjoint()))) {
            assert!((o - e).norm() < 1e-14);
        }
        let prod = s.matmul(&s.adjoint()).to_dense();
        assert!((prod - &a * a.adjoint()).norm() < 1e-14);
    }
}
