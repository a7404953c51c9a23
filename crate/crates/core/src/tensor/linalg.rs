use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Matrix exponential.
pub fn expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.clone().exp()
}

/// `e^{-iHt}` for a Hermitian `H`.
pub fn unitary_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    expm(&(h * C64::new(0.0, -t)))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_x_rotation() {
        let x = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let u = unitary_propagator(&x, std::f64::consts::FRAC_PI_2);
        assert!((u[(0, 1)] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(u[(0, 0)].norm() < 1e-14);
        let ev = hermitian_eigenvalues(&x);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }
}
