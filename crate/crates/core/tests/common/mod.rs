//! Deterministic random builders shared by the integration suites.

use nalgebra::DVector;
use num_complex::Complex64;
use rohlin_core::linalg::{polar_unitary, ComplexMatrix, UnitaryMatrix};

pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 as f64 / u64::MAX as f64) * 2.0 - 1.0
    }

    pub fn next_complex(&mut self) -> Complex64 {
        Complex64::new(self.next_f64(), self.next_f64())
    }

    pub fn next_unit(&mut self) -> Complex64 {
        let z = self.next_complex();
        z / z.norm()
    }

    pub fn next_range(&mut self, n: usize) -> usize {
        ((self.next_f64() * 0.5 + 0.5) * n as f64) as usize % n
    }
}

pub fn random_matrix(n: usize, rng: &mut TestRng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| rng.next_complex())
}

pub fn random_unitary(n: usize, rng: &mut TestRng) -> UnitaryMatrix {
    let m = random_matrix(n, rng) + ComplexMatrix::identity(n, n) * Complex64::new(3.0, 0.0);
    polar_unitary(&m).expect("shifted random matrix is invertible")
}

pub fn random_hermitian(n: usize, rng: &mut TestRng) -> ComplexMatrix {
    let m = random_matrix(n, rng);
    (&m + m.adjoint()).map(|z| z * 0.5)
}

pub fn diagonal_of(values: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_vec(values.to_vec()))
}
