//! Deterministic pseudo-random builders shared by the unit tests.

use crate::linalg::{polar_unitary, ComplexMatrix, UnitaryMatrix};
use num_complex::Complex64;

/// xorshift with a fixed seed; good enough for test fixtures and fully
/// deterministic across platforms.
pub(crate) struct TestRng(u64);

impl TestRng {
    pub(crate) fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
    }

    pub(crate) fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 as f64 / u64::MAX as f64) * 2.0 - 1.0
    }

    pub(crate) fn next_complex(&mut self) -> Complex64 {
        Complex64::new(self.next_f64(), self.next_f64())
    }

    pub(crate) fn next_range(&mut self, n: usize) -> usize {
        ((self.next_f64() * 0.5 + 0.5) * n as f64) as usize % n
    }
}

pub(crate) fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = TestRng::new(seed);
    ComplexMatrix::from_fn(n, n, |_, _| rng.next_complex())
}

pub(crate) fn random_unitary(n: usize, seed: u64) -> UnitaryMatrix {
    let m = random_matrix(n, seed) + ComplexMatrix::identity(n, n) * Complex64::new(3.0, 0.0);
    polar_unitary(&m).expect("random matrix shifted by 3I is invertible")
}

pub(crate) fn random_positive(n: usize, seed: u64) -> ComplexMatrix {
    let m = random_matrix(n, seed);
    let mut p = m.adjoint() * &m;
    for i in 0..n {
        p[(i, i)] += Complex64::new(0.5, 0.0);
    }
    p
}

pub(crate) fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
    let m = random_matrix(n, seed);
    (&m + m.adjoint()).map(|z| z * 0.5)
}
