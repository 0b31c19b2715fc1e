//! Eigendecomposition for Hermitian and unitary (normal) matrices.
//!
//! Unitary matrices are reduced to two Hermitian problems: diagonalize
//! the Hermitian part `(U+U*)/2`, then split each eigenvalue cluster
//! with the skew part restricted to it. This avoids a general
//! nonsymmetric eigensolver and keeps the bases orthonormal.

use super::{ComplexMatrix, EIGEN_CLUSTER_GAP};
use nalgebra::DVector;
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, basis)` with eigenvalues ascending and the
/// matching orthonormal eigenvectors as columns. Jacobi is slower than
/// a tridiagonalizing solver but backward stable with excellent
/// eigenvector accuracy on clustered spectra, which the downstream
/// spectral-matching routines depend on.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eigen: square input required");
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    // Symmetrize to wash out representation noise before factorizing.
    let mut a = (m + m.adjoint()).map(|z| z * 0.5);
    let mut basis = ComplexMatrix::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // unitary 2x2 rotation annihilating a[(p,q)]
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);

                // columns: [cp, cq] <- [c*cp - conj(s)*cq, s*cp + c*cq]
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c - aiq * s.conj();
                    a[(i, q)] = aip * s + aiq * c;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c - aqj * s;
                    a[(q, j)] = apj * s.conj() + aqj * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let bip = basis[(i, p)];
                    let biq = basis[(i, q)];
                    basis[(i, p)] = bip * c - biq * s.conj();
                    basis[(i, q)] = bip * s + biq * c;
                }
            }
        }
    }

    let mut evals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| evals[x].partial_cmp(&evals[y]).unwrap());
    let mut out_basis = ComplexMatrix::zeros(n, n);
    let mut out_evals = Vec::with_capacity(n);
    for (new, &old) in order.iter().enumerate() {
        out_basis.set_column(new, &basis.column(old));
        out_evals.push(evals[old]);
    }
    evals.clear();
    (out_evals, out_basis)
}

/// Splits an ascending list of reals into maximal runs separated by
/// gaps larger than `gap`. Returns half-open index ranges.
pub fn cluster_ranges(sorted: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..sorted.len() {
        if sorted[i] - sorted[i - 1] > gap {
            ranges.push((start, i));
            start = i;
        }
    }
    if !sorted.is_empty() {
        ranges.push((start, sorted.len()));
    }
    ranges
}

/// Eigendecomposition of a unitary matrix.
///
/// Returns `(eigenvalues, basis)` with unit-modulus eigenvalues sorted
/// by principal argument in `[0, 2π)` and orthonormal eigenvectors as
/// columns. The input must be unitary to working precision; the routine
/// is not meant for general normal matrices.
pub fn unitary_eigen(u: &ComplexMatrix) -> (Vec<Complex64>, ComplexMatrix) {
    let n = u.nrows();
    assert_eq!(n, u.ncols(), "unitary_eigen: square input required");
    let (cos_vals, cos_basis) = hermitian_eigen(u);
    let mut basis = ComplexMatrix::zeros(n, n);
    let mut evals = vec![Complex64::new(0.0, 0.0); n];
    for (lo, hi) in cluster_ranges(&cos_vals, EIGEN_CLUSTER_GAP) {
        let m = hi - lo;
        let q = cos_basis.columns(lo, m).into_owned();
        if m == 1 {
            basis.set_column(lo, &q.column(0));
        } else {
            // Same Hermitian-part eigenvalue: split by the skew part,
            // which separates e^{iθ} from e^{-iθ} on the cluster.
            let a = q.adjoint() * u * &q;
            let skew = (&a - a.adjoint()).map(|z| z * Complex64::new(0.0, -0.5));
            let (_, r) = hermitian_eigen(&skew);
            let refined = &q * r;
            for j in 0..m {
                basis.set_column(lo + j, &refined.column(j));
            }
        }
        for j in lo..hi {
            let col = basis.column(j);
            let lam = (col.adjoint() * u * col)[(0, 0)];
            evals[j] = lam;
        }
    }
    // Deterministic output order: principal argument in [0, 2π).
    let mut order: Vec<usize> = (0..n).collect();
    let key = |z: &Complex64| -> f64 {
        let a = z.arg();
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    };
    order.sort_by(|&a, &b| key(&evals[a]).partial_cmp(&key(&evals[b])).unwrap());
    let mut out_basis = ComplexMatrix::zeros(n, n);
    let mut out_evals = Vec::with_capacity(n);
    for (new, &old) in order.iter().enumerate() {
        out_basis.set_column(new, &basis.column(old));
        out_evals.push(evals[old]);
    }
    (out_evals, out_basis)
}

/// Residual `‖U B − B Λ‖` of an eigendecomposition, for diagnostics.
pub fn eigen_residual(u: &ComplexMatrix, evals: &[Complex64], basis: &ComplexMatrix) -> f64 {
    let lam = ComplexMatrix::from_diagonal(&DVector::from_vec(evals.to_vec()));
    super::operator_norm(&(u * basis - basis * lam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_hermitian, random_unitary};

    #[test]
    fn hermitian_eigen_reconstructs() {
        for seed in 0..6u64 {
            let h = random_hermitian(7, seed);
            let (evals, basis) = hermitian_eigen(&h);
            let lam = ComplexMatrix::from_diagonal(&DVector::from_vec(
                evals.iter().map(|&t| Complex64::new(t, 0.0)).collect(),
            ));
            assert!((&h - &basis * lam * basis.adjoint()).norm() < 1e-9 * h.norm().max(1.0));
            let gram = basis.adjoint() * &basis - ComplexMatrix::identity(7, 7);
            assert!(gram.norm() < 1e-10);
            assert!(evals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn unitary_eigen_handles_conjugate_pairs() {
        // diag(e^{iθ}, e^{-iθ}) conjugated: both eigenvalues share the
        // Hermitian part, so the skew split must separate them.
        let theta = 1.234;
        let g = random_unitary(2, 3);
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from_polar(1.0, theta),
            Complex64::from_polar(1.0, -theta),
        ]));
        let u = g.matrix() * d * g.matrix().adjoint();
        let (evals, basis) = unitary_eigen(&u);
        assert!(eigen_residual(&u, &evals, &basis) < 1e-9);
        let mut args: Vec<f64> = evals.iter().map(|z| z.arg()).collect();
        args.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((args[0] + theta).abs() < 1e-9);
        assert!((args[1] - theta).abs() < 1e-9);
    }

    #[test]
    fn unitary_eigen_random_reconstruction() {
        for seed in 0..8u64 {
            let n = 3 + (seed as usize % 14);
            let u = random_unitary(n, seed + 11);
            let (evals, basis) = unitary_eigen(u.matrix());
            assert!(
                eigen_residual(u.matrix(), &evals, &basis) < 1e-8,
                "seed {seed}"
            );
            for lam in &evals {
                assert!((lam.norm() - 1.0).abs() < 1e-9);
            }
            let gram = basis.adjoint() * &basis - ComplexMatrix::identity(n, n);
            assert!(gram.norm() < 1e-9);
        }
    }

    #[test]
    fn cluster_ranges_splits_on_gaps() {
        let vals = [0.0, 1e-12, 1e-11, 0.5, 0.5 + 1e-9, 2.0];
        let ranges = cluster_ranges(&vals, 1e-8);
        assert_eq!(ranges, vec![(0, 3), (3, 5), (5, 6)]);
        assert!(cluster_ranges(&[], 1e-8).is_empty());
    }
}
