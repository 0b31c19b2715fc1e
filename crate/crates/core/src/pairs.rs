//! λ-commuting unitary pairs and their canonical form.
//!
//! A pair of `n×n` unitaries with `UV = λVU` forces λ to be a root of
//! unity; with `λ = exp(2πik/n)` and `p = n/gcd(k,n)` the pair is
//! unitarily conjugate to `(S(p) ⊗ diag(ω), Ω(p,λ⁻¹) ⊗ diag(μ))` where
//! the scalars `ω_i, μ_i` are unique up to multiplication by powers of
//! λ and permutation of the `n/p` orbits. `decompose_pair` computes the
//! conjugation; `reconstruct` inverts it.

use crate::equidist::FiniteTorusSequence;
use crate::expr::{clock_matrix, shift_matrix};
use crate::linalg::{
    operator_norm, polar_unitary, unitary_eigen, ComplexMatrix, LinalgError, TorusPoint,
    UnitaryMatrix, EIGEN_CLUSTER_GAP,
};
use nalgebra::DVector;
use num_complex::Complex64;
use num_integer::Integer;
use thiserror::Error;

/// Tolerance on ‖UV − λVU‖ for accepting a λ-commuting pair.
pub const COMMUTATION_TOL: f64 = 1e-8;

/// Tolerance for snapping a computed commutation scalar to `exp(2πik/n)`.
pub const SNAP_TOL: f64 = 1e-6;

/// Orthonormality tolerance for orbit bases in the decomposition.
pub const ORBIT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum PairError {
    #[error("UVU*V* is not a scalar (residual {residual:.3e})")]
    NotScalarCommutator { residual: f64 },
    #[error("pair does not commute (defect {defect:.3e})")]
    NonCommuting { defect: f64 },
    #[error("orbit basis failed orthonormality ({residual:.3e}); eigenspaces numerically coincide")]
    DegenerateOrbit { residual: f64 },
    #[error("scalar {value} is {distance:.3e} away from every exp(2πik/{n}), snap tolerance {SNAP_TOL:.0e}")]
    SnapFailure {
        value: Complex64,
        distance: f64,
        n: usize,
    },
    #[error("matrices have different sizes {left} and {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("lambda^n differs from 1 by {defect:.3e}")]
    LambdaNotRoot { defect: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Pair `(U, V)` with `UV = λVU`; λ is computed and certified at
/// construction, along with `λ^n = 1`.
#[derive(Debug, Clone)]
pub struct LambdaPair {
    u: UnitaryMatrix,
    v: UnitaryMatrix,
    lambda: Complex64,
}

impl LambdaPair {
    pub fn try_new(u: UnitaryMatrix, v: UnitaryMatrix) -> Result<Self, PairError> {
        let lambda = commutation_scalar(&u, &v)?;
        let n = u.dim() as i32;
        let root_defect = (lambda.powi(n) - Complex64::new(1.0, 0.0)).norm();
        if root_defect > COMMUTATION_TOL {
            return Err(PairError::LambdaNotRoot {
                defect: root_defect,
            });
        }
        Ok(LambdaPair { u, v, lambda })
    }

    pub fn u(&self) -> &UnitaryMatrix {
        &self.u
    }

    pub fn v(&self) -> &UnitaryMatrix {
        &self.v
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }
}

/// Commutation scalar `λ = (1/n) Tr(UVU*V*)`, accepted only when
/// `UVU*V*` really is `λ·I` within tolerance and `|λ| = 1`.
pub fn commutation_scalar(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<Complex64, PairError> {
    if u.dim() != v.dim() {
        return Err(PairError::SizeMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let n = u.dim();
    let k = u.matrix() * v.matrix() * u.matrix().adjoint() * v.matrix().adjoint();
    let lambda = k.trace() / Complex64::new(n as f64, 0.0);
    let residual = operator_norm(&(&k - ComplexMatrix::identity(n, n) * lambda));
    if residual > COMMUTATION_TOL || (lambda.norm() - 1.0).abs() > COMMUTATION_TOL {
        return Err(PairError::NotScalarCommutator { residual });
    }
    Ok(lambda / lambda.norm())
}

/// Snaps a unit scalar to the nearest `exp(2πik/n)`; fails beyond the
/// snap tolerance. Returns `k ∈ [0, n)` and the exact root.
pub fn snap_root_of_unity(z: Complex64, n: usize) -> Result<(usize, Complex64), PairError> {
    let turn = {
        let mut t = z.arg() / std::f64::consts::TAU;
        if t < 0.0 {
            t += 1.0;
        }
        t
    };
    let k = (turn * n as f64).round() as usize % n;
    let snapped = crate::linalg::root_of_unity(k as i64, n as i64);
    let distance = (z - snapped).norm();
    if distance > SNAP_TOL {
        return Err(PairError::SnapFailure {
            value: z,
            distance,
            n,
        });
    }
    Ok((k, snapped))
}

/// Joint spectrum of a commuting pair: the multiset of eigenvalue pairs
/// over a common eigenvector basis.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    seq: FiniteTorusSequence,
}

impl JointSpectrum {
    pub(crate) fn from_pairs(pairs: &[(Complex64, Complex64)]) -> Self {
        let points = pairs
            .iter()
            .map(|&(a, b)| TorusPoint::try_new(vec![a, b]).expect("unit eigenvalue pair"))
            .collect();
        JointSpectrum {
            seq: FiniteTorusSequence::try_new(2, points).expect("nonempty spectrum"),
        }
    }

    /// The spectrum as a sequence in `T^2`.
    pub fn sequence(&self) -> &FiniteTorusSequence {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Eigenvalue pairs `(κ, μ)` in the stored order.
    pub fn pairs(&self) -> Vec<(Complex64, Complex64)> {
        self.seq
            .points()
            .iter()
            .map(|p| (p.coords()[0], p.coords()[1]))
            .collect()
    }
}

/// Joint spectrum of commuting unitaries, by diagonalizing `U` and then
/// `V` restricted to each `U`-eigenspace.
pub fn joint_spectrum(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<JointSpectrum, PairError> {
    let (pairs, _) = simultaneous_eigenbasis(u, v)?;
    Ok(JointSpectrum::from_pairs(&pairs))
}

/// Common eigenbasis of a commuting pair of unitaries. Returns the
/// eigenvalue pairs and the orthonormal basis (as columns), ordered by
/// `(arg κ, arg μ)`.
pub fn simultaneous_eigenbasis(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
) -> Result<(Vec<(Complex64, Complex64)>, ComplexMatrix), PairError> {
    if u.dim() != v.dim() {
        return Err(PairError::SizeMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let n = u.dim();
    let defect = operator_norm(&(u.matrix() * v.matrix() - v.matrix() * u.matrix()));
    if defect > COMMUTATION_TOL {
        return Err(PairError::NonCommuting { defect });
    }
    let (u_evals, u_basis) = unitary_eigen(u.matrix());
    let mut basis = ComplexMatrix::zeros(n, n);
    let mut pairs = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n];
    let mut out = 0usize;
    for cluster in circular_clusters(&u_evals) {
        let m = cluster.len();
        let mut q = ComplexMatrix::zeros(n, m);
        for (t, &idx) in cluster.iter().enumerate() {
            q.set_column(t, &u_basis.column(idx));
        }
        let refined = if m == 1 {
            q
        } else {
            // V preserves the U-eigenspace; diagonalize its restriction.
            let a = q.adjoint() * v.matrix() * &q;
            let (_, r) = unitary_eigen(&a);
            &q * r
        };
        for j in 0..m {
            let col = refined.column(j);
            let kappa = normalize_unit((col.adjoint() * u.matrix() * col)[(0, 0)]);
            let mu = normalize_unit((col.adjoint() * v.matrix() * col)[(0, 0)]);
            basis.set_column(out, &col);
            pairs[out] = (kappa, mu);
            out += 1;
        }
    }
    // Deterministic order over the joint pairs.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ka = (arg_in_turn(pairs[a].0), arg_in_turn(pairs[a].1));
        let kb = (arg_in_turn(pairs[b].0), arg_in_turn(pairs[b].1));
        ka.partial_cmp(&kb).unwrap()
    });
    let mut out_basis = ComplexMatrix::zeros(n, n);
    let mut out_pairs = Vec::with_capacity(n);
    for (new, &old) in order.iter().enumerate() {
        out_basis.set_column(new, &basis.column(old));
        out_pairs.push(pairs[old]);
    }
    Ok((out_pairs, out_basis))
}

fn normalize_unit(z: Complex64) -> Complex64 {
    z / z.norm()
}

fn arg_in_turn(z: Complex64) -> f64 {
    let mut t = z.arg() / std::f64::consts::TAU;
    if t < 0.0 {
        t += 1.0;
    }
    t
}

/// Clusters unit-modulus eigenvalues sorted by argument. The circle has
/// no canonical cut, so clustering starts after the largest circular
/// gap; eigenvalues that straddle the branch point land in one cluster.
fn circular_clusters(evals: &[Complex64]) -> Vec<Vec<usize>> {
    let n = evals.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![vec![0]];
    }
    let mut max_gap = -1.0;
    let mut cut = 0;
    for i in 0..n {
        let next = (i + 1) % n;
        let gap = (evals[next] - evals[i]).norm();
        if gap > max_gap {
            max_gap = gap;
            cut = next;
        }
    }
    let mut clusters: Vec<Vec<usize>> = vec![vec![cut]];
    for step in 1..n {
        let idx = (cut + step) % n;
        let prev = (cut + step - 1) % n;
        if (evals[idx] - evals[prev]).norm() > EIGEN_CLUSTER_GAP {
            clusters.push(vec![idx]);
        } else {
            clusters.last_mut().unwrap().push(idx);
        }
    }
    clusters
}

/// Canonical form of a λ-commuting pair: conjugator `W`, the order `p`
/// of λ, and the per-orbit scalars.
#[derive(Debug, Clone)]
pub struct CanonicalDecomposition {
    p: usize,
    lambda: Complex64,
    omegas: Vec<Complex64>,
    mus: Vec<Complex64>,
    conjugator: UnitaryMatrix,
}

impl CanonicalDecomposition {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn omegas(&self) -> &[Complex64] {
        &self.omegas
    }

    pub fn mus(&self) -> &[Complex64] {
        &self.mus
    }

    pub fn conjugator(&self) -> &UnitaryMatrix {
        &self.conjugator
    }

    pub fn dim(&self) -> usize {
        self.conjugator.dim()
    }
}

/// The model pair `(S(p) ⊗ diag(ω), Ω(p,λ⁻¹) ⊗ diag(μ))`.
fn model_pair(
    p: usize,
    lambda: Complex64,
    omegas: &[Complex64],
    mus: &[Complex64],
) -> (ComplexMatrix, ComplexMatrix) {
    let s = shift_matrix(p);
    let o = clock_matrix(p, Complex64::new(1.0, 0.0) / lambda);
    let dw = ComplexMatrix::from_diagonal(&DVector::from_vec(omegas.to_vec()));
    let dm = ComplexMatrix::from_diagonal(&DVector::from_vec(mus.to_vec()));
    (
        s.matrix().kronecker(&dw),
        o.matrix().kronecker(&dm),
    )
}

/// Rebuilds the pair from its canonical decomposition.
pub fn reconstruct(d: &CanonicalDecomposition) -> LambdaPair {
    let (mu_model, mv_model) = model_pair(d.p, d.lambda, &d.omegas, &d.mus);
    let w = d.conjugator.matrix();
    let u = w.adjoint() * mu_model * w;
    let v = w.adjoint() * mv_model * w;
    let u = UnitaryMatrix::try_new(u).expect("conjugate of a unitary model");
    let v = UnitaryMatrix::try_new(v).expect("conjugate of a unitary model");
    LambdaPair::try_new(u, v).expect("model pair lambda-commutes by construction")
}

/// Canonical decomposition of a λ-commuting pair (λ snapped to a root
/// of unity within 1e-6). Deflates common eigenvectors of `(U^p, V)`
/// into `U`-orbits of length `p`.
pub fn decompose_pair(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
) -> Result<CanonicalDecomposition, PairError> {
    let n = u.dim();
    let raw = commutation_scalar(u, v)?;
    let (k, lambda) = snap_root_of_unity(raw, n)?;
    let p = n / k.gcd(&n);

    // A few deflation orders are tried before reporting degeneracy.
    let mut last_err = None;
    for attempt in 0..4 {
        match decompose_with_order(u, v, p, lambda, attempt) {
            Ok(d) => return Ok(d),
            Err(e @ PairError::DegenerateOrbit { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt ran"))
}

fn decompose_with_order(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
    p: usize,
    lambda: Complex64,
    attempt: usize,
) -> Result<CanonicalDecomposition, PairError> {
    let n = u.dim();
    let orbits = n / p;

    // U^p commutes with V; their common eigenbasis seeds the orbits.
    let mut u_pow = ComplexMatrix::identity(n, n);
    for _ in 0..p {
        u_pow = u_pow * u.matrix();
    }
    let u_pow = UnitaryMatrix::try_new(u_pow)?;
    let (pairs, basis) = simultaneous_eigenbasis(&u_pow, v)?;

    // Group the basis columns into joint eigenvalue classes.
    let mut classes: Vec<EigenClass> = Vec::new();
    'columns: for (j, &(kappa, mu)) in pairs.iter().enumerate() {
        let col: DVector<Complex64> = basis.column(j).into_owned();
        for c in &mut classes {
            if (c.kappa - kappa).norm() <= 10.0 * EIGEN_CLUSTER_GAP
                && (c.mu - mu).norm() <= 10.0 * EIGEN_CLUSTER_GAP
            {
                c.remaining.push(col);
                continue 'columns;
            }
        }
        classes.push(EigenClass {
            kappa,
            mu,
            remaining: vec![col],
        });
    }
    // Deflation order: descending class size, ties by argument.
    classes.sort_by(|a, b| {
        b.remaining
            .len()
            .cmp(&a.remaining.len())
            .then(arg_in_turn(a.kappa).partial_cmp(&arg_in_turn(b.kappa)).unwrap())
            .then(arg_in_turn(a.mu).partial_cmp(&arg_in_turn(b.mu)).unwrap())
    });
    if attempt > 0 {
        let shift = attempt.min(classes.len().saturating_sub(1));
        classes.rotate_left(shift);
    }

    let mut omegas = Vec::with_capacity(orbits);
    let mut mus = Vec::with_capacity(orbits);
    let mut columns: Vec<Vec<DVector<Complex64>>> = Vec::with_capacity(orbits);
    for _ in 0..orbits {
        let start = classes
            .iter()
            .position(|c| !c.remaining.is_empty())
            .expect("orbit count matches total multiplicity");
        let (kappa, mu) = (classes[start].kappa, classes[start].mu);
        let xi = classes[start].remaining.remove(0);

        // principal p-th root: argument in [0, 2π/p)
        let omega = Complex64::from_polar(1.0, arg_in_turn(kappa) * std::f64::consts::TAU / p as f64);
        let omega_bar = omega.conj();

        let mut orbit = Vec::with_capacity(p);
        orbit.push(xi);
        for j in 1..p {
            let prev = orbit.last().unwrap();
            let mut b: DVector<Complex64> = u.matrix() * prev;
            b *= omega_bar;
            b /= Complex64::new(b.norm(), 0.0);
            // b lives in the class (κ, μ·λ^{-j}); claim it there.
            let target_mu = normalize_unit(mu * lambda.conj().powi(j as i32));
            let class = classes
                .iter_mut()
                .find(|c| {
                    (c.kappa - kappa).norm() <= 1e-6 && (c.mu - target_mu).norm() <= 1e-6
                })
                .ok_or(PairError::DegenerateOrbit { residual: 1.0 })?;
            class.claim(&b)?;
            orbit.push(b);
        }
        omegas.push(omega);
        mus.push(mu);
        columns.push(orbit);
    }

    // Assemble B with column j*orbits + i = orbit i, step j, so that
    // B (S(p) ⊗ diag ω) B* = U; the spec conjugator is W = B*.
    let mut b_mat = ComplexMatrix::zeros(n, n);
    for (i, orbit) in columns.iter().enumerate() {
        for (j, col) in orbit.iter().enumerate() {
            b_mat.set_column(j * orbits + i, col);
        }
    }
    // Clean residual non-orthogonality; polar projects onto the nearest
    // unitary without moving a certified basis.
    let gram_defect = operator_norm(&(b_mat.adjoint() * &b_mat - ComplexMatrix::identity(n, n)));
    if gram_defect > ORBIT_TOL {
        return Err(PairError::DegenerateOrbit {
            residual: gram_defect,
        });
    }
    let b_unitary = polar_unitary(&b_mat)?;
    let conjugator = b_unitary.adjoint();

    let d = CanonicalDecomposition {
        p,
        lambda,
        omegas,
        mus,
        conjugator,
    };
    // Contract check: the decomposition must reproduce the pair.
    let rebuilt = reconstruct(&d);
    let err_u = operator_norm(&(rebuilt.u().matrix() - u.matrix()));
    let err_v = operator_norm(&(rebuilt.v().matrix() - v.matrix()));
    let residual = err_u.max(err_v);
    if residual > ORBIT_TOL {
        return Err(PairError::DegenerateOrbit { residual });
    }
    Ok(d)
}

struct EigenClass {
    kappa: Complex64,
    mu: Complex64,
    remaining: Vec<DVector<Complex64>>,
}

impl EigenClass {
    /// Removes the direction `b` from the remaining subspace. Fails if
    /// `b` is not inside it to within the orbit tolerance.
    fn claim(&mut self, b: &DVector<Complex64>) -> Result<(), PairError> {
        let dim = self.remaining.len();
        if dim == 0 {
            return Err(PairError::DegenerateOrbit { residual: 1.0 });
        }
        // residual of b against the remaining span
        let mut inside = DVector::from_element(b.len(), Complex64::new(0.0, 0.0));
        for r in &self.remaining {
            let c = r.dotc(b);
            inside += r * c;
        }
        let residual = (b - &inside).norm();
        if residual > ORBIT_TOL {
            return Err(PairError::DegenerateOrbit { residual });
        }
        // new remaining basis: orthogonal complement of b inside the span
        let mut new_basis: Vec<DVector<Complex64>> = Vec::with_capacity(dim - 1);
        for r in &self.remaining {
            let mut w = r.clone();
            let c = b.dotc(&w);
            w -= b * c;
            for nb in &new_basis {
                let c = nb.dotc(&w);
                w -= nb * c;
            }
            let norm = w.norm();
            if norm > 1e-3 {
                w /= Complex64::new(norm, 0.0);
                new_basis.push(w);
                if new_basis.len() == dim - 1 {
                    break;
                }
            }
        }
        if new_basis.len() != dim - 1 {
            return Err(PairError::DegenerateOrbit { residual: 1.0 });
        }
        self.remaining = new_basis;
        Ok(())
    }
}
