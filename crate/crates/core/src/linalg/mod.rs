//! Dense complex matrix algebra for unitary-matrix computations.
//!
//! The backing store is `nalgebra`'s `DMatrix<Complex64>`. Everything
//! here assumes square inputs of moderate size (a few hundred rows for
//! eigen-based routines; norms scale to a few thousand via the
//! compressed power iteration).

mod eigen;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{cluster_ranges, eigen_residual, hermitian_eigen, unitary_eigen};

/// Dense complex matrix; the carrier type for every operator in the crate.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance on `‖U*U − I‖` accepted when certifying a unitary.
pub const UNITARITY_TOL: f64 = 1e-9;

/// Gap threshold used to split eigenvalue clusters.
pub const EIGEN_CLUSTER_GAP: f64 = 1e-8;

/// Modulus slack accepted for points on the unit circle.
pub const TORUS_MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular (smallest singular value {sigma_min:.3e})")]
    SingularInput { sigma_min: f64 },
    #[error("eigenvalue on the branch cut (distance {dist:.3e} from -1); pass allow_boundary to accept")]
    BranchCut { dist: f64 },
    #[error("matrix is not unitary (defect {defect:.3e} exceeds {UNITARITY_TOL:.0e})")]
    NotUnitary { defect: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("coordinate {index} has modulus {modulus} too far from the unit circle")]
    OffTorus { index: usize, modulus: f64 },
}

/// `exp(2πi t)` for an angle `t` in turns.
pub fn unit_phase(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * turns)
}

/// Exact-as-possible root of unity `exp(2πi s/q)`.
pub fn root_of_unity(s: i64, q: i64) -> Complex64 {
    assert!(q != 0, "root_of_unity: zero denominator");
    unit_phase(s as f64 / q as f64)
}

/// ‖M‖ in the operator (spectral) norm.
///
/// Zero rows and columns are dropped first; small cores go through a
/// full SVD, larger ones through power iteration on `M*M` driven by the
/// nonzero entries only. Relative accuracy 1e-10 on the SVD path and on
/// well-separated spectra for the iterative path.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();
    let mut row_active = vec![false; m.nrows()];
    let mut col_active = vec![false; m.ncols()];
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                triplets.push((i, j, z));
                row_active[i] = true;
                col_active[j] = true;
            }
        }
    }
    if triplets.is_empty() {
        return 0.0;
    }
    let row_map = index_map(&row_active);
    let col_map = index_map(&col_active);
    let (nr, nc) = (row_map.len(), col_map.len());
    let mut row_of = vec![0usize; m.nrows()];
    for (new, &old) in row_map.iter().enumerate() {
        row_of[old] = new;
    }
    let mut col_of = vec![0usize; m.ncols()];
    for (new, &old) in col_map.iter().enumerate() {
        col_of[old] = new;
    }
    for t in &mut triplets {
        *t = (row_of[t.0], col_of[t.1], t.2);
    }

    if nr.min(nc) <= 128 {
        let mut core = ComplexMatrix::zeros(nr, nc);
        for &(i, j, z) in &triplets {
            core[(i, j)] = z;
        }
        return svd_values(&core)
            .first()
            .copied()
            .unwrap_or(0.0);
    }
    lanczos_norm(&triplets, nr, nc)
}

fn index_map(active: &[bool]) -> Vec<usize> {
    active
        .iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect()
}

/// Singular values in descending order.
pub fn svd_values(m: &ComplexMatrix) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Largest singular value by Golub-Kahan-Lanczos bidiagonalization with
/// full reorthogonalization. Exact (up to roundoff) once the step count
/// reaches the core dimension; converges much earlier in practice.
fn lanczos_norm(triplets: &[(usize, usize, Complex64)], nr: usize, nc: usize) -> f64 {
    let apply = |v: &[Complex64], out: &mut [Complex64]| {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(i, j, z) in triplets {
            out[i] += z * v[j];
        }
    };
    let apply_adjoint = |u: &[Complex64], out: &mut [Complex64]| {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(i, j, z) in triplets {
            out[j] += z.conj() * u[i];
        }
    };

    let max_steps = nr.min(nc).min(600);
    let mut vs: Vec<Vec<Complex64>> = Vec::new();
    let mut us: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z as f64 / u64::MAX as f64) - 0.5
    };
    let mut v: Vec<Complex64> = (0..nc).map(|_| Complex64::new(next(), next())).collect();
    normalize(&mut v);

    let mut u = vec![Complex64::new(0.0, 0.0); nr];
    apply(&v, &mut u);
    let alpha = norm2(&u);
    if alpha == 0.0 {
        return 0.0;
    }
    scale(&mut u, 1.0 / alpha);
    alphas.push(alpha);
    vs.push(v);
    us.push(u);

    let mut best = alpha;
    let mut stable = 0;
    for _ in 1..=max_steps {
        let mut r = vec![Complex64::new(0.0, 0.0); nc];
        apply_adjoint(us.last().unwrap(), &mut r);
        axpy(&mut r, -*alphas.last().unwrap(), vs.last().unwrap());
        for prev in &vs {
            let c = dot(prev, &r);
            axpy_c(&mut r, -c, prev);
        }
        let beta = norm2(&r);
        if beta <= 1e-14 * best.max(1.0) {
            break;
        }
        scale(&mut r, 1.0 / beta);
        betas.push(beta);
        vs.push(r);

        let mut p = vec![Complex64::new(0.0, 0.0); nr];
        apply(vs.last().unwrap(), &mut p);
        axpy(&mut p, -beta, us.last().unwrap());
        for prev in &us {
            let c = dot(prev, &p);
            axpy_c(&mut p, -c, prev);
        }
        let alpha = norm2(&p);
        if alpha <= 1e-14 * best.max(1.0) {
            break;
        }
        scale(&mut p, 1.0 / alpha);
        alphas.push(alpha);
        us.push(p);

        if alphas.len() % 4 == 0 {
            let ritz = bidiagonal_top_singular(&alphas, &betas);
            if (ritz - best).abs() <= 1e-14 * ritz.max(1e-300) {
                stable += 1;
                if stable >= 6 {
                    return ritz;
                }
            } else {
                stable = 0;
            }
            best = ritz;
        }
    }
    bidiagonal_top_singular(&alphas, &betas).max(best)
}

fn bidiagonal_top_singular(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut b = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i];
        }
    }
    b.svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(v: &mut [Complex64], s: f64) {
    v.iter_mut().for_each(|z| *z *= s);
}

fn axpy(v: &mut [Complex64], a: f64, x: &[Complex64]) {
    v.iter_mut().zip(x).for_each(|(z, w)| *z += a * w);
}

fn axpy_c(v: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    v.iter_mut().zip(x).for_each(|(z, w)| *z += a * w);
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm2(v);
    if n > 0.0 {
        scale(v, 1.0 / n);
    }
}

/// Unitary matrix with its unitarity certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    mat: ComplexMatrix,
    defect: f64,
}

impl UnitaryMatrix {
    /// Certifies `m` as unitary; fails if `‖m*m − I‖ > 1e-9`.
    pub fn try_new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let n = m.nrows();
        let gram = m.adjoint() * &m - ComplexMatrix::identity(n, n);
        let defect = operator_norm(&gram);
        if defect > UNITARITY_TOL {
            return Err(LinalgError::NotUnitary { defect });
        }
        Ok(UnitaryMatrix { mat: m, defect })
    }

    pub fn identity(n: usize) -> Self {
        UnitaryMatrix {
            mat: ComplexMatrix::identity(n, n),
            defect: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// ‖U*U − I‖ measured at construction.
    pub fn unitarity_defect(&self) -> f64 {
        self.defect
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix {
            mat: self.mat.adjoint(),
            defect: self.defect,
        }
    }

    /// Product of unitaries, re-certified.
    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<UnitaryMatrix, LinalgError> {
        UnitaryMatrix::try_new(&self.mat * &rhs.mat)
    }
}

/// Polar part of an invertible matrix: the unique unitary `u` with `X = u|X|`.
///
/// Computed by the scaled Newton iteration `Y ← (μY + (μY)^{-*})/2`,
/// which converges quadratically to the unitary factor and reaches
/// machine-precision unitarity; SVD only screens for singularity.
pub fn polar_unitary(x: &ComplexMatrix) -> Result<UnitaryMatrix, LinalgError> {
    if x.nrows() != x.ncols() {
        return Err(LinalgError::NotSquare {
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    let values = svd_values(x);
    let sigma_min = values.last().copied().unwrap_or(0.0);
    if !(sigma_min > 1e-12) {
        return Err(LinalgError::SingularInput { sigma_min });
    }
    let mut y = x.clone();
    for _ in 0..100 {
        let inv = y
            .clone()
            .try_inverse()
            .ok_or(LinalgError::SingularInput { sigma_min })?;
        // Higham scaling keeps the iteration count low for skewed spectra.
        let mu = (inv.norm() / y.norm()).sqrt();
        let next = (y.map(|z| z * (0.5 * mu)) + inv.adjoint().map(|z| z * (0.5 / mu)))
            .map(|z| z);
        let step = (&next - &y).norm();
        let done = step <= 1e-15 * next.norm();
        y = next;
        if done {
            break;
        }
    }
    UnitaryMatrix::try_new(y)
}

/// Principal logarithm of a unitary: skew-Hermitian `L` with `exp(L) = U`
/// and the spectrum of `-iL` inside `(-π, π]`.
///
/// Rejects eigenvalues within 1e-9 of `-1` unless `allow_boundary` is set,
/// in which case they are logged at `+iπ`.
pub fn log_unitary(u: &UnitaryMatrix, allow_boundary: bool) -> Result<ComplexMatrix, LinalgError> {
    let (evals, basis) = unitary_eigen(u.matrix());
    let mut logs = Vec::with_capacity(evals.len());
    for lam in &evals {
        let dist = (lam + Complex64::new(1.0, 0.0)).norm();
        if dist < 1e-9 && !allow_boundary {
            return Err(LinalgError::BranchCut { dist });
        }
        let theta = if dist < 1e-9 {
            std::f64::consts::PI
        } else {
            lam.arg()
        };
        logs.push(Complex64::new(0.0, theta));
    }
    let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(logs));
    Ok(&basis * d * basis.adjoint())
}

/// Matrix exponential by scaling-and-squaring with a Taylor core.
pub fn exp_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(m.nrows(), m.ncols(), "exp_matrix: square input required");
    let n = m.nrows();
    let norm = m.norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let t = m.map(|z| z / 2f64.powi(s as i32));
    let mut result = ComplexMatrix::identity(n, n);
    let mut term = ComplexMatrix::identity(n, n);
    for k in 1..200 {
        term = &term * &t / Complex64::new(k as f64, 0.0);
        result += &term;
        if term.norm() < 1e-18 * result.norm().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Point on the `N`-torus, stored as unit-modulus coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<Complex64>,
}

impl TorusPoint {
    pub fn try_new(coords: Vec<Complex64>) -> Result<Self, LinalgError> {
        for (i, z) in coords.iter().enumerate() {
            let modulus = z.norm();
            if (modulus - 1.0).abs() > TORUS_MODULUS_TOL {
                return Err(LinalgError::OffTorus { index: i, modulus });
            }
        }
        Ok(TorusPoint { coords })
    }

    /// Builds a point from angles in turns (always on the torus).
    pub fn from_turns(turns: &[f64]) -> Self {
        TorusPoint {
            coords: turns.iter().map(|&t| unit_phase(t)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    /// `max_p |s_p − t_p|`: the max-coordinate chordal distance.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        assert_eq!(self.dim(), other.dim(), "torus dimension mismatch");
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
