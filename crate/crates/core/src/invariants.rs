//! Winding-number and path-determinant invariants for unitary pairs.
//!
//! `winding_number` evaluates the integer invariant of a pair `(U, V)`
//! at a root of unity λ with `‖λUV − VU‖ < 2` twice: once as the
//! winding of the closed determinant path `t ↦ det((1−t)λUV + tVU)`,
//! once through the trace of the principal logarithm of `λ⁻¹VUV*U*`.
//! The two routes are independent and must agree; disagreement is a
//! fatal numerical signal, never averaged away.
//!
//! `hs_determinant` integrates `(1/2πi) τ(ξ̇ ξ⁻¹)` along a sampled
//! unitary path via piecewise logarithm increments, reduced modulo the
//! trace group `(1/d)Z` (normalized trace on `M_d`) or `Z`
//! (non-normalized).

use crate::linalg::{
    log_unitary, operator_norm, ComplexMatrix, LinalgError, UnitaryMatrix,
};
use crate::pairs::{commutation_scalar, PairError};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Margin applied to the `‖λUV − VU‖ < 2` hypothesis check.
pub const HYPOTHESIS_MARGIN: f64 = 1e-6;

/// Step bound guaranteeing log continuity along a sampled path.
pub const PATH_STEP_BOUND: f64 = 0.5;

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("hypothesis violated: ‖λUV − VU‖ = {defect:.6} is not < 2 with margin {HYPOTHESIS_MARGIN:.0e}")]
    HypothesisViolated { defect: f64 },
    #[error("path winding {path} disagrees with trace-log winding {trace}; numerical failure")]
    MethodDisagreement { path: i64, trace: i64 },
    #[error("winding value {value} is {distance:.3e} from the nearest integer")]
    NotInteger { value: f64, distance: f64 },
    #[error("lambda^n differs from 1 by {defect:.3e}; winding needs a root of unity")]
    LambdaNotRoot { defect: f64 },
    #[error("path step {step:.4} at sample {index} exceeds the bound {PATH_STEP_BOUND}")]
    StepTooLarge { index: usize, step: f64 },
    #[error("path must contain at least two samples")]
    PathTooShort,
    #[error("path samples have mixed dimensions")]
    MixedDimensions,
    #[error("‖x − 1‖ = {dist:.4} is not < 1; no principal small logarithm")]
    TooFarFromIdentity { dist: f64 },
    #[error("expression is not a scalar multiple of I (residual {residual:.3e})")]
    NotScalar { residual: f64 },
    #[error("Ad a1 and Ad a2 do not commute: a1 a2 a1* a2* is not scalar")]
    AdjointsNotCommuting(#[source] PairError),
    #[error("matrices have different sizes {left} and {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Result of the dual-path winding computation.
#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    pub value: i64,
    pub method_agreement: bool,
    pub defect: f64,
}

/// Integer winding invariant of `(U, V)` at the root of unity λ.
pub fn winding_number(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
    lambda: Complex64,
) -> Result<WindingResult, InvariantError> {
    if u.dim() != v.dim() {
        return Err(InvariantError::SizeMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let n = u.dim();
    let lambda = lambda / lambda.norm();
    let root_defect = (lambda.powi(n as i32) - Complex64::new(1.0, 0.0)).norm();
    if root_defect > 1e-8 {
        return Err(InvariantError::LambdaNotRoot {
            defect: root_defect,
        });
    }
    let uv = u.matrix() * v.matrix();
    let vu = v.matrix() * u.matrix();
    let defect = operator_norm(&(uv.map(|z| z * lambda) - &vu));
    if defect >= 2.0 - HYPOTHESIS_MARGIN {
        return Err(InvariantError::HypothesisViolated { defect });
    }

    let trace = winding_by_trace_log(u, v, lambda)?;
    let path = winding_by_path(&uv.map(|z| z * lambda), &vu)?;
    if trace != path {
        return Err(InvariantError::MethodDisagreement { path, trace });
    }
    Ok(WindingResult {
        value: trace,
        method_agreement: true,
        defect,
    })
}

/// `(1/2πi) Tr log(λ⁻¹ V U V* U*)` rounded to the certified integer.
fn winding_by_trace_log(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
    lambda: Complex64,
) -> Result<i64, InvariantError> {
    let m = (v.matrix() * u.matrix() * v.matrix().adjoint() * u.matrix().adjoint())
        .map(|z| z * lambda.conj());
    let m = UnitaryMatrix::try_new(m)?;
    // hypothesis keeps the spectrum away from -1, so the branch is safe
    let log = log_unitary(&m, false)?;
    let value = log.trace().im / std::f64::consts::TAU;
    round_to_integer(value)
}

/// Winding of `t ↦ det((1−t)·A + t·B)` around zero, by adaptive
/// argument tracking with per-step change below π/4.
///
/// The determinant path of an `n×n` pencil winds at most `n/2` times,
/// so the initial grid carries `8n` intervals; refinement then also
/// watches the chord length relative to the endpoint moduli, which
/// catches fast sweeps whose principal argument aliases to a small
/// value.
fn winding_by_path(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<i64, InvariantError> {
    let det_at = |t: f64| -> Complex64 {
        let m = a.map(|z| z * (1.0 - t)) + b.map(|z| z * t);
        m.determinant()
    };
    let intervals = 8 * a.nrows().max(1);
    let mut ts: Vec<f64> = (0..=intervals)
        .map(|i| i as f64 / intervals as f64)
        .collect();
    let mut dets: Vec<Complex64> = ts.iter().map(|&t| det_at(t)).collect();
    let needs_split = |x: Complex64, y: Complex64| -> bool {
        let change = (y / x).arg().abs();
        let chord = (y - x).norm() / x.norm().min(y.norm()).max(1e-300);
        change > std::f64::consts::FRAC_PI_4 || chord > 0.5
    };
    for _ in 0..28 {
        let mut any = false;
        let mut refined_ts = Vec::with_capacity(ts.len() * 2);
        let mut refined_dets = Vec::with_capacity(ts.len() * 2);
        for i in 0..ts.len() - 1 {
            refined_ts.push(ts[i]);
            refined_dets.push(dets[i]);
            if needs_split(dets[i], dets[i + 1]) {
                any = true;
                let mid = 0.5 * (ts[i] + ts[i + 1]);
                refined_ts.push(mid);
                refined_dets.push(det_at(mid));
            }
        }
        refined_ts.push(*ts.last().unwrap());
        refined_dets.push(*dets.last().unwrap());
        ts = refined_ts;
        dets = refined_dets;
        if !any {
            break;
        }
    }
    let mut total = 0.0f64;
    for i in 0..dets.len() - 1 {
        total += (dets[i + 1] / dets[i]).arg();
    }
    round_to_integer(total / std::f64::consts::TAU)
}

fn round_to_integer(value: f64) -> Result<i64, InvariantError> {
    let nearest = value.round();
    let distance = (value - nearest).abs();
    if distance > 1e-6 {
        return Err(InvariantError::NotInteger { value, distance });
    }
    Ok(nearest as i64)
}

/// Piecewise-sampled path of unitaries with controlled steps.
#[derive(Debug, Clone)]
pub struct UnitaryPath {
    samples: Vec<UnitaryMatrix>,
}

impl UnitaryPath {
    pub fn try_new(samples: Vec<UnitaryMatrix>) -> Result<Self, InvariantError> {
        if samples.len() < 2 {
            return Err(InvariantError::PathTooShort);
        }
        let dim = samples[0].dim();
        for s in &samples {
            if s.dim() != dim {
                return Err(InvariantError::MixedDimensions);
            }
        }
        for (index, w) in samples.windows(2).enumerate() {
            let step = operator_norm(&(w[1].matrix() - w[0].matrix()));
            if step >= PATH_STEP_BOUND {
                return Err(InvariantError::StepTooLarge { index, step });
            }
        }
        Ok(UnitaryPath { samples })
    }

    pub fn samples(&self) -> &[UnitaryMatrix] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    /// Concatenation; the junction step must satisfy the step bound.
    pub fn concatenate(&self, other: &UnitaryPath) -> Result<UnitaryPath, InvariantError> {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(other.samples());
        UnitaryPath::try_new(samples)
    }
}

/// The log-linear path `t ↦ exp(t log x)` from 1 to `x`, sampled.
pub fn log_linear_path(x: &UnitaryMatrix, steps: usize) -> Result<UnitaryPath, InvariantError> {
    let log = log_unitary(x, false)?;
    let samples = (0..=steps)
        .map(|j| {
            let t = j as f64 / steps as f64;
            UnitaryMatrix::try_new(crate::linalg::exp_matrix(&log.map(|z| z * t)))
                .expect("exp of skew-Hermitian is unitary")
        })
        .collect();
    UnitaryPath::try_new(samples)
}

/// Value of the path-integral determinant, before and after reduction
/// modulo the trace group `(1/denominator)·Z`.
#[derive(Debug, Clone, Serialize)]
pub struct HSValue {
    pub raw: f64,
    pub denominator: usize,
    pub reduced: f64,
}

impl HSValue {
    fn reduce(raw: f64, denominator: usize) -> Self {
        let modulus = 1.0 / denominator as f64;
        let mut reduced = raw.rem_euclid(modulus);
        if (reduced - modulus).abs() < 1e-12 {
            reduced = 0.0;
        }
        HSValue {
            raw,
            denominator,
            reduced,
        }
    }
}

/// Path-integral determinant via piecewise logarithm increments:
/// `Σ_j (1/2πi) τ(log(ξ(t_j)⁻¹ ξ(t_{j+1})))`.
///
/// With `normalized` the trace is `tr/d` and the value is reduced mod
/// `(1/d)Z`; otherwise the non-normalized trace reduces mod `Z`.
pub fn hs_determinant(path: &UnitaryPath, normalized: bool) -> Result<HSValue, InvariantError> {
    let d = path.dim();
    let mut raw = 0.0f64;
    for w in path.samples().windows(2) {
        let inc = UnitaryMatrix::try_new(w[0].matrix().adjoint() * w[1].matrix())?;
        // step bound keeps the spectrum near 1; branch cut unreachable
        let log = log_unitary(&inc, false)?;
        let tr = log.trace();
        let tau = if normalized { tr / d as f64 } else { tr };
        raw += tau.im / std::f64::consts::TAU;
    }
    let denominator = if normalized { d } else { 1 };
    Ok(HSValue::reduce(raw, denominator))
}

/// Closed form for `‖x − 1‖ < 1`: `(1/2πi) τ(log x)` reduced mod the group.
pub fn hs_small(x: &UnitaryMatrix, normalized: bool) -> Result<HSValue, InvariantError> {
    let dist = operator_norm(&(x.matrix() - ComplexMatrix::identity(x.dim(), x.dim())));
    if dist >= 1.0 {
        return Err(InvariantError::TooFarFromIdentity { dist });
    }
    let log = log_unitary(x, false)?;
    let tr = log.trace();
    let tau = if normalized { tr / x.dim() as f64 } else { tr };
    let raw = tau.im / std::f64::consts::TAU;
    let denominator = if normalized { x.dim() } else { 1 };
    Ok(HSValue::reduce(raw, denominator))
}

/// The scalar λ with `(u2·a2 u1 a2*)* · u1 · (a1 u2 a1*) = λ·I`, for
/// unitaries `u1, u2` perturbing the commuting inner actions `Ad a1`,
/// `Ad a2`. Errors if the adjoint actions fail to commute or the
/// expression is not scalar.
pub fn cocycle_obstruction(
    u1: &UnitaryMatrix,
    u2: &UnitaryMatrix,
    a1: &UnitaryMatrix,
    a2: &UnitaryMatrix,
) -> Result<Complex64, InvariantError> {
    let n = u1.dim();
    for m in [u2, a1, a2] {
        if m.dim() != n {
            return Err(InvariantError::SizeMismatch {
                left: n,
                right: m.dim(),
            });
        }
    }
    commutation_scalar(a1, a2).map_err(InvariantError::AdjointsNotCommuting)?;

    let alpha1_u2 = a1.matrix() * u2.matrix() * a1.matrix().adjoint();
    let alpha2_u1 = a2.matrix() * u1.matrix() * a2.matrix().adjoint();
    let m = (u2.matrix() * alpha2_u1).adjoint() * u1.matrix() * alpha1_u2;
    let lambda = m.trace() / Complex64::new(n as f64, 0.0);
    let residual = operator_norm(&(&m - ComplexMatrix::identity(n, n) * lambda));
    if residual > 1e-8 || (lambda.norm() - 1.0).abs() > 1e-8 {
        return Err(InvariantError::NotScalar { residual });
    }
    Ok(lambda / lambda.norm())
}
