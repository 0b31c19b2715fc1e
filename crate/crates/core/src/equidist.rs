//! Equidistribution diagnostics for finite sequences on tori.
//!
//! A finite multiset of points in `T^N` can be probed three ways:
//! exponential-sum decay over integer frequency vectors (`weyl_sum`,
//! `weyl_profile`), counting discrepancy over grid-cornered boxes
//! (`box_discrepancy`), and bottleneck matching against a product grid
//! (`epsilon_distribution`). The bottleneck engine is shared with
//! `bottleneck_spectral_distance`, which compares two spectra directly.
//!
//! Uniform distribution of an infinite family is a limit statement and
//! is never decided here; callers get per-truncation values and apply
//! their own thresholds.

use crate::linalg::TorusPoint;
use crate::pairs::{JointSpectrum, LambdaPair};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Point-count cap for cumulative tensor-product spectra.
pub const SPECTRUM_POINT_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum EquidistError {
    #[error("multi-index must be nonzero")]
    ZeroMultiIndex,
    #[error("multi-index has dimension {found}, sequence has dimension {expected}")]
    MultiIndexDimension { expected: usize, found: usize },
    #[error("cardinality mismatch: sequence has {points} points, target has {targets}")]
    CardinalityMismatch { points: usize, targets: usize },
    #[error("torus dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("block {index} is not commuting (lambda defect {defect:.3e})")]
    NonCommutingBlock { index: usize, defect: f64 },
    #[error("cumulative spectrum would hold {points} points, cap is {SPECTRUM_POINT_CAP}")]
    DimensionCap { points: usize },
    #[error("sequence must be nonempty")]
    Empty,
    #[error("start index {m} out of range 1..={len}")]
    StartIndex { m: usize, len: usize },
    #[error(transparent)]
    Pair(#[from] crate::pairs::PairError),
}

/// Finite multiset of points in `T^N`; order is preserved for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTorusSequence {
    dim: usize,
    points: Vec<TorusPoint>,
}

impl FiniteTorusSequence {
    pub fn try_new(dim: usize, points: Vec<TorusPoint>) -> Result<Self, EquidistError> {
        if points.is_empty() {
            return Err(EquidistError::Empty);
        }
        for p in &points {
            if p.dim() != dim {
                return Err(EquidistError::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
        }
        Ok(FiniteTorusSequence { dim, points })
    }

    /// Convenience constructor from angle rows in turns.
    pub fn from_turns(rows: &[Vec<f64>]) -> Result<Self, EquidistError> {
        let dim = rows.first().map(|r| r.len()).ok_or(EquidistError::Empty)?;
        FiniteTorusSequence::try_new(
            dim,
            rows.iter().map(|r| TorusPoint::from_turns(r)).collect(),
        )
    }

    /// The full product grid `exp(2πi j_i / dims_i)` in lexicographic order.
    pub fn product_grid(dims: &[usize]) -> Result<Self, EquidistError> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(EquidistError::Empty);
        }
        let total: usize = dims.iter().product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..total {
            let turns: Vec<f64> = idx
                .iter()
                .zip(dims)
                .map(|(&j, &d)| j as f64 / d as f64)
                .collect();
            points.push(TorusPoint::from_turns(&turns));
            for axis in (0..dims.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < dims[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        FiniteTorusSequence::try_new(dims.len(), points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }
}

/// Aggregated distribution diagnostics for one sequence.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    pub weyl_profile_value: f64,
    pub box_discrepancy_value: f64,
    pub eps_star: f64,
    pub assignment: Vec<usize>,
}

/// Bundles the three diagnostics for one sequence.
pub fn distribution_report(
    seq: &FiniteTorusSequence,
    lmax: usize,
    res: usize,
    dims: &[usize],
) -> Result<DistributionReport, EquidistError> {
    let (eps_star, assignment) = epsilon_distribution(seq, dims)?;
    Ok(DistributionReport {
        weyl_profile_value: weyl_profile(seq, lmax),
        box_discrepancy_value: box_discrepancy(seq, res),
        eps_star,
        assignment,
    })
}

/// `(1/|S|) Σ_p s_p^l` for a nonzero integer vector `l`.
pub fn weyl_sum(seq: &FiniteTorusSequence, l: &[i64]) -> Result<Complex64, EquidistError> {
    if l.len() != seq.dim() {
        return Err(EquidistError::MultiIndexDimension {
            expected: seq.dim(),
            found: l.len(),
        });
    }
    if l.iter().all(|&k| k == 0) {
        return Err(EquidistError::ZeroMultiIndex);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for p in seq.points() {
        let mut term = Complex64::new(1.0, 0.0);
        for (z, &k) in p.coords().iter().zip(l) {
            term *= z.powi(k as i32);
        }
        sum += term;
    }
    Ok(sum / seq.len() as f64)
}

/// `max |weyl_sum(S,l)|` over `0 < ‖l‖_∞ ≤ lmax`.
pub fn weyl_profile(seq: &FiniteTorusSequence, lmax: usize) -> f64 {
    assert!(lmax >= 1, "weyl_profile requires lmax >= 1");
    let dim = seq.dim();
    let side = 2 * lmax + 1;
    let total = side.pow(dim as u32);
    let mut best = 0.0f64;
    for code in 0..total {
        let mut rest = code;
        let mut l = vec![0i64; dim];
        for slot in &mut l {
            *slot = (rest % side) as i64 - lmax as i64;
            rest /= side;
        }
        if l.iter().all(|&k| k == 0) {
            continue;
        }
        let value = weyl_sum(seq, &l).expect("nonzero index in range").norm();
        if value > best {
            best = value;
        }
    }
    best
}

/// Counting discrepancy over boxes with corners on the `res`-grid: the
/// max over products of arcs `[2πr1/res, 2πr2/res)` of
/// `|count/|S| − volume|`.
pub fn box_discrepancy(seq: &FiniteTorusSequence, res: usize) -> f64 {
    assert!(res >= 2, "box_discrepancy requires res >= 2");
    let dim = seq.dim();
    // Angle of each coordinate as a turn fraction in [0, 1).
    let turns: Vec<Vec<f64>> = seq
        .points()
        .iter()
        .map(|p| {
            p.coords()
                .iter()
                .map(|z| {
                    let mut t = z.arg() / std::f64::consts::TAU;
                    if t < 0.0 {
                        t += 1.0;
                    }
                    if t >= 1.0 {
                        t -= 1.0;
                    }
                    t
                })
                .collect()
        })
        .collect();

    let arcs: Vec<(f64, f64)> = {
        let mut arcs = Vec::new();
        for r1 in 0..res {
            for r2 in (r1 + 1)..=res {
                arcs.push((r1 as f64 / res as f64, r2 as f64 / res as f64));
            }
        }
        arcs
    };
    let mut best = 0.0f64;
    let mut choice = vec![0usize; dim];
    loop {
        let mut volume = 1.0;
        for &c in &choice {
            let (a, b) = arcs[c];
            volume *= b - a;
        }
        let count = turns
            .iter()
            .filter(|t| {
                t.iter().zip(&choice).all(|(&x, &c)| {
                    let (a, b) = arcs[c];
                    x >= a && x < b
                })
            })
            .count();
        let diff = (count as f64 / seq.len() as f64 - volume).abs();
        if diff > best {
            best = diff;
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return best;
            }
            choice[axis] += 1;
            if choice[axis] < arcs.len() {
                break;
            }
            choice[axis] = 0;
            axis += 1;
        }
    }
}

/// Minimal ε for which the points biject onto the product grid of
/// `dims` within max-coordinate distance ε, plus a witnessing bijection
/// `assignment[p] = grid index`.
///
/// Exact bottleneck objective: binary search over the sorted candidate
/// distances with a maximum-matching feasibility test at each threshold.
pub fn epsilon_distribution(
    seq: &FiniteTorusSequence,
    dims: &[usize],
) -> Result<(f64, Vec<usize>), EquidistError> {
    if dims.len() != seq.dim() {
        return Err(EquidistError::MultiIndexDimension {
            expected: seq.dim(),
            found: dims.len(),
        });
    }
    let grid = FiniteTorusSequence::product_grid(dims)?;
    if grid.len() != seq.len() {
        return Err(EquidistError::CardinalityMismatch {
            points: seq.len(),
            targets: grid.len(),
        });
    }
    Ok(bottleneck_assignment(seq.points(), grid.points()))
}

/// Bottleneck distance between two equal-size spectra (point multisets):
/// the min over bijections of the max pairwise distance.
pub fn bottleneck_spectral_distance(
    a: &FiniteTorusSequence,
    b: &FiniteTorusSequence,
) -> Result<f64, EquidistError> {
    if a.dim() != b.dim() {
        return Err(EquidistError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(EquidistError::CardinalityMismatch {
            points: a.len(),
            targets: b.len(),
        });
    }
    Ok(bottleneck_assignment(a.points(), b.points()).0)
}

/// Shared matching engine: exact bottleneck assignment.
fn bottleneck_assignment(points: &[TorusPoint], targets: &[TorusPoint]) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut dist = vec![0.0f64; n * n];
    for (i, p) in points.iter().enumerate() {
        for (j, t) in targets.iter().enumerate() {
            dist[i * n + j] = p.distance(t);
        }
    }
    let mut candidates: Vec<f64> = dist.clone();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    let feasible = |threshold: f64| -> Option<Vec<usize>> {
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| dist[i * n + j] <= threshold).collect())
            .collect();
        let (size, matching) = hopcroft_karp(&adjacency, n);
        (size == n).then_some(matching)
    };

    // Invariant: the top candidate is always feasible (complete graph).
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    let mut witness = feasible(candidates[hi]).expect("complete bipartite graph matches");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match feasible(candidates[mid]) {
            Some(m) => {
                witness = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    (candidates[hi], witness)
}

/// Hopcroft-Karp maximum bipartite matching. `adjacency[u]` lists the
/// right-vertices reachable from left-vertex `u`. Returns the matching
/// size and each left-vertex's partner.
fn hopcroft_karp(adjacency: &[Vec<usize>], right_count: usize) -> (usize, Vec<usize>) {
    const NIL: usize = usize::MAX;
    let left_count = adjacency.len();
    let mut match_left = vec![NIL; left_count];
    let mut match_right = vec![NIL; right_count];
    let mut dist = vec![0usize; left_count];
    let mut size = 0;

    fn dfs(
        u: usize,
        adjacency: &[Vec<usize>],
        match_left: &mut [usize],
        match_right: &mut [usize],
        dist: &mut [usize],
    ) -> bool {
        const NIL: usize = usize::MAX;
        for idx in 0..adjacency[u].len() {
            let v = adjacency[u][idx];
            let w = match_right[v];
            let ok = if w == NIL {
                true
            } else if dist[w] == dist[u] + 1 {
                dfs(w, adjacency, match_left, match_right, dist)
            } else {
                false
            };
            if ok {
                match_left[u] = v;
                match_right[v] = u;
                return true;
            }
        }
        dist[u] = usize::MAX;
        false
    }

    loop {
        let mut queue = std::collections::VecDeque::new();
        for u in 0..left_count {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found_augmenting = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                let w = match_right[v];
                if w == NIL {
                    found_augmenting = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found_augmenting {
            break;
        }
        for u in 0..left_count {
            if match_left[u] == NIL
                && dfs(u, adjacency, &mut match_left, &mut match_right, &mut dist)
            {
                size += 1;
            }
        }
    }
    (size, match_left)
}

/// Joint spectra of the cumulative tensor products `⊗_{k=m}^{n}` of
/// commuting blocks, for `n = m..=blocks.len()` (`m` is 1-based).
///
/// Computed as coordinatewise products of the per-block joint spectra;
/// no tensor-product matrix is ever formed.
pub fn cumulative_spectra(
    blocks: &[LambdaPair],
    m: usize,
) -> Result<Vec<JointSpectrum>, EquidistError> {
    if m == 0 || m > blocks.len() {
        return Err(EquidistError::StartIndex {
            m,
            len: blocks.len(),
        });
    }
    for (index, b) in blocks.iter().enumerate().skip(m - 1) {
        let defect = (b.lambda() - Complex64::new(1.0, 0.0)).norm();
        if defect > 1e-8 {
            return Err(EquidistError::NonCommutingBlock { index, defect });
        }
    }
    let mut total = 1usize;
    let mut per_block = Vec::new();
    for b in blocks.iter().skip(m - 1) {
        total = total.saturating_mul(b.dim());
        if total > SPECTRUM_POINT_CAP {
            return Err(EquidistError::DimensionCap { points: total });
        }
        per_block.push(crate::pairs::joint_spectrum(b.u(), b.v())?);
    }

    let mut out = Vec::with_capacity(per_block.len());
    let mut acc: Vec<(Complex64, Complex64)> =
        vec![(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))];
    for spectrum in &per_block {
        let mut next = Vec::with_capacity(acc.len() * spectrum.len());
        for &(ka, ma) in &acc {
            for p in spectrum.sequence().points() {
                let (kb, mb) = (p.coords()[0], p.coords()[1]);
                let mut k = ka * kb;
                let mut mu = ma * mb;
                k /= k.norm();
                mu /= mu.norm();
                next.push((k, mu));
            }
        }
        acc = next;
        out.push(JointSpectrum::from_pairs(&acc));
    }
    Ok(out)
}
