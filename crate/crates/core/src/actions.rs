//! Product-type actions, their classification invariant, and the
//! regime trichotomy of the ambient algebra.
//!
//! An action is described blockwise: each block carries a dimension `q`
//! and a pair of generator expressions whose evaluations must form a
//! λ-commuting pair in `M_q`. Infinite sequences are represented by an
//! explicit prefix plus an eventually-periodic tail; equivalence and
//! Rohlin verdicts are exact for this representable subclass and report
//! `NotDecidedFinite` where finite data cannot witness the answer.

use crate::equidist::{cumulative_spectra, weyl_profile, EquidistError};
use crate::expr::{eval_expr, ExprError, MatrixExpr};
use crate::linalg::UnitaryMatrix;
use crate::pairs::{snap_root_of_unity, LambdaPair, PairError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("block {index}: {source}")]
    BlockExpr {
        index: usize,
        #[source]
        source: ExprError,
    },
    #[error("block {index}: evaluated generator is {found}x{found}, declared q = {declared}")]
    BlockDimension {
        index: usize,
        declared: usize,
        found: usize,
    },
    #[error("block {index}: generator is not unitary")]
    BlockNotUnitary {
        index: usize,
        #[source]
        source: crate::linalg::LinalgError,
    },
    #[error("block {index}: {source}")]
    BlockPair {
        index: usize,
        #[source]
        source: PairError,
    },
    #[error("tail residue {s} out of range for dimension {q}")]
    BadTailResidue { q: usize, s: usize },
    #[error("tail period must be nonempty")]
    EmptyTailPeriod,
    #[error("block dimension sequences never synchronize; invariants are incomparable")]
    IncomparableShapes,
    #[error(
        "invariant mode needs prime-power block dimensions; block dimension {q} mixes primes"
    )]
    ClassMismatch { q: usize },
    #[error("empirical mode requires all commutation scalars equal to 1; found s={s} on q={q}")]
    EmpiricalNeedsCommuting { q: usize, s: usize },
    #[error(transparent)]
    Equidist(#[from] EquidistError),
}

/// One tensor block: dimension and the two generator expressions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    pub q: usize,
    pub u1: String,
    pub u2: String,
}

/// Descriptor of the infinitely many remaining blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailSpec {
    /// No further blocks (finite-dimensional algebra).
    Trivial,
    /// The listed `(q, s)` blocks repeat forever.
    Periodic { period: Vec<TailEntry> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailEntry {
    pub q: usize,
    pub s: usize,
}

/// Product-type action: explicit blocks plus a tail descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductActionSpec {
    pub blocks: Vec<BlockSpec>,
    pub tail: TailSpec,
}

impl ProductActionSpec {
    /// Validates the tail and evaluates every block into a λ-pair.
    pub fn block_pairs(&self) -> Result<Vec<LambdaPair>, ActionError> {
        self.validate_tail()?;
        self.blocks
            .iter()
            .enumerate()
            .map(|(index, b)| {
                let u1 = eval_block_matrix(&b.u1, index)?;
                let u2 = eval_block_matrix(&b.u2, index)?;
                for m in [&u1, &u2] {
                    if m.nrows() != b.q {
                        return Err(ActionError::BlockDimension {
                            index,
                            declared: b.q,
                            found: m.nrows(),
                        });
                    }
                }
                let u1 = UnitaryMatrix::try_new(u1)
                    .map_err(|source| ActionError::BlockNotUnitary { index, source })?;
                let u2 = UnitaryMatrix::try_new(u2)
                    .map_err(|source| ActionError::BlockNotUnitary { index, source })?;
                LambdaPair::try_new(u1, u2)
                    .map_err(|source| ActionError::BlockPair { index, source })
            })
            .collect()
    }

    pub fn validate_tail(&self) -> Result<(), ActionError> {
        match &self.tail {
            TailSpec::Trivial => Ok(()),
            TailSpec::Periodic { period } => {
                if period.is_empty() {
                    return Err(ActionError::EmptyTailPeriod);
                }
                for e in period {
                    if e.q == 0 || e.s >= e.q {
                        return Err(ActionError::BadTailResidue { q: e.q, s: e.s });
                    }
                }
                Ok(())
            }
        }
    }
}

fn eval_block_matrix(
    src: &str,
    index: usize,
) -> Result<crate::linalg::ComplexMatrix, ActionError> {
    let expr: MatrixExpr = src
        .parse()
        .map_err(|source| ActionError::BlockExpr { index, source })?;
    eval_expr(&expr).map_err(|source| ActionError::BlockExpr { index, source })
}

/// The classification invariant: per-block residues `s_k` with
/// `λ_k = exp(2πi s_k/q_k)`, plus the tail descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantSequence {
    pub explicit: Vec<TailEntry>,
    pub tail: TailSpec,
}

/// Extracts the invariant sequence of a spec: each block's commutation
/// scalar snapped to `exp(2πi s/q)`.
pub fn extract_invariant(spec: &ProductActionSpec) -> Result<InvariantSequence, ActionError> {
    let pairs = spec.block_pairs()?;
    let mut explicit = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let (s, _) = snap_root_of_unity(pair.lambda(), pair.dim())
            .map_err(|source| ActionError::BlockPair { index, source })?;
        explicit.push(TailEntry {
            q: pair.dim(),
            s,
        });
    }
    Ok(InvariantSequence {
        explicit,
        tail: spec.tail.clone(),
    })
}

/// Entry of the full (eventually periodic) sequence at 0-based index.
/// The trivial tail continues with 1-dimensional commuting blocks.
fn entry_at(inv: &InvariantSequence, t: usize) -> TailEntry {
    if t < inv.explicit.len() {
        return inv.explicit[t];
    }
    match &inv.tail {
        TailSpec::Trivial => TailEntry { q: 1, s: 0 },
        TailSpec::Periodic { period } => period[(t - inv.explicit.len()) % period.len()],
    }
}

fn tail_period_len(inv: &InvariantSequence) -> usize {
    match &inv.tail {
        TailSpec::Trivial => 1,
        TailSpec::Periodic { period } => period.len(),
    }
}

/// Eventual equality of two invariant sequences.
///
/// Requires the block dimension sequences to agree from the longer
/// explicit prefix on (else the shapes are incomparable); equivalence
/// then holds iff the residues also agree from that point on. Both are
/// decided exactly on one period window past the prefix.
pub fn invariants_equivalent(
    a: &InvariantSequence,
    b: &InvariantSequence,
) -> Result<bool, ActionError> {
    let start = a.explicit.len().max(b.explicit.len());
    let window = lcm(tail_period_len(a), tail_period_len(b));
    for t in start..start + window {
        let (ea, eb) = (entry_at(a, t), entry_at(b, t));
        if ea.q != eb.q {
            return Err(ActionError::IncomparableShapes);
        }
    }
    for t in start..start + window {
        let (ea, eb) = (entry_at(a, t), entry_at(b, t));
        if ea.s != eb.s {
            return Ok(false);
        }
    }
    Ok(true)
}

fn lcm(a: usize, b: usize) -> usize {
    use num_integer::Integer;
    a.lcm(&b)
}

/// Verdict of a Rohlin-property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RohlinVerdict {
    /// The tail forces infinitely many nontrivial commutation scalars.
    Rohlin,
    /// Finite data cannot witness the property either way.
    NotDecidedFinite,
    /// Empirical profile decayed below the threshold.
    EvidenceFor { profiles: Vec<f64> },
    /// Empirical profile stayed at or above the threshold.
    EvidenceAgainst { profiles: Vec<f64> },
}

/// How to check the Rohlin property.
#[derive(Debug, Clone, Copy)]
pub enum RohlinMode {
    /// Decide from the invariant alone; requires prime-power blocks.
    Invariant,
    /// Measure Weyl-profile decay of cumulative spectra (commuting
    /// blocks only), starting at the 1-based block index `m`.
    Empirical {
        m: usize,
        lmax: usize,
        threshold: f64,
    },
}

impl Default for RohlinMode {
    fn default() -> Self {
        RohlinMode::Empirical {
            m: 1,
            lmax: 3,
            threshold: 0.1,
        }
    }
}

/// Rohlin-property check, per mode.
///
/// Invariant mode validates that every block dimension (explicit and
/// tail) is a prime power and answers `Rohlin` exactly when the tail is
/// periodic with some nonzero residue: that is the representable way to
/// guarantee infinitely many nontrivial scalars. Everything else is
/// `NotDecidedFinite` — a finite prefix can never witness the property.
pub fn rohlin_check(
    spec: &ProductActionSpec,
    mode: RohlinMode,
) -> Result<RohlinVerdict, ActionError> {
    match mode {
        RohlinMode::Invariant => {
            for b in &spec.blocks {
                if !is_prime_power(b.q) {
                    return Err(ActionError::ClassMismatch { q: b.q });
                }
            }
            if let TailSpec::Periodic { period } = &spec.tail {
                for e in period {
                    if !is_prime_power(e.q) {
                        return Err(ActionError::ClassMismatch { q: e.q });
                    }
                }
            }
            let inv = extract_invariant(spec)?;
            match &inv.tail {
                TailSpec::Periodic { period } if period.iter().any(|e| e.s != 0) => {
                    Ok(RohlinVerdict::Rohlin)
                }
                _ => Ok(RohlinVerdict::NotDecidedFinite),
            }
        }
        RohlinMode::Empirical { m, lmax, threshold } => {
            let inv = extract_invariant(spec)?;
            for e in &inv.explicit {
                if e.s != 0 {
                    return Err(ActionError::EmpiricalNeedsCommuting { q: e.q, s: e.s });
                }
            }
            if let TailSpec::Periodic { period } = &inv.tail {
                if let Some(e) = period.iter().find(|e| e.s != 0) {
                    return Err(ActionError::EmpiricalNeedsCommuting { q: e.q, s: e.s });
                }
            }
            let pairs = spec.block_pairs()?;
            let spectra = cumulative_spectra(&pairs, m)?;
            let profiles: Vec<f64> = spectra
                .iter()
                .map(|sp| weyl_profile(sp.sequence(), lmax))
                .collect();
            let last = *profiles.last().expect("at least one truncation");
            if last < threshold {
                Ok(RohlinVerdict::EvidenceFor { profiles })
            } else {
                Ok(RohlinVerdict::EvidenceAgainst { profiles })
            }
        }
    }
}

fn is_prime_power(q: usize) -> bool {
    if q < 2 {
        return false;
    }
    let factors = factorize(q);
    factors.len() == 1
}

/// Prime factorization by trial division: `map p -> exponent`.
fn factorize(mut q: usize) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    let mut p = 2usize;
    while p * p <= q {
        while q % p == 0 {
            *out.entry(p as u64).or_insert(0) += 1;
            q /= p;
        }
        p += 1;
    }
    if q > 1 {
        *out.entry(q as u64).or_insert(0) += 1;
    }
    out
}

/// Exponent of a prime in the ambient algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    Finite(u32),
    Infinite,
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(e) => s.serialize_u32(*e),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Beyond the explicit map, what the remaining primes contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SignatureTail {
    /// No primes beyond the explicit map.
    None,
    /// Every prime not in the explicit map carries this exponent.
    AllRemainingPrimes { exponent: u32 },
}

/// Supernatural-number signature of the ambient algebra: prime →
/// exponent, with a rule for the (possibly infinitely many) primes
/// outside the explicit map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraSignature {
    pub exponents: BTreeMap<u64, Exponent>,
    pub tail_rule: SignatureTail,
}

impl AlgebraSignature {
    /// Σ i_k = ∞: some exponent infinite, or infinitely many positive.
    pub fn is_infinite_dimensional(&self) -> bool {
        self.exponents
            .values()
            .any(|e| matches!(e, Exponent::Infinite))
            || matches!(
                self.tail_rule,
                SignatureTail::AllRemainingPrimes { exponent } if exponent >= 1
            )
    }
}

/// Signature of a spec's ambient algebra: explicit block dimensions
/// contribute finite exponents, periodic tail dimensions infinite ones.
pub fn algebra_signature(spec: &ProductActionSpec) -> AlgebraSignature {
    let mut exponents: BTreeMap<u64, Exponent> = BTreeMap::new();
    for b in &spec.blocks {
        for (p, e) in factorize(b.q) {
            let entry = exponents.entry(p).or_insert(Exponent::Finite(0));
            if let Exponent::Finite(total) = entry {
                *total += e;
            }
        }
    }
    if let TailSpec::Periodic { period } = &spec.tail {
        for e in period {
            for (p, _) in factorize(e.q) {
                exponents.insert(p, Exponent::Infinite);
            }
        }
    }
    AlgebraSignature {
        exponents,
        tail_rule: SignatureTail::None,
    }
}

/// Outer-conjugacy regime of product-type actions with the Rohlin
/// property on the given algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// Infinitely many primes with finite positive exponent: infinitely
    /// many outer conjugacy classes.
    ManyClasses,
    /// Finitely many such primes on an infinite-dimensional algebra:
    /// exactly one class.
    OneClass,
    /// Finite-dimensional algebra: no Rohlin actions at all.
    NoRohlin,
}

/// The regime trichotomy from the signature.
pub fn classify_regime(sig: &AlgebraSignature) -> Regime {
    let finite_positive_is_infinite = matches!(
        sig.tail_rule,
        SignatureTail::AllRemainingPrimes { exponent } if exponent >= 1
    );
    if finite_positive_is_infinite {
        return Regime::ManyClasses;
    }
    if sig.is_infinite_dimensional() {
        Regime::OneClass
    } else {
        Regime::NoRohlin
    }
}

/// The two product actions on `M_3 ⊗ M_{2^∞}` that share every block
/// except the first: generators on the `M_3` block in one, the identity
/// there in the other. They have equal invariants beyond that block, so
/// they are outer conjugate, while their spectral behavior differs.
pub fn clock_tail_fixture_pair() -> (ProductActionSpec, ProductActionSpec) {
    let two_power_blocks = |first: BlockSpec| {
        let mut blocks = vec![first];
        for k in 1..=3usize {
            let q = 1 << k;
            blocks.push(BlockSpec {
                q,
                u1: format!("Omega({q},1/{q})"),
                u2: format!("S({q})"),
            });
        }
        blocks
    };
    let tail = TailSpec::Periodic {
        period: vec![TailEntry { q: 2, s: 1 }],
    };
    let alpha = ProductActionSpec {
        blocks: two_power_blocks(BlockSpec {
            q: 3,
            u1: "Omega(3,1/3)".to_string(),
            u2: "S(3)".to_string(),
        }),
        tail: tail.clone(),
    };
    let beta = ProductActionSpec {
        blocks: two_power_blocks(BlockSpec {
            q: 3,
            u1: "diag(0,0,0)".to_string(),
            u2: "diag(0,0,0)".to_string(),
        }),
        tail,
    };
    (alpha, beta)
}
