//! Generator matrices and the matrix-expression language.
//!
//! The concrete syntax mirrors how the generators are written on paper:
//!
//! ```text
//! S(4)                    cyclic shift on C^4
//! Omega(8,1/8)            diag(1, λ, ..., λ^7) with λ = exp(2πi/8)
//! diag(0,1/4,1/2)         diagonal of phases, angles in turns
//! kron(a,b)  dsum(a,b)    tensor product / direct sum
//! a*b  a^3  phase(1/3)*a  product, power, scalar phase
//! [[1,0],[0,-1]]          literal matrix, entries like 0.5-0.25i
//! ```
//!
//! Angles are always written in turns (fractions of a full circle), as
//! rationals `s/q` or decimals. Parse errors carry the byte offset of
//! the offending token.

use crate::linalg::{ComplexMatrix, UnitaryMatrix};
use num_complex::Complex64;
use num_integer::Integer;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("dimension mismatch in {op}: {left}x{left} vs {right}x{right}")]
    DimensionMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },
    #[error("literal matrix is not square ({rows} rows, row {bad_row} has {bad_len} entries)")]
    NonSquareGenerator {
        rows: usize,
        bad_row: usize,
        bad_len: usize,
    },
    #[error("generator size must be positive")]
    ZeroSize,
}

/// Reduced rational angle in turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalTurns {
    pub num: i64,
    pub den: i64,
}

impl RationalTurns {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = num.abs().gcd(&den);
        if g > 1 {
            num /= g;
            den /= g;
        }
        RationalTurns { num, den }
    }

    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * self.num as f64 / self.den as f64)
    }

    /// `exp(2πi · self · j)` with the angle reduced mod 1 before any
    /// trigonometry, so high powers of roots of unity stay clean.
    pub fn phase_pow(&self, j: i64) -> Complex64 {
        let num = (self.num as i128 * j as i128).rem_euclid(self.den as i128);
        Complex64::from_polar(
            1.0,
            std::f64::consts::TAU * num as f64 / self.den as f64,
        )
    }
}

impl fmt::Display for RationalTurns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Syntax tree of the matrix expression language.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixExpr {
    Shift(usize),
    Clock { n: usize, exponent: RationalTurns },
    Diag(Vec<f64>),
    Kron(Box<MatrixExpr>, Box<MatrixExpr>),
    Dsum(Box<MatrixExpr>, Box<MatrixExpr>),
    Mul(Box<MatrixExpr>, Box<MatrixExpr>),
    Pow(Box<MatrixExpr>, u32),
    Scal(f64, Box<MatrixExpr>),
    Literal(Vec<Vec<Complex64>>),
}

/// The cyclic shift `S(n)`: maps basis vector `e_i` to `e_{i+1 mod n}`.
pub fn shift_matrix(n: usize) -> UnitaryMatrix {
    assert!(n > 0);
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[((i + 1) % n, i)] = Complex64::new(1.0, 0.0);
    }
    UnitaryMatrix::try_new(m).expect("permutation matrix is unitary")
}

/// The clock matrix `Ω(n,λ) = diag(1, λ, ..., λ^{n-1})` for a unit scalar λ.
pub fn clock_matrix(n: usize, lambda: Complex64) -> UnitaryMatrix {
    assert!(n > 0);
    let mut m = ComplexMatrix::zeros(n, n);
    let mut pow = Complex64::new(1.0, 0.0);
    for i in 0..n {
        m[(i, i)] = pow;
        pow *= lambda;
    }
    UnitaryMatrix::try_new(m).expect("diagonal of unit scalars is unitary")
}

/// `Ω(n, exp(2πi s/q))` with angles reduced exactly mod 1 at each power.
pub fn clock_matrix_turns(n: usize, s: i64, q: i64) -> UnitaryMatrix {
    assert!(n > 0);
    let r = RationalTurns::new(s, q);
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = r.phase_pow(i as i64);
    }
    UnitaryMatrix::try_new(m).expect("diagonal of unit scalars is unitary")
}

/// Kronecker product with the row-major index convention
/// `(a ⊗ b)[(i1*rb+i2, j1*cb+j2)] = a[(i1,j1)] b[(i2,j2)]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Direct sum: block diagonal of `a` and `b`.
pub fn dsum(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut m = ComplexMatrix::zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

/// Evaluates an expression tree to a dense matrix.
pub fn eval_expr(e: &MatrixExpr) -> Result<ComplexMatrix, ExprError> {
    match e {
        MatrixExpr::Shift(n) => {
            if *n == 0 {
                return Err(ExprError::ZeroSize);
            }
            Ok(shift_matrix(*n).into_matrix())
        }
        MatrixExpr::Clock { n, exponent } => {
            if *n == 0 {
                return Err(ExprError::ZeroSize);
            }
            Ok(clock_matrix_turns(*n, exponent.num, exponent.den).into_matrix())
        }
        MatrixExpr::Diag(turns) => {
            if turns.is_empty() {
                return Err(ExprError::ZeroSize);
            }
            let mut m = ComplexMatrix::zeros(turns.len(), turns.len());
            for (i, &t) in turns.iter().enumerate() {
                m[(i, i)] = crate::linalg::unit_phase(t);
            }
            Ok(m)
        }
        MatrixExpr::Kron(a, b) => Ok(kron(&eval_expr(a)?, &eval_expr(b)?)),
        MatrixExpr::Dsum(a, b) => Ok(dsum(&eval_expr(a)?, &eval_expr(b)?)),
        MatrixExpr::Mul(a, b) => {
            let (ma, mb) = (eval_expr(a)?, eval_expr(b)?);
            if ma.ncols() != mb.nrows() {
                return Err(ExprError::DimensionMismatch {
                    op: "mul",
                    left: ma.ncols(),
                    right: mb.nrows(),
                });
            }
            Ok(ma * mb)
        }
        MatrixExpr::Pow(a, k) => {
            let m = eval_expr(a)?;
            let n = m.nrows();
            let mut acc = ComplexMatrix::identity(n, n);
            for _ in 0..*k {
                acc = acc * &m;
            }
            Ok(acc)
        }
        MatrixExpr::Scal(turns, a) => {
            let phase = crate::linalg::unit_phase(*turns);
            Ok(eval_expr(a)?.map(|z| z * phase))
        }
        MatrixExpr::Literal(rows) => {
            let n = rows.len();
            if n == 0 {
                return Err(ExprError::ZeroSize);
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(ExprError::NonSquareGenerator {
                        rows: n,
                        bad_row: i,
                        bad_len: row.len(),
                    });
                }
            }
            Ok(ComplexMatrix::from_fn(n, n, |i, j| rows[i][j]))
        }
    }
}

impl FromStr for MatrixExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser::new(s);
        let e = p.parse_term()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }
}

impl fmt::Display for MatrixExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixExpr::Shift(n) => write!(f, "S({n})"),
            MatrixExpr::Clock { n, exponent } => write!(f, "Omega({n},{exponent})"),
            MatrixExpr::Diag(turns) => {
                write!(f, "diag(")?;
                for (i, t) in turns.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            MatrixExpr::Kron(a, b) => write!(f, "kron({a},{b})"),
            MatrixExpr::Dsum(a, b) => write!(f, "dsum({a},{b})"),
            MatrixExpr::Mul(a, b) => write!(f, "{a}*{b}"),
            MatrixExpr::Pow(a, k) => match **a {
                MatrixExpr::Mul(..) | MatrixExpr::Scal(..) | MatrixExpr::Pow(..) => {
                    write!(f, "({a})^{k}")
                }
                _ => write!(f, "{a}^{k}"),
            },
            MatrixExpr::Scal(t, a) => write!(f, "phase({t})*{a}"),
            MatrixExpr::Literal(rows) => {
                write!(f, "[")?;
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "[")?;
                    for (j, z) in row.iter().enumerate() {
                        if j > 0 {
                            write!(f, ",")?;
                        }
                        write_complex(f, *z)?;
                    }
                    write!(f, "]")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn write_complex(f: &mut fmt::Formatter<'_>, z: Complex64) -> fmt::Result {
    if z.im == 0.0 {
        write!(f, "{}", z.re)
    } else if z.re == 0.0 {
        write!(f, "{}i", z.im)
    } else if z.im < 0.0 {
        write!(f, "{}{}i", z.re, z.im)
    } else {
        write!(f, "{}+{}i", z.re, z.im)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Parser {
            bytes: s.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn parse_term(&mut self) -> Result<MatrixExpr, ExprError> {
        let mut e = self.parse_factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let rhs = self.parse_factor()?;
            e = MatrixExpr::Mul(Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn parse_factor(&mut self) -> Result<MatrixExpr, ExprError> {
        let e = self.parse_primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.parse_uint()?;
            return Ok(MatrixExpr::Pow(Box::new(e), k as u32));
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<MatrixExpr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_term()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'[') => self.parse_literal(),
            Some(c) if c.is_ascii_alphabetic() => {
                let ident = self.parse_ident();
                match ident.as_str() {
                    "S" => {
                        self.expect(b'(')?;
                        let n = self.parse_uint()?;
                        self.expect(b')')?;
                        Ok(MatrixExpr::Shift(n as usize))
                    }
                    "Omega" => {
                        self.expect(b'(')?;
                        let n = self.parse_uint()?;
                        self.expect(b',')?;
                        let (num, den) = self.parse_rational()?;
                        self.expect(b')')?;
                        Ok(MatrixExpr::Clock {
                            n: n as usize,
                            exponent: RationalTurns::new(num, den),
                        })
                    }
                    "diag" => {
                        self.expect(b'(')?;
                        let mut turns = vec![self.parse_angle()?];
                        while self.peek() == Some(b',') {
                            self.pos += 1;
                            turns.push(self.parse_angle()?);
                        }
                        self.expect(b')')?;
                        Ok(MatrixExpr::Diag(turns))
                    }
                    "kron" | "dsum" => {
                        self.expect(b'(')?;
                        let a = self.parse_term()?;
                        self.expect(b',')?;
                        let b = self.parse_term()?;
                        self.expect(b')')?;
                        if ident == "kron" {
                            Ok(MatrixExpr::Kron(Box::new(a), Box::new(b)))
                        } else {
                            Ok(MatrixExpr::Dsum(Box::new(a), Box::new(b)))
                        }
                    }
                    "phase" => {
                        self.expect(b'(')?;
                        let t = self.parse_angle()?;
                        self.expect(b')')?;
                        self.expect(b'*')?;
                        let a = self.parse_factor()?;
                        Ok(MatrixExpr::Scal(t, Box::new(a)))
                    }
                    other => Err(self.err(&format!("unknown generator '{other}'"))),
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    fn parse_ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn parse_uint(&mut self) -> Result<u64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn parse_number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.bytes.get(self.pos) == Some(&b'-') || self.bytes.get(self.pos) == Some(&b'+') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if digits_start == self.pos {
            self.pos = start;
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("malformed number"))
    }

    /// `s/q` as an exact rational, or a plain integer as `s/1`.
    fn parse_rational(&mut self) -> Result<(i64, i64), ExprError> {
        self.skip_ws();
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let num = self.parse_uint()? as i64;
        let num = if neg { -num } else { num };
        if self.peek() == Some(b'/') {
            self.pos += 1;
            let den = self.parse_uint()? as i64;
            if den == 0 {
                return Err(self.err("zero denominator"));
            }
            Ok((num, den))
        } else {
            Ok((num, 1))
        }
    }

    /// Angle in turns: rational `s/q` or decimal.
    fn parse_angle(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let save = self.pos;
        // Try rational first so `1/4` stays exact as a ratio.
        if let Ok((num, den)) = self.parse_rational() {
            let at_slashless_decimal = self.bytes.get(self.pos) == Some(&b'.');
            if !at_slashless_decimal {
                return Ok(num as f64 / den as f64);
            }
            self.pos = save;
        }
        self.pos = save;
        self.parse_number()
    }

    fn parse_literal(&mut self) -> Result<MatrixExpr, ExprError> {
        self.expect(b'[')?;
        let mut rows = Vec::new();
        loop {
            self.expect(b'[')?;
            let mut row = vec![self.parse_complex()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                row.push(self.parse_complex()?);
            }
            self.expect(b']')?;
            rows.push(row);
            if self.peek() == Some(b',') {
                self.pos += 1;
                continue;
            }
            break;
        }
        self.expect(b']')?;
        Ok(MatrixExpr::Literal(rows))
    }

    /// Complex scalar: `a`, `bi`, `a+bi`, `a-bi`; also bare `i`/`-i`.
    fn parse_complex(&mut self) -> Result<Complex64, ExprError> {
        self.skip_ws();
        if self.peek() == Some(b'i') {
            self.pos += 1;
            return Ok(Complex64::new(0.0, 1.0));
        }
        if self.peek() == Some(b'-') && self.bytes.get(self.pos + 1) == Some(&b'i') {
            self.pos += 2;
            return Ok(Complex64::new(0.0, -1.0));
        }
        let first = self.parse_number()?;
        if self.bytes.get(self.pos) == Some(&b'i') {
            self.pos += 1;
            return Ok(Complex64::new(0.0, first));
        }
        match self.bytes.get(self.pos) {
            Some(&b'+') | Some(&b'-') => {
                let save = self.pos;
                let second = self.parse_number()?;
                if self.bytes.get(self.pos) == Some(&b'i') {
                    self.pos += 1;
                    Ok(Complex64::new(first, second))
                } else {
                    self.pos = save;
                    Ok(Complex64::new(first, 0.0))
                }
            }
            _ => Ok(Complex64::new(first, 0.0)),
        }
    }
}
