//! Exact arithmetic in the ring of Eisenstein integers `Z[w]`, `w = exp(2*pi*i/3)`.
//!
//! Elements are stored as integer pairs `a + b*w` with `w^2 = -1 - w`. The ring
//! is Euclidean for the algebraic norm `N(a + b*w) = a^2 - a*b + b^2`, which is
//! also the squared complex magnitude, so nearest-point quantization onto the
//! hexagonal lattice doubles as Euclidean division.
//!
//! # Overview
//!
//! * [`EisensteinInt`] — checked ring arithmetic, conjugation, units.
//! * [`EisensteinInt::quantize`] — nearest lattice point to a complex number,
//!   with a deterministic lexicographic tie-break.
//! * [`EisensteinInt::divmod`] — exact Euclidean division (`N(r) < N(y)`),
//!   computed in rational arithmetic so it agrees with the quantizer even on
//!   Voronoi-cell boundaries.
//! * [`EisensteinInt::gcd`] / [`EisensteinInt::extended_gcd`] — Euclidean
//!   algorithm, result normalized to a canonical associate.
//! * [`factor`] — unit-times-prime-powers factorization with the primes
//!   classified into the three Eisenstein prime classes.
//!
//! # Example
//!
//! ```
//! use lnc_core::eisenstein::EisensteinInt;
//!
//! let x: EisensteinInt = "2+4w".parse().unwrap();
//! assert_eq!(x.norm(), 12);
//! let f = lnc_core::eisenstein::factor(x).unwrap();
//! assert_eq!(f.to_string(), "unit=1, (2)^1 [Type1], (1+2w)^1 [Type3]");
//! ```

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::Error;

/// Coefficients are kept within `±COEFF_BOUND` so that every norm, product and
/// exact division fits comfortably in `i128` intermediates. Operations that
/// would leave the range report [`Error::Overflow`] instead of wrapping.
pub const COEFF_BOUND: i64 = (1 << 31) - 1;

/// Largest norm accepted by [`factor`]; trial division beyond this is not
/// attempted.
pub const FACTOR_NORM_BOUND: i128 = 1_000_000;

/// An Eisenstein integer `a + b*w` with exact `i64` coefficients.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EisensteinInt {
    a: i64,
    b: i64,
}

pub const ZERO: EisensteinInt = EisensteinInt { a: 0, b: 0 };
pub const ONE: EisensteinInt = EisensteinInt { a: 1, b: 0 };
/// The generator `w` itself.
pub const OMEGA: EisensteinInt = EisensteinInt { a: 0, b: 1 };

impl EisensteinInt {
    /// Constructs `a + b*w`, panicking if a coefficient exceeds [`COEFF_BOUND`].
    ///
    /// Use [`EisensteinInt::try_new`] when the inputs are not known to be small.
    pub fn new(a: i64, b: i64) -> Self {
        Self::try_new(a, b).expect("Eisenstein coefficient out of declared range")
    }

    /// Fallible constructor: errors with [`Error::Overflow`] outside the
    /// declared coefficient range.
    pub fn try_new(a: i64, b: i64) -> Result<Self, Error> {
        if a.abs() > COEFF_BOUND || b.abs() > COEFF_BOUND {
            return Err(Error::Overflow);
        }
        Ok(Self { a, b })
    }

    /// Coefficient of `1`.
    pub fn a(self) -> i64 {
        self.a
    }

    /// Coefficient of `w`.
    pub fn b(self) -> i64 {
        self.b
    }

    pub fn is_zero(self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// Algebraic norm `a^2 - a*b + b^2`; equals `|x|^2` in the complex plane.
    /// Multiplicative: `N(x*y) = N(x)*N(y)`.
    pub fn norm(self) -> i128 {
        let a = self.a as i128;
        let b = self.b as i128;
        a * a - a * b + b * b
    }

    /// Ring conjugate (complex conjugate): `conj(a + b*w) = (a - b) - b*w`.
    pub fn conj(self) -> Self {
        Self {
            a: self.a - self.b,
            b: -self.b,
        }
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, Error> {
        Self::try_new(
            self.a.checked_add(rhs.a).ok_or(Error::Overflow)?,
            self.b.checked_add(rhs.b).ok_or(Error::Overflow)?,
        )
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, Error> {
        Self::try_new(
            self.a.checked_sub(rhs.a).ok_or(Error::Overflow)?,
            self.b.checked_sub(rhs.b).ok_or(Error::Overflow)?,
        )
    }

    /// `(a1 + b1 w)(a2 + b2 w) = (a1 a2 - b1 b2) + (a1 b2 + b1 a2 - b1 b2) w`,
    /// using `w^2 = -1 - w`.
    pub fn checked_mul(self, rhs: Self) -> Result<Self, Error> {
        let a1 = self.a as i128;
        let b1 = self.b as i128;
        let a2 = rhs.a as i128;
        let b2 = rhs.b as i128;
        let a = a1 * a2 - b1 * b2;
        let b = a1 * b2 + b1 * a2 - b1 * b2;
        let bound = COEFF_BOUND as i128;
        if a.abs() > bound || b.abs() > bound {
            return Err(Error::Overflow);
        }
        Ok(Self {
            a: a as i64,
            b: b as i64,
        })
    }

    /// True when `N(x) = 1`, i.e. `x` is one of the six [`units`].
    pub fn is_unit(self) -> bool {
        self.norm() == 1
    }

    /// Multiplicative inverse of a unit (`x * x.unit_inverse() == 1`).
    pub fn unit_inverse(self) -> Result<Self, Error> {
        if !self.is_unit() {
            return Err(Error::NotAUnit);
        }
        // For units, conj(x) * x = N(x) = 1.
        Ok(self.conj())
    }

    /// Complex embedding with `w = -1/2 + i*sqrt(3)/2`.
    pub fn to_complex(self) -> Complex64 {
        let a = self.a as f64;
        let b = self.b as f64;
        Complex64::new(a - 0.5 * b, b * SQRT3_OVER_2)
    }

    /// Nearest Eisenstein integer to `c` in Euclidean distance.
    ///
    /// The point is found by rounding the `(1, w)`-basis coordinates of `c`
    /// both ways and comparing the four candidate corners; on exact ties the
    /// lexicographically smallest `(a, b)` pair wins, so results are
    /// deterministic on Voronoi-cell boundaries.
    pub fn quantize(c: Complex64) -> Result<Self, Error> {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite);
        }
        // (1, w) basis coordinates: c = x*1 + y*w.
        let y = c.im / SQRT3_OVER_2;
        let x = c.re + 0.5 * y;
        let limit = COEFF_BOUND as f64;
        if x.abs() >= limit || y.abs() >= limit {
            return Err(Error::Overflow);
        }
        let fx = x.floor() as i64;
        let fy = y.floor() as i64;
        let mut best: Option<(f64, i64, i64)> = None;
        for da in 0..=1 {
            for db in 0..=1 {
                let (ca, cb) = (fx + da, fy + db);
                let cand = Self { a: ca, b: cb };
                let d = (c - cand.to_complex()).norm_sqr();
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => d < bd || (d == bd && (ca, cb) < (ba, bb)),
                };
                if better {
                    best = Some((d, ca, cb));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        Self::try_new(a, b)
    }

    /// Euclidean division: `self = q*y + r` with `N(r) < N(y)`.
    ///
    /// The quotient is the quantization of the exact ratio `self/y`, computed
    /// in integer rational arithmetic (numerator `self * conj(y)`, denominator
    /// `N(y)`), with the same candidate set and lexicographic tie-break as
    /// [`EisensteinInt::quantize`]. The remainder therefore satisfies
    /// `N(r) <= N(y)/3`.
    pub fn divmod(self, y: Self) -> Result<(Self, Self), Error> {
        if y.is_zero() {
            return Err(Error::DivisionByZero);
        }
        // self * conj(y) in i128 components.
        let (xa, xb) = (self.a as i128, self.b as i128);
        let (ya, yb) = (y.a as i128, y.b as i128);
        let num_a = xa * (ya - yb) + xb * yb;
        let num_b = xb * ya - xa * yb;
        let n = y.norm();
        let fa = num_a.div_euclid(n);
        let fb = num_b.div_euclid(n);
        let mut best: Option<(i128, i128, i128)> = None;
        for da in 0..=1i128 {
            for db in 0..=1i128 {
                let (ca, cb) = (fa + da, fb + db);
                // Squared distance from the exact ratio, scaled by n^2:
                // N(num - n*cand).
                let ra = num_a - n * ca;
                let rb = num_b - n * cb;
                let d = ra * ra - ra * rb + rb * rb;
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => d < bd || (d == bd && (ca, cb) < (ba, bb)),
                };
                if better {
                    best = Some((d, ca, cb));
                }
            }
        }
        let (_, qa, qb) = best.unwrap();
        if qa.abs() > COEFF_BOUND as i128 || qb.abs() > COEFF_BOUND as i128 {
            return Err(Error::Overflow);
        }
        let q = Self {
            a: qa as i64,
            b: qb as i64,
        };
        let r = self.checked_sub(q.checked_mul(y)?)?;
        debug_assert!(r.norm() * 3 <= y.norm());
        Ok((q, r))
    }

    /// True when `y` divides `self` exactly.
    pub fn divisible_by(self, y: Self) -> Result<bool, Error> {
        Ok(self.divmod(y)?.1.is_zero())
    }

    /// Exact quotient `self / y`; errors if `y` does not divide `self`.
    pub fn exact_div(self, y: Self) -> Result<Self, Error> {
        let (q, r) = self.divmod(y)?;
        if r.is_zero() {
            Ok(q)
        } else {
            Err(Error::InexactDivision)
        }
    }

    /// Greatest common divisor via the Euclidean algorithm, returned as the
    /// canonical associate ([`EisensteinInt::canonical_associate`]).
    /// `gcd(0, 0) = 0`.
    pub fn gcd(self, other: Self) -> Result<Self, Error> {
        let (mut x, mut y) = (self, other);
        while !y.is_zero() {
            let (_, r) = x.divmod(y)?;
            x = y;
            y = r;
        }
        Ok(x.canonical_associate().0)
    }

    /// Extended Euclidean algorithm: returns `(g, s, t)` with
    /// `s*self + t*other = g` and `g` the canonical-associate gcd.
    pub fn extended_gcd(self, other: Self) -> Result<(Self, Self, Self), Error> {
        let (mut r0, mut r1) = (self, other);
        let (mut s0, mut s1) = (ONE, ZERO);
        let (mut t0, mut t1) = (ZERO, ONE);
        while !r1.is_zero() {
            let (q, r) = r0.divmod(r1)?;
            r0 = r1;
            r1 = r;
            let s2 = s0.checked_sub(q.checked_mul(s1)?)?;
            s0 = s1;
            s1 = s2;
            let t2 = t0.checked_sub(q.checked_mul(t1)?)?;
            t0 = t1;
            t1 = t2;
        }
        let (g, u) = r0.canonical_associate();
        Ok((g, s0.checked_mul(u)?, t0.checked_mul(u)?))
    }

    /// Canonical representative among the six associates `x * unit`, together
    /// with the unit that maps `x` onto it.
    ///
    /// The representative is the lexicographically smallest `(a, b)` among the
    /// associates in the half-open sector `a > 0, b >= 0` (exactly two
    /// associates of any nonzero element land there). Under this rule rational
    /// primes normalize to themselves and the ramified prime class normalizes
    /// to `1+2w`.
    pub fn canonical_associate(self) -> (Self, Self) {
        if self.is_zero() {
            return (self, ONE);
        }
        let mut best: Option<(Self, Self)> = None;
        for u in units() {
            let cand = self.checked_mul(u).expect("associate within range");
            if cand.a > 0 && cand.b >= 0 {
                let better = match best {
                    None => true,
                    Some((c, _)) => (cand.a, cand.b) < (c.a, c.b),
                };
                if better {
                    best = Some((cand, u));
                }
            }
        }
        best.expect("every nonzero element has an associate with a > 0, b >= 0")
    }

    /// Sort key `(norm, a, b)`; used wherever a deterministic element order is
    /// required.
    pub fn norm_lex_key(self) -> (i128, i64, i64) {
        (self.norm(), self.a, self.b)
    }
}

/// `sqrt(3)/2`, the imaginary part of `w`.
pub const SQRT3_OVER_2: f64 = 0.8660254037844386;

/// The six units of `Z[w]`: `±1, ±w, ±(1+w)`.
pub fn units() -> [EisensteinInt; 6] {
    [
        EisensteinInt { a: 1, b: 0 },
        EisensteinInt { a: -1, b: 0 },
        EisensteinInt { a: 0, b: 1 },
        EisensteinInt { a: 0, b: -1 },
        EisensteinInt { a: 1, b: 1 },
        EisensteinInt { a: -1, b: -1 },
    ]
}

// --- operator sugar -------------------------------------------------------
//
// The operators panic on overflow (with a clear message) rather than wrap;
// range-aware callers should use the checked_* methods.

impl std::ops::Add for EisensteinInt {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(rhs).expect("Eisenstein addition overflow")
    }
}

impl std::ops::Sub for EisensteinInt {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(rhs)
            .expect("Eisenstein subtraction overflow")
    }
}

impl std::ops::Mul for EisensteinInt {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.checked_mul(rhs)
            .expect("Eisenstein multiplication overflow")
    }
}

impl std::ops::Neg for EisensteinInt {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
        }
    }
}

// --- textual form ----------------------------------------------------------

impl fmt::Display for EisensteinInt {
    /// Renders the `a+bw` form used across configs and the CLI: `0`, `3`,
    /// `-2`, `w`, `-w`, `2+4w`, `1-2w`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_text(f)
    }
}

impl EisensteinInt {
    fn write_text(self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (a, 0) => write!(f, "{a}"),
            (0, 1) => write!(f, "w"),
            (0, -1) => write!(f, "-w"),
            (0, b) => write!(f, "{b}w"),
            (a, 1) => write!(f, "{a}+w"),
            (a, -1) => write!(f, "{a}-w"),
            (a, b) if b > 0 => write!(f, "{a}+{b}w"),
            (a, b) => write!(f, "{a}-{}w", -(b as i128)),
        }
    }
}

impl fmt::Debug for EisensteinInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_text(f)
    }
}

impl FromStr for EisensteinInt {
    type Err = Error;

    /// Parses the `a+bw` textual form. Whitespace around terms is tolerated;
    /// `w`, `-w`, `4w`, `2+4w`, `1-2w`, `-3` are all accepted.
    fn from_str(s: &str) -> Result<Self, Error> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse(format!("empty Eisenstein literal {s:?}")));
        }
        // Split into at most two signed terms.
        let bytes = compact.as_bytes();
        let mut split = None;
        for (i, &c) in bytes.iter().enumerate().skip(1) {
            if (c == b'+' || c == b'-') && bytes[i - 1] != b'+' && bytes[i - 1] != b'-' {
                split = Some(i);
                break;
            }
        }
        let (first, second) = match split {
            Some(i) => (&compact[..i], Some(&compact[i..])),
            None => (&compact[..], None),
        };
        let parse_term = |t: &str| -> Result<(i64, bool), Error> {
            // Returns (coefficient, is_omega_term).
            let (body, is_w) = match t.strip_suffix('w') {
                Some(rest) => (rest, true),
                None => (t, false),
            };
            let coeff = match body {
                "" | "+" if is_w => 1,
                "-" if is_w => -1,
                _ => body
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("bad Eisenstein literal {s:?}")))?,
            };
            Ok((coeff, is_w))
        };
        let (c1, w1) = parse_term(first)?;
        let (mut a, mut b) = (0i64, 0i64);
        if w1 {
            b = c1;
        } else {
            a = c1;
        }
        if let Some(t) = second {
            let (c2, w2) = parse_term(t)?;
            if w2 == w1 {
                return Err(Error::Parse(format!("bad Eisenstein literal {s:?}")));
            }
            if w2 {
                b = c2;
            } else {
                a = c2;
            }
        }
        Self::try_new(a, b)
    }
}

// --- factorization ----------------------------------------------------------

/// The three classes of Eisenstein primes.
///
/// * `Type1` — rational primes `p ≡ 2 (mod 3)` (including 2), which stay prime
///   in `Z[w]` and have norm `p^2`.
/// * `Type2` — complex primes whose norm is a rational prime `≡ 1 (mod 6)`;
///   these occur in conjugate pairs `a+bw`, `b+aw`.
/// * `Type3` — the associates of `1+2w`, the ramified divisor of 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimeClass {
    Type1,
    Type2,
    Type3,
}

impl fmt::Display for PrimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimeClass::Type1 => write!(f, "Type1"),
            PrimeClass::Type2 => write!(f, "Type2"),
            PrimeClass::Type3 => write!(f, "Type3"),
        }
    }
}

/// One prime-power factor: canonical prime, exponent, class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimePower {
    pub prime: EisensteinInt,
    pub exponent: u32,
    pub class: PrimeClass,
}

/// `unit * prod(prime^exponent)` decomposition of a nonzero element.
///
/// Primes are canonical associates, listed by ascending rational prime (the
/// trial-division order), with conjugate pairs ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub unit: EisensteinInt,
    pub factors: Vec<PrimePower>,
}

impl Factorization {
    /// Multiplies the factorization back together.
    pub fn reconstruct(&self) -> Result<EisensteinInt, Error> {
        let mut acc = self.unit;
        for f in &self.factors {
            for _ in 0..f.exponent {
                acc = acc.checked_mul(f.prime)?;
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit={}", self.unit)?;
        for p in &self.factors {
            write!(f, ", ({})^{} [{}]", p.prime, p.exponent, p.class)?;
        }
        Ok(())
    }
}

/// Factors `x` into a unit times canonical prime powers by trial division
/// over the rational primes dividing `N(x)`.
///
/// Errors: [`Error::ZeroFactor`] for `x = 0`; [`Error::NormOutOfRange`] when
/// `N(x)` exceeds [`FACTOR_NORM_BOUND`].
pub fn factor(x: EisensteinInt) -> Result<Factorization, Error> {
    if x.is_zero() {
        return Err(Error::ZeroFactor);
    }
    if x.norm() > FACTOR_NORM_BOUND {
        return Err(Error::NormOutOfRange(x.norm()));
    }
    let mut rem = x;
    let mut factors: Vec<PrimePower> = Vec::new();
    let mut n = x.norm() as u64;
    let mut p: u64 = 2;
    while p * p <= n || (n > 1 && p <= n) {
        if n % p != 0 {
            p += 1;
            continue;
        }
        while n % p == 0 {
            n /= p;
        }
        let candidates: Vec<(EisensteinInt, PrimeClass)> = if p == 3 {
            vec![(EisensteinInt::new(1, 2), PrimeClass::Type3)]
        } else if p % 3 == 2 {
            vec![(EisensteinInt::new(p as i64, 0), PrimeClass::Type1)]
        } else {
            // p = 1 (mod 3): split prime; find a norm-p element by solving
            // a^2 - a*b + b^2 = p over a small search range.
            let (t1, t2) = split_prime(p)?;
            let mut pair = [t1, t2];
            pair.sort_by_key(|e| (e.a, e.b));
            vec![(pair[0], PrimeClass::Type2), (pair[1], PrimeClass::Type2)]
        };
        for (prime, class) in candidates {
            let mut exponent = 0;
            loop {
                let (q, r) = rem.divmod(prime)?;
                if r.is_zero() {
                    rem = q;
                    exponent += 1;
                } else {
                    break;
                }
            }
            if exponent > 0 {
                factors.push(PrimePower {
                    prime,
                    exponent,
                    class,
                });
            }
        }
        p += 1;
    }
    if !rem.is_unit() {
        // Cannot happen when trial division covered every prime of the norm.
        return Err(Error::Internal("factorization left a non-unit remainder"));
    }
    Ok(Factorization { unit: rem, factors })
}

/// Finds the canonical conjugate pair of norm-`p` primes for `p ≡ 1 (mod 3)`.
fn split_prime(p: u64) -> Result<(EisensteinInt, EisensteinInt), Error> {
    let p_i = p as i128;
    let mut a: i128 = 1;
    while 3 * a * a <= 4 * p_i {
        // Solve b^2 - a*b + (a^2 - p) = 0: discriminant 4p - 3a^2.
        let disc = 4 * p_i - 3 * a * a;
        let s = (disc as f64).sqrt() as i128;
        for root in [s - 1, s, s + 1] {
            if root >= 0 && root * root == disc && (a + root) % 2 == 0 {
                let b = (a + root) / 2;
                let t = EisensteinInt::new(a as i64, b as i64);
                debug_assert_eq!(t.norm(), p_i);
                let t1 = t.canonical_associate().0;
                let t2 = EisensteinInt::new(t.b, t.a).canonical_associate().0;
                return Ok((t1, t2));
            }
        }
        a += 1;
    }
    Err(Error::Internal("no norm-p representation for a 1 mod 3 prime"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(a: i64, b: i64) -> EisensteinInt {
        EisensteinInt::new(a, b)
    }

    #[test]
    fn norm_and_units() {
        assert_eq!(e(2, 4).norm(), 12);
        assert_eq!(e(1, 2).norm(), 3);
        for u in units() {
            assert!(u.is_unit());
            assert_eq!(u * u.unit_inverse().unwrap(), ONE);
        }
    }

    #[test]
    fn omega_squared_identity() {
        // w^2 = -1 - w
        assert_eq!(OMEGA * OMEGA, e(-1, -1));
    }

    #[test]
    fn display_parse_roundtrip() {
        for s in ["0", "3", "-2", "w", "-w", "2+4w", "1-2w", "-1+w", "5-7w"] {
            let x: EisensteinInt = s.parse().unwrap();
            assert_eq!(x.to_string(), s);
        }
        assert_eq!("  2 + 4w ".parse::<EisensteinInt>().unwrap(), e(2, 4));
        assert_eq!("1w".parse::<EisensteinInt>().unwrap(), OMEGA);
        assert_eq!("4w+2".parse::<EisensteinInt>().unwrap(), e(2, 4));
        assert!("2+4".parse::<EisensteinInt>().is_err());
        assert!("".parse::<EisensteinInt>().is_err());
    }

    #[test]
    fn divmod_half_tie_breaks_low() {
        // 5/2 sits exactly between 2 and 3; lexicographic tie-break picks 2.
        let (q, r) = e(5, 0).divmod(e(2, 0)).unwrap();
        assert_eq!(q, e(2, 0));
        assert_eq!(r, e(1, 0));
    }

    #[test]
    fn quantize_matches_divmod_on_midpoint() {
        let q = EisensteinInt::quantize(Complex64::new(0.5, 0.0)).unwrap();
        assert_eq!(q, ZERO);
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(e(2, 4).gcd(e(2, 0)).unwrap(), e(2, 0));
        assert_eq!(e(2, 0).gcd(e(1, 2)).unwrap(), ONE);
        assert_eq!(ZERO.gcd(ZERO).unwrap(), ZERO);
        // gcd(x, 0) is the canonical associate of x.
        assert_eq!(e(-1, -2).gcd(ZERO).unwrap(), e(1, 2));
    }

    #[test]
    fn factor_examples() {
        let f = factor(e(2, 4)).unwrap();
        assert_eq!(f.unit, ONE);
        assert_eq!(f.factors.len(), 2);
        assert_eq!(f.factors[0].prime, e(2, 0));
        assert_eq!(f.factors[0].class, PrimeClass::Type1);
        assert_eq!(f.factors[1].prime, e(1, 2));
        assert_eq!(f.factors[1].class, PrimeClass::Type3);
        assert_eq!(f.reconstruct().unwrap(), e(2, 4));

        let f7 = factor(e(7, 0)).unwrap();
        assert_eq!(f7.factors.len(), 2);
        for p in &f7.factors {
            assert_eq!(p.class, PrimeClass::Type2);
            assert_eq!(p.prime.norm(), 7);
        }
        assert_eq!(f7.reconstruct().unwrap(), e(7, 0));

        assert!(matches!(factor(ZERO), Err(Error::ZeroFactor)));
    }

    #[test]
    fn canonical_associate_is_stable() {
        // The canonical representative of the ramified class is 1+2w itself.
        for u in units() {
            let x = e(1, 2) * u;
            assert_eq!(x.canonical_associate().0, e(1, 2));
        }
        // Rational primes normalize to themselves.
        assert_eq!(e(-2, 0).canonical_associate().0, e(2, 0));
        assert_eq!(e(0, 2).canonical_associate().0, e(2, 0));
    }
}
