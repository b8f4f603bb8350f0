//! c-semiring grades and the four standard instances.
//!
//! A c-semiring `<A, +, x, 0, 1>` has an idempotent, commutative,
//! associative `+` with unit `0` and absorbing element `1`, and a
//! commutative, associative `x` distributing over `+` with unit `1` and
//! absorbing element `0`. The induced order is `a <= b iff a + b = b`
//! ("b is at least as good as a"); `+` is the least upper bound, `0` the
//! minimum and `1` the maximum.
//!
//! All arithmetic is exact: fuzzy, weighted and probabilistic grades are
//! arbitrary-precision rationals, and the weighted infinity is a
//! distinguished symbol rather than a float.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

/// The four supported c-semiring instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemiringKind {
    /// `<{false,true}, or, and, false, true>`
    Boolean,
    /// `<[0,1], max, min, 0, 1>`
    Fuzzy,
    /// `<Q>=0 + {inf}, min, +, inf, 0>`
    Weighted,
    /// `<[0,1], max, *, 0, 1>`
    Probabilistic,
}

/// A weighted grade: a nonnegative rational cost or infinity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weight {
    Finite(BigRational),
    Infinite,
}

/// A grade in one of the four instances.
///
/// The derived `Ord` is a canonical structural order used for stable set
/// layouts; the semiring order is [`SemiringKind::leq`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Bool(bool),
    Fuzzy(BigRational),
    Weighted(Weight),
    Prob(BigRational),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemiringError {
    #[error("unknown semiring {0:?} (expected boolean, fuzzy, weighted or probabilistic)")]
    UnknownKind(String),
    #[error("grade {grade} does not belong to the {kind} semiring")]
    WrongInstance { kind: SemiringKind, grade: String },
    #[error("grade {grade} is outside the {kind} carrier")]
    OutOfRange { kind: SemiringKind, grade: String },
    #[error("cannot parse {text:?} as a {kind} grade")]
    BadLiteral { kind: SemiringKind, text: String },
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SemiringKind::Boolean => "boolean",
            SemiringKind::Fuzzy => "fuzzy",
            SemiringKind::Weighted => "weighted",
            SemiringKind::Probabilistic => "probabilistic",
        };
        f.write_str(name)
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grade::Bool(b) => write!(f, "{b}"),
            Grade::Fuzzy(r) | Grade::Prob(r) => write!(f, "{}", fmt_rational(r)),
            Grade::Weighted(Weight::Finite(r)) => write!(f, "{}", fmt_rational(r)),
            Grade::Weighted(Weight::Infinite) => f.write_str("inf"),
        }
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `5`, `3/2` or `0.25` into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        let negative = text.starts_with('-');
        let num: BigInt = frac.parse().ok()?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigRational::new(num, den);
        let whole = BigRational::from_integer(int);
        return Some(if negative { whole - frac_part } else { whole + frac_part });
    }
    let n: BigInt = text.parse().ok()?;
    Some(BigRational::from_integer(n))
}

impl SemiringKind {
    pub fn parse_name(name: &str) -> Result<Self, SemiringError> {
        match name {
            "boolean" | "bool" => Ok(SemiringKind::Boolean),
            "fuzzy" => Ok(SemiringKind::Fuzzy),
            "weighted" => Ok(SemiringKind::Weighted),
            "probabilistic" | "prob" => Ok(SemiringKind::Probabilistic),
            other => Err(SemiringError::UnknownKind(other.to_string())),
        }
    }

    /// The additive unit `0` (worst grade, minimum of the order).
    pub fn zero(&self) -> Grade {
        match self {
            SemiringKind::Boolean => Grade::Bool(false),
            SemiringKind::Fuzzy => Grade::Fuzzy(BigRational::zero()),
            SemiringKind::Weighted => Grade::Weighted(Weight::Infinite),
            SemiringKind::Probabilistic => Grade::Prob(BigRational::zero()),
        }
    }

    /// The multiplicative unit `1` (best grade, maximum of the order).
    pub fn one(&self) -> Grade {
        match self {
            SemiringKind::Boolean => Grade::Bool(true),
            SemiringKind::Fuzzy => Grade::Fuzzy(BigRational::one()),
            SemiringKind::Weighted => Grade::Weighted(Weight::Finite(BigRational::zero())),
            SemiringKind::Probabilistic => Grade::Prob(BigRational::one()),
        }
    }

    /// Checks that `g` belongs to this instance and lies in its carrier.
    pub fn check(&self, g: &Grade) -> Result<(), SemiringError> {
        let wrong = || SemiringError::WrongInstance {
            kind: *self,
            grade: g.to_string(),
        };
        let range = || SemiringError::OutOfRange {
            kind: *self,
            grade: g.to_string(),
        };
        match (self, g) {
            (SemiringKind::Boolean, Grade::Bool(_)) => Ok(()),
            (SemiringKind::Fuzzy, Grade::Fuzzy(r))
            | (SemiringKind::Probabilistic, Grade::Prob(r)) => {
                if r.is_negative() || r > &BigRational::one() {
                    Err(range())
                } else {
                    Ok(())
                }
            }
            (SemiringKind::Weighted, Grade::Weighted(Weight::Infinite)) => Ok(()),
            (SemiringKind::Weighted, Grade::Weighted(Weight::Finite(r))) => {
                if r.is_negative() {
                    Err(range())
                } else {
                    Ok(())
                }
            }
            _ => Err(wrong()),
        }
    }

    /// Parses a grade literal: `true`/`false`, `inf`, `5`, `3/2`, `0.25`.
    pub fn parse_grade(&self, text: &str) -> Result<Grade, SemiringError> {
        let bad = || SemiringError::BadLiteral {
            kind: *self,
            text: text.to_string(),
        };
        let g = match self {
            SemiringKind::Boolean => match text {
                "true" => Grade::Bool(true),
                "false" => Grade::Bool(false),
                _ => return Err(bad()),
            },
            SemiringKind::Fuzzy => Grade::Fuzzy(parse_rational(text).ok_or_else(bad)?),
            SemiringKind::Probabilistic => Grade::Prob(parse_rational(text).ok_or_else(bad)?),
            SemiringKind::Weighted => {
                if text == "inf" {
                    Grade::Weighted(Weight::Infinite)
                } else {
                    Grade::Weighted(Weight::Finite(parse_rational(text).ok_or_else(bad)?))
                }
            }
        };
        self.check(&g)?;
        Ok(g)
    }

    /// Additive operation `+` (least upper bound of the order).
    ///
    /// Panics if either grade belongs to a different instance; callers
    /// validate grades at construction time (see [`SemiringKind::check`]).
    pub fn plus(&self, a: &Grade, b: &Grade) -> Grade {
        match (self, a, b) {
            (SemiringKind::Boolean, Grade::Bool(x), Grade::Bool(y)) => Grade::Bool(*x || *y),
            (SemiringKind::Fuzzy, Grade::Fuzzy(x), Grade::Fuzzy(y)) => {
                Grade::Fuzzy(x.max(y).clone())
            }
            (SemiringKind::Probabilistic, Grade::Prob(x), Grade::Prob(y)) => {
                Grade::Prob(x.max(y).clone())
            }
            (SemiringKind::Weighted, Grade::Weighted(x), Grade::Weighted(y)) => {
                Grade::Weighted(match (x, y) {
                    (Weight::Infinite, w) | (w, Weight::Infinite) => w.clone(),
                    (Weight::Finite(x), Weight::Finite(y)) => Weight::Finite(x.min(y).clone()),
                })
            }
            _ => panic!("semiring {self}: plus applied to foreign grades {a} and {b}"),
        }
    }

    /// Multiplicative operation `x` (constraint combination).
    ///
    /// Panics if either grade belongs to a different instance.
    pub fn times(&self, a: &Grade, b: &Grade) -> Grade {
        match (self, a, b) {
            (SemiringKind::Boolean, Grade::Bool(x), Grade::Bool(y)) => Grade::Bool(*x && *y),
            (SemiringKind::Fuzzy, Grade::Fuzzy(x), Grade::Fuzzy(y)) => {
                Grade::Fuzzy(x.min(y).clone())
            }
            (SemiringKind::Probabilistic, Grade::Prob(x), Grade::Prob(y)) => Grade::Prob(x * y),
            (SemiringKind::Weighted, Grade::Weighted(x), Grade::Weighted(y)) => {
                Grade::Weighted(match (x, y) {
                    (Weight::Infinite, _) | (_, Weight::Infinite) => Weight::Infinite,
                    (Weight::Finite(x), Weight::Finite(y)) => Weight::Finite(x + y),
                })
            }
            _ => panic!("semiring {self}: times applied to foreign grades {a} and {b}"),
        }
    }

    /// The induced partial order: `a <= b iff a + b = b`.
    pub fn leq(&self, a: &Grade, b: &Grade) -> bool {
        &self.plus(a, b) == b
    }

    /// Strict order: `a < b iff a <= b and a != b`.
    pub fn lt(&self, a: &Grade, b: &Grade) -> bool {
        a != b && self.leq(a, b)
    }

    /// `a` is not strictly below `b`. This is the guard form used by the
    /// languages' valued thresholds: correct on partial orders, where it
    /// is weaker than `b <= a`.
    pub fn not_lt(&self, a: &Grade, b: &Grade) -> bool {
        !self.lt(a, b)
    }

    pub const ALL: [SemiringKind; 4] = [
        SemiringKind::Boolean,
        SemiringKind::Fuzzy,
        SemiringKind::Weighted,
        SemiringKind::Probabilistic,
    ];
}

/// Randomized law checking for the four instances, reused by the
/// acceptance suite.
pub mod laws {
    use super::*;
    use rand::Rng;

    /// Draws a grade from a small, law-revealing distribution: denominators
    /// stay small so collisions (and therefore the interesting order cases)
    /// are frequent, and weighted grades are infinite with probability 1/8.
    pub fn sample_grade<R: Rng>(kind: SemiringKind, rng: &mut R) -> Grade {
        let small = |rng: &mut R, max_num: i64, den: i64| {
            BigRational::new(BigInt::from(rng.gen_range(0..=max_num)), BigInt::from(den))
        };
        match kind {
            SemiringKind::Boolean => Grade::Bool(rng.gen()),
            SemiringKind::Fuzzy => {
                let den = rng.gen_range(1..=6);
                Grade::Fuzzy(small(rng, den, den))
            }
            SemiringKind::Probabilistic => {
                let den = rng.gen_range(1..=6);
                Grade::Prob(small(rng, den, den))
            }
            SemiringKind::Weighted => {
                if rng.gen_range(0..8) == 0 {
                    Grade::Weighted(Weight::Infinite)
                } else {
                    let den = rng.gen_range(1..=4);
                    Grade::Weighted(Weight::Finite(small(rng, 12 * den, den)))
                }
            }
        }
    }

    /// Checks every c-semiring axiom on `samples` random triples and
    /// returns the list of violations (empty when all laws hold).
    pub fn check_axioms(kind: SemiringKind, samples: usize, seed: u64) -> Vec<String> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut failures = Vec::new();
        let zero = kind.zero();
        let one = kind.one();
        let mut report = |law: &str, a: &Grade, b: &Grade, c: &Grade| {
            failures.push(format!("{kind}: {law} violated at ({a}, {b}, {c})"));
        };
        for _ in 0..samples {
            let a = sample_grade(kind, &mut rng);
            let b = sample_grade(kind, &mut rng);
            let c = sample_grade(kind, &mut rng);

            if kind.plus(&a, &b) != kind.plus(&b, &a) {
                report("plus commutativity", &a, &b, &c);
            }
            if kind.plus(&kind.plus(&a, &b), &c) != kind.plus(&a, &kind.plus(&b, &c)) {
                report("plus associativity", &a, &b, &c);
            }
            if kind.plus(&a, &a) != a {
                report("plus idempotence", &a, &b, &c);
            }
            if kind.plus(&a, &zero) != a {
                report("plus unit 0", &a, &b, &c);
            }
            if kind.plus(&a, &one) != one {
                report("plus absorbing 1", &a, &b, &c);
            }
            if kind.times(&a, &b) != kind.times(&b, &a) {
                report("times commutativity", &a, &b, &c);
            }
            if kind.times(&kind.times(&a, &b), &c) != kind.times(&a, &kind.times(&b, &c)) {
                report("times associativity", &a, &b, &c);
            }
            if kind.times(&a, &one) != a {
                report("times unit 1", &a, &b, &c);
            }
            if kind.times(&a, &zero) != zero {
                report("times absorbing 0", &a, &b, &c);
            }
            let lhs = kind.times(&a, &kind.plus(&b, &c));
            let rhs = kind.plus(&kind.times(&a, &b), &kind.times(&a, &c));
            if lhs != rhs {
                report("distributivity", &a, &b, &c);
            }
            // Order-theoretic consequences: plus is the lub, the units are
            // the extremes, and times is monotone (intensive).
            let lub = kind.plus(&a, &b);
            if !kind.leq(&a, &lub) || !kind.leq(&b, &lub) {
                report("plus upper bound", &a, &b, &c);
            }
            if kind.leq(&a, &c) && kind.leq(&b, &c) && !kind.leq(&lub, &c) {
                report("plus least upper bound", &a, &b, &c);
            }
            if !kind.leq(&zero, &a) || !kind.leq(&a, &one) {
                report("order extremes", &a, &b, &c);
            }
            if !kind.leq(&kind.times(&a, &b), &a) {
                report("times intensive", &a, &b, &c);
            }
            if kind.leq(&a, &b) && !kind.leq(&kind.times(&a, &c), &kind.times(&b, &c)) {
                report("times monotone", &a, &b, &c);
            }
        }
        failures
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(n: i64) -> Grade {
        Grade::Weighted(Weight::Finite(BigRational::from_integer(BigInt::from(n))))
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    const W: SemiringKind = SemiringKind::Weighted;
    const F: SemiringKind = SemiringKind::Fuzzy;
    const B: SemiringKind = SemiringKind::Boolean;
    const P: SemiringKind = SemiringKind::Probabilistic;

    #[test]
    fn weighted_ops() {
        assert_eq!(W.plus(&w(5), &w(9)), w(5));
        assert_eq!(W.times(&w(5), &w(9)), w(14));
        assert_eq!(W.plus(&w(5), &W.zero()), w(5));
        assert_eq!(W.times(&w(5), &W.zero()), W.zero());
        assert_eq!(W.times(&w(5), &W.one()), w(5));
    }

    #[test]
    fn weighted_order_is_reversed_numeric() {
        // Smaller cost is better: 5 is above 9 in the induced order.
        assert!(W.leq(&w(9), &w(5)));
        assert!(!W.leq(&w(5), &w(9)));
        assert!(W.not_lt(&w(5), &w(9)));
        assert!(!W.not_lt(&w(9), &w(5)));
        assert!(W.leq(&W.zero(), &w(9)));
        assert!(W.leq(&w(0), &W.one()));
    }

    #[test]
    fn nothing_lies_strictly_below_zero() {
        for kind in SemiringKind::ALL {
            let zero = kind.zero();
            assert!(kind.not_lt(&zero, &zero));
            assert!(kind.not_lt(&kind.one(), &zero));
        }
    }

    #[test]
    fn fuzzy_and_prob_ops() {
        assert_eq!(F.plus(&Grade::Fuzzy(q(1, 2)), &Grade::Fuzzy(q(3, 4))), Grade::Fuzzy(q(3, 4)));
        assert_eq!(F.times(&Grade::Fuzzy(q(1, 2)), &Grade::Fuzzy(q(3, 4))), Grade::Fuzzy(q(1, 2)));
        assert_eq!(P.times(&Grade::Prob(q(1, 2)), &Grade::Prob(q(1, 2))), Grade::Prob(q(1, 4)));
        assert_eq!(P.plus(&Grade::Prob(q(1, 2)), &Grade::Prob(q(1, 4))), Grade::Prob(q(1, 2)));
    }

    #[test]
    fn boolean_ops() {
        let t = Grade::Bool(true);
        let f = Grade::Bool(false);
        assert_eq!(B.plus(&f, &t), t);
        assert_eq!(B.times(&f, &t), f);
        assert!(B.leq(&f, &t));
        assert!(!B.leq(&t, &f));
    }

    #[test]
    fn grade_parsing() {
        assert_eq!(W.parse_grade("5").unwrap(), w(5));
        assert_eq!(W.parse_grade("3/2").unwrap(), Grade::Weighted(Weight::Finite(q(3, 2))));
        assert_eq!(W.parse_grade("inf").unwrap(), W.zero());
        assert_eq!(F.parse_grade("0.25").unwrap(), Grade::Fuzzy(q(1, 4)));
        assert_eq!(B.parse_grade("true").unwrap(), Grade::Bool(true));
        assert!(F.parse_grade("3/2").is_err());
        assert!(W.parse_grade("-1").is_err());
        assert!(B.parse_grade("1").is_err());
        assert!(P.parse_grade("inf").is_err());
    }

    #[test]
    fn display_round_trips() {
        for (kind, text) in [
            (W, "7/2"),
            (W, "inf"),
            (W, "0"),
            (F, "1/4"),
            (P, "1"),
            (B, "false"),
        ] {
            let g = kind.parse_grade(text).unwrap();
            assert_eq!(g.to_string(), text);
        }
    }

    #[test]
    #[should_panic(expected = "foreign grades")]
    fn mixing_instances_panics() {
        W.plus(&w(1), &Grade::Bool(true));
    }

    #[test]
    fn axioms_hold_on_samples() {
        for kind in SemiringKind::ALL {
            let failures = laws::check_axioms(kind, 300, 0xC0FFEE);
            assert!(failures.is_empty(), "{failures:?}");
        }
    }
}
