//! Exact rational arithmetic over checked 128-bit integers.
//!
//! Every continuous quantity in the simulator (time, position, speed) is a
//! `Rational`. Arithmetic is exact; any overflow of the underlying integers
//! aborts with a panic rather than wrapping, so a completed run is always
//! exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use thiserror::Error;

/// Exact fraction of two integers, kept in canonical form:
/// `den > 0` and `gcd(|num|, den) == 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i128,
    den: i128,
}

/// Error parsing a rational from text.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer in rational literal: {0}")]
    BadInt(String),
    #[error("zero denominator")]
    ZeroDenominator,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

#[inline]
fn checked(v: Option<i128>) -> i128 {
    v.expect("rational arithmetic overflowed i128; inputs out of supported range")
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    /// Builds `num/den` in canonical form. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "rational with zero denominator");
        let g = gcd(num, den);
        let sign = if den < 0 { -1 } else { 1 };
        if num == 0 {
            return Rational { num: 0, den: 1 };
        }
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(n: i64) -> Self {
        Rational {
            num: n as i128,
            den: 1,
        }
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn denominator(&self) -> i128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_negative(&self) -> bool {
        self.num < 0
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn abs(&self) -> Self {
        Rational {
            num: self.num.abs(),
            den: self.den,
        }
    }

    /// Sign as -1, 0 or +1.
    pub fn signum(&self) -> i8 {
        self.num.signum() as i8
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.num != 0, "reciprocal of zero");
        Rational::new(self.den, self.num)
    }

    /// Approximate value for display-only uses (never used in decisions).
    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        let a = checked(self.num.checked_mul(rhs.den));
        let b = checked(rhs.num.checked_mul(self.den));
        Rational::new(checked(a.checked_add(b)), checked(self.den.checked_mul(rhs.den)))
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        self + (-rhs)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        // Cross-reduce first to keep intermediates small.
        let g1 = gcd(self.num, rhs.den).max(1);
        let g2 = gcd(rhs.num, self.den).max(1);
        let num = checked((self.num / g1).checked_mul(rhs.num / g2));
        let den = checked((self.den / g2).checked_mul(rhs.den / g1));
        Rational::new(num, den)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        self * rhs.recip()
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            num: -self.num,
            den: self.den,
        }
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = *self - rhs;
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = checked(self.num.checked_mul(other.den));
        let rhs = checked(other.num.checked_mul(self.den));
        lhs.cmp(&rhs)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::int(n)
    }
}

impl fmt::Display for Rational {
    /// Always `num/den`, so logs and CSV round-trip exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `num/den` or a bare integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => {
                let num: i128 = n
                    .trim()
                    .parse()
                    .map_err(|_| ParseRationalError::BadInt(n.to_string()))?;
                let den: i128 = d
                    .trim()
                    .parse()
                    .map_err(|_| ParseRationalError::BadInt(d.to_string()))?;
                (num, den)
            }
            None => {
                let num: i128 = s
                    .parse()
                    .map_err(|_| ParseRationalError::BadInt(s.to_string()))?;
                (num, 1)
            }
        };
        if den == 0 {
            return Err(ParseRationalError::ZeroDenominator);
        }
        Ok(Rational::new(num, den))
    }
}

/// Shorthand used throughout the crate and its tests.
pub fn rat(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_form() {
        assert_eq!(rat(2, 4), rat(1, 2));
        assert_eq!(rat(-2, -4), rat(1, 2));
        assert_eq!(rat(2, -4), rat(-1, 2));
        assert_eq!(rat(0, -7), Rational::ZERO);
        assert_eq!(rat(6, 3).numerator(), 2);
        assert_eq!(rat(6, 3).denominator(), 1);
    }

    #[test]
    fn arithmetic() {
        assert_eq!(rat(1, 2) + rat(1, 3), rat(5, 6));
        assert_eq!(rat(1, 2) - rat(1, 3), rat(1, 6));
        assert_eq!(rat(2, 3) * rat(9, 4), rat(3, 2));
        assert_eq!(rat(1, 2) / rat(1, 4), rat(2, 1));
        assert_eq!(-rat(1, 2), rat(-1, 2));
        assert!(rat(1, 3) < rat(1, 2));
        assert!(rat(-1, 2) < rat(-1, 3));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("3/4".parse::<Rational>().unwrap(), rat(3, 4));
        assert_eq!("-6/8".parse::<Rational>().unwrap(), rat(-3, 4));
        assert_eq!("5".parse::<Rational>().unwrap(), rat(5, 1));
        assert_eq!(rat(5, 1).to_string(), "5/1");
        assert_eq!(rat(-3, 4).to_string(), "-3/4");
        assert_eq!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator)
        );
        assert!("".parse::<Rational>().is_err());
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_is_a_hard_error() {
        let big = Rational::new(i128::MAX / 2, 1);
        let _ = big * big;
    }

    proptest! {
        #[test]
        fn add_sub_round_trip(an in -1000i128..1000, ad in 1i128..100,
                              bn in -1000i128..1000, bd in 1i128..100) {
            let a = Rational::new(an, ad);
            let b = Rational::new(bn, bd);
            prop_assert_eq!((a + b) - b, a);
        }

        #[test]
        fn canonical_after_ops(an in -1000i128..1000, ad in 1i128..100,
                               bn in -1000i128..1000, bd in 1i128..100) {
            let a = Rational::new(an, ad);
            let b = Rational::new(bn, bd);
            for v in [a + b, a - b, a * b] {
                prop_assert!(v.denominator() > 0);
                let g = super::gcd(v.numerator(), v.denominator());
                prop_assert!(g == 1 || v.numerator() == 0);
            }
        }
    }
}
