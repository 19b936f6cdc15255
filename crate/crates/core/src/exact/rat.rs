//! Arbitrary-precision rationals (backed by `num-rational`).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `p`, `-p` or `p/q`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rat::new(n, d))
}

/// `p/q`, or `p` when the denominator is one.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Very large operands: scale by bit length first.
        let shift = r.numer().bits().max(r.denom().bits()) as i64 - 60;
        let n = (r.numer() >> shift.max(0) as usize).to_f64().unwrap_or(0.0);
        let d = (r.denom() >> shift.max(0) as usize).to_f64().unwrap_or(1.0);
        n / d
    })
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Scales a rational vector to a primitive integer vector with the same
/// direction (first nonzero entry keeps its sign).
pub fn primitive_integer_vector(values: &[Rat]) -> Vec<BigInt> {
    let den = common_denominator(values);
    let ints: Vec<BigInt> = values.iter().map(|r| (r * Rat::from_integer(den.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

