//! Exact rationals and their `p/q` text form.

use alloc::format;
use alloc::string::{String, ToString};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use num_rational::BigRational;

/// The scalar type of every exact computation in the crate.
pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// `2^{-n}`.
pub fn pow2_inv(n: u32) -> Q {
    Q::new(BigInt::one(), BigInt::one() << n as usize)
}

pub fn pow(base: &Q, exp: u32) -> Q {
    let mut acc = one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"` or `"p"`, with optional sign and surrounding whitespace.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let t = s.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Q::new(n, d))
}

/// Canonical `p/q` rendering (integers render as `p/1`).
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q(" -4 ").unwrap(), qi(-4));
        assert_eq!(fmt_q(&q(-2, 4)), "-1/2");
        assert_eq!(fmt_q(&qi(3)), "3/1");
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("0.5").is_err());
    }

    #[test]
    fn powers() {
        assert_eq!(pow2_inv(3), q(1, 8));
        assert_eq!(pow(&q(2, 3), 2), q(4, 9));
        assert_eq!(pow(&q(2, 3), 0), one());
    }
}
