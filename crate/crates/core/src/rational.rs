//! Exact rational helpers. All probabilities in the toolkit are `BigRational`s
//! and are printed as `p/q` strings.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

/// Builds `n/d`. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// `p/q` with the denominator always written out (`1/1`, `0/1`).
pub fn format_ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q` or a bare integer `p`. Whitespace around the slash is not allowed.
pub fn parse_ratio(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.parse().ok()?;
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// Decimal rendering rounded half-up to `places` digits.
pub fn format_decimal(r: &Rational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = r.abs() * BigRational::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let int_part = &rounded / &scale;
    let frac_part = &rounded % &scale;
    let sign = if r.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{int_part}");
    }
    format!(
        "{sign}{int_part}.{:0>width$}",
        frac_part.to_string(),
        width = places as usize
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_always_shows_denominator() {
        assert_eq!(format_ratio(&one()), "1/1");
        assert_eq!(format_ratio(&ratio(216, 241)), "216/241");
        assert_eq!(format_ratio(&ratio(2, 4)), "1/2");
    }

    #[test]
    fn parse_accepts_fraction_and_integer() {
        assert_eq!(parse_ratio("4/5"), Some(ratio(4, 5)));
        assert_eq!(parse_ratio("0"), Some(zero()));
        assert_eq!(parse_ratio("-3/6"), Some(ratio(-1, 2)));
        assert_eq!(parse_ratio("1/0"), None);
        assert_eq!(parse_ratio("0.8"), None);
    }

    #[test]
    fn decimal_rounding() {
        assert_eq!(format_decimal(&ratio(6, 25), 6), "0.240000");
        assert_eq!(format_decimal(&ratio(2, 3), 6), "0.666667");
        assert_eq!(format_decimal(&one(), 6), "1.000000");
        assert_eq!(format_decimal(&ratio(8, 241), 6), "0.033195");
    }
}
