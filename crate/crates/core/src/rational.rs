//! Exact rational helpers shared by every layer: the `"num/den"` text form and
//! floor/ceil conversions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Always `num/den`, with `den > 0` and the fraction reduced.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Serialization(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
    }
}

pub fn floor_i64(r: &BigRational) -> Option<i64> {
    r.floor().to_integer().to_i64()
}

pub fn ceil_i64(r: &BigRational) -> Option<i64> {
    r.ceil().to_integer().to_i64()
}

/// Smallest integer strictly greater than `r`.
pub fn next_int_above(r: &BigRational) -> BigInt {
    r.floor().to_integer() + BigInt::one()
}

/// `r * e` as an integer, if `r` lies on the grid `(1/e) Z`.
pub fn scale_to_grid(r: &BigRational, e: i64) -> Option<i64> {
    let scaled = r * BigRational::from_integer(BigInt::from(e));
    if scaled.is_integer() {
        scaled.to_integer().to_i64()
    } else {
        None
    }
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Serde adapter for `BigRational` fields in the `"num/den"` form.
pub mod serde_rational {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<BigRational>`; `None` is `null`.
pub mod serde_opt_rational {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        r: &Option<BigRational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<BigRational>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form() {
        assert_eq!(format_rational(&rat(-6, 4)), "-3/2");
        assert_eq!(format_rational(&int(5)), "5/1");
        assert_eq!(parse_rational("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn grid() {
        assert_eq!(scale_to_grid(&rat(3, 4), 4), Some(3));
        assert_eq!(scale_to_grid(&rat(1, 3), 4), None);
        assert_eq!(next_int_above(&rat(19, 2)), BigInt::from(10));
        assert_eq!(next_int_above(&int(3)), BigInt::from(4));
        assert_eq!(next_int_above(&rat(-1, 2)), BigInt::from(0));
    }
}
