//! Small helpers around [`BigRational`]: parsing, formatting and the floor /
//! integrality tests the ideal combinatorics relies on.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            int.parse()
                .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac_part: BigInt = if frac.is_empty() {
            BigInt::zero()
        } else {
            frac.parse().unwrap()
        };
        let mag = int_part.abs() * &scale + frac_part;
        let num = if neg { -mag } else { mag };
        return Ok(Q::new(num, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    Ok(Q::from_integer(n))
}

pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator or denominator beyond f64 range
        let n = x.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = x.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn is_integer(x: &Q) -> bool {
    x.denom().is_one()
}

/// floor(x) as a BigInt.
pub fn floor(x: &Q) -> BigInt {
    x.numer().div_floor(x.denom())
}

/// Smallest integer strictly greater than `x`.
pub fn next_int_above(x: &Q) -> BigInt {
    floor(x) + BigInt::one()
}

pub fn to_u32(x: &BigInt) -> Result<u32> {
    x.to_u32()
        .ok_or_else(|| Error::Domain(format!("exponent {x} out of range")))
}

pub fn serialize_q<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_q(x))
}

pub fn serialize_q_vec<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&format_q(x))?;
    }
    seq.end()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QRepr {
    Str(String),
    Int(i64),
    Float(f64),
}

impl QRepr {
    fn into_q(self) -> Result<Q> {
        match self {
            QRepr::Str(s) => parse_q(&s),
            QRepr::Int(i) => Ok(qi(i)),
            QRepr::Float(f) => Q::from_float(f)
                .ok_or_else(|| Error::Parse(format!("non-finite number {f}"))),
        }
    }
}

pub fn deserialize_q<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
    QRepr::deserialize(d)?
        .into_q()
        .map_err(serde::de::Error::custom)
}

pub fn deserialize_q_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
    Vec::<QRepr>::deserialize(d)?
        .into_iter()
        .map(|r| r.into_q().map_err(serde::de::Error::custom))
        .collect()
}

/// Parses a comma separated list of rationals, e.g. `"1/2,0,3"`.
pub fn parse_q_list(s: &str) -> Result<Vec<Q>> {
    s.split(',').map(parse_q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q(" 7 ").unwrap(), qi(7));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn floor_and_next() {
        assert_eq!(floor(&q(5, 2)), BigInt::from(2));
        assert_eq!(floor(&q(-1, 2)), BigInt::from(-1));
        assert_eq!(next_int_above(&q(3, 2)), BigInt::from(2));
        assert_eq!(next_int_above(&qi(2)), BigInt::from(3));
        assert_eq!(format_q(&q(4, 2)), "2");
        assert_eq!(format_q(&q(-3, 9)), "-1/3");
    }
}
