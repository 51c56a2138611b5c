//! Deformation parameter and log-domain helpers.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The deformation parameter `q > 0`.
///
/// Always carries an exact rational value next to its `f64` image so that
/// both numeric backends can be driven from the same input. Values parsed
/// from decimals ("1.5") or fractions ("3/2") are exact; values built from
/// an `f64` keep the exact binary expansion.
#[derive(Clone, PartialEq)]
pub struct Deformation {
    exact: BigRational,
    value: f64,
}

impl Deformation {
    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::invalid("q has a zero denominator"));
        }
        Self::from_exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_exact(exact: BigRational) -> Result<Self> {
        if !exact.is_positive() {
            return Err(Error::invalid(format!("q must be positive, got {exact}")));
        }
        let value = ratio_to_f64(&exact);
        Ok(Deformation { exact, value })
    }

    pub fn from_f64(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!("q must be positive and finite, got {value}")));
        }
        let exact = BigRational::from_float(value)
            .ok_or_else(|| Error::invalid(format!("cannot represent q = {value}")))?;
        Ok(Deformation { exact, value })
    }

    pub fn one() -> Self {
        Deformation {
            exact: BigRational::one(),
            value: 1.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn ln(&self) -> f64 {
        ln_ratio(&self.exact)
    }

    /// `q^k` for any integer `k`, exactly.
    pub fn pow_exact(&self, k: i64) -> BigRational {
        let base = if k < 0 { self.exact.recip() } else { self.exact.clone() };
        num_traits::pow(base, k.unsigned_abs() as usize)
    }

    pub fn is_one(&self) -> bool {
        self.exact.is_one()
    }
}

impl fmt::Debug for Deformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Deformation({self})")
    }
}

impl fmt::Display for Deformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact.is_integer() {
            write!(f, "{}", self.exact.numer())
        } else if self.exact.denom().bits() <= 32 {
            write!(f, "{}/{}", self.exact.numer(), self.exact.denom())
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl FromStr for Deformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse q from {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Self::from_exact(BigRational::new(num, den));
        }
        // Exact decimal: "1.25" -> 125/100.
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        if int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
            && !(int_part.is_empty() && frac_part.is_empty())
        {
            let digits = format!("{int_part}{frac_part}");
            let num: BigInt = digits.parse().map_err(|_| bad())?;
            let den = num_traits::pow(BigInt::from(10), frac_part.len());
            return Self::from_exact(BigRational::new(num, den));
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        Self::from_f64(v)
    }
}

impl Serialize for Deformation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Deformation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) => Deformation::from_f64(v).map_err(serde::de::Error::custom),
        }
    }
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("finite").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("finite");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_bigint(x: &BigInt) -> f64 {
    match x.to_biguint() {
        Some(u) => ln_biguint(&u),
        None => f64::NAN,
    }
}

/// Natural log of a nonnegative rational; `-inf` for zero.
pub fn ln_ratio(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// Rational to `f64` that survives numerators and denominators beyond `f64`
/// range.
pub fn ratio_to_f64(x: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (x.numer().to_f64(), x.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    sign * ln_ratio(&x.abs()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        let q: Deformation = "3/2".parse().unwrap();
        assert_eq!(q.exact(), &BigRational::new(3.into(), 2.into()));
        let q: Deformation = "1.5".parse().unwrap();
        assert_eq!(q.exact(), &BigRational::new(3.into(), 2.into()));
        let q: Deformation = "2".parse().unwrap();
        assert_eq!(q.to_string(), "2");
        assert!("0".parse::<Deformation>().is_err());
        assert!("-1/2".parse::<Deformation>().is_err());
        assert!("x".parse::<Deformation>().is_err());
    }

    #[test]
    fn powers() {
        let q = Deformation::from_ratio(2, 3).unwrap();
        assert_eq!(q.pow_exact(-2), BigRational::new(9.into(), 4.into()));
        assert_eq!(q.pow_exact(0), BigRational::one());
    }

    #[test]
    fn log_add_matches_direct() {
        let a: f64 = 0.3;
        let b: f64 = -1.7;
        assert!((log_add(a, b) - (a.exp() + b.exp()).ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, b), b);
        assert!((log_sum([a, b, 0.0]) - (a.exp() + b.exp() + 1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn huge_logs() {
        let x = num_traits::pow(BigUint::from(3u32), 2000);
        let expect = 2000.0 * 3f64.ln();
        assert!((ln_biguint(&x) - expect).abs() / expect < 1e-14);
        let r = BigRational::new(BigInt::from(x.clone()), BigInt::from(x) * BigInt::from(2));
        assert!((ratio_to_f64(&r) - 0.5).abs() < 1e-12);
    }
}
