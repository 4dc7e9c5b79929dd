//! Order-of-magnitude collapse rates in SI units, in exact rational arithmetic.
//!
//! Inputs such as `1e-16` are not representable in binary floating point and
//! their products drift (`1e-16 * 1e11 * 1e20` is `999999999999999.9` in f64),
//! so values are carried as rationals parsed from their decimal text.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("cannot parse {0:?} as a decimal number")]
    Parse(String),
    #[error("bohr-scale length a0 = {a0} exceeds the localization length a_L = {a_l}")]
    OutsideRegime { a0: Box<SiValue>, a_l: Box<SiValue> },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: Box<SiValue> },
}

/// Exact rational quantity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiValue(BigRational);

impl SiValue {
    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn from_integer(n: i64) -> Self {
        Self(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact value of the shortest decimal that round-trips to `x`.
    pub fn from_f64(x: f64) -> Result<Self, RateError> {
        if !x.is_finite() {
            return Err(RateError::Parse(x.to_string()));
        }
        format!("{x:e}").parse()
    }

    pub fn rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn pow10(exp: i32) -> Self {
        let ten = BigInt::from(10);
        let p = num::pow(ten, exp.unsigned_abs() as usize);
        if exp >= 0 {
            Self(BigRational::from_integer(p))
        } else {
            Self(BigRational::new(BigInt::one(), p))
        }
    }

    /// `mantissa × 10^exponent` with an integer mantissa free of trailing
    /// zeros, when the value is a terminating decimal.
    fn decimal_parts(&self) -> Option<(BigInt, i64)> {
        if self.0.is_zero() {
            return Some((BigInt::zero(), 0));
        }
        let mut denom = self.0.denom().clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let ten = BigInt::from(10);
        let (mut twos, mut fives) = (0i64, 0i64);
        while (&denom % &two).is_zero() {
            denom /= &two;
            twos += 1;
        }
        while (&denom % &five).is_zero() {
            denom /= &five;
            fives += 1;
        }
        if !denom.is_one() {
            return None;
        }
        let k = twos.max(fives);
        // value = numer / (2^twos 5^fives) = numer·2^(k-twos)·5^(k-fives) / 10^k
        let mut mantissa =
            self.0.numer().clone() * num::pow(two, (k - twos) as usize) * num::pow(five, (k - fives) as usize);
        let mut exponent = -k;
        while !mantissa.is_zero() && (&mantissa % &ten).is_zero() {
            mantissa /= &ten;
            exponent += 1;
        }
        Some((mantissa, exponent))
    }
}

impl std::ops::Mul for &SiValue {
    type Output = SiValue;
    fn mul(self, rhs: &SiValue) -> SiValue {
        SiValue(&self.0 * &rhs.0)
    }
}

impl std::ops::Div for &SiValue {
    type Output = SiValue;
    fn div(self, rhs: &SiValue) -> SiValue {
        SiValue(&self.0 / &rhs.0)
    }
}

impl FromStr for SiValue {
    type Err = RateError;

    /// Accepts `[-+]digits[.digits][(e|E)[-+]digits]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RateError::Parse(s.to_string());
        let t = s.trim();
        let (mantissa, exponent) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (negative, digits) = match mantissa.as_bytes().first() {
            Some(b'-') => (true, &mantissa[1..]),
            Some(b'+') => (false, &mantissa[1..]),
            _ => (false, mantissa),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let all: String = format!("{int_part}{frac_part}");
        let mut value = BigInt::from_str(&all).map_err(|_| err())?;
        if negative {
            value = -value;
        }
        let scale = exponent.checked_sub(frac_part.len() as i32).ok_or_else(err)?;
        Ok(&SiValue(BigRational::from_integer(value)) * &SiValue::pow10(scale))
    }
}

impl fmt::Display for SiValue {
    /// Exact scientific notation (`1e15`, `2.5e-7`) for terminating decimals,
    /// otherwise a rounded float prefixed with `~`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_parts() {
            Some((m, _)) if m.is_zero() => write!(f, "0"),
            Some((m, e)) => {
                let sign = if m.is_negative() { "-" } else { "" };
                let digits = m.abs().to_string();
                let exp = e + digits.len() as i64 - 1;
                if digits.len() == 1 {
                    write!(f, "{sign}{digits}e{exp}")
                } else {
                    write!(f, "{sign}{}.{}e{exp}", &digits[..1], &digits[1..])
                }
            }
            None => write!(f, "~{:e}", self.to_f64()),
        }
    }
}

impl Serialize for SiValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SiValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(SiValue::from_integer(i)),
            Raw::Float(x) => SiValue::from_f64(x).map_err(serde::de::Error::custom),
        }
    }
}

/// A rate, possibly as the coefficient of `N^power` when `N` is left symbolic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rate {
    pub coefficient: SiValue,
    pub n_power: u32,
}

impl Rate {
    fn plain(coefficient: SiValue) -> Self {
        Self {
            coefficient,
            n_power: 0,
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.n_power {
            0 => write!(f, "{}", self.coefficient),
            1 => write!(f, "{}*N", self.coefficient),
            p => write!(f, "{}*N^{p}", self.coefficient),
        }
    }
}

fn non_negative(name: &'static str, v: &SiValue) -> Result<(), RateError> {
    if v.is_negative() {
        Err(RateError::Negative {
            name,
            value: Box::new(v.clone()),
        })
    } else {
        Ok(())
    }
}

/// Bound `γ_L (a0/a_L)² N²` on the imbalance rate inside a small bound
/// system. With `n = None` the coefficient of `N²` is returned.
pub fn rate_microscopic(
    gamma_l: &SiValue,
    a0: &SiValue,
    a_l: &SiValue,
    n: Option<&SiValue>,
) -> Result<Rate, RateError> {
    non_negative("gamma_L", gamma_l)?;
    non_negative("a0", a0)?;
    if !(a_l.rational() > &BigRational::zero()) {
        return Err(RateError::Negative {
            name: "a_L",
            value: Box::new(a_l.clone()),
        });
    }
    if a0 > a_l {
        return Err(RateError::OutsideRegime {
            a0: Box::new(a0.clone()),
            a_l: Box::new(a_l.clone()),
        });
    }
    let ratio = a0 / a_l;
    let coefficient = &(gamma_l * &ratio) * &ratio;
    Ok(match n {
        Some(n) => {
            non_negative("N", n)?;
            Rate::plain(&(&coefficient * n) * n)
        }
        None => Rate {
            coefficient,
            n_power: 2,
        },
    })
}

/// `γ_L N²`: growth of the imbalance between branches separated by more than `a_L`.
pub fn rate_interference(gamma_l: &SiValue, n: &SiValue) -> Result<Rate, RateError> {
    non_negative("gamma_L", gamma_l)?;
    non_negative("N", n)?;
    Ok(Rate::plain(&(gamma_l * n) * n))
}

/// `γ_L N_B N_P`: a macroscopic pointer of `N_P` particles with `N_B` of them
/// inside one averaging volume.
pub fn rate_macroscopic(gamma_l: &SiValue, n_b: &SiValue, n_p: &SiValue) -> Result<Rate, RateError> {
    non_negative("gamma_L", gamma_l)?;
    non_negative("N_B", n_b)?;
    non_negative("N_P", n_p)?;
    Ok(Rate::plain(&(gamma_l * n_b) * n_p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> SiValue {
        s.parse().unwrap()
    }

    #[test]
    fn parsing_is_exact() {
        assert_eq!(v("1e-16"), SiValue::pow10(-16));
        assert_eq!(v("2.50E3"), SiValue::from_integer(2500));
        assert_eq!(v("-0.125"), &SiValue::from_integer(-1) / &SiValue::from_integer(8));
        assert_eq!(v(".5"), &SiValue::from_integer(1) / &SiValue::from_integer(2));
        assert!("1e".parse::<SiValue>().is_err());
        assert!("abc".parse::<SiValue>().is_err());
        assert!("".parse::<SiValue>().is_err());
        assert_eq!(SiValue::from_f64(1e-16).unwrap(), v("1e-16"));
    }

    #[test]
    fn display_forms() {
        assert_eq!(v("1e15").to_string(), "1e15");
        assert_eq!(v("0.000001").to_string(), "1e-6");
        assert_eq!(v("2500").to_string(), "2.5e3");
        assert_eq!(v("-3").to_string(), "-3e0");
        assert_eq!(SiValue::zero().to_string(), "0");
        let third = &SiValue::from_integer(1) / &SiValue::from_integer(3);
        assert!(third.to_string().starts_with('~'));
    }

    #[test]
    fn macroscopic_cases() {
        let g = v("1e-16");
        assert_eq!(
            rate_macroscopic(&g, &v("1e11"), &v("1e20")).unwrap().coefficient,
            v("1e15")
        );
        assert_eq!(
            rate_macroscopic(&g, &v("1e5"), &v("1e5")).unwrap().coefficient,
            v("1e-6")
        );
        assert_eq!(
            rate_macroscopic(&g, &v("0"), &v("1e5")).unwrap().coefficient,
            SiValue::zero()
        );
    }

    #[test]
    fn microscopic_cases() {
        let g = v("1e-16");
        let r = rate_microscopic(&g, &v("1e-10"), &v("1e-6"), None).unwrap();
        assert_eq!(r.coefficient, v("1e-24"));
        assert_eq!(r.to_string(), "1e-24*N^2");
        let r = rate_microscopic(&g, &v("1e-8"), &v("1e-6"), None).unwrap();
        assert_eq!(r.coefficient, v("1e-20"));
        let r = rate_microscopic(&g, &v("0"), &v("1e-6"), Some(&v("10"))).unwrap();
        assert_eq!(r.coefficient, SiValue::zero());
        assert!(matches!(
            rate_microscopic(&g, &v("1e-5"), &v("1e-6"), None),
            Err(RateError::OutsideRegime { .. })
        ));
    }

    #[test]
    fn interference_cases() {
        let g = v("1e-16");
        assert_eq!(rate_interference(&g, &v("1e7")).unwrap().coefficient, v("1e-2"));
        assert_eq!(rate_interference(&g, &v("1")).unwrap().coefficient, v("1e-16"));
        assert_eq!(rate_interference(&g, &v("1e9")).unwrap().coefficient, v("1e2"));
    }

    #[test]
    fn float_arithmetic_would_drift() {
        // the reason for rationals
        assert_ne!(1e-16 * 1e11 * 1e20, 1e15);
    }
}
