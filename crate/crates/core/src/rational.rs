//! Helpers around [`BigRational`]: the textual `num/den` form, dyadic
//! rounding and exact square roots.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parses `"num/den"` with `den > 0` and the fraction in lowest terms.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| format!("expected \"num/den\", got {s:?}"))?;
    let num: BigInt = num
        .trim()
        .parse()
        .map_err(|_| format!("bad numerator in {s:?}"))?;
    let den: BigInt = den
        .trim()
        .parse()
        .map_err(|_| format!("bad denominator in {s:?}"))?;
    if !den.is_positive() {
        return Err(format!("denominator must be positive in {s:?}"));
    }
    if !num.gcd(&den).is_one() {
        return Err(format!("{s:?} is not in lowest terms"));
    }
    Ok(BigRational::new_raw(num, den))
}

/// Formats as `"num/den"`; integers keep the `/1`.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn pow2(k: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << k)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite float.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Smallest multiple of `2^-bits` that is `>= r`.
pub fn ceil_dyadic(r: &BigRational, bits: usize) -> BigRational {
    let scale = BigInt::one() << bits;
    let scaled = r * BigRational::from_integer(scale.clone());
    BigRational::new(scaled.ceil().to_integer(), scale)
}

/// Largest multiple of `2^-bits` that is `<= r`.
pub fn floor_dyadic(r: &BigRational, bits: usize) -> BigRational {
    let scale = BigInt::one() << bits;
    let scaled = r * BigRational::from_integer(scale.clone());
    BigRational::new(scaled.floor().to_integer(), scale)
}

/// The exact rational square root of `r`, if there is one.
pub fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    if r.is_zero() {
        return Some(BigRational::zero());
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Total bit length of numerator and denominator; a size gauge for ledgers.
pub fn bit_size(r: &BigRational) -> u64 {
    r.numer().bits() + r.denom().bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-1/2").unwrap(), ratio(-1, 2));
        assert_eq!(format_rational(&int(2)), "2/1");
        assert!(parse_rational("2/4").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("0.5").is_err());
        assert!(parse_rational("x/2").is_err());
    }

    #[test]
    fn dyadic_rounding_brackets() {
        let third = ratio(1, 3);
        let up = ceil_dyadic(&third, 8);
        let down = floor_dyadic(&third, 8);
        assert!(down <= third && third <= up);
        assert_eq!(&up - &down, ratio(1, 256));
        assert_eq!(ceil_dyadic(&ratio(1, 2), 4), ratio(1, 2));
    }

    #[test]
    fn sqrt_of_squares_only() {
        assert_eq!(exact_sqrt(&ratio(9, 16)), Some(ratio(3, 4)));
        assert_eq!(exact_sqrt(&int(0)), Some(int(0)));
        assert_eq!(exact_sqrt(&int(2)), None);
        assert_eq!(exact_sqrt(&int(-4)), None);
    }
}
