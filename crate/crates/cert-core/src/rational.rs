//! Exact rational arithmetic helpers.
//!
//! All probabilities, weights, and expectations in the analysis engines are
//! `num::BigRational`, so results are exact and independent of evaluation
//! order.  Floats appear only at the edges: tolerances coming in from the
//! command line and the `float` rendering going out in reports.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

/// Exact rational, re-exported under a short local name.
pub type Rat = BigRational;

/// `n/d` as a rational.  Panics when `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// A natural as a rational.
pub fn rat_u(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact conversion of a float (used for tolerances; every finite `f64` is a
/// rational).  Panics on NaN or infinities.
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("tolerance must be finite")
}

/// Nearest-double rendering of a rational, for report output.
pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parse `a`, `a/b`, or a finite decimal like `0.25` (optionally signed).
pub fn parse_rational(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().ok()?;
        let den: BigInt = d.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rat::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: BigInt = if int == "-" { BigInt::zero() } else { int.parse().ok()? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_num: BigInt = frac.parse().ok()?;
        let whole = int.abs() * &scale + frac_num;
        let signed = if neg { -whole } else { whole };
        return Some(Rat::new(signed, scale));
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Exponent `k` when `d == 2^k`.
fn pow2_exp(d: &BigInt) -> Option<u64> {
    if !d.is_positive() {
        return None;
    }
    let tz = d.trailing_zeros()?;
    if (d >> tz).is_one() {
        Some(tz)
    } else {
        None
    }
}

/// `numer / 2^k` in lowest terms, built without a general gcd.
fn make_dyadic(numer: BigInt, k: u64) -> Rat {
    if numer.is_zero() {
        return Rat::zero();
    }
    let t = numer.trailing_zeros().expect("nonzero").min(k);
    Rat::new_raw(numer >> t, BigInt::one() << (k - t))
}

/// Exact sum, with a fast path when both denominators are powers of two.
///
/// Deep probabilistic evaluations produce dyadic rationals with thousands of
/// bits; the general-purpose binary gcd that `Ratio` addition runs on them is
/// quadratic in that width, while stripping trailing zeros is linear.  Falls
/// back to plain `Ratio` addition for non-dyadic operands.
pub fn dyadic_add(a: &Rat, b: &Rat) -> Rat {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    match (pow2_exp(a.denom()), pow2_exp(b.denom())) {
        (Some(j), Some(k)) => {
            let (lo, hi, x, y) = if j <= k { (j, k, a, b) } else { (k, j, b, a) };
            make_dyadic((x.numer() << (hi - lo)) + y.numer(), hi)
        }
        _ => a + b,
    }
}

/// `acc += x` via [`dyadic_add`].
pub fn dyadic_add_assign(acc: &mut Rat, x: &Rat) {
    if x.is_zero() {
        return;
    }
    *acc = dyadic_add(acc, x);
}

/// Exact product, with the same dyadic fast path as [`dyadic_add`].
pub fn dyadic_mul(a: &Rat, b: &Rat) -> Rat {
    if a.is_zero() || b.is_zero() {
        return Rat::zero();
    }
    match (pow2_exp(a.denom()), pow2_exp(b.denom())) {
        (Some(j), Some(k)) => make_dyadic(a.numer() * b.numer(), j + k),
        _ => a * b,
    }
}

/// Rational rendered for JSON reports: exact numerator/denominator as decimal
/// strings (they outgrow JSON numbers) plus a nearest-double convenience
/// field.
#[derive(Clone, Debug, Serialize)]
pub struct RatJson {
    pub num: String,
    pub den: String,
    pub float: f64,
}

impl From<&Rat> for RatJson {
    fn from(x: &Rat) -> RatJson {
        RatJson {
            num: x.numer().to_string(),
            den: x.denom().to_string(),
            float: rat_to_f64(x),
        }
    }
}

/// Compact text rendering: integers as plain integers, everything else as
/// `num/den`.
pub fn fmt_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_forms() {
        assert_eq!(parse_rational("3/4"), Some(rat(3, 4)));
        assert_eq!(parse_rational("7"), Some(rat(7, 1)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(rat(-3, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("0.x"), None);
    }

    #[test]
    fn dyadic_ops_match_general_arithmetic() {
        assert_eq!(dyadic_add(&rat(1, 8), &rat(3, 4)), rat(7, 8));
        assert_eq!(dyadic_add(&rat(1, 8), &rat(7, 8)), rat(1, 1));
        assert_eq!(dyadic_mul(&rat(3, 8), &rat(-5, 4)), rat(-15, 32));
        assert_eq!(dyadic_add(&rat(1, 3), &rat(1, 6)), rat(1, 2));
        assert_eq!(dyadic_mul(&rat(2, 3), &rat(3, 4)), rat(1, 2));

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..500 {
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
                let n = rng.gen_range(-999i64..1000);
                let d = if rng.gen_bool(0.7) {
                    1i64 << rng.gen_range(0..20)
                } else {
                    rng.gen_range(1i64..100)
                };
                rat(n, d)
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            assert_eq!(dyadic_add(&a, &b), &a + &b);
            assert_eq!(dyadic_mul(&a, &b), &a * &b);
        }
    }

    #[test]
    fn json_rendering_is_exact() {
        let x = rat(509, 256);
        let j = RatJson::from(&x);
        assert_eq!(j.num, "509");
        assert_eq!(j.den, "256");
        assert!((j.float - 1.98828125).abs() < 1e-12);
    }
}
