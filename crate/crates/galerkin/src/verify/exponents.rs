//! Exact rational arithmetic for the embedding-exponent bookkeeping.
//!
//! Everything here is computed in rationals so admissibility flags carry no
//! float drift: the Sobolev exponent, the lower-order growth ceiling r0, the
//! fluid convection exponent, and the interpolation weight lambda.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub type Rational = BigRational;

pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite f64.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    BigRational::from_float(x).ok_or_else(|| Error::value(format!("non-finite number {x}")))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Render as "num/den", or just "num" for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// Digit caps keep the grammar closed under canonicalization: a decimal of
// at most MAX_DECIMAL_LEN characters turns into a fraction with well under
// MAX_COMPONENT_DIGITS digits per side, reduction never grows a component,
// and integers produced by reduction stay within the integer cap. So the
// canonical rendering of any accepted literal is itself accepted.
const MAX_COMPONENT_DIGITS: usize = 128;
const MAX_DECIMAL_LEN: usize = 64;

/// Parse "11/5", "-3", or a plain decimal like "2.5" into an exact rational.
///
/// The grammar is deliberately small and length-capped so arbitrary input
/// cannot trigger large allocations.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::value("empty rational literal"));
    }
    if t.len() > 2 * MAX_COMPONENT_DIGITS + 3 {
        return Err(Error::value("rational literal too long"));
    }
    if let Some((num, den)) = t.split_once('/') {
        let n = parse_signed_int(num)?;
        let d = parse_signed_int(den)?;
        if d.is_zero() {
            return Err(Error::value(format!("zero denominator in '{t}'")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if t.len() > MAX_DECIMAL_LEN {
            return Err(Error::value("decimal literal too long"));
        }
        let negative = int_part.trim_start().starts_with('-');
        let i = parse_signed_int(
            if int_part.is_empty() || int_part == "-" || int_part == "+" {
                "0"
            } else {
                int_part
            },
        )?;
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::value(format!("invalid decimal '{t}'")));
        }
        let f: BigInt = frac_part
            .parse()
            .map_err(|_| Error::value(format!("invalid decimal '{t}'")))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = BigRational::new(f, scale);
        let whole = BigRational::from_integer(i);
        return Ok(if negative { whole - frac } else { whole + frac });
    }
    Ok(BigRational::from_integer(parse_signed_int(t)?))
}

fn parse_signed_int(text: &str) -> Result<BigInt> {
    let t = text.trim();
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::value(format!("invalid integer '{text}'")));
    }
    if body.len() > MAX_COMPONENT_DIGITS {
        return Err(Error::value("integer literal too long"));
    }
    t.parse()
        .map_err(|_| Error::value(format!("invalid integer '{text}'")))
}

/// Admissibility flags; `None` marks an inequality whose defining quantity
/// is out of range (for example the fluid exponent outside (2/5, 3)).
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFlags {
    pub scalar_admissible: bool,
    pub fluid_admissible: bool,
    pub two_pprime_le_r: Option<bool>,
    pub lambda_interpolation: Option<bool>,
}

/// All derived embedding exponents for a dimension/growth pair. Rationals
/// throughout; every value is recomputable from (d, p) alone.
#[derive(Debug, Clone)]
pub struct ExponentReport {
    pub d: u32,
    pub p: Rational,
    /// Sobolev exponent d p/(d-p); `None` encodes the p >= d branch where
    /// the embedding exponent is unbounded.
    pub sigma: Option<Rational>,
    /// Growth ceiling p (d+2)/d for the lower-order term.
    pub r0: Rational,
    /// Convection dual exponent 12p/(-5p^2+17p-6) (three-dimensional
    /// formula), defined for p in (2/5, 3).
    pub r_fluid: Option<Rational>,
    pub two_pprime: Rational,
    /// Interpolation weight solving 1/((r0-1) sigma') = (1-lambda)/2 + lambda/sigma.
    pub lambda: Option<Rational>,
    pub flags: ExponentFlags,
}

pub fn exponent_report(d: u32, p: &Rational) -> Result<ExponentReport> {
    if d == 0 {
        return Err(Error::value("dimension must be at least 1"));
    }
    let one = Rational::one();
    let two = rational_int(2);
    if *p <= one {
        return Err(Error::value(format!(
            "growth exponent p must exceed 1, got {}",
            format_rational(p)
        )));
    }
    let dd = rational_int(d as i64);
    let pprime = p / (p - &one);
    let two_pprime = &two * &pprime;
    let r0 = p * (&dd + &two) / &dd;

    let sigma = if *p < dd {
        Some(&dd * p / (&dd - p))
    } else {
        None
    };

    let lambda = sigma.as_ref().and_then(|sig| {
        if *sig == two {
            return None;
        }
        let sigma_prime = sig / (sig - &one);
        let q = (&r0 - &one) * &sigma_prime;
        // 1/q = (1-lambda)/2 + lambda/sigma
        let lhs = one.clone() / &q;
        let half = rational(1, 2);
        let slope = &one / sig - &half;
        Some((lhs - &half) / slope)
    });

    // denominator of the fluid exponent: -5p^2 + 17p - 6, positive on (2/5, 3)
    let denom = rational_int(-5) * p * p + rational_int(17) * p - rational_int(6);
    let r_fluid = if denom.is_positive() {
        Some(rational_int(12) * p / denom)
    } else {
        None
    };

    let scalar_admissible = *p > &two * &dd / (&dd + &two);
    let fluid_admissible = *p >= rational(11, 5);
    let two_pprime_le_r = r_fluid.as_ref().map(|r| two_pprime <= *r);
    let lambda_interpolation = lambda.as_ref().map(|l| {
        let in_range = !l.is_negative() && *l <= one;
        in_range && l * (&r0 - &one) <= p - &one
    });

    Ok(ExponentReport {
        d,
        p: p.clone(),
        sigma,
        r0,
        r_fluid,
        two_pprime,
        lambda,
        flags: ExponentFlags {
            scalar_admissible,
            fluid_admissible,
            two_pprime_le_r,
            lambda_interpolation,
        },
    })
}

impl ExponentReport {
    /// Stable JSON rendering with rationals as strings; the unbounded
    /// Sobolev branch serializes as "inf".
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Mirror<'a> {
            d: u32,
            p: String,
            sigma: String,
            r0: String,
            r_fluid: Option<String>,
            two_pprime: String,
            lambda: Option<String>,
            flags: &'a ExponentFlags,
        }
        serde_json::to_value(Mirror {
            d: self.d,
            p: format_rational(&self.p),
            sigma: self
                .sigma
                .as_ref()
                .map(format_rational)
                .unwrap_or_else(|| "inf".to_string()),
            r0: format_rational(&self.r0),
            r_fluid: self.r_fluid.as_ref().map(format_rational),
            two_pprime: format_rational(&self.two_pprime),
            lambda: self.lambda.as_ref().map(format_rational),
            flags: &self.flags,
        })
        .expect("mirror struct always serializes")
    }
}

/// Enumerate all rationals in [11/5, 3) with denominator at most `max_den`
/// and report whether the convection admissibility flag holds at each.
pub fn sweep_fluid_admissibility(max_den: i64) -> Vec<(Rational, bool)> {
    let lo = rational(11, 5);
    let hi = rational_int(3);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for den in 1..=max_den {
        let num_lo = (11 * den).div_euclid(5);
        for num in num_lo..(3 * den) {
            let p = rational(num, den);
            if p < lo || p >= hi || !seen.insert(p.clone()) {
                continue;
            }
            let report = exponent_report(3, &p).expect("p in (1,3) is valid");
            out.push((p, report.flags.two_pprime_le_r == Some(true)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_decimals() {
        assert_eq!(parse_rational("11/5").unwrap(), rational(11, 5));
        assert_eq!(parse_rational("2").unwrap(), rational_int(2));
        assert_eq!(parse_rational("2.5").unwrap(), rational(5, 2));
        assert_eq!(parse_rational("-3/7").unwrap(), rational(-3, 7));
        assert_eq!(parse_rational(" -0.25").unwrap(), rational(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn canonical_form_of_accepted_literals_reparses() {
        // found by fuzzing: a long decimal whose reduced fraction has more
        // digits than the literal itself
        let nasty = "\n666666.6666666666666666666666666666666666666666\n";
        for text in [
            nasty,
            "0.4999999999999999999999999999999999999",
            "-000007/00009",
        ] {
            let value = parse_rational(text).unwrap();
            let shown = format_rational(&value);
            assert_eq!(parse_rational(&shown).unwrap(), value, "{shown}");
        }
        // long literals stay rejected rather than allocating
        let huge = "9".repeat(400);
        assert!(parse_rational(&huge).is_err());
        assert!(parse_rational(&format!("1.{}", "9".repeat(80))).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(512))]

        #[test]
        fn arbitrary_strings_never_panic(text in "\\PC{0,80}") {
            if let Ok(value) = parse_rational(&text) {
                let shown = format_rational(&value);
                proptest::prop_assert_eq!(parse_rational(&shown).unwrap(), value);
            }
        }

        #[test]
        fn numeric_literals_round_trip(num in -10_000i64..10_000, den in 1i64..10_000) {
            let value = parse_rational(&format!("{num}/{den}")).unwrap();
            proptest::prop_assert_eq!(&value, &rational(num, den));
            let shown = format_rational(&value);
            proptest::prop_assert_eq!(parse_rational(&shown).unwrap(), value);
        }
    }

    #[test]
    fn fluid_boundary_case() {
        let rep = exponent_report(3, &rational(11, 5)).unwrap();
        assert_eq!(rep.r_fluid.as_ref().unwrap(), &rational(11, 3));
        assert_eq!(&rep.two_pprime, &rational(11, 3));
        assert_eq!(rep.flags.two_pprime_le_r, Some(true));
        assert!(rep.flags.fluid_admissible);
    }

    #[test]
    fn scalar_interpolation_case() {
        let rep = exponent_report(3, &rational_int(2)).unwrap();
        assert_eq!(rep.sigma.as_ref().unwrap(), &rational_int(6));
        assert_eq!(&rep.r0, &rational(10, 3));
        let lambda = rep.lambda.as_ref().unwrap();
        assert_eq!(lambda, &rational(3, 7));
        // lambda (r0 - 1) = p - 1 exactly
        assert_eq!(lambda * (&rep.r0 - rational_int(1)), rational_int(1));
        assert_eq!(rep.flags.lambda_interpolation, Some(true));
    }

    #[test]
    fn fluid_flag_fails_below_eleven_fifths() {
        let rep = exponent_report(3, &rational_int(2)).unwrap();
        assert_eq!(rep.r_fluid.as_ref().unwrap(), &rational_int(3));
        assert_eq!(&rep.two_pprime, &rational_int(4));
        assert_eq!(rep.flags.two_pprime_le_r, Some(false));
        assert!(!rep.flags.fluid_admissible);
    }

    #[test]
    fn rejects_p_at_most_one() {
        assert!(exponent_report(2, &rational_int(1)).is_err());
        assert!(exponent_report(2, &rational(1, 2)).is_err());
    }

    #[test]
    fn unbounded_branch_for_large_p() {
        let rep = exponent_report(1, &rational_int(3)).unwrap();
        assert!(rep.sigma.is_none());
        assert!(rep.lambda.is_none());
        assert_eq!(rep.to_json()["sigma"], "inf");
    }

    #[test]
    fn sweep_is_entirely_admissible() {
        let sweep = sweep_fluid_admissibility(12);
        assert!(!sweep.is_empty());
        assert!(sweep.iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn json_shape_is_stable() {
        let rep = exponent_report(3, &rational(11, 5)).unwrap();
        let v = rep.to_json();
        assert_eq!(v["p"], "11/5");
        assert_eq!(v["r_fluid"], "11/3");
        assert_eq!(v["flags"]["two_pprime_le_r"], true);
    }
}
