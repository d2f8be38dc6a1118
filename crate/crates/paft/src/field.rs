//! Numeric abstraction for estimator cores.
//!
//! Every curve in this crate is a finite sum/product of ratios of event
//! counts, so the estimators are written once over a small [`Field`] trait and
//! instantiated both at `f64` (production) and at [`num::BigRational`]
//! (exact arithmetic, used by the identity-check suites and the golden-table
//! reproductions where results must match cell for cell).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;

/// Scalar type the estimator cores are generic over.
///
/// Implementations must form a field over the rationals reachable from
/// integer counts: exact for [`BigRational`], IEEE rounding for `f64`.
pub trait Field:
    Clone
    + PartialEq
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;

    /// Embed an event count.
    fn from_count(count: u64) -> Self;

    /// `num / den` for counts; callers must guarantee `den > 0`.
    fn ratio(num: u64, den: u64) -> Self {
        debug_assert!(den > 0, "ratio denominator must be positive");
        Self::from_count(num) / Self::from_count(den)
    }

    /// Lossy view for reporting.
    fn to_f64(&self) -> f64;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_count(count: u64) -> Self {
        count as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        num::Zero::zero()
    }

    fn one() -> Self {
        num::One::one()
    }

    fn from_count(count: u64) -> Self {
        BigRational::from_integer(BigInt::from(count))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Parse a rational from `"p/q"` or a plain integer string (test helper for
/// transcribed golden tables).
pub fn rational(text: &str) -> BigRational {
    let parse_int = |s: &str| -> BigInt {
        s.trim()
            .parse::<BigInt>()
            .unwrap_or_else(|_| panic!("bad integer literal {s:?}"))
    };
    match text.split_once('/') {
        Some((p, q)) => BigRational::new(parse_int(p), parse_int(q)),
        None => BigRational::from_integer(parse_int(text)),
    }
}

/// Render a rational exactly: as a terminating decimal when the reduced
/// denominator is of the form `2^a * 5^b`, otherwise as `p/q`.
///
/// Used by the ledger CSV export so that exact tables are human-readable
/// (`1.25`, `1.875`) without ever rounding.
pub fn render_exact(value: &BigRational) -> String {
    use num::{One, Signed, Zero};

    let numer = value.numer().clone();
    let denom = value.denom().clone();
    if denom.is_one() {
        return numer.to_string();
    }

    // Count factors of 2 and 5 in the reduced denominator.
    let (two, five, ten) = (BigInt::from(2), BigInt::from(5), BigInt::from(10));
    let mut rest = denom.clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{numer}/{denom}");
    }

    // Scale numerator so the denominator becomes a power of ten.
    let digits = twos.max(fives);
    let mut scaled = numer.abs();
    for _ in 0..(digits - twos) {
        scaled *= &two;
    }
    for _ in 0..(digits - fives) {
        scaled *= &five;
    }
    let mut pow10 = BigInt::one();
    for _ in 0..digits {
        pow10 *= &ten;
    }
    let int_part = &scaled / &pow10;
    let frac_part = &scaled % &pow10;
    let sign = if value.is_negative() { "-" } else { "" };
    format!(
        "{sign}{int_part}.{frac:0width$}",
        frac = frac_part,
        width = digits as usize
    )
}
