//! Exact arithmetic primitives.
//!
//! Every verdict in this crate (code lengths, test values, deficiency floors,
//! Kraft and expectation comparisons) reduces to integer comparisons on
//! `BigRational` values; floating point only ever renders numbers for
//! reports. The two workhorses are [`floor_log2`], which computes
//! ⌊log2 r⌋ for a positive rational exactly from numerator/denominator bit
//! lengths, and [`sin_sq_of_sqrt`], an alternating rational series for
//! sin²(√q) with a certified truncation bound, used to pin irrational grid
//! parameters down to a dyadic rational of chosen precision.

use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use num::Integer;

pub type Rat = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// 2^e as an exact rational, for any sign of e.
pub fn two_pow(e: i64) -> Rat {
    if e >= 0 {
        Rat::from_integer(BigInt::one() << e as u64)
    } else {
        Rat::new(BigInt::one(), BigInt::one() << (-e) as u64)
    }
}

/// ⌊log2 r⌋ for r > 0, exactly.
///
/// With d the difference of numerator and denominator bit lengths,
/// r ∈ [2^(d−1), 2^(d+1)), so the floor is d or d−1, settled by one
/// shift-and-compare. Panics on r ≤ 0 (caller bug).
pub fn floor_log2(r: &Rat) -> i64 {
    assert!(r.is_positive(), "floor_log2 needs a positive argument, got {r}");
    let a = r.numer();
    let b = r.denom();
    let d = a.bits() as i64 - b.bits() as i64;
    let at_least_2_to_d = if d >= 0 {
        *a >= (b << d as u64)
    } else {
        (a << (-d) as u64) >= *b
    };
    if at_least_2_to_d {
        d
    } else {
        d - 1
    }
}

/// ⌈−log2 r⌉ for r ∈ (0, 1] — the ideal-code length of probability r.
/// Equals −⌊log2 r⌋ for every positive rational (the boundary case r = 2^f
/// lands on the same value from both sides).
pub fn ceil_neg_log2(r: &Rat) -> i64 {
    -floor_log2(r)
}

/// log2 of a positive big integer as f64, good to ~1e-13 absolute.
pub fn log2_bigint(a: &BigInt) -> f64 {
    assert!(a.is_positive(), "log2_bigint needs a positive argument");
    let bits = a.bits();
    let shift = bits.saturating_sub(63);
    let top = (a >> shift).to_u64().expect("value shifted into 63 bits") as f64;
    top.log2() + shift as f64
}

/// log2 of a positive rational as f64. The integer part is exact;
/// only the fractional part carries f64 rounding.
pub fn log2_f64(r: &Rat) -> f64 {
    assert!(r.is_positive(), "log2_f64 needs a positive argument");
    log2_bigint(r.numer()) - log2_bigint(r.denom())
}

/// Rational → f64 without overflowing on huge numerators/denominators.
/// Report-rendering only; never feeds a verdict.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let negative = r.is_negative();
    let a = r.numer().abs();
    let b = r.denom();
    let (ta, sa) = top_bits(&a);
    let (tb, sb) = top_bits(b);
    let v = (ta as f64 / tb as f64) * ((sa as i64 - sb as i64) as f64).exp2();
    if negative {
        -v
    } else {
        v
    }
}

/// (t, s) with value ≈ t·2^s and t occupying at most 63 bits.
fn top_bits(a: &BigInt) -> (u64, u64) {
    let shift = a.bits().saturating_sub(63);
    ((a >> shift).to_u64().expect("shifted into 63 bits"), shift)
}

/// Exact binomial coefficient C(n, k).
///
/// Multiplicative form with exact division at every step. For n beyond
/// 20 000 with both k and n−k large this would get slow; [`log2_binom_f64`]
/// is the right call at that scale.
pub fn binom_big(n: u64, k: u64) -> BigInt {
    assert!(k <= n, "binomial C({n},{k}) needs k <= n");
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// log2 C(n, k) as f64: exact big-integer route when affordable, Stirling
/// series otherwise (error well below 1e-9 in the regime it covers).
pub fn log2_binom_f64(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    let m = k.min(n - k);
    if m == 0 {
        return 0.0;
    }
    if n <= 20_000 {
        return log2_bigint(&binom_big(n, k));
    }
    if m <= 64 {
        // Few factors: exact product of small ratios in log space.
        return (0..m).map(|i| (((n - i) as f64) / ((i + 1) as f64)).log2()).sum();
    }
    (ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64))
        / std::f64::consts::LN_2
}

/// Stirling series for ln Γ(z); callers guarantee z ≥ 65, where three
/// correction terms leave error under 1e-12.
fn ln_gamma(z: f64) -> f64 {
    let z2 = z * z;
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * z)
        - 1.0 / (360.0 * z * z2)
        + 1.0 / (1260.0 * z * z2 * z2)
}

/// Round r ≥ 0 to the nearest multiple of 2^−frac_bits, ties to even.
pub fn dyadic_round(r: &Rat, frac_bits: u32) -> Rat {
    assert!(!r.is_negative(), "dyadic_round is defined for r >= 0");
    let scale = BigInt::one() << frac_bits;
    let scaled = r * Rat::from_integer(scale.clone());
    let (mut q, rem) = scaled.numer().div_rem(scaled.denom());
    let twice: BigInt = &rem * 2;
    let round_up = match twice.cmp(scaled.denom()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => q.is_odd(),
        std::cmp::Ordering::Less => false,
    };
    if round_up {
        q += 1;
    }
    Rat::new(q, scale)
}

/// sin²(√q) for rational q ∈ [0, 3), as a dyadic rational with `frac_bits`
/// fractional bits; total error (truncation + rounding) is below
/// 2^−frac_bits.
///
/// Uses sin²(√q) = Σ_{j≥1} (−1)^{j+1} 4^j q^j / (2·(2j)!), an alternating
/// series whose terms strictly decrease for q < 3, so the first omitted term
/// bounds the truncation error. Everything up to the final rounding is exact.
pub fn sin_sq_of_sqrt(q: &Rat, frac_bits: u32) -> Rat {
    assert!(!q.is_negative(), "sin_sq_of_sqrt needs q >= 0");
    assert!(*q < rat_int(3), "sin_sq_of_sqrt series requires q < 3, got {q}");
    if q.is_zero() {
        return Rat::zero();
    }
    let eps = two_pow(-(frac_bits as i64 + 8));
    let four_q = q * rat_int(4);
    let mut term = q.clone(); // j = 1 term: 4q/(2·2!) = q
    let mut sum = Rat::zero();
    let mut positive = true;
    let mut j: i64 = 1;
    loop {
        if term < eps {
            break;
        }
        if positive {
            sum += &term;
        } else {
            sum -= &term;
        }
        positive = !positive;
        term = term * &four_q / rat_int((2 * j + 1) * (2 * j + 2));
        j += 1;
    }
    let rounded = dyadic_round(&sum.max(Rat::zero()), frac_bits);
    rounded.min(Rat::one()).max(Rat::zero())
}

/// Parse "a/b", an integer, or a decimal like "0.05" into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::input("empty number"));
    }
    let bad = |detail: &str| Error::input(format!("cannot parse {s:?} as a ratio: {detail}"));
    if let Some((a, b)) = s.split_once('/') {
        let numer: BigInt = a.trim().parse().map_err(|_| bad("bad numerator"))?;
        let denom: BigInt = b.trim().parse().map_err(|_| bad("bad denominator"))?;
        if denom.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(Rat::new(numer, denom));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if !frac.bytes().all(|c| c.is_ascii_digit()) || frac.is_empty() {
            return Err(bad("bad fractional part"));
        }
        let whole_part: BigInt = if whole.is_empty() || whole == "-" || whole == "+" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad("bad integer part"))?
        };
        let negative = whole.starts_with('-');
        let frac_num: BigInt = frac.parse().map_err(|_| bad("bad fractional part"))?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_rat = Rat::new(frac_num, denom);
        let whole_rat = Rat::from_integer(whole_part);
        return Ok(if negative {
            whole_rat - frac_rat
        } else {
            whole_rat + frac_rat
        });
    }
    let v: BigInt = s.parse().map_err(|_| bad("not an integer"))?;
    Ok(Rat::from_integer(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_log2_small_ratios() {
        assert_eq!(floor_log2(&rat(35, 8)), 2);
        assert_eq!(floor_log2(&rat(1, 8)), -3);
        assert_eq!(floor_log2(&rat(8, 15)), -1);
        assert_eq!(floor_log2(&rat_int(1)), 0);
        assert_eq!(floor_log2(&rat(1023, 1024)), -1);
        assert_eq!(floor_log2(&rat(1024, 1023)), 0);
    }

    #[test]
    fn floor_log2_exact_powers() {
        for e in [-200i64, -5, -1, 0, 1, 7, 200] {
            assert_eq!(floor_log2(&two_pow(e)), e);
        }
    }

    #[test]
    fn ceil_neg_log2_is_code_length() {
        assert_eq!(ceil_neg_log2(&rat(1, 2)), 1);
        assert_eq!(ceil_neg_log2(&rat(3, 8)), 2); // -log2(3/8) = 1.415 -> 2
        assert_eq!(ceil_neg_log2(&rat(1, 8)), 3);
        assert_eq!(ceil_neg_log2(&rat_int(1)), 0);
    }

    #[test]
    fn log2_f64_matches_known_values() {
        assert!((log2_f64(&rat(27, 256)) - (-3.245112497836532)).abs() < 1e-12);
        assert!((log2_f64(&rat(3, 10)) - (-1.7369655941662063)).abs() < 1e-12);
        assert!((log2_f64(&rat_int(252)) - 7.977279923499917).abs() < 1e-12);
    }

    #[test]
    fn log2_f64_survives_huge_operands() {
        // numerator and denominator far beyond f64 range individually
        let r = Rat::new(BigInt::one() << 5000u32, (BigInt::one() << 5000u32) + 1);
        let v = log2_f64(&r);
        assert!(v <= 0.0 && v > -1e-9, "{v}");
    }

    #[test]
    fn binomials() {
        assert_eq!(binom_big(10, 5), BigInt::from(252));
        assert_eq!(binom_big(24, 12), BigInt::from(2_704_156));
        assert_eq!(binom_big(12, 6), BigInt::from(924));
        assert_eq!(binom_big(4, 0), BigInt::one());
        assert_eq!(binom_big(0, 0), BigInt::one());
    }

    #[test]
    fn log2_binom_routes_agree() {
        // exact route
        assert!((log2_binom_f64(10, 5) - 7.977279923499917).abs() < 1e-12);
        assert!((log2_binom_f64(4, 2) - 2.584962500721156).abs() < 1e-12);
        // small-k product route vs exact on a case both can do
        let exact = log2_bigint(&binom_big(30_000, 10));
        let prod = log2_binom_f64(30_000, 10);
        assert!((exact - prod).abs() < 1e-9, "{exact} vs {prod}");
        // Stirling route vs exact: compare at the largest n the exact route owns
        let exact = log2_bigint(&binom_big(20_000, 10_000));
        let stirling = (ln_gamma(20_001.0) - 2.0 * ln_gamma(10_001.0)) / std::f64::consts::LN_2;
        assert!((exact - stirling).abs() < 1e-6, "{exact} vs {stirling}");
    }

    #[test]
    fn dyadic_rounding_ties_to_even() {
        assert_eq!(dyadic_round(&rat(1, 3), 4), rat(5, 16));
        assert_eq!(dyadic_round(&rat(3, 32), 4), rat(1, 8)); // 1.5 -> 2 (even)
        assert_eq!(dyadic_round(&rat(1, 32), 4), Rat::zero()); // 0.5 -> 0 (even)
        assert_eq!(dyadic_round(&rat(7, 16), 4), rat(7, 16)); // representable: unchanged
    }

    #[test]
    fn sin_sq_series_matches_f64_oracle() {
        for (num, den) in [(1i64, 4i64), (9, 4), (247, 100), (1, 1), (1, 1000), (0, 1)] {
            let q = rat(num, den);
            let got = rat_to_f64(&sin_sq_of_sqrt(&q, 96));
            let want = (num as f64 / den as f64).sqrt().sin().powi(2);
            assert!(
                (got - want).abs() < 1e-12,
                "sin^2(sqrt({num}/{den})): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn sin_sq_series_precision_scales() {
        // at 96 fractional bits two different precisions agree to 2^-90
        let q = rat(123, 77);
        let a = sin_sq_of_sqrt(&q, 96);
        let b = sin_sq_of_sqrt(&q, 128);
        assert!((a - b).abs() < two_pow(-90));
    }

    #[test]
    fn parse_ratio_forms() {
        assert_eq!(parse_ratio("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_ratio("0.05").unwrap(), rat(1, 20));
        assert_eq!(parse_ratio("0.3").unwrap(), rat(3, 10));
        assert_eq!(parse_ratio("1").unwrap(), rat_int(1));
        assert_eq!(parse_ratio("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_ratio(".5").unwrap(), rat(1, 2));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("abc").is_err());
        assert!(parse_ratio("").is_err());
    }

    #[test]
    fn rat_to_f64_handles_extremes() {
        assert_eq!(rat_to_f64(&Rat::zero()), 0.0);
        assert!((rat_to_f64(&rat(-7, 2)) + 3.5).abs() < 1e-15);
        let tiny = two_pow(-2000);
        assert_eq!(rat_to_f64(&tiny), 0.0); // underflow to zero is fine for rendering
        let v = rat_to_f64(&rat(1, 3));
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}
