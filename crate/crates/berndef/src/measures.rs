//! Exact Bernoulli and binomial measures.
//!
//! Probabilities are computed as exact rationals; log2-probabilities are a
//! rendering on top (f64, with −∞ for impossible outcomes under a degenerate
//! parameter). The two measure shapes share one parameter validation path:
//! B_{n,p} on length-n binary sequences with P{x} = p^k (1−p)^(n−k), and
//! bin_{n,p} on counts {0..n} with P{k} = C(n,k) p^k (1−p)^(n−k). The
//! uniform-on-a-count-class context is a [`CountClass`].

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use num::bigint::BigInt;
use num::traits::{One, Pow, Signed, Zero};

use serde::Serializer;
use std::fmt;

/// A log2-probability in bits: finite, or −∞ for probability zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogProb {
    Finite(f64),
    NegInf,
}

impl LogProb {
    pub fn from_prob(p: &Rat) -> LogProb {
        if p.is_zero() {
            LogProb::NegInf
        } else {
            LogProb::Finite(exact::log2_f64(p))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LogProb::Finite(_))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            LogProb::Finite(v) => v,
            LogProb::NegInf => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogProb::Finite(v) => write!(f, "{v}"),
            LogProb::NegInf => f.write_str("-inf"),
        }
    }
}

impl serde::Serialize for LogProb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LogProb::Finite(v) => s.serialize_f64(*v),
            LogProb::NegInf => s.serialize_str("-inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    Bernoulli,
    Binomial,
}

/// A fully specified measure: length/trial count n, success probability p
/// (exact rational in [0,1]), and which of the two shapes it is.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpec {
    pub n: u64,
    pub p: Rat,
    pub kind: MeasureKind,
}

impl MeasureSpec {
    pub fn bernoulli(n: u64, p: Rat) -> Result<Self> {
        check_p(&p)?;
        Ok(MeasureSpec { n, p, kind: MeasureKind::Bernoulli })
    }

    pub fn binomial(n: u64, p: Rat) -> Result<Self> {
        check_p(&p)?;
        Ok(MeasureSpec { n, p, kind: MeasureKind::Binomial })
    }

    /// Point masses: p = 0 or p = 1 concentrate everything on one outcome.
    pub fn is_degenerate(&self) -> bool {
        self.p.is_zero() || self.p.is_one()
    }
}

fn check_p(p: &Rat) -> Result<()> {
    if p.is_negative() || *p > Rat::one() {
        return Err(Error::input(format!("p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// The class 2^(n)_k of length-n sequences with exactly k ones, carrying the
/// uniform measure. Used as the conditioning context of the exchangeability
/// deficiency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountClass {
    pub n: u64,
    pub k: u64,
}

impl CountClass {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if k > n {
            return Err(Error::input(format!("count class needs k <= n, got k={k}, n={n}")));
        }
        Ok(CountClass { n, k })
    }

    /// |2^(n)_k| = C(n, k).
    pub fn size(&self) -> BigInt {
        exact::binom_big(self.n, self.k)
    }

    pub fn log2_size(&self) -> f64 {
        exact::log2_binom_f64(self.n, self.k)
    }

    /// Uniform probability of any member, 1/C(n,k).
    pub fn uniform_prob(&self) -> Rat {
        Rat::new(BigInt::one(), self.size())
    }
}

/// p^k with the 0^0 = 1 convention, staying in canonical form.
pub(crate) fn pow_rat(r: &Rat, k: u64) -> Rat {
    if k == 0 {
        return Rat::one();
    }
    // gcd(a,b) = 1 implies gcd(a^k, b^k) = 1, so raw construction is canonical
    Rat::new_raw(Pow::pow(r.numer(), k), Pow::pow(r.denom(), k))
}

/// Per-sequence probability p^k (1−p)^(n−k) shared by every x with k ones.
pub fn class_seq_prob_exact(n: u64, p: &Rat, k: u64) -> Result<Rat> {
    check_p(p)?;
    if k > n {
        return Err(Error::input(format!("k={k} exceeds n={n}")));
    }
    let q = Rat::one() - p;
    let pk = pow_rat(p, k);
    let qm = pow_rat(&q, n - k);
    // For canonical p = a/b, 1−p = (b−a)/b is canonical too, and each
    // numerator is coprime to both denominators — the product is already
    // in lowest terms, so skip the (large, pointless) cross-gcds.
    Ok(Rat::new_raw(pk.numer() * qm.numer(), pk.denom() * qm.denom()))
}

/// Exact B_{n,p}{x}.
pub fn bernoulli_prob_exact(n: u64, p: &Rat, x: &BitString) -> Result<Rat> {
    if x.len() as u64 != n {
        return Err(Error::input(format!(
            "sequence length {} does not match n = {n}",
            x.len()
        )));
    }
    class_seq_prob_exact(n, p, x.count_ones())
}

/// Exact bin_{n,p}{k}.
pub fn binomial_prob_exact(n: u64, p: &Rat, k: u64) -> Result<Rat> {
    let per_seq = class_seq_prob_exact(n, p, k)?;
    Ok(Rat::from_integer(exact::binom_big(n, k)) * per_seq)
}

/// log2 B_{n,p}{x} in bits; −∞ when the outcome is impossible.
pub fn bernoulli_log_prob(n: u64, p: &Rat, x: &BitString) -> Result<LogProb> {
    Ok(LogProb::from_prob(&bernoulli_prob_exact(n, p, x)?))
}

/// log2 bin_{n,p}{k} in bits; −∞ when the outcome is impossible.
pub fn binomial_log_prob(n: u64, p: &Rat, k: u64) -> Result<LogProb> {
    Ok(LogProb::from_prob(&binomial_prob_exact(n, p, k)?))
}

/// log2 C(n, k): the information content of picking a member of a count
/// class, and the bridge between the two measure shapes.
pub fn log2_binom(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::input(format!("log2_binom needs k <= n, got k={k}, n={n}")));
    }
    Ok(exact::log2_binom_f64(n, k))
}
