//! Reference distributions — the q side of every likelihood ratio.
//!
//! Each distribution evaluates exactly (BigRational), at two levels:
//! per-sequence mass q{x} on 2^(n), and the induced count distribution
//! r(k) = Σ_{x: ones(x)=k} q{x} on {0,…,n}. Every shipped default except
//! [`QDist::Markov1`] is exchangeable — q{x} depends on x only through its
//! ones-count — which makes r(k) = q{x_k}·C(n,k) exact and cheap, and is
//! what ties sequence-level and count-level deficiencies together. Markov1
//! is deliberately *not* exchangeable: it is the within-class structure
//! probe (its ratio against the uniform count class detects runs and
//! alternation that counts alone cannot see).

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use crate::partition::build_partition;
use num::bigint::BigInt;
use num::traits::{One, Zero};

/// A distribution on binary sequences of any length n.
#[derive(Clone, Debug, PartialEq)]
pub enum QDist {
    /// Adaptive successor-rule distribution: bit t is predicted with
    /// probability (count of that value so far + 1/2)/(t + 1). Exchangeable;
    /// closed form per count class.
    Kt,
    /// Two-part: pick the count uniformly (1/(n+1)), then the sequence
    /// uniformly inside its class.
    TwoPartUniform,
    /// Partition-based: pick a cell uniformly, a count uniformly inside the
    /// cell, then the sequence uniformly inside its class.
    CellUniform,
    /// A Bernoulli law B_{n,p} used as a reference (e.g. self-tests).
    Bernoulli(Rat),
    /// Order-1 adaptive: the successor rule applied per previous-bit
    /// context (plus a start context). Not exchangeable.
    Markov1,
    /// Σ w_i·q_i. Normalized iff the weights sum to 1 and members are.
    Mix(Vec<(Rat, QDist)>),
}

/// A distribution on counts {0,…,n}.
#[derive(Clone, Debug, PartialEq)]
pub enum CountDist {
    /// Counts induced by [`QDist::Kt`].
    KtInduced,
    /// Uniform on {0,…,n}.
    Uniform,
    /// Cell-based: r(k) = 1/(num_cells·|cell(k)|).
    CellBased,
    /// Binomial bin_{n,p} as a reference.
    Binomial(Rat),
    Mix(Vec<(Rat, CountDist)>),
}

/// ∏_{i=0}^{m−1} (2i+1) — the odd factorial ladder the successor rule walks.
fn odd_product(m: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..m {
        acc *= 2 * i + 1;
    }
    acc
}

/// Exact KT mass of any sequence with k ones among n:
/// ∏_{i<k}(i+1/2) · ∏_{j<n−k}(j+1/2) / n!.
pub fn kt_class_prob(n: u64, k: u64) -> Rat {
    assert!(k <= n);
    let numer = odd_product(k) * odd_product(n - k);
    let mut denom = BigInt::one() << n;
    for t in 1..=n {
        denom *= t;
    }
    Rat::new(numer, denom)
}

/// KT mass by walking the sequence — the definitional route, used to
/// cross-check the closed form.
pub fn kt_sequential_prob(x: &BitString) -> Rat {
    let mut ones = 0u64;
    let mut prob = Rat::one();
    for (t, bit) in x.iter().enumerate() {
        let zeros = t as u64 - ones;
        let favorable = if bit == 1 { ones } else { zeros };
        prob *= Rat::new(BigInt::from(2 * favorable + 1), BigInt::from(2 * (t as u64 + 1)));
        if bit == 1 {
            ones += 1;
        }
    }
    prob
}

/// Order-1 adaptive mass: one successor-rule counter per context
/// {start, after-0, after-1}.
pub fn markov1_prob(x: &BitString) -> Rat {
    // counts[ctx] = (zeros seen, ones seen); ctx 0 = start, 1 = after-0, 2 = after-1
    let mut counts = [[0u64; 2]; 3];
    let mut prob = Rat::one();
    let mut ctx = 0usize;
    for bit in x.iter() {
        let seen = counts[ctx];
        let total = seen[0] + seen[1];
        prob *= Rat::new(
            BigInt::from(2 * seen[bit as usize] + 1),
            BigInt::from(2 * (total + 1)),
        );
        counts[ctx][bit as usize] += 1;
        ctx = if bit == 1 { 2 } else { 1 };
    }
    prob
}

impl QDist {
    pub fn name(&self) -> String {
        match self {
            QDist::Kt => "kt".into(),
            QDist::TwoPartUniform => "two-part-uniform".into(),
            QDist::CellUniform => "cell-uniform".into(),
            QDist::Bernoulli(p) => format!("bernoulli({p})"),
            QDist::Markov1 => "markov1".into(),
            QDist::Mix(members) => {
                let parts: Vec<String> =
                    members.iter().map(|(w, q)| format!("{}:{}", q.name(), w)).collect();
                format!("mix({})", parts.join(","))
            }
        }
    }

    /// The shipped engine default: the three count-aware references in equal
    /// thirds — normalized, exchangeable, and factorizable over classes.
    pub fn default_engine_mix() -> QDist {
        let third = exact::rat(1, 3);
        QDist::Mix(vec![
            (third.clone(), QDist::Kt),
            (third.clone(), QDist::TwoPartUniform),
            (third, QDist::CellUniform),
        ])
    }

    pub fn is_exchangeable(&self) -> bool {
        match self {
            QDist::Markov1 => false,
            QDist::Mix(members) => members.iter().all(|(_, q)| q.is_exchangeable()),
            _ => true,
        }
    }

    /// q{x} for any x in a class with k ones — exchangeable members only.
    pub fn seq_prob_of_count(&self, n: u64, k: u64) -> Result<Rat> {
        match self {
            QDist::Kt => Ok(kt_class_prob(n, k)),
            QDist::TwoPartUniform => {
                let class = exact::binom_big(n, k);
                Ok(Rat::new(BigInt::one(), BigInt::from(n + 1) * class))
            }
            QDist::CellUniform => {
                let partition = build_partition(n.max(1))?;
                if n == 0 {
                    return Ok(Rat::one());
                }
                let cell = partition.cell_of(k)?;
                let class = exact::binom_big(n, k);
                Ok(Rat::new(
                    BigInt::one(),
                    BigInt::from(partition.num_cells()) * cell.len() * class,
                ))
            }
            QDist::Bernoulli(p) => crate::measures::class_seq_prob_exact(n, p, k),
            QDist::Markov1 => Err(Error::config(
                "markov1 is not exchangeable; per-sequence evaluation required",
            )),
            QDist::Mix(members) => {
                let mut total = Rat::zero();
                for (w, q) in members {
                    total += w * q.seq_prob_of_count(n, k)?;
                }
                Ok(total)
            }
        }
    }

    /// q{x}, any member.
    pub fn seq_prob(&self, x: &BitString) -> Result<Rat> {
        match self {
            QDist::Markov1 => Ok(markov1_prob(x)),
            QDist::Mix(members) => {
                let mut total = Rat::zero();
                for (w, q) in members {
                    total += w * q.seq_prob(x)?;
                }
                Ok(total)
            }
            _ => self.seq_prob_of_count(x.len() as u64, x.count_ones()),
        }
    }

    /// The induced count distribution, exact. Exchangeable members map
    /// structurally; Markov1 would need per-class enumeration and is
    /// rejected (the engine restricts itself to exchangeable q's).
    pub fn induced_count(&self) -> Result<CountDist> {
        match self {
            QDist::Kt => Ok(CountDist::KtInduced),
            QDist::TwoPartUniform => Ok(CountDist::Uniform),
            QDist::CellUniform => Ok(CountDist::CellBased),
            QDist::Bernoulli(p) => Ok(CountDist::Binomial(p.clone())),
            QDist::Markov1 => Err(Error::config(
                "markov1 has no closed-form induced count distribution",
            )),
            QDist::Mix(members) => {
                let mut out = Vec::with_capacity(members.len());
                for (w, q) in members {
                    out.push((w.clone(), q.induced_count()?));
                }
                Ok(CountDist::Mix(out))
            }
        }
    }

    /// Σ over 2^(n) of q{x}, exact. Enumeration is per class for
    /// exchangeable members; Markov1 is summed sequence by sequence and
    /// therefore capped.
    pub fn total_mass(&self, n: u64) -> Result<Rat> {
        match self {
            QDist::Markov1 => {
                if n > 20 {
                    return Err(Error::resource(format!(
                        "markov1 total mass needs per-sequence enumeration; n={n} exceeds 20"
                    )));
                }
                let mut total = Rat::zero();
                for v in 0..(1u64 << n) {
                    total += markov1_prob(&BitString::from_index(v, n as usize));
                }
                Ok(total)
            }
            QDist::Mix(members) => {
                let mut total = Rat::zero();
                for (w, q) in members {
                    total += w * q.total_mass(n)?;
                }
                Ok(total)
            }
            _ => {
                let mut total = Rat::zero();
                for k in 0..=n {
                    total += Rat::from_integer(exact::binom_big(n, k))
                        * self.seq_prob_of_count(n, k)?;
                }
                Ok(total)
            }
        }
    }

    /// Exact normalization test at one n.
    pub fn is_normalized(&self, n: u64) -> Result<bool> {
        Ok(self.total_mass(n)?.is_one())
    }
}

impl CountDist {
    pub fn name(&self) -> String {
        match self {
            CountDist::KtInduced => "kt-count".into(),
            CountDist::Uniform => "uniform-count".into(),
            CountDist::CellBased => "cell-count".into(),
            CountDist::Binomial(p) => format!("binomial({p})"),
            CountDist::Mix(members) => {
                let parts: Vec<String> =
                    members.iter().map(|(w, r)| format!("{}:{}", r.name(), w)).collect();
                format!("mix({})", parts.join(","))
            }
        }
    }

    /// r(k), exact.
    pub fn count_prob(&self, n: u64, k: u64) -> Result<Rat> {
        if k > n {
            return Err(Error::input(format!("count {k} out of range 0..={n}")));
        }
        match self {
            CountDist::KtInduced => {
                Ok(Rat::from_integer(exact::binom_big(n, k)) * kt_class_prob(n, k))
            }
            CountDist::Uniform => Ok(Rat::new(BigInt::one(), BigInt::from(n + 1))),
            CountDist::CellBased => {
                if n == 0 {
                    return Ok(Rat::one());
                }
                let partition = build_partition(n)?;
                let cell = partition.cell_of(k)?;
                Ok(Rat::new(
                    BigInt::one(),
                    BigInt::from(partition.num_cells()) * cell.len(),
                ))
            }
            CountDist::Binomial(p) => crate::measures::binomial_prob_exact(n, p, k),
            CountDist::Mix(members) => {
                let mut total = Rat::zero();
                for (w, r) in members {
                    total += w * r.count_prob(n, k)?;
                }
                Ok(total)
            }
        }
    }

    pub fn total_mass(&self, n: u64) -> Result<Rat> {
        let mut total = Rat::zero();
        for k in 0..=n {
            total += self.count_prob(n, k)?;
        }
        Ok(total)
    }
}
