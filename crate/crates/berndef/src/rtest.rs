//! Integer-valued randomness tests.
//!
//! A test T maps outcomes to whole bits subject to the validity budget
//! E_P 2^T ≤ 1: observing T(x) = t is then an event a fair bettor could
//! have exploited at odds 2^t, so large values are honest evidence against
//! P. Tests here are likelihood-ratio floors ⌊log2 q/P⌋ against a
//! normalized reference q, and mixtures of such tests; both shapes keep
//! the budget exactly, and `expectation_exact` re-derives it by brute
//! enumeration rather than trusting the algebra.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use crate::measures::{CountClass, MeasureKind, MeasureSpec};
use crate::qdist::{CountDist, QDist};
use num::traits::{One, Zero};
use serde::{Serialize, Serializer};
use std::fmt;

/// A test score: an integer, or a sentinel for outcomes the null measure
/// rules out entirely (P = 0 with q > 0 — unbounded evidence) or that the
/// reference rules out (q = 0 under P > 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TestValue {
    MinusInf,
    Finite(i64),
    PlusInf,
}

impl TestValue {
    pub fn finite(self) -> Option<i64> {
        match self {
            TestValue::Finite(t) => Some(t),
            _ => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            TestValue::MinusInf => f64::NEG_INFINITY,
            TestValue::Finite(t) => t as f64,
            TestValue::PlusInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for TestValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestValue::MinusInf => write!(f, "-inf"),
            TestValue::Finite(t) => write!(f, "{t}"),
            TestValue::PlusInf => write!(f, "+inf"),
        }
    }
}

impl Serialize for TestValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TestValue::Finite(t) => s.serialize_i64(*t),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// ⌊log2 q/P⌋ from the two exact masses.
pub fn lr_value(q_prob: &Rat, p_prob: &Rat) -> TestValue {
    if p_prob.is_zero() {
        return TestValue::PlusInf;
    }
    if q_prob.is_zero() {
        return TestValue::MinusInf;
    }
    TestValue::Finite(exact::floor_log2(&(q_prob / p_prob)))
}

/// What a test scores.
#[derive(Clone, Copy, Debug)]
pub enum Outcome<'a> {
    Seq(&'a BitString),
    Count(u64),
}

/// What a test scores it against.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Measure(&'a MeasureSpec),
    Class(&'a CountClass),
}

#[derive(Clone, Debug)]
pub enum TestKind {
    /// Sequence against a Bernoulli law.
    LrSeq(QDist),
    /// Count against a binomial law.
    LrCount(CountDist),
    /// Sequence against the uniform law on its count class — the
    /// exchangeability probe.
    LrClass(QDist),
    /// ⌊log2 Σ w_i 2^(T_i)⌋ of member tests at the same outcome.
    Mixture(Vec<(Rat, RandomnessTest)>),
    /// The same score everywhere, any shape. Valid only at c ≤ 0; larger
    /// constants deliberately break the expectation budget — verification
    /// suites use them to prove the sweeps can fail.
    Constant(i64),
}

#[derive(Clone, Debug)]
pub struct RandomnessTest {
    pub name: String,
    pub kind: TestKind,
}

/// Exact mixture combination. Any +inf member forces +inf; members that
/// assign no evidence at all (−inf) contribute zero mass.
pub fn combine_mixture(parts: &[(Rat, TestValue)]) -> TestValue {
    let mut sum = Rat::zero();
    for (w, v) in parts {
        match v {
            TestValue::PlusInf => return TestValue::PlusInf,
            TestValue::MinusInf => {}
            TestValue::Finite(t) => sum += w * exact::two_pow(*t),
        }
    }
    if sum.is_zero() {
        TestValue::MinusInf
    } else {
        TestValue::Finite(exact::floor_log2(&sum))
    }
}

impl RandomnessTest {
    pub fn new(name: impl Into<String>, kind: TestKind) -> Self {
        RandomnessTest { name: name.into(), kind }
    }

    /// Score one outcome against one target. Shape mismatches are input
    /// errors, never panics.
    pub fn evaluate(&self, obj: &Outcome, target: &Target) -> Result<TestValue> {
        match (&self.kind, obj, target) {
            (TestKind::LrSeq(q), Outcome::Seq(x), Target::Measure(m)) => {
                if m.kind != MeasureKind::Bernoulli {
                    return Err(Error::input(format!(
                        "test '{}' scores sequences against Bernoulli laws",
                        self.name
                    )));
                }
                let p_prob = crate::measures::bernoulli_prob_exact(m.n, &m.p, x)?;
                Ok(lr_value(&q.seq_prob(x)?, &p_prob))
            }
            (TestKind::LrCount(r), Outcome::Count(k), Target::Measure(m)) => {
                if m.kind != MeasureKind::Binomial {
                    return Err(Error::input(format!(
                        "test '{}' scores counts against binomial laws",
                        self.name
                    )));
                }
                let p_prob = crate::measures::binomial_prob_exact(m.n, &m.p, *k)?;
                Ok(lr_value(&r.count_prob(m.n, *k)?, &p_prob))
            }
            (TestKind::LrClass(q), Outcome::Seq(x), Target::Class(class)) => {
                if x.len() as u64 != class.n || x.count_ones() != class.k {
                    return Err(Error::input(format!(
                        "sequence ({} ones of {}) not in class ({} of {})",
                        x.count_ones(),
                        x.len(),
                        class.k,
                        class.n
                    )));
                }
                Ok(lr_value(&q.seq_prob(x)?, &class.uniform_prob()))
            }
            (TestKind::Constant(c), _, _) => Ok(TestValue::Finite(*c)),
            (TestKind::Mixture(members), obj, target) => {
                let mut parts = Vec::with_capacity(members.len());
                for (w, t) in members {
                    parts.push((w.clone(), t.evaluate(obj, target)?));
                }
                Ok(combine_mixture(&parts))
            }
            _ => Err(Error::input(format!(
                "test '{}' cannot score this outcome/target shape",
                self.name
            ))),
        }
    }

    /// Per-member scores plus the combined value — what the dominance
    /// guarantee D ≥ T_i + ⌊log2 w_i⌋ is checked against.
    pub fn mixture_breakdown(
        &self,
        obj: &Outcome,
        target: &Target,
    ) -> Result<Vec<(String, Rat, TestValue)>> {
        match &self.kind {
            TestKind::Mixture(members) => {
                let mut out = Vec::with_capacity(members.len());
                for (w, t) in members {
                    out.push((t.name.clone(), w.clone(), t.evaluate(obj, target)?));
                }
                Ok(out)
            }
            _ => Err(Error::input(format!("test '{}' is not a mixture", self.name))),
        }
    }

    fn check_weights(&self) -> Result<()> {
        if let TestKind::Mixture(members) = &self.kind {
            let mut total = Rat::zero();
            for (w, t) in members {
                if w <= &Rat::zero() {
                    return Err(Error::config(format!(
                        "mixture '{}': weight of '{}' must be positive",
                        self.name, t.name
                    )));
                }
                total += w;
                t.check_weights()?;
            }
            if total > Rat::one() {
                return Err(Error::config(format!(
                    "mixture '{}': weights sum to {total} > 1",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn reference_normalized(&self, n: u64) -> Result<()> {
        match &self.kind {
            TestKind::LrSeq(q) | TestKind::LrClass(q) => {
                if !q.is_normalized(n)? {
                    return Err(Error::config(format!(
                        "test '{}': reference {} is not normalized at n={n}",
                        self.name,
                        q.name()
                    )));
                }
            }
            TestKind::LrCount(r) => {
                if !r.total_mass(n)?.is_one() {
                    return Err(Error::config(format!(
                        "test '{}': reference {} is not normalized at n={n}",
                        self.name,
                        r.name()
                    )));
                }
            }
            TestKind::Mixture(members) => {
                for (_, t) in members {
                    t.reference_normalized(n)?;
                }
            }
            TestKind::Constant(_) => {}
        }
        Ok(())
    }
}

/// Largest n `expectation_exact` will enumerate (2^14 sequences).
pub const EXPECTATION_ENUMERATION_CAP: u64 = 14;

/// E_P 2^T by honest enumeration of the target's whole outcome space.
/// Zero-probability outcomes are skipped (they carry no expectation mass,
/// sentinel or not).
pub fn expectation_exact(test: &RandomnessTest, target: &Target) -> Result<Rat> {
    let mut total = Rat::zero();
    let mut add = |p_prob: Rat, value: TestValue| -> Result<()> {
        if p_prob.is_zero() {
            return Ok(());
        }
        match value {
            TestValue::MinusInf => {}
            TestValue::Finite(t) => total += p_prob * exact::two_pow(t),
            TestValue::PlusInf => {
                return Err(Error::input(
                    "unbounded score on an outcome of positive probability",
                ))
            }
        }
        Ok(())
    };
    match target {
        Target::Measure(m) => {
            if m.n > EXPECTATION_ENUMERATION_CAP {
                return Err(Error::resource(format!(
                    "exact expectation enumerates 2^{}; n={} exceeds the cap",
                    m.n, m.n
                )));
            }
            match m.kind {
                MeasureKind::Bernoulli => {
                    for v in 0..(1u64 << m.n) {
                        let x = BitString::from_index(v, m.n as usize);
                        let p_prob = crate::measures::bernoulli_prob_exact(m.n, &m.p, &x)?;
                        if p_prob.is_zero() {
                            continue;
                        }
                        let value = test.evaluate(&Outcome::Seq(&x), target)?;
                        add(p_prob, value)?;
                    }
                }
                MeasureKind::Binomial => {
                    for k in 0..=m.n {
                        let p_prob = crate::measures::binomial_prob_exact(m.n, &m.p, k)?;
                        if p_prob.is_zero() {
                            continue;
                        }
                        let value = test.evaluate(&Outcome::Count(k), target)?;
                        add(p_prob, value)?;
                    }
                }
            }
        }
        Target::Class(class) => {
            if class.n > EXPECTATION_ENUMERATION_CAP {
                return Err(Error::resource(format!(
                    "exact expectation enumerates 2^{}; n={} exceeds the cap",
                    class.n, class.n
                )));
            }
            let uniform = class.uniform_prob();
            for v in 0..(1u64 << class.n) {
                let x = BitString::from_index(v, class.n as usize);
                if x.count_ones() != class.k {
                    continue;
                }
                let value = test.evaluate(&Outcome::Seq(&x), target)?;
                add(uniform.clone(), value)?;
            }
        }
    }
    Ok(total)
}

/// The shipped tests, looked up by the names the CLI accepts.
#[derive(Clone, Debug)]
pub struct TestRegistry {
    tests: Vec<RandomnessTest>,
}

/// n at which every registered reference is exhaustively re-checked for
/// normalization (cheap, catches real construction blunders immediately;
/// the verification sweeps extend the range).
const REGISTRATION_CHECK_N: u64 = 8;

impl TestRegistry {
    pub fn empty() -> Self {
        TestRegistry { tests: Vec::new() }
    }

    /// Validates weights and reference normalization before accepting.
    pub fn register(&mut self, test: RandomnessTest) -> Result<()> {
        test.check_weights()?;
        test.reference_normalized(REGISTRATION_CHECK_N)?;
        if self.tests.iter().any(|t| t.name == test.name) {
            return Err(Error::config(format!("duplicate test name '{}'", test.name)));
        }
        self.tests.push(test);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&RandomnessTest> {
        self.tests.iter().find(|t| t.name == name).ok_or_else(|| {
            Error::config(format!("unknown test '{name}' (have: {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.tests.iter().map(|t| t.name.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RandomnessTest> {
        self.tests.iter()
    }

    /// Re-check every registered reference at one n, exhaustively.
    pub fn validate(&self, n: u64) -> Result<()> {
        for t in &self.tests {
            t.reference_normalized(n)?;
        }
        Ok(())
    }
}

/// Mixture weight used by the shipped defaults: 1/4 each, so every member
/// is dominated within a constant 2 bits.
fn quarter() -> Rat {
    exact::rat(1, 4)
}

impl Default for TestRegistry {
    fn default() -> Self {
        let lr_kt = RandomnessTest::new("lr-kt", TestKind::LrSeq(QDist::Kt));
        let lr_two_part =
            RandomnessTest::new("lr-two-part", TestKind::LrSeq(QDist::TwoPartUniform));
        let lr_cell = RandomnessTest::new("lr-cell", TestKind::LrSeq(QDist::CellUniform));
        let mix_seq = RandomnessTest::new(
            "mix-seq",
            TestKind::Mixture(vec![
                (quarter(), lr_kt.clone()),
                (quarter(), lr_two_part.clone()),
                (quarter(), lr_cell.clone()),
            ]),
        );
        let lr_kt_count =
            RandomnessTest::new("lr-kt-count", TestKind::LrCount(CountDist::KtInduced));
        let lr_uniform_count =
            RandomnessTest::new("lr-uniform-count", TestKind::LrCount(CountDist::Uniform));
        let lr_cell_count =
            RandomnessTest::new("lr-cell-count", TestKind::LrCount(CountDist::CellBased));
        let mix_count = RandomnessTest::new(
            "mix-count",
            TestKind::Mixture(vec![
                (quarter(), lr_kt_count.clone()),
                (quarter(), lr_uniform_count.clone()),
                (quarter(), lr_cell_count.clone()),
            ]),
        );
        let lr_markov1_class =
            RandomnessTest::new("lr-markov1-class", TestKind::LrClass(QDist::Markov1));

        let mut reg = TestRegistry::empty();
        for t in [
            lr_kt,
            lr_two_part,
            lr_cell,
            mix_seq,
            lr_kt_count,
            lr_uniform_count,
            lr_cell_count,
            mix_count,
            lr_markov1_class,
        ] {
            reg.register(t).expect("default registry must validate");
        }
        reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn lr_hand_values() {
        // uniform count reference vs bin_{4,1/2} at k=2: (1/5)/(6/16) = 8/15
        let m = MeasureSpec::binomial(4, rat(1, 2)).unwrap();
        let t = RandomnessTest::new("u", TestKind::LrCount(CountDist::Uniform));
        assert_eq!(
            t.evaluate(&Outcome::Count(2), &Target::Measure(&m)).unwrap(),
            TestValue::Finite(-1)
        );
        // adaptive reference vs B_{4,1/2} at 0000: (35/128)/(1/16) = 35/8
        let m = MeasureSpec::bernoulli(4, rat(1, 2)).unwrap();
        let t = RandomnessTest::new("kt", TestKind::LrSeq(QDist::Kt));
        assert_eq!(
            t.evaluate(&Outcome::Seq(&bs("0000")), &Target::Measure(&m)).unwrap(),
            TestValue::Finite(2)
        );
    }

    #[test]
    fn self_test_scores_zero() {
        // q equal to the null law: ratio is exactly 1 everywhere
        let p = rat(3, 10);
        let m = MeasureSpec::bernoulli(5, p.clone()).unwrap();
        let t = RandomnessTest::new("self", TestKind::LrSeq(QDist::Bernoulli(p.clone())));
        for v in 0..32u64 {
            let x = BitString::from_index(v, 5);
            assert_eq!(
                t.evaluate(&Outcome::Seq(&x), &Target::Measure(&m)).unwrap(),
                TestValue::Finite(0)
            );
        }
        let m = MeasureSpec::binomial(5, p.clone()).unwrap();
        let t = RandomnessTest::new("self-count", TestKind::LrCount(CountDist::Binomial(p)));
        for k in 0..=5 {
            assert_eq!(
                t.evaluate(&Outcome::Count(k), &Target::Measure(&m)).unwrap(),
                TestValue::Finite(0)
            );
        }
    }

    #[test]
    fn impossible_outcome_is_plus_inf() {
        let m = MeasureSpec::bernoulli(3, rat(0, 1)).unwrap();
        let t = RandomnessTest::new("kt", TestKind::LrSeq(QDist::Kt));
        assert_eq!(
            t.evaluate(&Outcome::Seq(&bs("001")), &Target::Measure(&m)).unwrap(),
            TestValue::PlusInf
        );
        // the one possible outcome still gets a finite score
        assert!(
            t.evaluate(&Outcome::Seq(&bs("000")), &Target::Measure(&m))
                .unwrap()
                .finite()
                .is_some()
        );
    }

    #[test]
    fn mixture_hand_value() {
        // (1/2)·2^4 + (1/2)·2^0 = 8.5 → floor log2 = 3
        let parts = [
            (rat(1, 2), TestValue::Finite(4)),
            (rat(1, 2), TestValue::Finite(0)),
        ];
        assert_eq!(combine_mixture(&parts), TestValue::Finite(3));
        assert_eq!(
            combine_mixture(&[(rat(1, 4), TestValue::PlusInf)]),
            TestValue::PlusInf
        );
        assert_eq!(
            combine_mixture(&[(rat(1, 4), TestValue::MinusInf)]),
            TestValue::MinusInf
        );
    }

    #[test]
    fn class_test_detects_alternation() {
        // strict alternation within its class: markov1 assigns it far more
        // than the uniform class law does
        let x = bs("01010101010101");
        let class = CountClass { n: 14, k: 7 };
        let t = RandomnessTest::new("m1", TestKind::LrClass(QDist::Markov1));
        let v = t.evaluate(&Outcome::Seq(&x), &Target::Class(&class)).unwrap();
        assert!(v >= TestValue::Finite(3), "got {v}");
    }

    #[test]
    fn expectation_within_budget_for_all_defaults() {
        let reg = TestRegistry::default();
        let n = 6;
        for p in [rat(1, 10), rat(1, 2), rat(9, 10), rat(0, 1)] {
            let bern = MeasureSpec::bernoulli(n, p.clone()).unwrap();
            let bin = MeasureSpec::binomial(n, p).unwrap();
            for t in reg.iter() {
                let target = match &t.kind {
                    TestKind::LrSeq(_) => Target::Measure(&bern),
                    TestKind::LrCount(_) => Target::Measure(&bin),
                    TestKind::Mixture(members) => match members[0].1.kind {
                        TestKind::LrCount(_) => Target::Measure(&bin),
                        _ => Target::Measure(&bern),
                    },
                    TestKind::LrClass(_) | TestKind::Constant(_) => continue,
                };
                let e = expectation_exact(t, &target).unwrap();
                assert!(e <= Rat::one(), "{} at E = {e}", t.name);
            }
        }
        // class targets: every class of n=6
        let t = reg.get("lr-markov1-class").unwrap();
        for k in 0..=6 {
            let class = CountClass { n: 6, k };
            let e = expectation_exact(t, &Target::Class(&class)).unwrap();
            assert!(e <= Rat::one(), "class k={k}: E = {e}");
        }
    }

    #[test]
    fn expectation_cap_is_enforced() {
        let m = MeasureSpec::bernoulli(15, rat(1, 2)).unwrap();
        let t = RandomnessTest::new("kt", TestKind::LrSeq(QDist::Kt));
        assert!(expectation_exact(&t, &Target::Measure(&m)).is_err());
    }

    #[test]
    fn registry_rejects_bad_mixtures() {
        let mut reg = TestRegistry::empty();
        let base = RandomnessTest::new("kt", TestKind::LrSeq(QDist::Kt));
        let heavy = RandomnessTest::new(
            "heavy",
            TestKind::Mixture(vec![(rat(3, 4), base.clone()), (rat(1, 2), base.clone())]),
        );
        assert!(reg.register(heavy).is_err());
        reg.register(base.clone()).unwrap();
        assert!(reg.register(base).is_err(), "duplicate name must be rejected");
    }

    #[test]
    fn shipped_mixture_dominates_members_within_two_bits() {
        let reg = TestRegistry::default();
        let mix = reg.get("mix-seq").unwrap();
        let m = MeasureSpec::bernoulli(8, rat(1, 3)).unwrap();
        for v in 0..256u64 {
            let x = BitString::from_index(v, 8);
            let obj = Outcome::Seq(&x);
            let target = Target::Measure(&m);
            let d = mix.evaluate(&obj, &target).unwrap().finite().unwrap();
            for (name, w, tv) in mix.mixture_breakdown(&obj, &target).unwrap() {
                let t = tv.finite().unwrap();
                let c = -exact::floor_log2(&w);
                assert_eq!(c, 2);
                assert!(d >= t - c, "{name} at {x}: D={d} < T−C={}", t - c);
            }
        }
    }

    proptest! {
        #[test]
        fn mixture_dominance_is_general(
            raw in proptest::collection::vec((1u32..40, 0u32..1000, -12i64..40), 1..6)
        ) {
            // normalize arbitrary positive weights to sum ≤ 1
            let denom: u32 = raw.iter().map(|(w, _, _)| *w).sum::<u32>().max(1);
            let parts: Vec<(Rat, TestValue)> = raw
                .iter()
                .map(|(w, _, t)| (rat(*w as i64, denom as i64), TestValue::Finite(*t)))
                .collect();
            let d = combine_mixture(&parts);
            for (w, tv) in &parts {
                let bound = tv.finite().unwrap() + exact::floor_log2(w);
                prop_assert!(d >= TestValue::Finite(bound));
            }
        }

        #[test]
        fn lr_expectation_budget_holds(num in 0i64..=20, n in 1u64..=7) {
            let p = rat(num, 20);
            let m = MeasureSpec::bernoulli(n, p).unwrap();
            let t = RandomnessTest::new("kt", TestKind::LrSeq(QDist::Kt));
            let e = expectation_exact(&t, &Target::Measure(&m)).unwrap();
            prop_assert!(e <= Rat::one());
        }
    }
}
