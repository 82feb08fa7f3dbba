//! The deficiency engine: three families of structure estimates and the
//! audit that ties them together.
//!
//! Every estimate is a floor of an exact log-likelihood ratio against a
//! *defensive* reference (q + P)/2 — averaging the witness distribution
//! with the null keeps the expectation budget E_P 2^D ≤ 1 while letting a
//! description of the outcome fall back on the null itself, so the value
//! never drops below −1 and a perfectly typical outcome scores 0 or −1
//! instead of an arbitrary negative number. Three estimates:
//!
//! * **Bernoulli deficiency** — min over a parameter grid of the sequence's
//!   deficiency against B_{n,p}; large means "not i.i.d. for any p".
//! * **Exchangeability deficiency** — log2 C(n,k) minus an actual code
//!   length for x inside its count class; large means "structured given
//!   its count".
//! * **Binomial deficiency** — the count-level analogue, both as a grid
//!   minimum and through the two arcsine-partition readings.
//!
//! The decomposition audit computes all of them plus the residuals that
//! measure how tightly "sequence = class + count" holds at finite n.

use crate::bits::BitString;
use crate::codes::Provider;
use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use crate::partition::{self, build_partition, Partition};
use crate::qdist::{CountDist, QDist};
use crate::rtest::TestValue;
use num::traits::{One, Zero};
use serde::Serialize;

/// Parameter grids the minimization runs over. Every grid contains the
/// exact endpoints 0 and 1 — degenerate parameters are always candidates.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// Half-step arcsine points sin²(m/(2√n)), m = 0..⌊π√n⌋, plus 1 —
    /// about π√n points spaced a half standard deviation apart in count
    /// space. The estimator snaps to this same set.
    Arcsine,
    /// j/steps for j = 0..=steps.
    Uniform { steps: u64 },
    /// Explicit sorted candidates; must include 0 and 1.
    Explicit(Vec<Rat>),
}

impl GridSpec {
    pub fn name(&self) -> String {
        match self {
            GridSpec::Arcsine => "arcsine".into(),
            GridSpec::Uniform { steps } => format!("uniform:{steps}"),
            GridSpec::Explicit(points) => format!("explicit[{}]", points.len()),
        }
    }

    /// Materialize the candidate parameters for length n, ascending and
    /// deduplicated, all exact.
    pub fn points(&self, n: u64, frac_bits: u32) -> Result<Vec<Rat>> {
        let mut pts = match self {
            GridSpec::Arcsine => {
                if n == 0 {
                    return Err(Error::input("grid needs n >= 1"));
                }
                let mut pts = Vec::new();
                for m in 0..=partition::max_anchor_index(n) {
                    pts.push(partition::p_value_dyadic(n, m, frac_bits));
                }
                pts.push(Rat::one());
                pts
            }
            GridSpec::Uniform { steps } => {
                if *steps == 0 {
                    return Err(Error::config("uniform grid needs at least 1 step"));
                }
                (0..=*steps).map(|j| exact::rat(j as i64, *steps as i64)).collect()
            }
            GridSpec::Explicit(points) => points.clone(),
        };
        pts.sort();
        pts.dedup();
        if pts.is_empty()
            || pts.first() != Some(&Rat::zero())
            || pts.last() != Some(&Rat::one())
            || pts.iter().any(|p| p < &Rat::zero() || p > &Rat::one())
        {
            return Err(Error::config(
                "parameter grid must lie in [0,1] and include both endpoints",
            ));
        }
        Ok(pts)
    }
}

/// Everything the engine needs to produce a report.
#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// Sequence-level reference distribution.
    pub q_seq: QDist,
    /// Count-level reference distribution.
    pub q_count: CountDist,
    /// Code-length provider for the exchangeability estimate and the
    /// partition readings.
    pub code: Provider,
    pub grid: GridSpec,
    /// Fractional bits for dyadic grid/estimator values.
    pub precision_bits: u32,
    /// Sandwich slack parameter.
    pub epsilon: Rat,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let q_seq = QDist::default_engine_mix();
        let q_count = q_seq.induced_count().expect("default mix is exchangeable");
        EngineConfig {
            q_seq,
            q_count,
            code: Provider::FixedIndex,
            grid: GridSpec::Arcsine,
            precision_bits: 96,
            epsilon: exact::rat(1, 2),
        }
    }
}

/// Exact arithmetic floor: dyadic grid values must carry at least this
/// many fractional bits.
pub const MIN_PRECISION_BITS: u32 = 64;

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.precision_bits < MIN_PRECISION_BITS {
            return Err(Error::config(format!(
                "precision must be at least {MIN_PRECISION_BITS} fractional bits"
            )));
        }
        if self.epsilon <= Rat::zero() {
            return Err(Error::config("epsilon must be positive"));
        }
        Ok(())
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            q_seq: self.q_seq.name(),
            q_count: self.q_count.name(),
            code: self.code.name(),
            grid: self.grid.name(),
            precision_bits: self.precision_bits,
            epsilon: self.epsilon.to_string(),
        }
    }

    /// True when every report field is a function of (n, k) alone: the
    /// sequence reference ignores order and the code length depends only
    /// on the class. Sweeps use this to reuse work across same-count
    /// sequences; anything else forces per-sequence evaluation.
    pub fn per_count_determined(&self) -> bool {
        self.q_seq.is_exchangeable()
            && matches!(self.code, Provider::FixedIndex | Provider::Kt)
    }
}

/// Config echo carried verbatim in every report.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub q_seq: String,
    pub q_count: String,
    pub code: String,
    pub grid: String,
    pub precision_bits: u32,
    pub epsilon: String,
}

/// ⌊log2((q + P)/(2P))⌋ — the defensive-average deficiency of one outcome.
/// +∞ sentinel when the null assigns zero; never below −1 otherwise.
pub fn deficiency_value(q_prob: &Rat, p_prob: &Rat) -> TestValue {
    if p_prob.is_zero() {
        return TestValue::PlusInf;
    }
    // Only the floor of the log is needed, so the ratio is assembled
    // unreduced: cross-multiplied add and a doubled denominator, no gcd.
    // At large n the operands run to ~100k bits and reduction would
    // dominate the whole audit.
    let num = q_prob.numer() * p_prob.denom() + p_prob.numer() * q_prob.denom();
    let den = p_prob.numer() * q_prob.denom() * 2;
    TestValue::Finite(exact::floor_log2(&Rat::new_raw(num, den)))
}

/// Sequence-level deficiency against B_{n,p}.
pub fn seq_deficiency_vs(x: &BitString, p: &Rat, q: &QDist) -> Result<TestValue> {
    let n = x.len() as u64;
    let p_prob = crate::measures::bernoulli_prob_exact(n, p, x)?;
    Ok(deficiency_value(&q.seq_prob(x)?, &p_prob))
}

/// Count-level deficiency against bin_{n,p}.
pub fn count_deficiency_vs(n: u64, k: u64, p: &Rat, r: &CountDist) -> Result<TestValue> {
    let p_prob = crate::measures::binomial_prob_exact(n, p, k)?;
    Ok(deficiency_value(&r.count_prob(n, k)?, &p_prob))
}

/// A grid minimization outcome: the minimum and where it was first
/// attained (ties resolve to the smallest parameter — deterministic).
#[derive(Clone, Debug)]
pub struct GridMin {
    pub value: TestValue,
    pub argmin: Rat,
    pub grid_size: usize,
}

fn minimize(values: &[TestValue], grid: &[Rat]) -> GridMin {
    debug_assert_eq!(values.len(), grid.len());
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    GridMin {
        value: values[best],
        argmin: grid[best].clone(),
        grid_size: grid.len(),
    }
}

/// Min over the grid of the sequence's deficiency against B_{n,p}.
pub fn bernoulli_deficiency(x: &BitString, q: &QDist, grid: &[Rat]) -> Result<GridMin> {
    if grid.is_empty() {
        return Err(Error::config("empty parameter grid"));
    }
    let q_prob = q.seq_prob(x)?;
    let n = x.len() as u64;
    let k = x.count_ones();
    let mut values = Vec::with_capacity(grid.len());
    for p in grid {
        let class = crate::measures::class_seq_prob_exact(n, p, k)?;
        values.push(deficiency_value(&q_prob, &class));
    }
    Ok(minimize(&values, grid))
}

/// Min over the grid of the count's deficiency against bin_{n,p}.
pub fn binomial_deficiency_grid(
    n: u64,
    k: u64,
    r: &CountDist,
    grid: &[Rat],
) -> Result<GridMin> {
    if grid.is_empty() {
        return Err(Error::config("empty parameter grid"));
    }
    let r_prob = r.count_prob(n, k)?;
    let binom = exact::binom_big(n, k);
    let mut values = Vec::with_capacity(grid.len());
    for p in grid {
        let class = crate::measures::class_seq_prob_exact(n, p, k)?;
        // Unreduced binom·class: deficiency_value never normalizes.
        let p_prob = Rat::new_raw(&binom * class.numer(), class.denom().clone());
        values.push(deficiency_value(&r_prob, &p_prob));
    }
    Ok(minimize(&values, grid))
}

/// log2 C(n,k) − L(x | n,k[,aux]): how far the code falls short of the
/// class's full log-size. Real-valued; the aux side channel carries a
/// previously computed integer (the count-level deficiency in the audit)
/// and may never lengthen the code.
pub fn exch_deficiency(x: &BitString, code: &Provider, aux: Option<i64>) -> Result<f64> {
    let n = x.len() as u64;
    let k = x.count_ones();
    let len = code.seq_len(x, Some(k), aux)?;
    Ok(exact::log2_binom_f64(n, k) - len as f64)
}

/// The two count-level readings through the partition.
#[derive(Clone, Debug)]
pub struct PartitionReadings {
    /// log2 |cell(k)| − L(k | cell): deficiency against the cell's own size.
    pub cell: f64,
    /// log2 (number of cells) − L(k | cell): deficiency against the cell
    /// count.
    pub count: f64,
    pub cell_index: u64,
    pub cell_len: u64,
}

/// Both partition readings of the count's deficiency. Providers that
/// cannot code counts (the sequence-only ones) fall back to the
/// fixed-index baseline so a sequence-code choice never disables the
/// count-level half of a report.
pub fn binomial_deficiency_partition(
    n: u64,
    k: u64,
    code: &Provider,
    partition: &Partition,
) -> Result<PartitionReadings> {
    if n != partition.n {
        return Err(Error::input(format!(
            "partition is for n={}, count is from n={n}",
            partition.n
        )));
    }
    let cell = partition.cell_of(k)?;
    let counting = match code {
        Provider::FixedIndex | Provider::EliasInteger => code,
        _ => &Provider::FixedIndex,
    };
    let len = counting.count_in_cell_len(k, &cell)? as f64;
    let log2_cell = (cell.len() as f64).log2();
    let log2_cells = (partition.num_cells() as f64).log2();
    Ok(PartitionReadings {
        cell: log2_cell - len,
        count: log2_cells - len,
        cell_index: cell.s_index,
        cell_len: cell.len(),
    })
}

/// The full audit record for one sequence. Serializes with stable field
/// order; infinite values render as sentinels (deficiencies) or null
/// (residuals and clamped convenience fields).
#[derive(Clone, Debug, Serialize)]
pub struct DeficiencyReport {
    pub schema_version: u32,
    pub n: u64,
    pub k: u64,
    pub x: String,
    pub d_bern_grid: TestValue,
    pub d_bern_at_estimate: TestValue,
    pub d_exch: f64,
    pub d_bin_grid: TestValue,
    pub d_bin_partition_cell: f64,
    pub d_bin_partition_count: f64,
    pub residual_thm1: Option<f64>,
    pub residual_basis: Option<f64>,
    pub residual_estimator: Option<f64>,
    pub d_bern_grid_clamped: Option<f64>,
    pub d_exch_clamped: f64,
    pub d_bin_grid_clamped: Option<f64>,
    pub p_star: f64,
    pub p_hat: f64,
    pub a_hat: f64,
    pub half_steps: u64,
    pub corollary_lower_slack: Option<f64>,
    pub corollary_upper_slack: Option<f64>,
    pub config: ConfigEcho,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn clamp0(v: TestValue) -> Option<f64> {
    v.finite().map(|t| (t.max(0)) as f64)
}

/// Compute every report field for one sequence.
///
/// Order of evaluation matters once: the count-level grid minimum is
/// computed first so its value can ride the aux side channel into the
/// class code for the exchangeability estimate.
pub fn decomposition_audit(x: &BitString, config: &EngineConfig) -> Result<DeficiencyReport> {
    config.validate()?;
    let n = x.len() as u64;
    if n == 0 {
        return Err(Error::input("empty sequence"));
    }
    let k = x.count_ones();
    let grid = config.grid.points(n, config.precision_bits)?;
    let partition = build_partition(n)?;

    // both levels share the per-parameter class probability — one power
    // per grid point serves the sequence and the count
    let q_prob = config.q_seq.seq_prob(x)?;
    let r_prob = config.q_count.count_prob(n, k)?;
    let binom = exact::binom_big(n, k);
    let mut seq_vals = Vec::with_capacity(grid.len());
    let mut count_vals = Vec::with_capacity(grid.len());
    for p in &grid {
        let class = crate::measures::class_seq_prob_exact(n, p, k)?;
        seq_vals.push(deficiency_value(&q_prob, &class));
        count_vals.push(deficiency_value(
            &r_prob,
            &Rat::new_raw(&binom * class.numer(), class.denom().clone()),
        ));
    }
    let bern = minimize(&seq_vals, &grid);
    let bin = minimize(&count_vals, &grid);

    let aux = bin.value.finite();
    let d_exch = exch_deficiency(x, &config.code, aux)?;

    let est = partition::point_estimate_for_count(n, k, config.precision_bits)?;
    let class_at_hat = crate::measures::class_seq_prob_exact(n, &est.p_hat, k)?;
    let d_at_estimate = deficiency_value(&q_prob, &class_at_hat);

    let readings = binomial_deficiency_partition(n, k, &config.code, &partition)?;

    // residual of the sequence = class + count split
    let residual_thm1 = match (bern.value.finite(), bin.value.finite()) {
        (Some(db), Some(dk)) => Some(db as f64 - d_exch - dk as f64),
        _ => None,
    };
    // same split evaluated at the sequence-level minimizer only
    let count_at_p_star = {
        let idx = grid.iter().position(|p| p == &bern.argmin).expect("argmin from grid");
        count_vals[idx]
    };
    let residual_basis = match (bern.value.finite(), count_at_p_star.finite()) {
        (Some(db), Some(dk)) => Some(db as f64 - dk as f64 - d_exch),
        _ => None,
    };
    let residual_estimator = match (d_at_estimate.finite(), bern.value.finite()) {
        (Some(de), Some(db)) => Some((de - db) as f64),
        _ => None,
    };

    // sandwich slacks use the unconditioned class code
    let d_exch_plain = exch_deficiency(x, &config.code, None)?;
    let (lower, upper) = match (bern.value.finite(), bin.value.finite()) {
        (Some(db), Some(dk)) => {
            let mid = db as f64 - d_exch_plain;
            let eps = exact::rat_to_f64(&config.epsilon);
            (Some(mid - dk as f64), Some((1.0 + eps) * dk as f64 - mid))
        }
        _ => (None, None),
    };

    Ok(DeficiencyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n,
        k,
        x: x.to_ascii01(),
        d_bern_grid: bern.value,
        d_bern_at_estimate: d_at_estimate,
        d_exch,
        d_bin_grid: bin.value,
        d_bin_partition_cell: readings.cell,
        d_bin_partition_count: readings.count,
        residual_thm1,
        residual_basis,
        residual_estimator,
        d_bern_grid_clamped: clamp0(bern.value),
        d_exch_clamped: d_exch.max(0.0),
        d_bin_grid_clamped: clamp0(bin.value),
        p_star: exact::rat_to_f64(&bern.argmin),
        p_hat: est.p_hat_f64,
        a_hat: est.a_hat,
        half_steps: est.half_steps,
        corollary_lower_slack: lower,
        corollary_upper_slack: upper,
        config: config.echo(),
    })
}

/// The two slack values of the (1+ε) sandwich around the count-level
/// estimate. Reported as-is; when the count-level value goes negative
/// through floor effects the sandwich inverts and no sign is asserted.
pub fn corollary_sandwich(
    x: &BitString,
    epsilon: &Rat,
    config: &EngineConfig,
) -> Result<(Option<f64>, Option<f64>)> {
    if epsilon <= &Rat::zero() {
        return Err(Error::config("epsilon must be positive"));
    }
    let mut cfg = config.clone();
    cfg.epsilon = epsilon.clone();
    let report = decomposition_audit(x, &cfg)?;
    Ok((report.corollary_lower_slack, report.corollary_upper_slack))
}

/// Estimator audit: how much worse the single snapped parameter is than
/// the best parameter on a fine grid, at both levels.
#[derive(Clone, Debug)]
pub struct EstimatorAudit {
    pub d_at_estimate: TestValue,
    pub d_fine_min: TestValue,
    /// d_at_estimate − fine minimum (sequence level); None if either side
    /// is infinite.
    pub gap_seq: Option<i64>,
    pub d_count_at_estimate: TestValue,
    pub d_count_fine_min: TestValue,
    pub gap_count: Option<i64>,
    pub p_hat: Rat,
}

/// Default fine grid: thousandths united with the arcsine candidates, so
/// the fine minimum can only improve on both.
pub fn fine_grid(n: u64, frac_bits: u32) -> Result<Vec<Rat>> {
    let mut pts = GridSpec::Uniform { steps: 1000 }.points(n, frac_bits)?;
    pts.extend(GridSpec::Arcsine.points(n, frac_bits)?);
    pts.sort();
    pts.dedup();
    Ok(pts)
}

pub fn estimator_audit(
    x: &BitString,
    fine: &[Rat],
    config: &EngineConfig,
) -> Result<EstimatorAudit> {
    config.validate()?;
    let n = x.len() as u64;
    if n == 0 {
        return Err(Error::input("empty sequence"));
    }
    let k = x.count_ones();
    let est = partition::point_estimate_for_count(n, k, config.precision_bits)?;

    let d_at_estimate = seq_deficiency_vs(x, &est.p_hat, &config.q_seq)?;
    let fine_min = bernoulli_deficiency(x, &config.q_seq, fine)?;
    let gap_seq = match (d_at_estimate.finite(), fine_min.value.finite()) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };

    let d_count_at_estimate = count_deficiency_vs(n, k, &est.p_hat, &config.q_count)?;
    let count_fine_min = binomial_deficiency_grid(n, k, &config.q_count, fine)?;
    let gap_count = match (d_count_at_estimate.finite(), count_fine_min.value.finite()) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };

    Ok(EstimatorAudit {
        d_at_estimate,
        d_fine_min: fine_min.value,
        gap_seq,
        d_count_at_estimate,
        d_count_fine_min: count_fine_min.value,
        gap_count,
        p_hat: est.p_hat,
    })
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
    fn deficiency_value_basics() {
        // typical outcome, witness equal to null: (P+P)/(2P) = 1 → 0
        let p = rat(3, 16);
        assert_eq!(deficiency_value(&p, &p), TestValue::Finite(0));
        // supported point of a point mass: q ≤ 1 → (q+1)/2 ∈ (1/2, 1] → −1 or 0
        let v = deficiency_value(&rat(1, 5), &Rat::one());
        assert_eq!(v, TestValue::Finite(-1));
        assert_eq!(deficiency_value(&Rat::one(), &Rat::one()), TestValue::Finite(0));
        // impossible outcome
        assert_eq!(deficiency_value(&rat(1, 5), &Rat::zero()), TestValue::PlusInf);
        // vanished witness still floors at −1
        assert_eq!(deficiency_value(&Rat::zero(), &rat(1, 2)), TestValue::Finite(-1));
    }

    #[test]
    fn structural_floor_never_breached() {
        // (q+P)/(2P) ≥ 1/2 whatever q ≥ 0, so −1 is the hard floor
        for (qn, qd, pn, pd) in [(1i64, 1000, 1, 2), (1, 1, 1, 7), (0, 1, 3, 4)] {
            let v = deficiency_value(&rat(qn, qd), &rat(pn, pd));
            assert!(v >= TestValue::Finite(-1), "{v}");
        }
    }

    #[test]
    fn heavy_witness_value() {
        // x = 0^12 against p = 1/2, adaptive witness: q = C(24,12)/4^12,
        // P = 2^-12 → (q+P)/(2P) = 2^11·q + 1/2 ≈ 330.6 → 8
        let x = BitString::repeated(0, 12);
        let v = seq_deficiency_vs(&x, &rat(1, 2), &QDist::Kt).unwrap();
        assert_eq!(v, TestValue::Finite(8));
        assert!(v >= TestValue::Finite(6));
    }

    #[test]
    fn degenerate_optimum_on_grid() {
        let config = EngineConfig::default();
        for n in [1u64, 2, 7, 12, 40] {
            let x = BitString::repeated(0, n as usize);
            let grid = config.grid.points(n, 96).unwrap();
            let got = bernoulli_deficiency(&x, &config.q_seq, &grid).unwrap();
            let t = got.value.finite().unwrap();
            assert!(t == -1 || t == 0, "n={n}: {t}");
            assert!(got.argmin.is_zero(), "optimum should sit at p = 0");
        }
    }

    #[test]
    fn count_grid_hand_value() {
        // k=2 of n=4, uniform count reference, grid containing 1/2:
        // mixed ratio at p=1/2: ((1/5 + 6/16)/(2·6/16)) = 0.7667 → −1
        let grid = [Rat::zero(), rat(1, 2), Rat::one()];
        let got = binomial_deficiency_grid(4, 2, &CountDist::Uniform, &grid).unwrap();
        assert_eq!(got.value, TestValue::Finite(-1));
    }

    #[test]
    fn exch_values() {
        // fixed-index inside a nondegenerate class: in (−1, 0]
        let x = bs("010011");
        let d = exch_deficiency(&x, &Provider::FixedIndex, None).unwrap();
        assert!(d > -1.0 && d <= 0.0, "{d}");
        // degenerate class: log2 1 − 1 = −1 exactly
        let x = BitString::repeated(0, 6);
        let d = exch_deficiency(&x, &Provider::FixedIndex, None).unwrap();
        assert_eq!(d, -1.0);
    }

    #[test]
    fn partition_readings_n4() {
        let partition = build_partition(4).unwrap();
        let r = binomial_deficiency_partition(4, 2, &Provider::FixedIndex, &partition).unwrap();
        assert_eq!(r.cell, -1.0); // singleton cell, 1-bit floor
        assert!((r.count - ((5.0f64).log2() - 1.0)).abs() < 1e-12);
        let r0 = binomial_deficiency_partition(4, 0, &Provider::FixedIndex, &partition).unwrap();
        assert_eq!(r0.cell, -1.0);
    }

    #[test]
    fn partition_reading_central_cell_n100() {
        let partition = build_partition(100).unwrap();
        let r =
            binomial_deficiency_partition(100, 50, &Provider::FixedIndex, &partition).unwrap();
        assert!(r.cell > -1.0 && r.cell <= 0.0, "{}", r.cell);
    }

    #[test]
    fn audit_end_to_end_0011() {
        let config = EngineConfig::default();
        let report = decomposition_audit(&bs("0011"), &config).unwrap();
        assert_eq!(report.n, 4);
        assert_eq!(report.k, 2);
        assert!(report.d_bern_grid.finite().is_some());
        assert!(report.d_bern_at_estimate.finite().is_some());
        assert!(report.d_bin_grid.finite().is_some());
        assert!(report.d_exch.is_finite());
        assert!(report.residual_thm1.is_some());
        assert!(report.residual_basis.is_some());
        assert!(report.residual_estimator.is_some());
        assert!(report.corollary_lower_slack.is_some());
        // factorized default: sequence and count values coincide at every
        // parameter, so the basis residual is exactly −d_exch
        let basis = report.residual_basis.unwrap();
        assert!((basis + report.d_exch).abs() < 1e-12, "basis {basis} d_exch {}", report.d_exch);
        assert!(basis.abs() <= 1.0);
    }

    #[test]
    fn audit_degenerate_0_12() {
        let report =
            decomposition_audit(&BitString::repeated(0, 12), &EngineConfig::default()).unwrap();
        let db = report.d_bern_grid.finite().unwrap();
        let dk = report.d_bin_grid.finite().unwrap();
        assert!(db == -1 || db == 0);
        assert!(dk == -1 || dk == 0);
        assert!(report.d_exch <= 0.0);
        let r = report.residual_thm1.unwrap();
        assert!((-2.0..=2.0).contains(&r), "{r}");
    }

    #[test]
    fn audit_matches_public_ops() {
        // the fused grid pass inside the audit must agree with the
        // standalone operations
        let config = EngineConfig::default();
        let x = bs("0100110101");
        let report = decomposition_audit(&x, &config).unwrap();
        let grid = config.grid.points(10, config.precision_bits).unwrap();
        let bern = bernoulli_deficiency(&x, &config.q_seq, &grid).unwrap();
        let bin = binomial_deficiency_grid(10, 5, &config.q_count, &grid).unwrap();
        assert_eq!(report.d_bern_grid, bern.value);
        assert_eq!(report.d_bin_grid, bin.value);
        assert_eq!(report.p_star, exact::rat_to_f64(&bern.argmin));
        let d_exch = exch_deficiency(&x, &config.code, bin.value.finite()).unwrap();
        assert_eq!(report.d_exch, d_exch);
    }

    #[test]
    fn factorized_levels_coincide_pointwise() {
        // with q = r(k)·uniform-in-class, the defensive ratios at the two
        // levels are the same exact rational at every parameter
        let config = EngineConfig::default();
        let n = 9u64;
        let grid = config.grid.points(n, 96).unwrap();
        for v in [0u64, 5, 137, 300, 511] {
            let x = BitString::from_index(v, n as usize);
            let k = x.count_ones();
            for p in &grid {
                let a = seq_deficiency_vs(&x, p, &config.q_seq).unwrap();
                let b = count_deficiency_vs(n, k, p, &config.q_count).unwrap();
                assert_eq!(a, b, "x={x} p={p}");
            }
        }
    }

    #[test]
    fn sandwich_values() {
        let config = EngineConfig::default();
        let (lo, hi) = corollary_sandwich(&bs("0011"), &rat(1, 2), &config).unwrap();
        let (lo, hi) = (lo.unwrap(), hi.unwrap());
        assert!(lo.is_finite() && hi.is_finite());
        // d_bin = 0 case forces lower = −upper at epsilon-independent mid;
        // verify the algebraic tie when it occurs
        let report = decomposition_audit(&bs("0011"), &config).unwrap();
        if report.d_bin_grid == TestValue::Finite(0) {
            assert!((lo + hi).abs() < 1e-12);
        }
        // upper slack nondecreasing in epsilon when d_bin ≥ 0
        if report.d_bin_grid >= TestValue::Finite(0) {
            let (_, hi2) = corollary_sandwich(&bs("0011"), &rat(3, 1), &config).unwrap();
            assert!(hi2.unwrap() >= hi - 1e-12);
        }
        assert!(corollary_sandwich(&bs("0011"), &rat(0, 1), &config).is_err());
    }

    #[test]
    fn estimator_audit_values() {
        let config = EngineConfig::default();
        let fine = fine_grid(8, 96).unwrap();
        // degenerate: both sides sit at the p=0 optimum
        let audit = estimator_audit(&BitString::repeated(0, 8), &fine, &config).unwrap();
        assert!(audit.gap_seq.unwrap() <= 1);
        // the snapped parameter is a fine-grid member, so the gap is ≥ 0
        for v in [3u64, 77, 170, 255] {
            let x = BitString::from_index(v, 8);
            let audit = estimator_audit(&x, &fine, &config).unwrap();
            assert!(audit.gap_seq.unwrap() >= 0, "x={x}");
            assert!(audit.gap_count.unwrap() >= 0, "x={x}");
        }
    }

    #[test]
    fn grid_spec_contracts() {
        let pts = GridSpec::Arcsine.points(4, 96).unwrap();
        assert_eq!(pts.first().unwrap(), &Rat::zero());
        assert_eq!(pts.last().unwrap(), &Rat::one());
        // ⌊π·2⌋ + 1 half-step values plus the appended 1
        assert_eq!(pts.len(), 8);
        let pts = GridSpec::Uniform { steps: 4 }.points(9, 96).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(GridSpec::Explicit(vec![rat(1, 2)]).points(4, 96).is_err());
        assert!(GridSpec::Explicit(vec![Rat::zero(), rat(1, 2), Rat::one()])
            .points(4, 96)
            .is_ok());
        assert!(GridSpec::Explicit(vec![Rat::zero(), rat(3, 2), Rat::one()])
            .points(4, 96)
            .is_err());
    }

    #[test]
    fn config_validation() {
        let mut config = EngineConfig::default();
        assert!(config.validate().is_ok());
        config.precision_bits = 32;
        assert!(config.validate().is_err());
        let mut config = EngineConfig::default();
        config.epsilon = rat(-1, 2);
        assert!(config.validate().is_err());
        assert!(EngineConfig::default().per_count_determined());
        let mut config = EngineConfig::default();
        config.code = Provider::MarkovKt;
        assert!(!config.per_count_determined());
    }

    #[test]
    fn report_serializes_stably() {
        let config = EngineConfig::default();
        let a = serde_json::to_string(&decomposition_audit(&bs("0011"), &config).unwrap())
            .unwrap();
        let b = serde_json::to_string(&decomposition_audit(&bs("0011"), &config).unwrap())
            .unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\":1"));
        assert!(a.contains("\"d_bern_grid\""));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn audit_invariants_hold(v in 0u64..1024, n in 1u64..=10) {
            let x = BitString::from_index(v & ((1 << n) - 1), n as usize);
            let report = decomposition_audit(&x, &EngineConfig::default()).unwrap();
            let db = report.d_bern_grid.finite().unwrap();
            let dk = report.d_bin_grid.finite().unwrap();
            prop_assert!(db >= -1);
            prop_assert!(dk >= -1);
            // at-estimate value can only improve on the grid min when the
            // estimate is on-grid: with the arcsine default it is on-grid
            prop_assert!(report.residual_estimator.unwrap() >= 0.0);
            // identity field
            let r = report.residual_thm1.unwrap();
            prop_assert!((r - (db as f64 - report.d_exch - dk as f64)).abs() < 1e-12);
            // factorized default: basis residual within one bit
            prop_assert!(report.residual_basis.unwrap().abs() <= 1.0);
        }
    }
}
