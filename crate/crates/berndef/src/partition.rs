//! The variance-stabilizing count partition, its grid, and the point
//! estimator.
//!
//! Anchors k_s = (n/2)(1 − cos(s/√n)) for s = 0..⌊π√n⌋ carve {0,…,n} into
//! contiguous cells whose width tracks √(k(n−k)/n); {0} and {n} are always
//! singleton cells. The same geometry, read through the identity
//! 1 − cos(2α) = 2 sin²α, gives the grid θ(a) = n·sin²(a/√n) over
//! half-integer coordinates a = s/2 (monotone on [0, (π/2)√n]), the inverse
//! statistic â = √n·arcsin(√(k/n)), and the snapped point estimate
//! p̂ = sin²(a*/√n).
//!
//! Construction is O(√n) in both time and memory — no per-integer scan — so
//! n up to 10^9 is routine. Anchor values are f64 with one safeguard: an
//! anchor that lands within 1e−6 of an integer is re-settled with the exact
//! rational series before a boundary decision is made, so cell boundaries
//! are deterministic and correct, not at the mercy of trig rounding.

use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use num::traits::ToPrimitive;
use std::f64::consts::PI;

pub const MAX_PARTITION_N: u64 = 1_000_000_000;

/// One partition element: the contiguous integer range [lo, hi], remembering
/// which anchor interval [k_s, k_{s+1}) produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub s_index: u64,
    pub lo: u64,
    pub hi: u64,
}

impl Cell {
    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false // constructed cells are nonempty by definition
    }

    pub fn contains(&self, k: u64) -> bool {
        self.lo <= k && k <= self.hi
    }
}

/// The full partition of {0,…,n}: anchors plus the derived nonempty cells.
#[derive(Clone, Debug)]
pub struct Partition {
    pub n: u64,
    anchors: Vec<f64>,
    cells: Vec<Cell>,
}

/// ⌊π√n⌋, the largest anchor index.
pub fn max_anchor_index(n: u64) -> u64 {
    (PI * (n as f64).sqrt()).floor() as u64
}

/// Anchor value k_s = (n/2)(1 − cos(s/√n)) as f64.
pub fn anchor_value(n: u64, s: u64) -> f64 {
    let rn = (n as f64).sqrt();
    (n as f64 / 2.0) * (1.0 - (s as f64 / rn).cos())
}

/// θ(a) = n·sin²(a/√n) as f64.
pub fn theta(n: u64, a: f64) -> f64 {
    let rn = (n as f64).sqrt();
    let s = (a / rn).sin();
    n as f64 * s * s
}

/// θ(m/2) as an exact dyadic rational with `frac_bits` fractional bits of
/// precision (absolute error below n·2^−frac_bits): n·sin²((m/2)/√n)
/// evaluated through the rational series with argument q = m²/(4n).
pub fn theta_dyadic(n: u64, half_steps: u64, frac_bits: u32) -> Rat {
    Rat::from_integer(n.into()) * p_value_dyadic(n, half_steps, frac_bits)
}

/// θ(m/2)/n = sin²((m/2)/√n) ∈ [0,1] as a dyadic rational — the grid's
/// success-probability value at half-integer coordinate m/2.
pub fn p_value_dyadic(n: u64, half_steps: u64, frac_bits: u32) -> Rat {
    let q = Rat::new(
        (half_steps as u128 * half_steps as u128).into(),
        (4u128 * n as u128).into(),
    );
    exact::sin_sq_of_sqrt(&q, frac_bits)
}

/// Integer ceiling of anchor k_s, with the near-integer guard: when the f64
/// value sits within 1e−6 of an integer the decision is re-made on the exact
/// dyadic value, whose own error (n·2^−96 ≤ 2^−66 even at n = 10^9) is far
/// inside that window.
fn ceil_anchor(n: u64, s: u64) -> u64 {
    if s == 0 {
        return 0;
    }
    let v = anchor_value(n, s);
    if (v - v.round()).abs() < 1e-6 {
        let exact_theta = theta_dyadic(n, s, 96);
        let c = exact_theta.ceil().to_integer();
        return c.to_u64().expect("anchor within 0..=n");
    }
    v.ceil() as u64
}

/// Build the partition. O(√n); n = 0 is rejected, n above 10^9 is refused
/// as a resource cap.
pub fn build_partition(n: u64) -> Result<Partition> {
    if n == 0 {
        return Err(Error::input("partition needs n >= 1"));
    }
    if n > MAX_PARTITION_N {
        return Err(Error::resource(format!(
            "partition supports n up to {MAX_PARTITION_N}, got {n}"
        )));
    }
    let smax = max_anchor_index(n);
    let anchors: Vec<f64> = (0..=smax).map(|s| anchor_value(n, s)).collect();

    // Left edge (inclusive) of the integer range for each interval
    // [k_s, k_{s+1}); monotonicity is enforced so f64 jitter can never
    // produce overlapping cells.
    let mut lows: Vec<u64> = (0..=smax).map(|s| ceil_anchor(n, s)).collect();
    for i in 1..lows.len() {
        lows[i] = lows[i].max(lows[i - 1]);
    }

    let mut cells = Vec::new();
    for s in 0..smax as usize {
        if lows[s + 1] > lows[s] && lows[s] <= n {
            cells.push(Cell {
                s_index: s as u64,
                lo: lows[s],
                hi: (lows[s + 1] - 1).min(n),
            });
        }
    }
    // Final interval [k_smax, +inf) picks up everything that remains.
    if lows[smax as usize] <= n {
        cells.push(Cell {
            s_index: smax,
            lo: lows[smax as usize],
            hi: n,
        });
    }

    let partition = Partition { n, anchors, cells };
    partition.verify()?;
    Ok(partition)
}

impl Partition {
    pub fn num_cells(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Anchor values k_s, s = 0..⌊π√n⌋.
    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    /// The unique cell containing k.
    pub fn cell_of(&self, k: u64) -> Result<Cell> {
        if k > self.n {
            return Err(Error::input(format!("k={k} out of range 0..={}", self.n)));
        }
        let idx = self.cells.partition_point(|c| c.hi < k);
        debug_assert!(self.cells[idx].contains(k));
        Ok(self.cells[idx])
    }

    /// Structural invariants: contiguous disjoint coverage of {0,…,n} and
    /// singleton endpoint cells. Cheap (O(num_cells)); construction runs it.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::input(format!("partition invariant broken: {msg}")));
        if self.cells.is_empty() {
            return fail("no cells".into());
        }
        let first = self.cells[0];
        let last = self.cells[self.cells.len() - 1];
        if first.lo != 0 || first.hi != 0 {
            return fail(format!("cell(0) = [{}, {}], want {{0}}", first.lo, first.hi));
        }
        if last.lo != self.n || last.hi != self.n {
            return fail(format!("cell(n) = [{}, {}], want {{{}}}", last.lo, last.hi, self.n));
        }
        let mut expect = 0u64;
        for c in &self.cells {
            if c.lo != expect || c.hi < c.lo {
                return fail(format!("gap or inversion at cell [{}, {}]", c.lo, c.hi));
            }
            expect = c.hi + 1;
        }
        if expect != self.n + 1 {
            return fail(format!("coverage stops at {expect}, want {}", self.n + 1));
        }
        Ok(())
    }
}

/// |cell(k)| / √(k(n−k)/n) — how far the realized cell width sits from the
/// standard-deviation scale. Defined only for interior k.
pub fn cell_width_ratio(partition: &Partition, k: u64) -> Result<f64> {
    let n = partition.n;
    if k == 0 || k >= n {
        return Err(Error::input(format!(
            "width ratio undefined at k={k} (needs 1 <= k <= n-1, n={n})"
        )));
    }
    let cell = partition.cell_of(k)?;
    let scale = ((k as f64) * ((n - k) as f64) / n as f64).sqrt();
    Ok(cell.len() as f64 / scale)
}

/// â = √n·arcsin(√(k/n)), the grid coordinate whose θ equals k.
pub fn a_hat(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::input(format!("a_hat needs k <= n, got k={k}, n={n}")));
    }
    let rn = (n as f64).sqrt();
    let v = rn * ((k as f64 / n as f64).sqrt()).asin();
    // clamp against f64 spill at the endpoints
    Ok(v.clamp(0.0, PI / 2.0 * rn))
}

/// The snapped point estimate.
#[derive(Clone, Debug)]
pub struct EstimatorResult {
    /// Raw grid coordinate â.
    pub a_hat: f64,
    /// a* in half-steps: a* = half_steps/2, a grid point (0..=⌊π√n⌋).
    pub half_steps: u64,
    /// a* as a real coordinate.
    pub a_star: f64,
    /// p̂ = sin²(a*/√n) as an exact dyadic rational.
    pub p_hat: Rat,
    /// p̂ rendered as f64.
    pub p_hat_f64: f64,
}

/// Snap â to the nearest half-integer grid point (ties toward 0, clamped to
/// the grid range) and evaluate p̂ there to `frac_bits` dyadic precision.
pub fn point_estimate_for_count(n: u64, k: u64, frac_bits: u32) -> Result<EstimatorResult> {
    if n == 0 {
        return Err(Error::input("point estimate needs n >= 1"));
    }
    let ah = a_hat(n, k)?;
    // nearest half-integer with ties toward zero: in half-steps,
    // m = ceil(2a − 1/2)
    let m = ((2.0 * ah - 0.5).ceil().max(0.0)) as u64;
    let m = m.min(max_anchor_index(n));
    // m = 0 gives sin²(0) = 0 exactly, covering the p_hat = 0 contract for
    // all-zero sequences without a special case
    let p_hat = p_value_dyadic(n, m, frac_bits);
    let p_hat_f64 = exact::rat_to_f64(&p_hat);
    Ok(EstimatorResult {
        a_hat: ah,
        half_steps: m,
        a_star: m as f64 / 2.0,
        p_hat,
        p_hat_f64,
    })
}

/// Convenience wrapper over a sequence.
pub fn point_estimate(x: &crate::bits::BitString) -> Result<EstimatorResult> {
    point_estimate_for_count(x.len() as u64, x.count_ones(), 96)
}
