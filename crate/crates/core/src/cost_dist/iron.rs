//! Ironing of non-monotone virtual costs.
//!
//! In quantile space the cumulative virtual cost is `H(q) = q·Γ⁻¹(q)`, and
//! its derivative is `φ(Γ⁻¹(q))`. The ironed virtual cost is the slope of the
//! lower convex envelope of `H`, which is constant wherever the envelope lies
//! strictly below `H`. On such a stretch `[a, b]` the slope is
//! `(Φ(b) − Φ(a)) / (Γ(b) − Γ(a))`, the `Γ`-weighted average of `φ`.

use super::CostDistribution;
use crate::numeric::hull::lower_hull;

/// Number of quantile cells (and of cost cells) used to build the envelope.
pub const IRONING_GRID: usize = 4096;

const HULL_TOL: f64 = 1e-13;
// Grid points closer than this in probability are merged.
const MIN_GAP: f64 = 1e-12;

/// A stretch of costs on which the ironed virtual cost is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IronedInterval {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// Non-decreasing replacement `φ̃` for a prior's virtual cost.
#[derive(Debug, Clone)]
pub struct IronedVirtualCost {
    base: CostDistribution,
    intervals: Vec<IronedInterval>,
}

impl IronedVirtualCost {
    pub(super) fn new(base: CostDistribution) -> Self {
        let n = IRONING_GRID;
        let (lo, hi) = base.support();
        // Uniform quantiles, plus a uniform grid in cost so that thin tails
        // holding less than one quantile cell of mass are still resolved.
        let mut cs: Vec<f64> = (0..=n)
            .map(|j| base.quantile(j as f64 / n as f64))
            .chain((0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64))
            .collect();
        cs.sort_by(f64::total_cmp);
        cs[0] = lo;
        *cs.last_mut().unwrap() = hi;
        let mut qs = Vec::with_capacity(cs.len());
        cs.retain(|&c| {
            let q = base.cdf(c);
            if qs.last().is_some_and(|&p| q <= p + MIN_GAP) {
                return false;
            }
            qs.push(q);
            true
        });
        let hs: Vec<f64> = qs.iter().zip(&cs).map(|(q, c)| q * c).collect();
        let hull = lower_hull(&qs, &hs, HULL_TOL);

        let intervals = hull
            .windows(2)
            .filter(|w| w[1] - w[0] >= 2)
            .map(|w| {
                let (i, j) = (w[0], w[1]);
                IronedInterval {
                    a: cs[i],
                    b: cs[j],
                    value: (hs[j] - hs[i]) / (qs[j] - qs[i]),
                }
            })
            .collect();
        Self { base, intervals }
    }

    pub fn base(&self) -> &CostDistribution {
        &self.base
    }

    pub fn intervals(&self) -> &[IronedInterval] {
        &self.intervals
    }

    pub fn is_regular(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `φ̃(c)`.
    ///
    /// Inside an ironed interval this is the interval's constant. Elsewhere it
    /// is `φ(c)`, held between the neighbouring interval values so that grid
    /// snapping of the endpoints cannot break monotonicity.
    pub fn value(&self, c: f64) -> f64 {
        let phi = self.base.phi(c);
        if self.intervals.is_empty() {
            return phi;
        }
        let idx = self.intervals.partition_point(|iv| iv.b < c);
        if let Some(iv) = self.intervals.get(idx) {
            if iv.a <= c {
                return iv.value;
            }
        }
        let mut v = phi;
        if idx > 0 {
            v = v.max(self.intervals[idx - 1].value);
        }
        if let Some(next) = self.intervals.get(idx) {
            v = v.min(next.value);
        }
        v
    }

    /// Lower envelope `Φ̃(c)` of the cumulative virtual cost.
    pub fn cumulative(&self, c: f64) -> f64 {
        let idx = self.intervals.partition_point(|iv| iv.b < c);
        match self.intervals.get(idx) {
            Some(iv) if iv.a <= c => {
                self.base.big_phi(iv.a) + iv.value * (self.base.cdf(c) - self.base.cdf(iv.a))
            }
            _ => self.base.big_phi(c),
        }
    }
}
