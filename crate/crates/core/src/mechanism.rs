//! Sources, report profiles and the rate-form mechanism interface.
//!
//! A mechanism maps a vector of reported costs to an update rate `f_i` and a
//! payment rate `h_i` for every source. Equal spacing and flat per-update
//! prices make this description equivalent to the (price, interarrival) form:
//! `x = 1/Σf`, `π_i = f_i/Σf`, `p_i = h_i/f_i`.

use serde::{Deserialize, Serialize};

use crate::aoi_cost::AoiCostModel;
use crate::cost_dist::{CostDistribution, IronedVirtualCost};
use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;

/// Rate cap used when a configuration leaves `f_max` unspecified.
pub const DEFAULT_F_MAX: f64 = 1e9;

fn default_f_max() -> f64 {
    DEFAULT_F_MAX
}

/// One strategic source: its cost prior and its maximal update rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    #[serde(flatten)]
    pub dist: CostDistribution,
    #[serde(default = "default_f_max")]
    pub f_max: f64,
}

impl Source {
    pub fn new(dist: CostDistribution, f_max: f64) -> Self {
        Self { dist, f_max }
    }
}

/// The sources a mechanism buys from, with their ironed virtual costs cached.
#[derive(Debug, Clone)]
pub struct SourceProfile {
    sources: Vec<Source>,
    ironed: Vec<IronedVirtualCost>,
}

impl SourceProfile {
    pub fn new(sources: Vec<Source>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::config("at least one source is required"));
        }
        for (i, s) in sources.iter().enumerate() {
            if s.f_max.is_nan() || s.f_max < 0.0 {
                return Err(Error::config(format!(
                    "source {i}: f_max must be non-negative, got {}",
                    s.f_max
                )));
            }
        }
        let ironed = sources.iter().map(|s| s.dist.iron()).collect();
        Ok(Self { sources, ironed })
    }

    pub fn single(dist: CostDistribution, f_max: f64) -> Result<Self> {
        Self::new(vec![Source::new(dist, f_max)])
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn source(&self, i: usize) -> &Source {
        &self.sources[i]
    }

    pub fn dist(&self, i: usize) -> &CostDistribution {
        &self.sources[i].dist
    }

    pub fn ironed(&self, i: usize) -> &IronedVirtualCost {
        &self.ironed[i]
    }

    pub fn caps(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.f_max).collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.sources.iter().map(|s| s.f_max).sum()
    }

    /// Upper cost bounds `c̄_i`.
    pub fn c_high(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.dist.c_high()).collect()
    }

    /// Checks that `reports` has one in-support entry per source.
    pub fn check_reports(&self, reports: &[f64]) -> Result<()> {
        if reports.len() != self.len() {
            return Err(Error::config(format!(
                "expected {} reported costs, got {}",
                self.len(),
                reports.len()
            )));
        }
        for (i, (&c, s)) in reports.iter().zip(&self.sources).enumerate() {
            if !s.dist.contains(c) {
                let (lo, hi) = s.dist.support();
                return Err(Error::Domain {
                    what: "reported cost",
                    value: c,
                    domain: format!("[{lo}, {hi}] for source {i}"),
                });
            }
        }
        Ok(())
    }

    /// Ironed virtual costs `φ̃_i(c_i)` of a report profile.
    pub fn virtual_costs(&self, reports: &[f64]) -> Result<Vec<f64>> {
        self.check_reports(reports)?;
        Ok(reports
            .iter()
            .zip(&self.ironed)
            .map(|(&c, iv)| iv.value(c))
            .collect())
    }
}

/// Price and interarrival time of one source's flat-rate contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceSchedule {
    Trade {
        price: f64,
        interarrival: f64,
    },
    /// The mechanism buys no updates from this report.
    NoTrade,
}

impl PriceSchedule {
    pub fn from_rates(rate: f64, payment_rate: f64) -> Self {
        if rate > 0.0 && rate.is_finite() {
            PriceSchedule::Trade {
                price: payment_rate / rate,
                interarrival: 1.0 / rate,
            }
        } else {
            PriceSchedule::NoTrade
        }
    }
}

/// A rate-form mechanism over a fixed set of sources.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> &str;

    fn profile(&self) -> &SourceProfile;

    fn aoi(&self) -> &AoiCostModel;

    /// Update rates `f_i(c̃)`.
    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>>;

    /// Payment rates `h_i(c̃)`.
    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>>;

    /// Own reports of source `i` at which `f_i(·, c̃_{-i})` may jump or kink.
    ///
    /// Only the entries of `reports` other than `i` are read.
    fn breakpoints(&self, i: usize, reports: &[f64]) -> Result<Vec<f64>>;

    /// True when payments are `h_i = c_i f_i + ∫_{c_i}^{c̄_i} f_i(z, c_{-i}) dz`.
    ///
    /// For such mechanisms the expected payment equals the expected
    /// virtual-cost-weighted rate, which gives a second way to compute the
    /// destination's cost.
    fn envelope_payments(&self) -> bool;

    /// Rate and payment of source `i` at each own report in the sorted `grid`,
    /// with the other reports held at `reports`.
    fn schedule_along(&self, i: usize, reports: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut r = reports.to_vec();
        grid.iter()
            .map(|&z| {
                r[i] = z;
                Ok((self.rates(&r)?[i], self.payment_rates(&r)?[i]))
            })
            .collect()
    }
}

/// [`Mechanism::schedule_along`] for envelope-payment mechanisms.
///
/// Walks the grid from the top, accumulating `∫ f_i` between consecutive
/// grid points with a 16-node rule split at the mechanism's breakpoints.
pub(crate) fn envelope_schedule<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    reports: &[f64],
    grid: &[f64],
    rate: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let hi = mech.profile().dist(i).c_high();
    let mut kinks = mech.breakpoints(i, reports)?;
    kinks.sort_by(f64::total_cmp);
    let gl = gauss_legendre(16);
    let mut out = vec![(0.0, 0.0); grid.len()];
    let mut tail = 0.0;
    let mut upper = hi;
    for (k, &z) in grid.iter().enumerate().rev() {
        if z > upper {
            return Err(Error::config("schedule grid must be sorted ascending"));
        }
        tail += integrate_split(gl, &kinks, z, upper, &rate)?;
        upper = z;
        let f = rate(z)?;
        out[k] = (f, z * f + tail);
    }
    Ok(out)
}

/// `∫_a^b f` split at the kinks inside `(a, b)`.
pub(crate) fn integrate_split(
    gl: &crate::numeric::GaussLegendre,
    kinks: &[f64],
    a: f64,
    b: f64,
    f: &impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let start = kinks.partition_point(|&k| k <= a);
    let mut total = 0.0;
    let mut lo = a;
    for &k in kinks[start..]
        .iter()
        .take_while(|&&k| k < b)
        .chain(std::iter::once(&b))
    {
        if k > lo {
            let mut err = None;
            total += gl.integrate_stretched(lo, k, |z| {
                f(z).unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                })
            });
            if let Some(e) = err {
                return Err(e);
            }
            lo = k;
        }
    }
    Ok(total)
}

/// `n + 1` evenly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![lo];
    }
    (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect()
}
