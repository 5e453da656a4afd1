//! Reference points for the optimal mechanism: a second-price benchmark and
//! the complete-information lower bound.

use std::str::FromStr;

use crate::aoi_cost::AoiCostModel;
use crate::error::{Error, Result};
use crate::mech_multi::{aggregate_rate, waterfill, MultiAllocation, OwnRate};
use crate::mech_single::capped_rate;
use crate::mechanism::{Mechanism, SourceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Benchmark,
    CompleteInfo,
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(Self::Benchmark),
            "complete" | "complete_info" => Ok(Self::CompleteInfo),
            other => Err(Error::config(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Allocation and payments of a baseline at one report profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub allocation: MultiAllocation,
    pub payments: Vec<f64>,
}

/// Buys only from the lowest report and pays the second-lowest report per
/// update (the top of the winner's support when there is one source).
///
/// The winner's rate minimizes `f·G(1/f) + f·c_(2)` over `[0, f_max]`.
#[derive(Debug, Clone)]
pub struct BenchmarkMechanism {
    profile: SourceProfile,
    aoi: AoiCostModel,
}

impl BenchmarkMechanism {
    pub fn new(profile: SourceProfile, aoi: AoiCostModel) -> Self {
        Self { profile, aoi }
    }

    /// Winner (lowest report, ties to the lower index) and the price `c_(2)`.
    pub fn second_price(&self, reports: &[f64]) -> Result<(usize, f64)> {
        self.profile.check_reports(reports)?;
        let mut winner = 0;
        for (i, &c) in reports.iter().enumerate() {
            if c < reports[winner] {
                winner = i;
            }
        }
        let second = reports
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != winner)
            .map(|(_, &c)| c)
            .fold(f64::INFINITY, f64::min);
        let price = if second.is_finite() {
            second
        } else {
            self.profile.dist(winner).c_high()
        };
        Ok((winner, price))
    }

    pub fn outcome(&self, reports: &[f64]) -> Result<BaselineOutcome> {
        let (winner, price) = self.second_price(reports)?;
        let mut rates = vec![0.0; reports.len()];
        let mut payments = vec![0.0; reports.len()];
        let f = capped_rate(&self.aoi, price, self.profile.source(winner).f_max)?;
        rates[winner] = f;
        payments[winner] = f * price;
        Ok(BaselineOutcome {
            allocation: MultiAllocation::from_rates(rates),
            payments,
        })
    }
}

impl Mechanism for BenchmarkMechanism {
    fn name(&self) -> &str {
        "benchmark"
    }

    fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }

    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.outcome(reports)?.allocation.rates)
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.outcome(reports)?.payments)
    }

    fn breakpoints(&self, i: usize, reports: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = self.profile.dist(i).support();
        Ok(reports
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &c)| c)
            .reduce(f64::min)
            .filter(|&m| m > lo && m < hi)
            .into_iter()
            .collect())
    }

    /// The winner earns `(c_(2) − c)·f`, which is exactly the tail integral of
    /// its own step-shaped rate, so payments have the envelope form.
    fn envelope_payments(&self) -> bool {
        true
    }
}

/// The destination's optimum when it observes every cost and pays each
/// source exactly its cost: the optimal machinery with `φ̃_i` replaced by `c_i`.
#[derive(Debug, Clone)]
pub struct CompleteInfoPricing {
    profile: SourceProfile,
    aoi: AoiCostModel,
}

impl CompleteInfoPricing {
    pub fn new(profile: SourceProfile, aoi: AoiCostModel) -> Self {
        Self { profile, aoi }
    }

    pub fn outcome(&self, costs: &[f64]) -> Result<BaselineOutcome> {
        self.profile.check_reports(costs)?;
        let caps = self.profile.caps();
        let f_agg = aggregate_rate(costs, &caps, &self.aoi)?;
        let rates = waterfill(costs, &caps, f_agg)?;
        let payments = rates.iter().zip(costs).map(|(f, c)| f * c).collect();
        Ok(BaselineOutcome {
            allocation: MultiAllocation::from_rates(rates),
            payments,
        })
    }
}

impl Mechanism for CompleteInfoPricing {
    fn name(&self) -> &str {
        "complete"
    }

    fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }

    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.outcome(reports)?.allocation.rates)
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.outcome(reports)?.payments)
    }

    fn breakpoints(&self, i: usize, reports: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = self.profile.dist(i).support();
        let mut probe = reports.to_vec();
        probe[i] = lo;
        let own = OwnRate::new(&self.aoi, &probe, &self.profile.caps(), i);
        let mut out: Vec<f64> = own
            .value_breakpoints()
            .into_iter()
            .filter(|&z| z > lo && z < hi)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    fn envelope_payments(&self) -> bool {
        false
    }
}
