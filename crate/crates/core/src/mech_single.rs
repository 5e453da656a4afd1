//! The optimal mechanism for a single source, and the naive mechanism that
//! takes reports at face value.

use crate::aoi_cost::AoiCostModel;
use crate::cost_dist::CostDistribution;
use crate::error::{Error, Result};
use crate::mechanism::{envelope_schedule, linspace, Mechanism, PriceSchedule, SourceProfile};
use crate::numeric::adaptive_simpson;
use crate::numeric::root::last_crossing;

const PAYMENT_TOL: f64 = 1e-9;
const SIMPSON_DEPTH: u32 = 40;

/// Rate `min(f_max, 1/M⁻¹(price))`, treating a zero price as unbounded demand.
pub(crate) fn capped_rate(aoi: &AoiCostModel, price: f64, f_max: f64) -> Result<f64> {
    if f_max == 0.0 {
        return Ok(0.0);
    }
    Ok(aoi.rate_for_price(price)?.min(f_max))
}

/// Optimal single-source mechanism: `f*(c) = min(f_max, 1/M⁻¹(φ̃(c)))` with
/// the minimal payments that make truthful reporting optimal.
#[derive(Debug, Clone)]
pub struct SingleSourceMechanism {
    profile: SourceProfile,
    aoi: AoiCostModel,
    /// Largest cost at which the cap binds, if it binds anywhere.
    cap_until: Option<f64>,
}

impl SingleSourceMechanism {
    pub fn new(dist: CostDistribution, aoi: AoiCostModel, f_max: f64) -> Result<Self> {
        Self::from_profile(SourceProfile::single(dist, f_max)?, aoi)
    }

    pub fn from_profile(profile: SourceProfile, aoi: AoiCostModel) -> Result<Self> {
        if profile.len() != 1 {
            return Err(Error::config(format!(
                "single-source mechanism needs exactly one source, got {}",
                profile.len()
            )));
        }
        let f_max = profile.source(0).f_max;
        let (lo, hi) = profile.dist(0).support();
        let ironed = profile.ironed(0);
        // φ̃(c) ≤ M(1/f_max) exactly where the cap binds.
        let threshold = aoi.m_at_rate(f_max);
        let cap_until = if f_max > 0.0 && ironed.value(lo) <= threshold {
            Some(last_crossing(|c| ironed.value(c), threshold, lo, hi, 200))
        } else {
            None
        };
        Ok(Self {
            profile,
            aoi,
            cap_until,
        })
    }

    pub fn dist(&self) -> &CostDistribution {
        self.profile.dist(0)
    }

    pub fn f_max(&self) -> f64 {
        self.profile.source(0).f_max
    }

    fn check(&self, c: f64) -> Result<()> {
        self.profile.check_reports(&[c])
    }

    fn rate_unchecked(&self, c: f64) -> Result<f64> {
        let v = self.profile.ironed(0).value(c);
        if !v.is_finite() {
            return Err(Error::DegenerateDensity { at: c });
        }
        capped_rate(&self.aoi, v, self.f_max())
    }

    /// `f*(c)`.
    pub fn optimal_rate(&self, c: f64) -> Result<f64> {
        self.check(c)?;
        self.rate_unchecked(c)
    }

    /// `h*(c) = c·f*(c) + ∫_c^{c̄} f*(z) dz`.
    pub fn payment_rate(&self, c: f64) -> Result<f64> {
        self.check(c)?;
        let hi = self.dist().c_high();
        let mut cuts: Vec<f64> = self
            .kinks()
            .into_iter()
            .filter(|&k| k > c && k < hi)
            .collect();
        cuts.push(hi);
        let share = PAYMENT_TOL / cuts.len() as f64;
        let mut tail = 0.0;
        let mut lo = c;
        for b in cuts {
            if b > lo {
                let width = b - lo;
                // z = lo + width·s² tames the inverse-root growth of f near φ = 0.
                let piece = adaptive_simpson(
                    |s| {
                        let z = lo + width * s * s;
                        2.0 * width * s * self.rate_unchecked(z).unwrap_or(f64::NAN)
                    },
                    0.0,
                    1.0,
                    share,
                    SIMPSON_DEPTH,
                )?;
                tail += piece;
                lo = b;
            }
        }
        Ok(c * self.rate_unchecked(c)? + tail)
    }

    /// `(p, x) = (h/f, 1/f)`, or no trade when `f(c) = 0`.
    pub fn to_price_schedule(&self, c: f64) -> Result<PriceSchedule> {
        let f = self.optimal_rate(c)?;
        if f == 0.0 {
            return Ok(PriceSchedule::NoTrade);
        }
        Ok(PriceSchedule::from_rates(f, self.payment_rate(c)?))
    }

    /// Costs where `f*` is not smooth: the end of the capped region and the
    /// ironed interval endpoints.
    pub fn kinks(&self) -> Vec<f64> {
        let (lo, hi) = self.dist().support();
        let mut k: Vec<f64> = self.cap_until.into_iter().collect();
        for iv in self.profile.ironed(0).intervals() {
            k.push(iv.a);
            k.push(iv.b);
        }
        k.retain(|&z| z > lo && z < hi);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// Cost below which `f*` sits at the cap.
    pub fn cap_binds_until(&self) -> Option<f64> {
        self.cap_until
    }
}

impl Mechanism for SingleSourceMechanism {
    fn name(&self) -> &str {
        "optimal"
    }

    fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }

    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        self.profile.check_reports(reports)?;
        Ok(vec![self.rate_unchecked(reports[0])?])
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        self.profile.check_reports(reports)?;
        Ok(vec![self.payment_rate(reports[0])?])
    }

    fn breakpoints(&self, _i: usize, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.kinks())
    }

    fn envelope_payments(&self) -> bool {
        true
    }

    fn schedule_along(&self, i: usize, reports: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        envelope_schedule(self, i, reports, grid, |z| self.rate_unchecked(z))
    }
}

/// Mechanism that treats reports as true costs: `f_N(c̃) = min(f_max, 1/M⁻¹(c̃))`
/// and `p_N(c̃) = c̃`.
#[derive(Debug, Clone)]
pub struct NaiveMechanism {
    profile: SourceProfile,
    aoi: AoiCostModel,
}

impl NaiveMechanism {
    pub fn new(dist: CostDistribution, aoi: AoiCostModel, f_max: f64) -> Result<Self> {
        Ok(Self {
            profile: SourceProfile::single(dist, f_max)?,
            aoi,
        })
    }

    pub fn rate(&self, report: f64) -> Result<f64> {
        self.profile.check_reports(&[report])?;
        capped_rate(&self.aoi, report, self.profile.source(0).f_max)
    }

    /// Source payoff rate `(c̃ − c)·f_N(c̃)` from reporting `report` at true cost `cost`.
    pub fn payoff(&self, report: f64, cost: f64) -> Result<f64> {
        Ok((report - cost) * self.rate(report)?)
    }

    /// Destination cost rate when the source reports `report`.
    pub fn destination_cost(&self, report: f64) -> Result<f64> {
        let f = self.rate(report)?;
        Ok(self.aoi.rate_cost(f) + report * f)
    }
}

impl Mechanism for NaiveMechanism {
    fn name(&self) -> &str {
        "naive"
    }

    fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }

    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.rate(*reports.first().unwrap_or(&f64::NAN))?])
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        let c = *reports.first().unwrap_or(&f64::NAN);
        Ok(vec![c * self.rate(c)?])
    }

    fn breakpoints(&self, _i: usize, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn envelope_payments(&self) -> bool {
        false
    }
}

/// The naive mechanism together with the source's best response to it.
#[derive(Debug, Clone)]
pub struct NaiveOutcome {
    pub mechanism: NaiveMechanism,
    /// Report maximizing the source's payoff, the same for every true cost.
    pub optimal_misreport: f64,
    /// Destination cost rate once the source plays that report.
    pub destination_cost: f64,
}

/// Builds the naive mechanism and finds the source's best misreport by grid
/// search over `grid + 1` reports for each of `grid + 1` true costs.
pub fn naive_counterpart(
    dist: CostDistribution,
    aoi: AoiCostModel,
    f_max: f64,
    grid: usize,
) -> Result<NaiveOutcome> {
    let mechanism = NaiveMechanism::new(dist, aoi, f_max)?;
    let (lo, hi) = mechanism.profile.dist(0).support();
    let reports = linspace(lo, hi, grid);
    let rates: Vec<f64> = reports
        .iter()
        .map(|&r| mechanism.rate(r))
        .collect::<Result<_>>()?;
    let mut best_overall = lo;
    for &c in &reports {
        let (mut best, mut best_val) = (c, f64::NEG_INFINITY);
        for (&r, &f) in reports.iter().zip(&rates) {
            let v = (r - c) * f;
            if v > best_val {
                best_val = v;
                best = r;
            }
        }
        best_overall = best_overall.max(best);
    }
    let destination_cost = mechanism.destination_cost(best_overall)?;
    Ok(NaiveOutcome {
        mechanism,
        optimal_misreport: best_overall,
        destination_cost,
    })
}
