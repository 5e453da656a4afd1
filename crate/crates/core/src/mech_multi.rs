//! The optimal mechanism for several sources.
//!
//! Sources are ranked by ironed virtual cost. The aggregate rate `F` solves
//! `M(1/F) ∈ ∂Ψ(F)`, where `Ψ(F)` is the cheapest total virtual cost of
//! buying rate `F` (a piecewise-linear convex function whose slope on each
//! segment is the virtual cost of the source being filled). `F` is then
//! water-filled from the cheapest source up.

use crate::aoi_cost::AoiCostModel;
use crate::error::{Error, Result};
use crate::mechanism::{envelope_schedule, Mechanism, SourceProfile};
use crate::numeric::gauss_legendre;
use crate::numeric::root::first_crossing;

const MEMBERSHIP_TOL: f64 = 1e-12;
const PAYMENT_NODES: usize = 256;

/// Value of `Ψ(F)` and its subdifferential `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateVirtualCost {
    pub value: f64,
    pub subgradient: (f64, f64),
}

/// Per-source rates and the induced schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAllocation {
    pub rates: Vec<f64>,
    pub f_agg: f64,
    /// Scheduling probabilities `π_i = f_i / Σf`; all zero without trade.
    pub pi: Vec<f64>,
    /// Interarrival time `1/f_agg`, infinite without trade.
    pub interarrival: f64,
}

impl MultiAllocation {
    pub fn from_rates(rates: Vec<f64>) -> Self {
        let f_agg: f64 = rates.iter().sum();
        let pi = if f_agg > 0.0 {
            rates.iter().map(|f| f / f_agg).collect()
        } else {
            vec![0.0; rates.len()]
        };
        let interarrival = if f_agg > 0.0 {
            1.0 / f_agg
        } else {
            f64::INFINITY
        };
        Self {
            rates,
            f_agg,
            pi,
            interarrival,
        }
    }

    pub fn is_no_trade(&self) -> bool {
        self.f_agg == 0.0
    }
}

/// Indices sorted by value, ties broken by index.
pub(crate) fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

fn check_lengths(values: &[f64], caps: &[f64]) -> Result<()> {
    if values.len() != caps.len() || values.is_empty() {
        return Err(Error::config(format!(
            "need one cap per source: {} values, {} caps",
            values.len(),
            caps.len()
        )));
    }
    Ok(())
}

/// `Ψ(F)` for per-source unit values and caps, with its subdifferential.
pub fn aggregate_virtual_cost(
    values: &[f64],
    caps: &[f64],
    rate: f64,
) -> Result<AggregateVirtualCost> {
    check_lengths(values, caps)?;
    let capacity: f64 = caps.iter().sum();
    if rate.is_nan() || rate < 0.0 || rate > capacity {
        return Err(Error::Infeasible {
            requested: rate,
            capacity,
        });
    }
    let segments: Vec<(f64, f64)> = ascending(values)
        .into_iter()
        .map(|k| (values[k], caps[k]))
        .filter(|&(_, cap)| cap > 0.0)
        .collect();
    let mut value = 0.0;
    let mut acc = 0.0;
    let mut subgradient = (
        f64::NEG_INFINITY,
        segments.first().map_or(f64::INFINITY, |s| s.0),
    );
    if rate > 0.0 {
        for (k, &(v, cap)) in segments.iter().enumerate() {
            let take = cap.min(rate - acc);
            value += v * take;
            let end = acc + cap;
            if rate < end {
                subgradient = (v, v);
                break;
            }
            if rate == end {
                let next = segments.get(k + 1).map_or(f64::INFINITY, |s| s.0);
                subgradient = (v, next);
                break;
            }
            acc = end;
        }
    }
    Ok(AggregateVirtualCost { value, subgradient })
}

/// Solves `M(1/F) ∈ ∂Ψ(F)` given the segments `(value, cap)` in ascending
/// value order, read through `segment(k)` for `k < n`.
fn solve_aggregate(
    aoi: &AoiCostModel,
    n: usize,
    segment: impl Fn(usize) -> (f64, f64),
) -> Result<f64> {
    let mut acc = 0.0;
    let mut k = 0;
    while k < n {
        let (v, cap) = segment(k);
        k += 1;
        if cap <= 0.0 {
            continue;
        }
        let end = acc + cap;
        let candidate = aoi.rate_for_price(v)?;
        if candidate <= end {
            return Ok(candidate.max(acc));
        }
        // M(1/end) > v here; the breakpoint is optimal if M(1/end) ≤ next value.
        let mut next = f64::INFINITY;
        for j in k..n {
            let (w, c) = segment(j);
            if c > 0.0 {
                next = w;
                break;
            }
        }
        let m = aoi.m_at_rate(end);
        if m <= next + MEMBERSHIP_TOL * m.abs().max(1.0) {
            return Ok(end);
        }
        acc = end;
    }
    Ok(acc)
}

/// Aggregate rate for per-source unit values (virtual costs, or true costs
/// under complete information) and caps.
pub fn aggregate_rate(values: &[f64], caps: &[f64], aoi: &AoiCostModel) -> Result<f64> {
    check_lengths(values, caps)?;
    let order = ascending(values);
    solve_aggregate(aoi, order.len(), |k| (values[order[k]], caps[order[k]]))
}

/// Fills `f_agg` from the lowest value up, each source to its cap.
pub fn waterfill(values: &[f64], caps: &[f64], f_agg: f64) -> Result<Vec<f64>> {
    check_lengths(values, caps)?;
    let capacity: f64 = caps.iter().sum();
    if f_agg.is_nan() || f_agg < 0.0 || f_agg > capacity * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            requested: f_agg,
            capacity,
        });
    }
    let mut rates = vec![0.0; values.len()];
    let mut remaining = f_agg;
    for k in ascending(values) {
        let f = caps[k].min(remaining.max(0.0));
        rates[k] = f;
        remaining -= f;
    }
    Ok(rates)
}

/// Rate of source `i` as a function of its own unit value, others fixed.
pub(crate) struct OwnRate<'a> {
    aoi: &'a AoiCostModel,
    i: usize,
    cap: f64,
    /// Other sources as `(value, cap, index)`, in ascending order.
    others: Vec<(f64, f64, usize)>,
    /// `prefix[k]` is the total cap of `others[..k]`.
    prefix: Vec<f64>,
}

impl<'a> OwnRate<'a> {
    pub(crate) fn new(aoi: &'a AoiCostModel, values: &[f64], caps: &[f64], i: usize) -> Self {
        let mut others: Vec<(f64, f64, usize)> = (0..values.len())
            .filter(|&j| j != i)
            .map(|j| (values[j], caps[j], j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut prefix = vec![0.0];
        for o in &others {
            prefix.push(prefix.last().unwrap() + o.1);
        }
        Self {
            aoi,
            i,
            cap: caps[i],
            others,
            prefix,
        }
    }

    pub(crate) fn rate(&self, v: f64) -> Result<f64> {
        let i = self.i;
        let p = self
            .others
            .partition_point(|&(w, _, j)| w < v || (w == v && j < i));
        let n = self.others.len() + 1;
        let f_agg = solve_aggregate(self.aoi, n, |k| match k.cmp(&p) {
            std::cmp::Ordering::Less => (self.others[k].0, self.others[k].1),
            std::cmp::Ordering::Equal => (v, self.cap),
            std::cmp::Ordering::Greater => (self.others[k - 1].0, self.others[k - 1].1),
        })?;
        let before = self.prefix[p];
        Ok(if f_agg <= before {
            0.0
        } else {
            (f_agg - before).min(self.cap)
        })
    }

    /// Own values at which the rate may jump or kink.
    pub(crate) fn value_breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.others.iter().map(|o| o.0).collect();
        for &p in &self.prefix {
            if p > 0.0 && p.is_finite() {
                out.push(self.aoi.m_at_rate(p));
            }
            let q = p + self.cap;
            if q > 0.0 && q.is_finite() {
                out.push(self.aoi.m_at_rate(q));
            }
        }
        out
    }
}

/// Optimal multi-source mechanism.
#[derive(Debug, Clone)]
pub struct MultiSourceMechanism {
    profile: SourceProfile,
    aoi: AoiCostModel,
}

impl MultiSourceMechanism {
    pub fn new(profile: SourceProfile, aoi: AoiCostModel) -> Self {
        Self { profile, aoi }
    }

    pub fn virtual_costs(&self, costs: &[f64]) -> Result<Vec<f64>> {
        let v = self.profile.virtual_costs(costs)?;
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::DegenerateDensity { at: costs[k] });
        }
        Ok(v)
    }

    /// `Ψ(c, F)` at the reported costs.
    pub fn aggregate_virtual_cost(&self, costs: &[f64], rate: f64) -> Result<AggregateVirtualCost> {
        aggregate_virtual_cost(&self.virtual_costs(costs)?, &self.profile.caps(), rate)
    }

    pub fn aggregate_rate(&self, costs: &[f64]) -> Result<f64> {
        aggregate_rate(&self.virtual_costs(costs)?, &self.profile.caps(), &self.aoi)
    }

    /// Water-fills a given aggregate rate in virtual-cost order.
    pub fn allocate(&self, costs: &[f64], f_agg: f64) -> Result<MultiAllocation> {
        let rates = waterfill(&self.virtual_costs(costs)?, &self.profile.caps(), f_agg)?;
        Ok(MultiAllocation::from_rates(rates))
    }

    /// The optimal allocation at the reported costs.
    pub fn allocation(&self, costs: &[f64]) -> Result<MultiAllocation> {
        let values = self.virtual_costs(costs)?;
        let caps = self.profile.caps();
        let f_agg = aggregate_rate(&values, &caps, &self.aoi)?;
        Ok(MultiAllocation::from_rates(waterfill(
            &values, &caps, f_agg,
        )?))
    }

    fn own_rate(&self, costs: &[f64], i: usize) -> Result<OwnRate<'_>> {
        let mut probe = costs.to_vec();
        probe[i] = self.profile.dist(i).c_low();
        let values = self.virtual_costs(&probe)?;
        Ok(OwnRate::new(&self.aoi, &values, &self.profile.caps(), i))
    }

    fn own_breakpoints(&self, own: &OwnRate<'_>, i: usize) -> Vec<f64> {
        let ironed = self.profile.ironed(i);
        let (lo, hi) = self.profile.dist(i).support();
        let (v_lo, v_hi) = (ironed.value(lo), ironed.value(hi));
        let mut out: Vec<f64> = own
            .value_breakpoints()
            .into_iter()
            .filter(|&v| v > v_lo && v <= v_hi)
            .map(|v| first_crossing(|z| ironed.value(z), v, lo, hi, 200))
            .collect();
        for iv in ironed.intervals() {
            out.push(iv.a);
            out.push(iv.b);
        }
        out.retain(|&z| z > lo && z < hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `h_i(c) = c_i f_i(c) + ∫_{c_i}^{c̄_i} f_i(z, c_{-i}) dz`.
    pub fn payment_rate_i(&self, costs: &[f64], i: usize) -> Result<f64> {
        self.profile.check_reports(costs)?;
        let own = self.own_rate(costs, i)?;
        let ironed = self.profile.ironed(i);
        let rate = |z: f64| own.rate(ironed.value(z));
        let c = costs[i];
        let f_c = rate(c)?;
        if f_c == 0.0 {
            return Ok(0.0);
        }
        let hi = self.profile.dist(i).c_high();
        let mut cuts: Vec<f64> = self
            .own_breakpoints(&own, i)
            .into_iter()
            .filter(|&z| z > c)
            .collect();
        cuts.push(hi);
        let gl = gauss_legendre(PAYMENT_NODES);
        let mut tail = 0.0;
        let mut lo = c;
        for b in cuts {
            if b <= lo {
                continue;
            }
            let width = b - lo;
            let nodes: Vec<(f64, f64)> = gl.points(0.0, 1.0).collect();
            let at = |s: f64| rate(lo + width * s * s);
            let first = at(nodes[0].0)?;
            let last = at(nodes[nodes.len() - 1].0)?;
            if first == last {
                // f_i is monotone, so equal end values mean it is flat here.
                tail += first * width;
            } else {
                let mut piece = 0.0;
                for &(s, w) in &nodes {
                    piece += w * 2.0 * width * s * at(s)?;
                }
                tail += piece;
            }
            lo = b;
        }
        Ok(c * f_c + tail)
    }

    pub fn payment_rates(&self, costs: &[f64]) -> Result<Vec<f64>> {
        (0..self.profile.len())
            .map(|i| self.payment_rate_i(costs, i))
            .collect()
    }
}

impl Mechanism for MultiSourceMechanism {
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
        Ok(self.allocation(reports)?.rates)
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        MultiSourceMechanism::payment_rates(self, reports)
    }

    fn breakpoints(&self, i: usize, reports: &[f64]) -> Result<Vec<f64>> {
        let own = self.own_rate(reports, i)?;
        Ok(self.own_breakpoints(&own, i))
    }

    fn envelope_payments(&self) -> bool {
        true
    }

    fn schedule_along(&self, i: usize, reports: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        let own = self.own_rate(reports, i)?;
        let ironed = self.profile.ironed(i);
        envelope_schedule(self, i, reports, grid, |z| own.rate(ironed.value(z)))
    }
}
