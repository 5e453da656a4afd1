//! The quantized mechanism: reports are snapped to cell midpoints, the
//! optimal rule is tabulated once per cell, and payments become finite sums.

use rayon::prelude::*;

use crate::aoi_cost::AoiCostModel;
use crate::error::{Error, Result};
use crate::mech_multi::{aggregate_rate, waterfill, OwnRate};
use crate::mechanism::{envelope_schedule, Mechanism, SourceProfile};

/// Largest total number of cells a quantized mechanism may tabulate.
pub const MAX_CELLS: usize = 10_000_000;

/// Uniform cells of width `delta` starting at the lower end of a support.
///
/// The last cell is cut at the upper end of the support when the width does
/// not divide it, and its midpoint is clamped into the support. Reports at
/// the very top fall into the last cell rather than a cell of their own.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    lo: f64,
    hi: f64,
    delta: f64,
    cells: usize,
}

impl Quantizer {
    pub fn new(delta: f64, support: (f64, f64)) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::config(format!(
                "quantization step must be positive and finite, got {delta}"
            )));
        }
        let (lo, hi) = support;
        let ratio = (hi - lo) / delta;
        if ratio > MAX_CELLS as f64 {
            return Err(Error::Resource(format!(
                "step {delta} gives more than {MAX_CELLS} cells on [{lo}, {hi}]"
            )));
        }
        // Absorb rounding so that e.g. 25 / (25/3) counts as 3 cells.
        let nearest = ratio.round();
        let cells = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        Ok(Self {
            lo,
            hi,
            delta,
            cells: (cells as usize).max(1),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cell_of(&self, c: f64) -> usize {
        let k = ((c - self.lo) / self.delta).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.cells - 1)
        }
    }

    /// `[lo, hi]` of cell `k`, cut at the support.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let a = self.lo + self.delta * k as f64;
        let b = if k + 1 == self.cells {
            self.hi
        } else {
            (self.lo + self.delta * (k + 1) as f64).min(self.hi)
        };
        (a, b)
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (self.lo + self.delta * (k as f64 + 0.5)).min(self.hi)
    }

    pub fn quantize(&self, c: f64) -> f64 {
        self.midpoint(self.cell_of(c))
    }

    /// Interior cell boundaries.
    pub fn boundaries(&self) -> Vec<f64> {
        (1..self.cells).map(|k| self.bounds(k).0).collect()
    }
}

/// `Q(c) = c_low + Δ(⌊(c − c_low)/Δ⌋ + ½)`, kept inside the support.
pub fn quantize_report(delta: f64, c: f64, support: (f64, f64)) -> Result<f64> {
    let q = Quantizer::new(delta, support)?;
    if c.is_nan() || c < support.0 || c > support.1 {
        return Err(Error::Domain {
            what: "cost",
            value: c,
            domain: format!("[{}, {}]", support.0, support.1),
        });
    }
    Ok(q.quantize(c))
}

/// `Σ_i L_i f_max_i Δ`, the bound on how much quantization can cost the destination.
pub fn loss_bound(profile: &SourceProfile, delta: f64) -> f64 {
    profile
        .sources()
        .iter()
        .map(|s| s.dist.lipschitz_bound().value * s.f_max * delta)
        .sum()
}

/// One row of a single-source quantized rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedCell {
    pub lo: f64,
    pub hi: f64,
    pub midpoint: f64,
    pub rate: f64,
    pub payment_at_midpoint: f64,
}

/// The optimal mechanism evaluated at quantized reports.
#[derive(Debug, Clone)]
pub struct QuantizedMechanism {
    profile: SourceProfile,
    aoi: AoiCostModel,
    quantizers: Vec<Quantizer>,
    /// `φ̃_i` at each cell midpoint.
    values: Vec<Vec<f64>>,
}

impl QuantizedMechanism {
    pub fn build(profile: SourceProfile, aoi: AoiCostModel, delta: f64) -> Result<Self> {
        let quantizers: Vec<Quantizer> = profile
            .sources()
            .iter()
            .map(|s| Quantizer::new(delta, s.dist.support()))
            .collect::<Result<_>>()?;
        let total: usize = quantizers.iter().map(Quantizer::cells).sum();
        if total > MAX_CELLS {
            return Err(Error::Resource(format!(
                "{total} quantization cells exceed the limit of {MAX_CELLS}"
            )));
        }
        let values = quantizers
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let ironed = profile.ironed(i);
                let v: Vec<f64> = (0..q.cells())
                    .into_par_iter()
                    .map(|k| ironed.value(q.midpoint(k)))
                    .collect();
                match v.iter().position(|x| !x.is_finite()) {
                    Some(k) => Err(Error::DegenerateDensity { at: q.midpoint(k) }),
                    None => Ok(v),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            profile,
            aoi,
            quantizers,
            values,
        })
    }

    pub fn delta(&self) -> f64 {
        self.quantizers[0].delta()
    }

    pub fn quantizer(&self, i: usize) -> &Quantizer {
        &self.quantizers[i]
    }

    fn cell_values(&self, reports: &[f64]) -> Vec<f64> {
        reports
            .iter()
            .enumerate()
            .map(|(i, &c)| self.values[i][self.quantizers[i].cell_of(c)])
            .collect()
    }

    fn own_rate(&self, reports: &[f64], i: usize) -> OwnRate<'_> {
        let mut probe = reports.to_vec();
        probe[i] = self.profile.dist(i).c_low();
        OwnRate::new(
            &self.aoi,
            &self.cell_values(&probe),
            &self.profile.caps(),
            i,
        )
    }

    /// `f^q(c) = f*(Q(c))`.
    pub fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        self.profile.check_reports(reports)?;
        let values = self.cell_values(reports);
        let caps = self.profile.caps();
        let f_agg = aggregate_rate(&values, &caps, &self.aoi)?;
        waterfill(&values, &caps, f_agg)
    }

    /// `h^q_i(c) = c_i f^q_i(c) + ∫_{c_i}^{c̄_i} f^q_i(z, c_{-i}) dz`, a finite sum
    /// over the cells above `c_i`.
    pub fn payment_rate_i(&self, reports: &[f64], i: usize) -> Result<f64> {
        self.profile.check_reports(reports)?;
        let own = self.own_rate(reports, i);
        let q = &self.quantizers[i];
        let c = reports[i];
        let k0 = q.cell_of(c);
        let f0 = own.rate(self.values[i][k0])?;
        if f0 == 0.0 {
            return Ok(0.0);
        }
        let mut tail = (q.bounds(k0).1 - c) * f0;
        for k in k0 + 1..q.cells() {
            let f = own.rate(self.values[i][k])?;
            if f == 0.0 {
                break;
            }
            let (a, b) = q.bounds(k);
            tail += (b - a) * f;
        }
        Ok(c * f0 + tail)
    }

    pub fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        (0..self.profile.len())
            .map(|i| self.payment_rate_i(reports, i))
            .collect()
    }

    /// Cell-by-cell rule of source `i`, other reports held at `reports`.
    pub fn cells(&self, i: usize, reports: &[f64]) -> Result<Vec<QuantizedCell>> {
        let q = &self.quantizers[i];
        let mut probe = reports.to_vec();
        (0..q.cells())
            .map(|k| {
                let (lo, hi) = q.bounds(k);
                let midpoint = q.midpoint(k);
                probe[i] = midpoint;
                Ok(QuantizedCell {
                    lo,
                    hi,
                    midpoint,
                    rate: self.rates(&probe)?[i],
                    payment_at_midpoint: self.payment_rate_i(&probe, i)?,
                })
            })
            .collect()
    }

    /// Exact expected destination cost of a single-source quantized rule:
    /// `Σ_k [G(1/f_k) f_k ΔΓ_k + f_k ΔΦ_k]` over the cells.
    pub fn single_source_cost(&self) -> Result<f64> {
        if self.profile.len() != 1 {
            return Err(Error::config("exact quantized cost needs a single source"));
        }
        let dist = self.profile.dist(0);
        let q = &self.quantizers[0];
        let own = self.own_rate(&[dist.c_low()], 0);
        let mut total = 0.0;
        for k in 0..q.cells() {
            let (a, b) = q.bounds(k);
            let f = own.rate(self.values[0][k])?;
            let mass = dist.cdf(b) - dist.cdf(a);
            if mass <= 0.0 {
                continue;
            }
            let virtual_cost =
                dist.cumulative_virtual_cost(b)? - dist.cumulative_virtual_cost(a)?;
            total += self.aoi.rate_cost(f) * mass + f * virtual_cost;
        }
        Ok(total)
    }
}

impl Mechanism for QuantizedMechanism {
    fn name(&self) -> &str {
        "quantized"
    }

    fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }

    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        QuantizedMechanism::rates(self, reports)
    }

    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        QuantizedMechanism::payment_rates(self, reports)
    }

    fn breakpoints(&self, i: usize, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(self.quantizers[i].boundaries())
    }

    fn envelope_payments(&self) -> bool {
        true
    }

    fn schedule_along(&self, i: usize, reports: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        let own = self.own_rate(reports, i);
        let q = &self.quantizers[i];
        envelope_schedule(self, i, reports, grid, |z| {
            own.rate(self.values[i][q.cell_of(z)])
        })
    }
}

/// Quantized version of any mechanism's sources and age penalty.
pub fn build_quantized(base: &dyn Mechanism, delta: f64) -> Result<QuantizedMechanism> {
    QuantizedMechanism::build(base.profile().clone(), base.aoi().clone(), delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_dist::CostDistribution;
    use crate::mech_multi::MultiSourceMechanism;
    use crate::mech_single::SingleSourceMechanism;
    use crate::mechanism::{linspace, Source};
    use crate::numeric::adaptive_simpson;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform_single(delta: f64) -> (SingleSourceMechanism, QuantizedMechanism) {
        let base = SingleSourceMechanism::new(
            CostDistribution::uniform(5.0, 30.0).unwrap(),
            AoiCostModel::power(1.0).unwrap(),
            1e9,
        )
        .unwrap();
        let q = build_quantized(&base, delta).unwrap();
        (base, q)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_report(1.0, 4.3, (0.0, 30.0)).unwrap(), 4.5);
        assert_eq!(quantize_report(1.0, 4.5, (0.0, 30.0)).unwrap(), 4.5);
        assert_eq!(quantize_report(1.0, 30.0, (0.0, 30.0)).unwrap(), 29.5);
        assert!(matches!(
            quantize_report(0.0, 1.0, (0.0, 30.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            quantize_report(-1.0, 1.0, (0.0, 30.0)),
            Err(Error::Config(_))
        ));
        // Partial last cell: [28, 30] with step 4 from 0 has midpoint 30, not 30 + 2 − 2.
        let q = Quantizer::new(4.0, (0.0, 30.0)).unwrap();
        assert_eq!(q.cells(), 8);
        assert_eq!(q.bounds(7), (28.0, 30.0));
        assert_eq!(q.midpoint(7), 30.0);
    }

    #[test]
    fn cell_counts() {
        assert_eq!(Quantizer::new(1.0, (5.0, 30.0)).unwrap().cells(), 25);
        assert_eq!(Quantizer::new(25.0 / 3.0, (5.0, 30.0)).unwrap().cells(), 3);
        assert_eq!(Quantizer::new(0.3, (5.0, 30.0)).unwrap().cells(), 84);
        assert!(matches!(
            Quantizer::new(1e-9, (0.0, 30.0)),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn loss_bound_examples() {
        let u = CostDistribution::uniform(5.0, 30.0).unwrap();
        let one = SourceProfile::single(u.clone(), 0.2).unwrap();
        assert_relative_eq!(loss_bound(&one, 1.0), 0.4);
        assert_eq!(loss_bound(&one, 0.0), 0.0);
        let two =
            SourceProfile::new(vec![Source::new(u.clone(), 0.2), Source::new(u, 0.3)]).unwrap();
        assert_relative_eq!(loss_bound(&two, 0.5), 0.5);
    }

    #[test]
    fn payment_is_riemann_sum() {
        let (base, q) = uniform_single(1.0);
        let f = |c: f64| base.optimal_rate(c).unwrap();
        // Cell [10, 11) holds 10; cells above have midpoints 11.5, ..., 29.5.
        let expected = 10.0 * f(10.5)
            + (11.0 - 10.0) * f(10.5)
            + (11..30).map(|k| f(k as f64 + 0.5)).sum::<f64>();
        assert_relative_eq!(
            q.payment_rate_i(&[10.0], 0).unwrap(),
            expected,
            max_relative = 1e-13
        );
        // High-resolution quadrature of the step rule, split at the cell edges.
        let mut tail = 0.0;
        let cuts = [10.0]
            .into_iter()
            .chain((11..=30).map(f64::from))
            .collect::<Vec<_>>();
        for w in cuts.windows(2) {
            tail += adaptive_simpson(|z| q.rates(&[z]).unwrap()[0], w[0], w[1] - 1e-12, 1e-13, 30)
                .unwrap();
        }
        assert!((q.payment_rate_i(&[10.0], 0).unwrap() - (10.0 * f(10.5) + tail)).abs() < 1e-9);
    }

    #[test]
    fn fine_steps_recover_the_optimal_rule() {
        let (base, q) = uniform_single(1e-3);
        for c in [5.2, 12.345, 29.9] {
            assert_relative_eq!(
                q.rates(&[c]).unwrap()[0],
                base.optimal_rate(c).unwrap(),
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn exact_cost_matches_schedule_quadrature() {
        let (_, q) = uniform_single(2.5);
        let exact = q.single_source_cost().unwrap();
        // Payment form: average of h + G(1/f)f over a fine midpoint grid.
        let n = 20_000;
        let grid: Vec<f64> = (0..n)
            .map(|k| 5.0 + 25.0 * (k as f64 + 0.5) / n as f64)
            .collect();
        let sched = q.schedule_along(0, &[5.0], &grid).unwrap();
        let aoi = AoiCostModel::power(1.0).unwrap();
        let avg: f64 = sched
            .iter()
            .map(|&(f, h)| aoi.rate_cost(f) + h)
            .sum::<f64>()
            / n as f64;
        assert!((avg - exact).abs() < 1e-6 * exact, "{avg} vs {exact}");
    }

    #[test]
    fn multi_source_tables_and_payments() {
        let profile = SourceProfile::new(vec![
            Source::new(CostDistribution::trunc_exp(2.0, 20.0).unwrap(), 1e9),
            Source::new(CostDistribution::trunc_exp(0.5, 20.0).unwrap(), 1e9),
        ])
        .unwrap();
        let base = MultiSourceMechanism::new(profile, AoiCostModel::power(1.0).unwrap());
        let q = build_quantized(&base, 0.5).unwrap();
        let reports = [1.3, 0.2];
        let quantized: Vec<f64> = reports
            .iter()
            .enumerate()
            .map(|(i, &c)| q.quantizer(i).quantize(c))
            .collect();
        assert_eq!(q.rates(&reports).unwrap(), base.rates(&quantized).unwrap());
        let grid = linspace(0.0, 20.0, 80);
        let sched = q.schedule_along(0, &reports, &grid).unwrap();
        for (&z, &(f, h)) in grid.iter().zip(&sched) {
            let r = [z, reports[1]];
            assert_eq!(f, q.rates(&r).unwrap()[0]);
            assert!((h - q.payment_rate_i(&r, 0).unwrap()).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn quantized_rates_are_monotone(a in 5.0f64..30.0, b in 5.0f64..30.0, delta in 0.2f64..5.0) {
            let (_, q) = uniform_single(delta);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(q.rates(&[lo]).unwrap()[0] >= q.rates(&[hi]).unwrap()[0]);
            let m = q.quantizer(0).quantize(a);
            prop_assert!((5.0..=30.0).contains(&m));
        }
    }
}
