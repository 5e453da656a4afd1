//! Brute-force certification of truthfulness and participation.
//!
//! For a source with true cost `c` the payoff of reporting `r` is
//! `P(r; c) = E[h_i(r, c_{-i}) − c·f_i(r, c_{-i})]`. The search evaluates `P`
//! over a grid of true costs and a grid of reports. With several sources the
//! expectation over `c_{-i}` uses randomized quasi-Monte Carlo with common
//! random numbers, so every report is compared on the same draws.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::{linspace, Mechanism};
use crate::numeric::qmc::{replicate_estimate, RqmcDesign};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// True costs checked, evenly spaced over the support.
    pub true_points: usize,
    /// Candidate reports, evenly spaced over the support.
    pub report_points: usize,
    /// Absolute tolerance on payoff rates.
    pub tolerance: f64,
    /// Draws of the other sources' costs (multi-source only).
    pub draws: usize,
    /// Independent randomizations the draws are split into.
    pub replicates: usize,
    pub seed: u64,
    /// Standard errors a multi-source gain may reach before it counts.
    pub sigmas: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            true_points: 200,
            report_points: 400,
            tolerance: 1e-6,
            draws: 4096,
            replicates: 16,
            seed: 0,
            sigmas: 3.0,
        }
    }
}

impl VerifyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.true_points < 2 || self.report_points < 2 {
            return Err(Error::config("deviation grids need at least two points"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::config("verification tolerance must be positive"));
        }
        if !(self.sigmas.is_finite() && self.sigmas > 0.0) {
            return Err(Error::config("standard-error multiplier must be positive"));
        }
        if self.draws == 0 || self.replicates == 0 {
            return Err(Error::config("need at least one draw and one replicate"));
        }
        Ok(())
    }
}

/// Outcome of the deviation search at one true cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationPoint {
    pub cost: f64,
    pub best_report: f64,
    /// `max_r P(r; c) − P(c; c)`, never negative.
    pub gain: f64,
    pub gain_stderr: f64,
    pub truthful_payoff: f64,
    pub truthful_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub mechanism: String,
    pub source: usize,
    pub points: Vec<DeviationPoint>,
    pub tolerance: f64,
    pub max_gain: f64,
    /// True cost at which the largest gain occurs and the report achieving it.
    pub worst_cost: f64,
    pub best_deviation: f64,
    pub min_truthful_payoff: f64,
    /// Truthful payoff at the top of the support.
    pub payoff_at_top: f64,
    /// No gain exceeds its tolerance.
    pub ic: bool,
    /// No truthful payoff falls below minus its tolerance.
    pub ir: bool,
}

impl DeviationReport {
    pub fn passed(&self) -> bool {
        self.ic && self.ir
    }
}

/// Union of two sorted grids and the positions of each grid's points in it.
fn merge_grids(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let locate =
        |g: &[f64]| -> Vec<usize> { g.iter().map(|x| all.partition_point(|y| y < x)).collect() };
    let (ia, ib) = (locate(a), locate(b));
    (all, ia, ib)
}

/// Per-replicate mean `(f, h)` of source `i` at every point of `grid`.
fn replicate_schedules(
    mech: &dyn Mechanism,
    i: usize,
    grid: &[f64],
    opts: &VerifyOptions,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let profile = mech.profile();
    let n = profile.len();
    if n == 1 {
        return Ok(vec![mech.schedule_along(i, &[grid[0]], grid)?]);
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let design = RqmcDesign::with_total(n - 1, opts.draws, opts.replicates, opts.seed)?;
    (0..design.replicates())
        .into_par_iter()
        .map(|r| {
            let mut u = vec![0.0; n - 1];
            let mut reports = vec![profile.dist(i).c_low(); n];
            let mut sum = vec![(0.0, 0.0); grid.len()];
            for k in 0..design.per_replicate() {
                design.point(r, k, &mut u);
                for (&j, &uj) in others.iter().zip(&u) {
                    reports[j] = profile.dist(j).quantile(uj);
                }
                for (acc, (f, h)) in sum.iter_mut().zip(mech.schedule_along(i, &reports, grid)?) {
                    acc.0 += f;
                    acc.1 += h;
                }
            }
            let m = design.per_replicate() as f64;
            Ok(sum.into_iter().map(|(f, h)| (f / m, h / m)).collect())
        })
        .collect()
}

/// Searches every source's deviations; see [`verify_ic`].
pub fn verify(mech: &dyn Mechanism, opts: &VerifyOptions) -> Result<Vec<DeviationReport>> {
    (0..mech.profile().len())
        .map(|i| verify_ic(mech, i, opts))
        .collect()
}

/// Deviation search for source `i`.
///
/// Each true cost on the grid is compared against every report on the report
/// grid. The returned report carries both the truthfulness verdict and the
/// participation verdict.
pub fn verify_ic(mech: &dyn Mechanism, i: usize, opts: &VerifyOptions) -> Result<DeviationReport> {
    opts.validate()?;
    let profile = mech.profile();
    if i >= profile.len() {
        return Err(Error::config(format!("no source {i}")));
    }
    let (lo, hi) = profile.dist(i).support();
    let truths = linspace(lo, hi, opts.true_points - 1);
    let reports = linspace(lo, hi, opts.report_points - 1);
    let (grid, truth_at, report_at) = merge_grids(&truths, &reports);
    let reps = replicate_schedules(mech, i, &grid, opts)?;
    let r = reps.len();
    let mean: Vec<(f64, f64)> = (0..grid.len())
        .map(|u| {
            let (f, h) = reps
                .iter()
                .fold((0.0, 0.0), |a, s| (a.0 + s[u].0, a.1 + s[u].1));
            (f / r as f64, h / r as f64)
        })
        .collect();
    let payoff = |s: &[(f64, f64)], u: usize, c: f64| s[u].1 - c * s[u].0;

    let points: Vec<DeviationPoint> = truths
        .iter()
        .zip(&truth_at)
        .map(|(&c, &t)| {
            let truthful = payoff(&mean, t, c);
            let mut best = (t, truthful);
            for &u in &report_at {
                let p = payoff(&mean, u, c);
                if p > best.1 {
                    best = (u, p);
                }
            }
            let (gain_stderr, truthful_stderr) = if r > 1 {
                let gains: Vec<f64> = reps
                    .iter()
                    .map(|s| payoff(s, best.0, c) - payoff(s, t, c))
                    .collect();
                let truths: Vec<f64> = reps.iter().map(|s| payoff(s, t, c)).collect();
                (replicate_estimate(&gains).1, replicate_estimate(&truths).1)
            } else {
                (0.0, 0.0)
            };
            DeviationPoint {
                cost: c,
                best_report: grid[best.0],
                gain: best.1 - truthful,
                gain_stderr,
                truthful_payoff: truthful,
                truthful_stderr,
            }
        })
        .collect();

    let allowed = |se: f64| opts.tolerance.max(opts.sigmas * se);
    let worst = points
        .iter()
        .max_by(|a, b| a.gain.total_cmp(&b.gain))
        .copied()
        .expect("grid is non-empty");
    Ok(DeviationReport {
        mechanism: mech.name().to_string(),
        source: i,
        tolerance: opts.tolerance,
        max_gain: worst.gain,
        worst_cost: worst.cost,
        best_deviation: worst.best_report,
        min_truthful_payoff: points
            .iter()
            .map(|p| p.truthful_payoff)
            .fold(f64::INFINITY, f64::min),
        payoff_at_top: points.last().map_or(f64::NAN, |p| p.truthful_payoff),
        ic: points.iter().all(|p| p.gain <= allowed(p.gain_stderr)),
        ir: points
            .iter()
            .all(|p| p.truthful_payoff >= -allowed(p.truthful_stderr)),
        points,
    })
}

/// Same search as [`verify_ic`]; read the `ir` verdict and `payoff_at_top`.
pub fn verify_ir(mech: &dyn Mechanism, i: usize, opts: &VerifyOptions) -> Result<DeviationReport> {
    verify_ic(mech, i, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi_cost::AoiCostModel;
    use crate::cost_dist::CostDistribution;
    use crate::mech_single::{NaiveMechanism, SingleSourceMechanism};

    fn small() -> VerifyOptions {
        VerifyOptions {
            true_points: 50,
            report_points: 80,
            ..Default::default()
        }
    }

    #[test]
    fn merged_grid_positions() {
        let (g, ia, ib) = merge_grids(&[0.0, 1.0, 2.0], &[0.0, 0.5, 2.0]);
        assert_eq!(g, vec![0.0, 0.5, 1.0, 2.0]);
        assert_eq!(ia, vec![0, 2, 3]);
        assert_eq!(ib, vec![0, 1, 3]);
    }

    #[test]
    fn optimal_single_source_is_certified() {
        let m = SingleSourceMechanism::new(
            CostDistribution::uniform(5.0, 30.0).unwrap(),
            AoiCostModel::power(1.0).unwrap(),
            1e9,
        )
        .unwrap();
        let rep = verify_ic(&m, 0, &small()).unwrap();
        assert!(rep.ic && rep.ir, "{rep:?}");
        assert!(rep.max_gain <= 1e-9);
        assert!(rep.payoff_at_top.abs() < 1e-12);
        assert!(rep.points[0].truthful_payoff > 0.0);
    }

    #[test]
    fn naive_mechanism_is_caught() {
        let m = NaiveMechanism::new(
            CostDistribution::uniform(5.0, 30.0).unwrap(),
            AoiCostModel::power(1.0).unwrap(),
            1e9,
        )
        .unwrap();
        let rep = verify_ic(&m, 0, &small()).unwrap();
        assert!(!rep.ic);
        assert_eq!(rep.best_deviation, 30.0);
        assert!(rep.points[..49].iter().all(|p| p.best_report == 30.0));
    }

    #[test]
    fn rejects_bad_options() {
        let bad = VerifyOptions {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
