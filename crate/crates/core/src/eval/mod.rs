//! Expected destination cost of a mechanism, closed-form reference values and
//! the parameter sweeps built on them.
//!
//! The destination's cost rate at a report profile is `F·G(1/F) + Σ h_i`.
//! Its expectation over the prior is the payment form of `J`. For mechanisms
//! with envelope payments the expected payment also equals
//! `E[Σ f_i φ_i(c_i)]`, which gives the virtual form. Both are computed
//! unless one is switched off, and their agreement is checked.

mod closed_forms;
mod sweep;

pub use closed_forms::{closed_forms, ClosedForms, Setting};
pub use sweep::{
    format_number, run_sweep, write_csv, Experiment, SweepConfig, SweepRow, CSV_HEADER,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::numeric::gauss_legendre;
use crate::numeric::qmc::{replicate_estimate, RqmcDesign};

/// How the expectation over the prior is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimator {
    /// 200-node Gauss-Legendre on each piece between breakpoints (one source only).
    Quadrature,
    /// Randomized Halton points split into independent replicates.
    QuasiMonteCarlo {
        points: usize,
        replicates: usize,
        seed: u64,
    },
}

impl Estimator {
    /// Default quasi-random budget: 2¹⁶ points in 16 replicates.
    pub const DEFAULT_POINTS: usize = 1 << 16;

    pub fn qmc(seed: u64) -> Self {
        Estimator::QuasiMonteCarlo {
            points: Self::DEFAULT_POINTS,
            replicates: 16,
            seed,
        }
    }

    /// Quadrature for one source, quasi-Monte Carlo otherwise.
    pub fn default_for(mech: &dyn Mechanism, seed: u64) -> Self {
        if mech.profile().len() == 1 {
            Estimator::Quadrature
        } else {
            Self::qmc(seed)
        }
    }
}

/// Which forms of `J` to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Forms {
    Both,
    Payment,
    /// Only meaningful for envelope-payment mechanisms.
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub mechanism: String,
    pub estimator: Estimator,
    /// Quadrature nodes or quasi-random points.
    pub samples: usize,
    /// Headline value: the payment form when computed, else the virtual form.
    pub j: f64,
    /// Standard error of `j`; zero for quadrature.
    pub stderr: f64,
    pub payment_form: Option<f64>,
    pub virtual_form: Option<f64>,
    /// False when the two forms disagree beyond the estimator's tolerance.
    pub consistent: bool,
    /// Per-replicate estimates behind `j`, for paired comparisons.
    pub replicate_means: Vec<f64>,
}

/// Difference `a − b` of two reports built on the same quasi-random design,
/// with its paired standard error.
pub fn paired_gap(a: &EvaluationReport, b: &EvaluationReport) -> Result<(f64, f64)> {
    if a.replicate_means.len() != b.replicate_means.len() || a.estimator != b.estimator {
        return Err(Error::config("paired comparison needs the same estimator"));
    }
    if a.replicate_means.len() < 2 {
        return Ok((a.j - b.j, 0.0));
    }
    let diffs: Vec<f64> = a
        .replicate_means
        .iter()
        .zip(&b.replicate_means)
        .map(|(x, y)| x - y)
        .collect();
    Ok(replicate_estimate(&diffs))
}

/// Expected destination cost `J` of `mech` under its prior.
pub fn expected_cost(
    mech: &dyn Mechanism,
    estimator: Estimator,
    forms: Forms,
) -> Result<EvaluationReport> {
    let forms = if mech.envelope_payments() {
        forms
    } else {
        Forms::Payment
    };
    match estimator {
        Estimator::Quadrature => quadrature(mech, forms),
        Estimator::QuasiMonteCarlo {
            points,
            replicates,
            seed,
        } => quasi_monte_carlo(mech, forms, points, replicates, seed),
    }
}

const QUADRATURE_NODES: usize = 200;

fn quadrature(mech: &dyn Mechanism, forms: Forms) -> Result<EvaluationReport> {
    let profile = mech.profile();
    if profile.len() != 1 {
        return Err(Error::config("quadrature evaluation needs a single source"));
    }
    let dist = profile.dist(0);
    let (lo, hi) = dist.support();
    let mut cuts = vec![lo, hi];
    cuts.extend(
        mech.breakpoints(0, &[lo])?
            .into_iter()
            .filter(|&z| z > lo && z < hi),
    );
    cuts.extend((1..8).map(|k| dist.quantile(k as f64 / 8.0)));
    cuts.sort_by(f64::total_cmp);
    let min_gap = 1e-12 * (hi - lo);
    cuts.dedup_by(|a, b| *a - *b <= min_gap);

    let gl = gauss_legendre(QUADRATURE_NODES);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        let (a, width) = (w[0], w[1] - w[0]);
        for (s, ws) in gl.points(0.0, 1.0) {
            nodes.push(a + width * s * s);
            weights.push(2.0 * width * s * ws);
        }
    }
    let sched = mech.schedule_along(0, &[lo], &nodes)?;
    let aoi = mech.aoi();
    let mut payment = 0.0;
    let mut virtual_ = 0.0;
    for ((&z, &w), &(f, h)) in nodes.iter().zip(&weights).zip(&sched) {
        let density = dist.pdf(z);
        let age_cost = aoi.rate_cost(f);
        payment += w * density * (age_cost + h);
        if f > 0.0 {
            virtual_ += w * (density * (age_cost + z * f) + dist.cdf(z) * f);
        } else {
            virtual_ += w * density * age_cost;
        }
    }
    let (payment_form, virtual_form) = match forms {
        Forms::Both => (Some(payment), Some(virtual_)),
        Forms::Payment => (Some(payment), None),
        Forms::Virtual => (None, Some(virtual_)),
    };
    let consistent = match (payment_form, virtual_form) {
        (Some(p), Some(v)) => (p - v).abs() <= 1e-6 * p.abs().max(1.0),
        _ => true,
    };
    let j = payment_form.or(virtual_form).expect("one form is computed");
    Ok(EvaluationReport {
        mechanism: mech.name().to_string(),
        estimator: Estimator::Quadrature,
        samples: nodes.len(),
        j,
        stderr: 0.0,
        payment_form,
        virtual_form,
        consistent,
        replicate_means: vec![j],
    })
}

fn quasi_monte_carlo(
    mech: &dyn Mechanism,
    forms: Forms,
    points: usize,
    replicates: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let profile = mech.profile();
    let n = profile.len();
    let design = RqmcDesign::with_total(n, points, replicates, seed)?;
    let want_payment = forms != Forms::Virtual;
    let want_virtual = forms != Forms::Payment;
    let per_replicate: Vec<(f64, f64)> = (0..design.replicates())
        .into_par_iter()
        .map(|r| {
            let mut u = vec![0.0; n];
            let mut costs = vec![0.0; n];
            let (mut pay, mut virt) = (0.0, 0.0);
            for k in 0..design.per_replicate() {
                design.point(r, k, &mut u);
                for (j, (c, &uj)) in costs.iter_mut().zip(&u).enumerate() {
                    *c = profile.dist(j).quantile(uj);
                }
                let f = mech.rates(&costs)?;
                let age_cost = mech.aoi().rate_cost(f.iter().sum());
                if want_payment {
                    pay += age_cost + mech.payment_rates(&costs)?.iter().sum::<f64>();
                }
                if want_virtual {
                    virt += age_cost
                        + f.iter()
                            .enumerate()
                            .filter(|(_, &fi)| fi > 0.0)
                            .map(|(j, &fi)| fi * profile.dist(j).phi(costs[j]))
                            .sum::<f64>();
                }
            }
            let m = design.per_replicate() as f64;
            Ok((pay / m, virt / m))
        })
        .collect::<Result<_>>()?;

    let pay: Vec<f64> = per_replicate.iter().map(|p| p.0).collect();
    let virt: Vec<f64> = per_replicate.iter().map(|p| p.1).collect();
    let (p_mean, p_se) = replicate_estimate(&pay);
    let (v_mean, v_se) = replicate_estimate(&virt);
    let consistent = if want_payment && want_virtual {
        let diffs: Vec<f64> = pay.iter().zip(&virt).map(|(p, v)| p - v).collect();
        let (d, se) = replicate_estimate(&diffs);
        d.abs() <= 3.0 * se.max(0.0) + 1e-9 * p_mean.abs().max(1.0)
    } else {
        true
    };
    let (j, stderr, replicate_means) = if want_payment {
        (p_mean, p_se, pay)
    } else {
        (v_mean, v_se, virt)
    };
    Ok(EvaluationReport {
        mechanism: mech.name().to_string(),
        estimator: Estimator::QuasiMonteCarlo {
            points,
            replicates,
            seed,
        },
        samples: design.total(),
        j,
        stderr,
        payment_form: want_payment.then_some(p_mean),
        virtual_form: want_virtual.then_some(v_mean),
        consistent,
        replicate_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi_cost::AoiCostModel;
    use crate::baselines::{BenchmarkMechanism, CompleteInfoPricing};
    use crate::cost_dist::CostDistribution;
    use crate::mech_multi::MultiSourceMechanism;
    use crate::mech_single::SingleSourceMechanism;
    use crate::mechanism::{Source, SourceProfile};
    use approx::assert_relative_eq;

    fn uniform_optimal() -> SingleSourceMechanism {
        SingleSourceMechanism::new(
            CostDistribution::uniform(5.0, 30.0).unwrap(),
            AoiCostModel::power(1.0).unwrap(),
            1e9,
        )
        .unwrap()
    }

    #[test]
    fn payment_and_virtual_forms_agree() {
        let rep = expected_cost(&uniform_optimal(), Estimator::Quadrature, Forms::Both).unwrap();
        let (p, v) = (rep.payment_form.unwrap(), rep.virtual_form.unwrap());
        assert!((p - v).abs() < 1e-8, "{p} vs {v}");
        assert!(rep.consistent);
        // E[√(2(2c − 5))] for c ~ U(5, 30).
        let closed = 2f64.sqrt() * (55f64.powf(1.5) - 5f64.powf(1.5)) / (3.0 * 25.0);
        assert_relative_eq!(p, closed, max_relative = 1e-10);
    }

    #[test]
    fn benchmark_single_source() {
        for alpha in [0.5, 1.0, 2.0] {
            let m = BenchmarkMechanism::new(
                SourceProfile::single(CostDistribution::trunc_exp(1.0, 30.0).unwrap(), 1e9)
                    .unwrap(),
                AoiCostModel::power(alpha).unwrap(),
            );
            let rep = expected_cost(&m, Estimator::Quadrature, Forms::Both).unwrap();
            let a = alpha / (1.0 + alpha);
            assert_relative_eq!(
                rep.j,
                (30.0 * (1.0 + 1.0 / alpha)).powf(a),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn complete_info_skips_the_virtual_form() {
        let m = CompleteInfoPricing::new(
            SourceProfile::single(CostDistribution::uniform(5.0, 30.0).unwrap(), 1e9).unwrap(),
            AoiCostModel::power(1.0).unwrap(),
        );
        let rep = expected_cost(&m, Estimator::Quadrature, Forms::Both).unwrap();
        assert!(rep.virtual_form.is_none());
        let closed = 2f64.sqrt() * 2.0 / 3.0 * (30f64.powf(1.5) - 5f64.powf(1.5)) / 25.0;
        assert_relative_eq!(rep.j, closed, max_relative = 1e-10);
    }

    #[test]
    fn qmc_matches_quadrature_for_one_source() {
        let m = uniform_optimal();
        let quad = expected_cost(&m, Estimator::Quadrature, Forms::Payment).unwrap();
        let est = Estimator::QuasiMonteCarlo {
            points: 4096,
            replicates: 8,
            seed: 3,
        };
        let qmc = expected_cost(&m, est, Forms::Both).unwrap();
        assert!(
            (qmc.j - quad.j).abs() < 5.0 * qmc.stderr + 1e-6,
            "{qmc:?} vs {}",
            quad.j
        );
        assert!(qmc.consistent);
    }

    #[test]
    fn multi_source_forms_agree_and_pair() {
        let profile = SourceProfile::new(vec![
            Source::new(CostDistribution::uniform(0.0, 10.0).unwrap(), 1e9),
            Source::new(CostDistribution::trunc_exp(0.5, 10.0).unwrap(), 1e9),
        ])
        .unwrap();
        let aoi = AoiCostModel::power(1.0).unwrap();
        let opt = MultiSourceMechanism::new(profile.clone(), aoi.clone());
        let bench = BenchmarkMechanism::new(profile, aoi);
        let est = Estimator::QuasiMonteCarlo {
            points: 2048,
            replicates: 8,
            seed: 11,
        };
        let a = expected_cost(&opt, est, Forms::Both).unwrap();
        assert!(a.consistent, "{a:?}");
        let b = expected_cost(&bench, est, Forms::Virtual).unwrap();
        let (gap, se) = paired_gap(&b, &a).unwrap();
        assert!(gap > 0.0 && se < gap, "{gap} ± {se}");
    }
}
