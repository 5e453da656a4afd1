use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{expected_cost, Estimator, EvaluationReport, Forms};
use crate::aoi_cost::AoiCostModel;
use crate::baselines::{BenchmarkMechanism, CompleteInfoPricing};
use crate::cost_dist::CostDistribution;
use crate::error::{Error, Result};
use crate::mech_multi::MultiSourceMechanism;
use crate::mech_quantized::QuantizedMechanism;
use crate::mech_single::SingleSourceMechanism;
use crate::mechanism::{Mechanism, Source, SourceProfile, DEFAULT_F_MAX};

pub const CSV_HEADER: &str =
    "experiment,seed,param_name,param_value,J_complete,J_optimal,J_quantized,J_benchmark,stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    /// Uniform(5, 30), α = 1, one to ten quantization intervals.
    QuantLoss,
    /// Uniform(0, c̄): sweeps over c̄ and over α.
    Fig5,
    /// Truncated exponential with unit rate: sweeps over c̄ and over α.
    Fig6,
    /// Four sources, one cheap on average: sweeps over c̄ and the number of sources.
    Fig7,
    /// Four sources: sweep over the mean cost of the three expensive ones.
    Fig8,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::QuantLoss,
        Experiment::Fig5,
        Experiment::Fig6,
        Experiment::Fig7,
        Experiment::Fig8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::QuantLoss => "quantloss",
            Experiment::Fig5 => "fig5",
            Experiment::Fig6 => "fig6",
            Experiment::Fig7 => "fig7",
            Experiment::Fig8 => "fig8",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub seed: u64,
    /// Quasi-random points per multi-source evaluation.
    pub qmc_points: usize,
    pub replicates: usize,
    /// Rows whose standard error exceeds this fraction of `J` are flagged.
    pub max_relative_stderr: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            qmc_points: Estimator::DEFAULT_POINTS,
            replicates: 16,
            max_relative_stderr: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: &'static str,
    pub seed: u64,
    pub param_name: &'static str,
    pub param_value: f64,
    pub j_complete: f64,
    pub j_optimal: f64,
    pub j_quantized: f64,
    pub j_benchmark: f64,
    /// Largest standard error among the row's estimates; zero for quadrature.
    pub stderr: f64,
    pub warnings: Vec<String>,
}

/// One parameter point of a sweep.
#[derive(Debug, Clone)]
struct Point {
    param_name: &'static str,
    param_value: f64,
    sources: Vec<Source>,
    alpha: f64,
    delta: f64,
}

/// Mean cost of the cheap first source in the multi-source sweeps.
const CHEAP_MEAN: f64 = 0.5;

fn exp_sources(c_high: f64, means: impl IntoIterator<Item = f64>) -> Result<Vec<Source>> {
    means
        .into_iter()
        .map(|m| {
            Ok(Source::new(
                CostDistribution::trunc_exp(1.0 / m, c_high)?,
                DEFAULT_F_MAX,
            ))
        })
        .collect()
}

fn single(dist: CostDistribution) -> Vec<Source> {
    vec![Source::new(dist, DEFAULT_F_MAX)]
}

fn heterogeneous(c_high: f64, sources: usize, others_mean: f64) -> Result<Vec<Source>> {
    exp_sources(
        c_high,
        std::iter::once(CHEAP_MEAN).chain(std::iter::repeat_n(others_mean, sources - 1)),
    )
}

fn points(exp: Experiment) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    let mut push = |param_name, param_value, sources, alpha, delta| {
        out.push(Point {
            param_name,
            param_value,
            sources,
            alpha,
            delta,
        })
    };
    match exp {
        Experiment::QuantLoss => {
            for n in 1..=10 {
                let dist = CostDistribution::uniform(5.0, 30.0)?;
                push("intervals", n as f64, single(dist), 1.0, 25.0 / n as f64);
            }
        }
        Experiment::Fig5 => {
            for c_high in [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0] {
                push(
                    "c_high",
                    c_high,
                    single(CostDistribution::uniform(0.0, c_high)?),
                    1.0,
                    1.0,
                );
            }
            for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
                push(
                    "alpha",
                    alpha,
                    single(CostDistribution::uniform(0.0, 30.0)?),
                    alpha,
                    1.0,
                );
            }
        }
        Experiment::Fig6 => {
            for c_high in [5.0, 10.0, 20.0, 30.0, 50.0, 100.0] {
                push(
                    "c_high",
                    c_high,
                    single(CostDistribution::trunc_exp(1.0, c_high)?),
                    1.0,
                    1.0,
                );
            }
            for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
                push(
                    "alpha",
                    alpha,
                    single(CostDistribution::trunc_exp(1.0, 30.0)?),
                    alpha,
                    1.0,
                );
            }
        }
        Experiment::Fig7 => {
            for c_high in [5.0, 10.0, 20.0, 30.0, 40.0] {
                push("c_high", c_high, heterogeneous(c_high, 4, 2.0)?, 1.0, 0.5);
            }
            for n in 2..=8 {
                push("sources", n as f64, heterogeneous(20.0, n, 2.0)?, 1.0, 0.5);
            }
        }
        Experiment::Fig8 => {
            for mu in [0.5, 1.0, 2.0, 4.0] {
                push("mu", mu, heterogeneous(20.0, 4, mu)?, 1.0, 0.5);
            }
        }
    }
    Ok(out)
}

/// Seed of row `index`, derived from the master seed.
fn row_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_point(exp: Experiment, point: &Point, seed: u64, cfg: &SweepConfig) -> Result<SweepRow> {
    let profile = SourceProfile::new(point.sources.clone())?;
    let aoi = AoiCostModel::power(point.alpha)?;
    let multi = profile.len() > 1;
    let estimator = if multi {
        Estimator::QuasiMonteCarlo {
            points: cfg.qmc_points,
            replicates: cfg.replicates,
            seed,
        }
    } else {
        Estimator::Quadrature
    };
    // With many draws the virtual form needs only the rates.
    let envelope_forms = if multi { Forms::Virtual } else { Forms::Both };
    let optimal: Box<dyn Mechanism> = if multi {
        Box::new(MultiSourceMechanism::new(profile.clone(), aoi.clone()))
    } else {
        Box::new(SingleSourceMechanism::from_profile(
            profile.clone(),
            aoi.clone(),
        )?)
    };
    let quantized = QuantizedMechanism::build(profile.clone(), aoi.clone(), point.delta)?;
    let benchmark = BenchmarkMechanism::new(profile.clone(), aoi.clone());
    let complete = CompleteInfoPricing::new(profile, aoi);

    let reports = [
        expected_cost(&complete, estimator, Forms::Payment)?,
        expected_cost(optimal.as_ref(), estimator, envelope_forms)?,
        expected_cost(&quantized, estimator, envelope_forms)?,
        expected_cost(&benchmark, estimator, Forms::Payment)?,
    ];
    let mut warnings = Vec::new();
    let mut values = [0.0; 4];
    for (slot, rep) in values.iter_mut().zip(&reports) {
        *slot = checked_value(rep, cfg, &mut warnings);
    }
    Ok(SweepRow {
        experiment: exp.name(),
        seed,
        param_name: point.param_name,
        param_value: point.param_value,
        j_complete: values[0],
        j_optimal: values[1],
        j_quantized: values[2],
        j_benchmark: values[3],
        stderr: reports.iter().map(|r| r.stderr).fold(0.0, f64::max),
        warnings,
    })
}

fn checked_value(rep: &EvaluationReport, cfg: &SweepConfig, warnings: &mut Vec<String>) -> f64 {
    if !rep.consistent {
        warnings.push(format!(
            "{}: payment form {:?} and virtual form {:?} disagree",
            rep.mechanism, rep.payment_form, rep.virtual_form
        ));
    }
    if rep.stderr > cfg.max_relative_stderr * rep.j.abs() {
        warnings.push(format!(
            "{}: standard error {} exceeds {} of J = {}",
            rep.mechanism, rep.stderr, cfg.max_relative_stderr, rep.j
        ));
        return f64::NAN;
    }
    rep.j
}

/// Runs every parameter point of an experiment. Rows are independent and
/// seeded from `(cfg.seed, row index)`, so the output does not depend on
/// the number of worker threads.
pub fn run_sweep(exp: Experiment, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if !(cfg.max_relative_stderr > 0.0) || cfg.qmc_points == 0 || cfg.replicates == 0 {
        return Err(Error::config("sweep needs positive budgets and tolerances"));
    }
    points(exp)?
        .into_par_iter()
        .enumerate()
        .map(|(k, p)| run_point(exp, &p, row_seed(cfg.seed, k), cfg))
        .collect()
}

/// `x` with `digits` significant digits, in plain notation when compact.
pub fn format_number(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

/// Writes the CSV table. Flagged rows are preceded by `# warning:` lines.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        for w in &r.warnings {
            writeln!(
                out,
                "# warning: {} {}={}: {w}",
                r.experiment, r.param_name, r.param_value
            )?;
        }
        let nums = [
            r.param_value,
            r.j_complete,
            r.j_optimal,
            r.j_quantized,
            r.j_benchmark,
        ]
        .map(|x| format_number(x, 12));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.seed,
            r.param_name,
            nums[0],
            nums[1],
            nums[2],
            nums[3],
            nums[4],
            format_number(r.stderr, 12)
        )?;
    }
    Ok(())
}
