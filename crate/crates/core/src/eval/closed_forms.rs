use serde::Serialize;
use statrs::function::gamma::gamma_li;

use crate::cost_dist::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;

/// Single-source settings with closed-form or one-dimensional reference values,
/// all under the power penalty `g(x) = x^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Setting {
    Uniform {
        c_low: f64,
        c_high: f64,
        alpha: f64,
    },
    /// Exponential costs with rate `mu` truncated to `[0, c_high]`.
    TruncExp {
        mu: f64,
        c_high: f64,
        alpha: f64,
    },
}

impl Setting {
    pub fn alpha(&self) -> f64 {
        match *self {
            Setting::Uniform { alpha, .. } | Setting::TruncExp { alpha, .. } => alpha,
        }
    }

    pub fn distribution(&self) -> Result<CostDistribution> {
        match *self {
            Setting::Uniform { c_low, c_high, .. } => CostDistribution::uniform(c_low, c_high),
            Setting::TruncExp { mu, c_high, .. } => CostDistribution::trunc_exp(mu, c_high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub j_benchmark: f64,
    pub j_complete: f64,
    pub j_optimal: f64,
    /// `J_B/J_C` and its bound `1 + α/(1+α)` (uniform only).
    pub benchmark_ratio: f64,
    pub benchmark_bound: Option<f64>,
    /// `J*/J_C` and its bound `2^{α/(1+α)}` (uniform only).
    pub optimal_ratio: f64,
    pub optimal_bound: Option<f64>,
    /// `J_C` through the lower incomplete gamma function (truncated exponential only).
    pub j_complete_gamma: Option<f64>,
}

/// `E[h(c)]` under `dist` by 200-node rules on the prior's octiles.
fn expectation(dist: &CostDistribution, h: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = dist.support();
    let mut cuts: Vec<f64> = std::iter::once(lo)
        .chain((1..8).map(|k| dist.quantile(k as f64 / 8.0)))
        .chain(std::iter::once(hi))
        .collect();
    cuts.dedup();
    let gl = gauss_legendre(200);
    cuts.windows(2)
        .map(|w| gl.integrate_stretched(w[0], w[1], |c| dist.pdf(c) * h(c)))
        .sum()
}

/// Reference costs of the benchmark, complete-information and optimal
/// mechanisms for a single source with `f_max` unbounded.
///
/// With `a = α/(1+α)` and `k = (1+1/α)^a`, the complete-information cost at
/// cost `c` is `k·c^a` and the optimal mechanism's is `k·φ(c)^a`.
pub fn closed_forms(setting: Setting) -> Result<ClosedForms> {
    let alpha = setting.alpha();
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let dist = setting.distribution()?;
    let a = alpha / (1.0 + alpha);
    let k = (1.0 + 1.0 / alpha).powf(a);
    let c_high = dist.c_high();
    let j_benchmark = (c_high * (1.0 + 1.0 / alpha)).powf(a);
    let (j_complete, j_optimal, bounds, j_complete_gamma) = match setting {
        Setting::Uniform { c_low, .. } => {
            let width = c_high - c_low;
            let jc = k * (c_high.powf(a + 1.0) - c_low.powf(a + 1.0)) / ((a + 1.0) * width);
            let js = k * ((2.0 * c_high - c_low).powf(a + 1.0) - c_low.powf(a + 1.0))
                / (2.0 * (a + 1.0) * width);
            (jc, js, Some((1.0 + a, 2f64.powf(a))), None)
        }
        Setting::TruncExp { mu, .. } => {
            let jc = k * expectation(&dist, |c| c.powf(a));
            let js = k * expectation(&dist, |c| dist.phi(c).powf(a));
            let gamma = k * mu.powf(-a) * gamma_li(a + 1.0, mu * c_high) / -(-mu * c_high).exp_m1();
            (jc, js, None, Some(gamma))
        }
    };
    Ok(ClosedForms {
        j_benchmark,
        j_complete,
        j_optimal,
        benchmark_ratio: j_benchmark / j_complete,
        benchmark_bound: bounds.map(|b| b.0),
        optimal_ratio: j_optimal / j_complete,
        optimal_bound: bounds.map(|b| b.1),
        j_complete_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_values() {
        let cf = closed_forms(Setting::Uniform {
            c_low: 5.0,
            c_high: 30.0,
            alpha: 1.0,
        })
        .unwrap();
        assert_relative_eq!(cf.j_benchmark, 60f64.sqrt(), max_relative = 1e-14);
        let jc = (30f64.powf(1.5) - 5f64.powf(1.5)) / 25.0 * 2.0 / 3.0 * 2f64.sqrt();
        assert_relative_eq!(cf.j_complete, jc, max_relative = 1e-14);
        assert!(cf.benchmark_ratio <= 1.5 && cf.optimal_ratio <= 2f64.sqrt());
    }

    #[test]
    fn uniform_forms_match_quadrature() {
        for (c_low, c_high, alpha) in [(5.0, 30.0, 1.0), (0.5, 12.0, 0.5), (2.0, 50.0, 3.0)] {
            let s = Setting::Uniform {
                c_low,
                c_high,
                alpha,
            };
            let cf = closed_forms(s).unwrap();
            let dist = s.distribution().unwrap();
            let a = alpha / (1.0 + alpha);
            let k = (1.0 + 1.0 / alpha).powf(a);
            assert_relative_eq!(
                cf.j_complete,
                k * expectation(&dist, |c| c.powf(a)),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                cf.j_optimal,
                k * expectation(&dist, |c| (2.0 * c - c_low).powf(a)),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn trunc_exp_gamma_cross_check() {
        for (mu, c_high, alpha) in [(1.0, 30.0, 1.0), (0.5, 20.0, 2.0), (2.0, 10.0, 0.5)] {
            let cf = closed_forms(Setting::TruncExp { mu, c_high, alpha }).unwrap();
            assert_relative_eq!(
                cf.j_complete,
                cf.j_complete_gamma.unwrap(),
                max_relative = 1e-6
            );
        }
    }
}
