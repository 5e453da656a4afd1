//! Priors over a source's private sampling cost.
//!
//! Besides the CDF `Γ` and density `γ`, each prior exposes the virtual cost
//! `φ(c) = c + Γ(c)/γ(c)`, its cumulative `Φ(c) = ∫ φγ`, the Lipschitz
//! bound used by the quantization-loss estimate, and the ironing transform
//! in [`iron`](CostDistribution::iron).
//!
//! `Φ` has the closed form `Φ(c) = c·Γ(c)`, since `(cΓ)' = Γ + cγ = φγ`.
//! Everything that needs `Φ` uses that identity rather than integrating `φ`.

mod iron;
mod tabulated;

pub use iron::{IronedInterval, IronedVirtualCost, IRONING_GRID};
pub use tabulated::{TabulatedCdf, PDF_FLOOR};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior over one source's sampling cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostDistributionSpec", into = "CostDistributionSpec")]
pub enum CostDistribution {
    Uniform {
        c_low: f64,
        c_high: f64,
    },
    /// Exponential with rate `mu`, truncated to `[0, c_high]`.
    TruncExp {
        mu: f64,
        c_high: f64,
    },
    Tabulated(TabulatedCdf),
}

/// JSON form of a [`CostDistribution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostDistributionSpec {
    Uniform { c_low: f64, c_high: f64 },
    TruncExp { mu: f64, c_high: f64 },
    Tabulated { cdf_points: Vec<[f64; 2]> },
}

impl TryFrom<CostDistributionSpec> for CostDistribution {
    type Error = Error;

    fn try_from(spec: CostDistributionSpec) -> Result<Self> {
        match spec {
            CostDistributionSpec::Uniform { c_low, c_high } => Self::uniform(c_low, c_high),
            CostDistributionSpec::TruncExp { mu, c_high } => Self::trunc_exp(mu, c_high),
            CostDistributionSpec::Tabulated { cdf_points } => Self::tabulated(&cdf_points),
        }
    }
}

impl From<CostDistribution> for CostDistributionSpec {
    fn from(d: CostDistribution) -> Self {
        match d {
            CostDistribution::Uniform { c_low, c_high } => Self::Uniform { c_low, c_high },
            CostDistribution::TruncExp { mu, c_high } => Self::TruncExp { mu, c_high },
            CostDistribution::Tabulated(t) => Self::Tabulated {
                cdf_points: t.knots().collect(),
            },
        }
    }
}

/// Lipschitz constant of the virtual cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    pub value: f64,
    /// Set when the value is a finite-difference estimate rather than exact.
    pub approximate: bool,
}

impl CostDistribution {
    pub fn uniform(c_low: f64, c_high: f64) -> Result<Self> {
        if !(c_low.is_finite() && c_high.is_finite() && c_low >= 0.0 && c_low < c_high) {
            return Err(Error::config(format!(
                "uniform cost support needs 0 <= c_low < c_high < inf, got [{c_low}, {c_high}]"
            )));
        }
        Ok(Self::Uniform { c_low, c_high })
    }

    pub fn trunc_exp(mu: f64, c_high: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::config(format!(
                "truncated exponential needs a positive rate, got {mu}"
            )));
        }
        if !(c_high.is_finite() && c_high > 0.0) {
            return Err(Error::config(format!(
                "truncated exponential needs a positive finite upper cost, got {c_high}"
            )));
        }
        Ok(Self::TruncExp { mu, c_high })
    }

    pub fn tabulated(cdf_points: &[[f64; 2]]) -> Result<Self> {
        Ok(Self::Tabulated(TabulatedCdf::new(cdf_points)?))
    }

    pub fn c_low(&self) -> f64 {
        match self {
            Self::Uniform { c_low, .. } => *c_low,
            Self::TruncExp { .. } => 0.0,
            Self::Tabulated(t) => t.c_low(),
        }
    }

    pub fn c_high(&self) -> f64 {
        match self {
            Self::Uniform { c_high, .. } | Self::TruncExp { c_high, .. } => *c_high,
            Self::Tabulated(t) => t.c_high(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.c_low(), self.c_high())
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.c_low() && c <= self.c_high()
    }

    /// CDF `Γ(c)`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, c: f64) -> f64 {
        let (lo, hi) = self.support();
        if c <= lo {
            return 0.0;
        }
        if c >= hi {
            return 1.0;
        }
        match self {
            Self::Uniform { c_low, c_high } => (c - c_low) / (c_high - c_low),
            Self::TruncExp { mu, c_high } => (-mu * c).exp_m1() / (-mu * c_high).exp_m1(),
            Self::Tabulated(t) => t.cdf(c),
        }
    }

    /// Density `γ(c)` on the support.
    pub fn pdf(&self, c: f64) -> f64 {
        match self {
            Self::Uniform { c_low, c_high } => 1.0 / (c_high - c_low),
            Self::TruncExp { mu, c_high } => mu * (-mu * c).exp() / -(-mu * c_high).exp_m1(),
            Self::Tabulated(t) => t.pdf(c),
        }
    }

    /// Derivative `γ'(c)`.
    pub fn pdf_derivative(&self, c: f64) -> f64 {
        match self {
            Self::Uniform { .. } => 0.0,
            Self::TruncExp { mu, .. } => -mu * self.pdf(c),
            Self::Tabulated(t) => t.pdf_derivative(c),
        }
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Uniform { c_low, c_high } => c_low + u * (c_high - c_low),
            Self::TruncExp { mu, c_high } => {
                let z = -(-mu * c_high).exp_m1();
                (-(-u * z).ln_1p() / mu).min(*c_high)
            }
            Self::Tabulated(t) => t.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Virtual cost `φ(c) = c + Γ(c)/γ(c)`.
    pub fn virtual_cost(&self, c: f64) -> Result<f64> {
        self.check_support(c)?;
        let v = self.phi(c);
        if !v.is_finite() {
            return Err(Error::DegenerateDensity { at: c });
        }
        Ok(v)
    }

    /// Cumulative virtual cost `Φ(c) = ∫_{c_low}^{c} φ(t)γ(t) dt`.
    pub fn cumulative_virtual_cost(&self, c: f64) -> Result<f64> {
        self.check_support(c)?;
        Ok(self.big_phi(c))
    }

    /// Lipschitz constant of `φ`, the maximum of `2 − Γγ'/γ²` over the support.
    ///
    /// Exact for the closed-form priors. Tabulated priors get a
    /// finite-difference estimate of `sup |φ'|`, flagged as approximate.
    pub fn lipschitz_bound(&self) -> LipschitzBound {
        match self {
            Self::Uniform { .. } => LipschitzBound {
                value: 2.0,
                approximate: false,
            },
            Self::TruncExp { mu, c_high } => LipschitzBound {
                value: 1.0 + (mu * c_high).exp(),
                approximate: false,
            },
            Self::Tabulated(_) => {
                let (lo, hi) = self.support();
                let n = 10_000;
                let h = (hi - lo) / n as f64;
                let mut best: f64 = 0.0;
                let mut prev = self.phi(lo);
                for k in 1..=n {
                    let cur = self.phi(lo + h * k as f64);
                    best = best.max(((cur - prev) / h).abs());
                    prev = cur;
                }
                LipschitzBound {
                    value: best,
                    approximate: true,
                }
            }
        }
    }

    /// Ironed virtual cost; see [`IronedVirtualCost`].
    pub fn iron(&self) -> IronedVirtualCost {
        IronedVirtualCost::new(self.clone())
    }

    /// Virtual cost without support checks.
    pub(crate) fn phi(&self, c: f64) -> f64 {
        match self {
            Self::Uniform { c_low, .. } => 2.0 * c - c_low,
            Self::TruncExp { mu, .. } => c + (mu * c).exp_m1() / mu,
            Self::Tabulated(t) => c + t.cdf(c) / t.pdf(c),
        }
    }

    pub(crate) fn big_phi(&self, c: f64) -> f64 {
        c * self.cdf(c)
    }

    fn check_support(&self, c: f64) -> Result<()> {
        if !self.contains(c) {
            let (lo, hi) = self.support();
            return Err(Error::Domain {
                what: "cost",
                value: c,
                domain: format!("[{lo}, {hi}]"),
            });
        }
        Ok(())
    }
}
