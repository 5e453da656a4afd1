//! Tabulated cost CDFs, interpolated with a monotone cubic (Fritsch-Carlson)
//! so the density is continuous and non-negative.

use crate::error::{Error, Result};

/// Density values below this floor are raised to it before dividing.
pub const PDF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    costs: Vec<f64>,
    quantiles: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCdf {
    /// Builds the CDF from `(cost, cumulative probability)` knots.
    ///
    /// Probabilities are rescaled so the first knot maps to 0 and the last to 1.
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config("tabulated CDF needs at least two knots"));
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::config("tabulated CDF knots must be finite"));
        }
        if points[0][0] < 0.0 {
            return Err(Error::config("tabulated CDF costs must be non-negative"));
        }
        for w in points.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::config(
                    "tabulated CDF costs must be strictly increasing",
                ));
            }
            if w[1][1] < w[0][1] {
                return Err(Error::config("tabulated CDF values must be non-decreasing"));
            }
        }
        let (q0, q1) = (points[0][1], points[points.len() - 1][1]);
        if !(q1 > q0) {
            return Err(Error::config(
                "tabulated CDF must increase over its support",
            ));
        }
        let costs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let quantiles: Vec<f64> = points.iter().map(|p| (p[1] - q0) / (q1 - q0)).collect();
        let slopes = fritsch_carlson_slopes(&costs, &quantiles);
        Ok(Self {
            costs,
            quantiles,
            slopes,
        })
    }

    pub fn knots(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.costs
            .iter()
            .zip(&self.quantiles)
            .map(|(&c, &q)| [c, q])
    }

    pub fn c_low(&self) -> f64 {
        self.costs[0]
    }

    pub fn c_high(&self) -> f64 {
        self.costs[self.costs.len() - 1]
    }

    fn segment(&self, c: f64) -> usize {
        let n = self.costs.len();
        self.costs.partition_point(|&x| x <= c).clamp(1, n - 1) - 1
    }

    /// Hermite basis evaluation on segment `k`: value, first and second derivative.
    fn hermite(&self, k: usize, c: f64) -> (f64, f64, f64) {
        let h = self.costs[k + 1] - self.costs[k];
        let t = ((c - self.costs[k]) / h).clamp(0.0, 1.0);
        let (y0, y1) = (self.quantiles[k], self.quantiles[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let first = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        let second = ((12.0 * t - 6.0) * y0
            + (6.0 * t - 4.0) * d0
            + (-12.0 * t + 6.0) * y1
            + (6.0 * t - 2.0) * d1)
            / (h * h);
        (value, first, second)
    }

    pub fn cdf(&self, c: f64) -> f64 {
        if c <= self.c_low() {
            return 0.0;
        }
        if c >= self.c_high() {
            return 1.0;
        }
        self.hermite(self.segment(c), c).0.clamp(0.0, 1.0)
    }

    /// Interpolated density, floored at [`PDF_FLOOR`].
    pub fn pdf(&self, c: f64) -> f64 {
        let c = c.clamp(self.c_low(), self.c_high());
        self.hermite(self.segment(c), c).1.max(PDF_FLOOR)
    }

    pub fn pdf_derivative(&self, c: f64) -> f64 {
        let c = c.clamp(self.c_low(), self.c_high());
        self.hermite(self.segment(c), c).2
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.c_low();
        }
        if u >= 1.0 {
            return self.c_high();
        }
        let n = self.quantiles.len();
        let k = self.quantiles.partition_point(|&q| q <= u).clamp(1, n - 1) - 1;
        let (mut lo, mut hi) = (self.costs[k], self.costs[k + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(k, mid).0 < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a <= 0.0 || b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d
}
