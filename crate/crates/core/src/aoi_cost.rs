//! The destination's age penalty.
//!
//! An [`AoiCostModel`] holds the instantaneous penalty `g(age)`, its running
//! integral `G(x) = ∫₀ˣ g(t) dt` (the cost accumulated over one interarrival
//! of length `x`) and the marginal reduction `M(x) = g(x)·x − G(x)`. `M` is
//! strictly increasing with `M(0⁺) = 0`; every optimality condition in this
//! crate equates `M(1/rate)` to some per-unit price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{solve_increasing, BisectionOptions};

/// Age penalty `g` with its cumulative and marginal-reduction maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AoiCostSpec", into = "AoiCostSpec")]
pub enum AoiCostModel {
    /// `g(t) = t^alpha`.
    Power { alpha: f64 },
    /// Piecewise-linear penalty through the given knots.
    Tabulated(TabulatedPenalty),
}

/// Knots of a piecewise-linear penalty, with `G` precomputed at each knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPenalty {
    ages: Vec<f64>,
    penalties: Vec<f64>,
    cumulative: Vec<f64>,
}

/// JSON form of an [`AoiCostModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AoiCostSpec {
    Power { alpha: f64 },
    Tabulated { points: Vec<[f64; 2]> },
}

impl TryFrom<AoiCostSpec> for AoiCostModel {
    type Error = Error;

    fn try_from(spec: AoiCostSpec) -> Result<Self> {
        match spec {
            AoiCostSpec::Power { alpha } => AoiCostModel::power(alpha),
            AoiCostSpec::Tabulated { points } => AoiCostModel::tabulated(&points),
        }
    }
}

impl From<AoiCostModel> for AoiCostSpec {
    fn from(model: AoiCostModel) -> Self {
        match model {
            AoiCostModel::Power { alpha } => AoiCostSpec::Power { alpha },
            AoiCostModel::Tabulated(t) => AoiCostSpec::Tabulated {
                points: t
                    .ages
                    .iter()
                    .zip(&t.penalties)
                    .map(|(&a, &p)| [a, p])
                    .collect(),
            },
        }
    }
}

impl AoiCostModel {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!(
                "power age penalty needs a positive finite exponent, got {alpha}"
            )));
        }
        Ok(AoiCostModel::Power { alpha })
    }

    /// Piecewise-linear penalty through `(age, penalty)` knots.
    ///
    /// The first knot must sit at age 0, ages must be strictly increasing and
    /// penalties non-negative and strictly increasing. Past the last knot the
    /// final segment is extended linearly.
    pub fn tabulated(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config(
                "tabulated age penalty needs at least two knots",
            ));
        }
        if points[0][0] != 0.0 {
            return Err(Error::config("tabulated age penalty must start at age 0"));
        }
        for w in points.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::config(
                    "tabulated age penalty ages must be strictly increasing",
                ));
            }
            if !(w[1][1] > w[0][1]) {
                return Err(Error::config(
                    "tabulated age penalty values must be strictly increasing",
                ));
            }
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
            || points[0][1] < 0.0
        {
            return Err(Error::config(
                "tabulated age penalty values must be finite and non-negative",
            ));
        }
        let ages: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let penalties: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for k in 1..points.len() {
            let trap = 0.5 * (penalties[k] + penalties[k - 1]) * (ages[k] - ages[k - 1]);
            cumulative.push(cumulative[k - 1] + trap);
        }
        Ok(AoiCostModel::Tabulated(TabulatedPenalty {
            ages,
            penalties,
            cumulative,
        }))
    }

    /// Exponent of the power penalty, if this is one.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            AoiCostModel::Power { alpha } => Some(*alpha),
            AoiCostModel::Tabulated(_) => None,
        }
    }

    /// Penalty `g(age)`.
    pub fn penalty(&self, age: f64) -> Result<f64> {
        check_non_negative("age", age)?;
        Ok(self.g(age))
    }

    /// Cumulative penalty `G(x)` over an interarrival of length `x`.
    pub fn cumulative_penalty(&self, x: f64) -> Result<f64> {
        check_non_negative("interarrival", x)?;
        Ok(self.big_g(x))
    }

    /// Marginal reduction `M(x) = g(x)·x − G(x)`, with `M(0) = 0`.
    pub fn marginal_reduction(&self, x: f64) -> Result<f64> {
        check_non_negative("interarrival", x)?;
        Ok(self.m(x))
    }

    /// The unique `x` with `M(x) = target`; `target = 0` maps to `0`.
    pub fn invert_marginal_reduction(&self, target: f64) -> Result<f64> {
        if target.is_nan() || target < 0.0 {
            return Err(Error::Domain {
                what: "marginal reduction target",
                value: target,
                domain: "[0, ∞)".into(),
            });
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if target == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        match self {
            AoiCostModel::Power { alpha } => {
                Ok(((1.0 + 1.0 / alpha) * target).powf(1.0 / (1.0 + alpha)))
            }
            AoiCostModel::Tabulated(_) => {
                solve_increasing(|x| self.m(x), target, BisectionOptions::default())
            }
        }
    }

    /// Destination's AoI cost rate `G(1/F)·F` when updating at rate `F`.
    ///
    /// A zero rate means the age grows without bound.
    pub fn rate_cost(&self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        if rate == f64::INFINITY {
            return 0.0;
        }
        self.big_g(1.0 / rate) * rate
    }

    pub(crate) fn g(&self, age: f64) -> f64 {
        match self {
            AoiCostModel::Power { alpha } => age.powf(*alpha),
            AoiCostModel::Tabulated(t) => t.g(age),
        }
    }

    pub(crate) fn big_g(&self, x: f64) -> f64 {
        match self {
            AoiCostModel::Power { alpha } => x.powf(alpha + 1.0) / (alpha + 1.0),
            AoiCostModel::Tabulated(t) => t.big_g(x),
        }
    }

    pub(crate) fn m(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            AoiCostModel::Power { alpha } => alpha / (alpha + 1.0) * x.powf(alpha + 1.0),
            AoiCostModel::Tabulated(t) => t.g(x) * x - t.big_g(x),
        }
    }

    /// `M(1/F)`, the marginal reduction at aggregate rate `F`.
    pub(crate) fn m_at_rate(&self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        self.m(1.0 / rate)
    }

    /// Rate `F` solving `M(1/F) = price`; infinite for a zero price.
    pub(crate) fn rate_for_price(&self, price: f64) -> Result<f64> {
        let x = self.invert_marginal_reduction(price)?;
        Ok(if x == 0.0 { f64::INFINITY } else { 1.0 / x })
    }
}

impl TabulatedPenalty {
    fn segment(&self, age: f64) -> usize {
        let n = self.ages.len();
        match self.ages.partition_point(|&a| a <= age) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    fn g(&self, age: f64) -> f64 {
        let k = self.segment(age);
        let slope = (self.penalties[k + 1] - self.penalties[k]) / (self.ages[k + 1] - self.ages[k]);
        self.penalties[k] + slope * (age - self.ages[k])
    }

    fn big_g(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let gx = self.g(x);
        self.cumulative[k] + 0.5 * (self.penalties[k] + gx) * (x - self.ages[k])
    }
}

fn check_non_negative(what: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::Domain {
            what,
            value: v,
            domain: "[0, ∞)".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power(alpha: f64) -> AoiCostModel {
        AoiCostModel::power(alpha).unwrap()
    }

    fn convex_table() -> AoiCostModel {
        AoiCostModel::tabulated(&[[0.0, 0.0], [1.0, 0.5], [2.0, 2.0], [4.0, 7.0], [8.0, 30.0]])
            .unwrap()
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(power(1.0).penalty(3.0).unwrap(), 3.0);
        assert_eq!(power(2.0).penalty(0.0).unwrap(), 0.0);
        assert_relative_eq!(power(0.5).penalty(4.0).unwrap(), 2.0);
        assert!(matches!(
            power(1.0).penalty(-1.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn cumulative_examples() {
        assert_relative_eq!(power(1.0).cumulative_penalty(2.0).unwrap(), 2.0);
        assert_eq!(power(1.0).cumulative_penalty(0.0).unwrap(), 0.0);
        assert_relative_eq!(power(2.0).cumulative_penalty(3.0).unwrap(), 9.0);
        assert!(power(1.0).cumulative_penalty(-0.5).is_err());
    }

    #[test]
    fn marginal_reduction_examples() {
        assert_relative_eq!(power(1.0).marginal_reduction(2.0).unwrap(), 2.0);
        assert!(power(1.0).marginal_reduction(1e-12).unwrap() < 1e-23);
        assert_relative_eq!(power(2.0).marginal_reduction(3.0).unwrap(), 18.0);
    }

    #[test]
    fn inversion_examples() {
        let m = power(1.0);
        assert_relative_eq!(m.invert_marginal_reduction(2.0).unwrap(), 2.0);
        assert_eq!(m.invert_marginal_reduction(0.0).unwrap(), 0.0);
        assert_eq!(convex_table().invert_marginal_reduction(0.0).unwrap(), 0.0);
        let x = m.invert_marginal_reduction(25.0).unwrap();
        assert_relative_eq!(x, 50f64.sqrt(), max_relative = 1e-14);
        // Independent check: bisection on M itself.
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid / 2.0 < 25.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(x, lo, max_relative = 1e-12);
        assert!(m.invert_marginal_reduction(-1.0).is_err());
    }

    #[test]
    fn power_closed_forms_match_quadrature() {
        for alpha in [0.5, 1.0, 2.0, 3.7] {
            let m = power(alpha);
            for x in [0.3, 1.0, 4.5, 20.0] {
                let q =
                    adaptive_simpson(|t| m.g(t), 0.0, x, 1e-10 * x.powf(alpha + 1.0), 50).unwrap();
                assert_relative_eq!(m.big_g(x), q, max_relative = 1e-8);
                assert_relative_eq!(m.m(x), m.g(x) * x - q, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn tabulated_matches_linear_penalty() {
        // Two knots on g(t) = t reproduce the power model with alpha = 1.
        let t = AoiCostModel::tabulated(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let p = power(1.0);
        for x in [0.1, 0.7, 3.0, 12.0] {
            assert_relative_eq!(t.big_g(x), p.big_g(x), max_relative = 1e-12);
            assert_relative_eq!(
                t.invert_marginal_reduction(p.m(x)).unwrap(),
                x,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn tabulated_cumulative_matches_quadrature() {
        let t = convex_table();
        for x in [0.5, 1.0, 3.3, 9.0] {
            let q = adaptive_simpson(|s| t.g(s), 0.0, x, 1e-12, 50).unwrap();
            assert_relative_eq!(t.big_g(x), q, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(AoiCostModel::tabulated(&[[0.0, 1.0]]).is_err());
        assert!(AoiCostModel::tabulated(&[[0.5, 0.0], [1.0, 1.0]]).is_err());
        assert!(AoiCostModel::tabulated(&[[0.0, 1.0], [1.0, 1.0]]).is_err());
        assert!(AoiCostModel::tabulated(&[[0.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(AoiCostModel::power(0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m: AoiCostModel = serde_json::from_str(r#"{"kind":"power","alpha":1.0}"#).unwrap();
        assert_eq!(m, power(1.0));
        let t: AoiCostModel =
            serde_json::from_str(r#"{"kind":"tabulated","points":[[0,0],[1,2],[3,5]]}"#).unwrap();
        let back: AoiCostModel = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
        assert!(serde_json::from_str::<AoiCostModel>(r#"{"kind":"power","alpha":-1}"#).is_err());
    }

    fn log_grid() -> Vec<f64> {
        (0..=120)
            .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 120.0))
            .collect()
    }

    #[test]
    fn round_trip_on_log_grid() {
        for model in [power(0.5), power(1.0), power(2.0), convex_table()] {
            for x in log_grid() {
                let back = model.invert_marginal_reduction(model.m(x)).unwrap();
                assert_relative_eq!(back, x, max_relative = 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn marginal_reduction_is_strictly_increasing(
            alpha in 0.1f64..4.0,
            a in 1e-3f64..1e3,
            b in 1e-3f64..1e3,
        ) {
            prop_assume!((a - b).abs() > 1e-9 * a.max(b));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for model in [power(alpha), convex_table()] {
                prop_assert!(model.m(lo) < model.m(hi));
            }
        }
    }
}
