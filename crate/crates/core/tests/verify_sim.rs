use aoi_mech::numeric::adaptive_simpson;
use aoi_mech::sim::{age_at, aoi_cost_rate, rate_form, simulate, SimOptions};
use aoi_mech::verify::{verify_ic, verify_ir, VerifyOptions};
use aoi_mech::{
    AoiCostModel, CostDistribution, Mechanism, MultiSourceMechanism, Result, SingleSourceMechanism,
    Source, SourceProfile,
};
use proptest::prelude::*;

fn uniform_profile() -> SourceProfile {
    SourceProfile::single(CostDistribution::uniform(5.0, 30.0).unwrap(), 1e9).unwrap()
}

fn linear() -> AoiCostModel {
    AoiCostModel::power(1.0).unwrap()
}

fn small_grid() -> VerifyOptions {
    VerifyOptions {
        true_points: 60,
        report_points: 120,
        ..Default::default()
    }
}

/// Same rate and payment whatever is reported.
struct Constant {
    profile: SourceProfile,
    aoi: AoiCostModel,
}

impl Mechanism for Constant {
    fn name(&self) -> &str {
        "constant"
    }
    fn profile(&self) -> &SourceProfile {
        &self.profile
    }
    fn aoi(&self) -> &AoiCostModel {
        &self.aoi
    }
    fn rates(&self, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.1])
    }
    fn payment_rates(&self, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![2.0])
    }
    fn breakpoints(&self, _i: usize, _reports: &[f64]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
    fn envelope_payments(&self) -> bool {
        false
    }
}

/// The optimal rule with the participation constant dropped:
/// `h(c) = c f(c) − ∫_{c_low}^{c} f`.
struct NoRent(SingleSourceMechanism);

impl Mechanism for NoRent {
    fn name(&self) -> &str {
        "no-rent"
    }
    fn profile(&self) -> &SourceProfile {
        self.0.profile()
    }
    fn aoi(&self) -> &AoiCostModel {
        self.0.aoi()
    }
    fn rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        self.0.rates(reports)
    }
    fn payment_rates(&self, reports: &[f64]) -> Result<Vec<f64>> {
        let lo = self.0.dist().c_low();
        let full = self.0.payment_rate(lo)? - lo * self.0.optimal_rate(lo)?;
        Ok(vec![self.0.payment_rate(reports[0])? - full])
    }
    fn breakpoints(&self, i: usize, reports: &[f64]) -> Result<Vec<f64>> {
        self.0.breakpoints(i, reports)
    }
    fn envelope_payments(&self) -> bool {
        false
    }
}

#[test]
fn report_independent_rules_have_zero_gain() {
    let m = Constant {
        profile: uniform_profile(),
        aoi: linear(),
    };
    let rep = verify_ic(&m, 0, &small_grid()).unwrap();
    assert_eq!(rep.max_gain, 0.0);
    assert!(rep.ic);
}

#[test]
fn dropping_the_rent_breaks_participation() {
    let m = NoRent(
        SingleSourceMechanism::new(CostDistribution::uniform(5.0, 30.0).unwrap(), linear(), 1e9)
            .unwrap(),
    );
    let rep = verify_ir(&m, 0, &small_grid()).unwrap();
    assert!(rep.ic, "shifting payments by a constant keeps truthfulness");
    assert!(!rep.ir);
    // Payoff is −∫_{c_low}^{c} f: zero at the bottom, negative above.
    assert!(rep.points[0].truthful_payoff.abs() < 1e-9);
    assert!(rep.points[1..].iter().all(|p| p.truthful_payoff < 0.0));
}

#[test]
fn ironed_prior_is_certified() {
    let dist = CostDistribution::tabulated(&[
        [0.0, 0.0],
        [2.0, 0.45],
        [4.0, 0.5],
        [6.0, 0.52],
        [8.0, 0.6],
        [10.0, 1.0],
    ])
    .unwrap();
    let m = SingleSourceMechanism::new(dist, linear(), 1e9).unwrap();
    let rep = verify_ic(&m, 0, &small_grid()).unwrap();
    assert!(rep.ic && rep.ir, "{}", rep.max_gain);
}

#[test]
fn lower_payoff_bound_is_the_full_integral() {
    let m =
        SingleSourceMechanism::new(CostDistribution::uniform(5.0, 30.0).unwrap(), linear(), 1e9)
            .unwrap();
    let rep = verify_ir(&m, 0, &small_grid()).unwrap();
    // ∫_5^30 (2(2c − 5))^{-1/2} dc = (√110 − √10)/2.
    let expected = (110f64.sqrt() - 10f64.sqrt()) / 2.0;
    assert!((rep.points[0].truthful_payoff - expected).abs() < 1e-9);
    assert_eq!(rep.payoff_at_top.abs() < 1e-12, true);
}

fn two_source() -> MultiSourceMechanism {
    let profile = SourceProfile::new(vec![
        Source::new(CostDistribution::uniform(0.0, 10.0).unwrap(), 0.2),
        Source::new(CostDistribution::uniform(0.0, 10.0).unwrap(), 0.2),
    ])
    .unwrap();
    MultiSourceMechanism::new(profile, linear())
}

#[test]
fn simulation_is_seed_deterministic() {
    let m = two_source();
    let opts = SimOptions {
        updates: 5000,
        seed: 99,
        ..Default::default()
    };
    let a = simulate(&m, &[1.0, 2.0], &opts).unwrap();
    let b = simulate(&m, &[1.0, 2.0], &opts).unwrap();
    assert_eq!(a, b);
    let c = simulate(&m, &[1.0, 2.0], &SimOptions { seed: 100, ..opts }).unwrap();
    assert_ne!(a.schedule_counts, c.schedule_counts);
}

#[test]
fn unscheduled_source_never_updates() {
    // Source 1 is capped to zero, so π = (1, 0).
    let profile = SourceProfile::new(vec![
        Source::new(CostDistribution::uniform(0.0, 10.0).unwrap(), 1e9),
        Source::new(CostDistribution::uniform(0.0, 10.0).unwrap(), 0.0),
    ])
    .unwrap();
    let m = MultiSourceMechanism::new(profile, linear());
    let opts = SimOptions {
        updates: 2000,
        seed: 1,
        ..Default::default()
    };
    let trace = simulate(&m, &[3.0, 1.0], &opts).unwrap();
    assert_eq!(trace.schedule_counts[1], 0);
    assert_eq!(trace.payoff_rates[1], 0.0);
    let closed = rate_form(&m, &[3.0, 1.0]).unwrap();
    assert!((trace.destination_cost_rate - closed.destination_cost_rate).abs() < 1e-9);
}

#[test]
fn sawtooth_integrates_to_cumulative_cost() {
    let m = two_source();
    let aoi = AoiCostModel::power(2.0).unwrap();
    let opts = SimOptions {
        updates: 50,
        seed: 5,
        ..Default::default()
    };
    let trace = simulate(&m, &[1.0, 2.0], &opts).unwrap();
    let arrivals: Vec<f64> = trace.updates.iter().map(|u| u.time).collect();
    let mut prev = 0.0;
    for &t in &arrivals[..10] {
        let integral = adaptive_simpson(
            |s| aoi.penalty(age_at(&arrivals, s)).unwrap(),
            prev,
            t - 1e-12,
            1e-12,
            40,
        )
        .unwrap();
        let g = aoi.cumulative_penalty(t - prev).unwrap();
        assert!(
            (integral - g).abs() < 1e-9 * g.max(1.0),
            "{integral} vs {g}"
        );
        prev = t;
    }
    for &(t, age) in &trace.age_samples[..160] {
        assert!((age_at(&arrivals, t) - age).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn equal_spacing_is_never_beaten(
        xs in proptest::collection::vec(0.01f64..10.0, 2..40),
        alpha in 0.2f64..3.0,
    ) {
        let aoi = AoiCostModel::power(alpha).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let uneven = aoi_cost_rate(&aoi, &xs).unwrap();
        let even = aoi_cost_rate(&aoi, &[mean]).unwrap();
        prop_assert!(uneven >= even * (1.0 - 1e-12));
    }
}
