//! Discrete-event simulation of an equal-spacing, flat-rate mechanism under
//! stationary randomized scheduling.
//!
//! Updates arrive every `x = 1/Σf` time units. Each update comes from source
//! `i` with probability `π_i = f_i/Σf`, independently across updates, and is
//! paid the flat price `p_i = h_i/f_i`. The age of information resets to zero
//! at each arrival and grows at unit rate in between.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aoi_cost::AoiCostModel;
use crate::error::{Error, Result};
use crate::mechanism::Mechanism;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub updates: usize,
    pub seed: u64,
    /// Age samples taken inside each interarrival for trajectory output.
    pub samples_per_update: usize,
    /// Updates whose age trajectory is kept.
    pub trajectory_updates: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            updates: 100_000,
            seed: 0,
            samples_per_update: 16,
            trajectory_updates: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateRecord {
    /// Arrival time of this update.
    pub time: f64,
    /// Time since the previous update.
    pub interarrival: f64,
    pub source: usize,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub seed: u64,
    pub updates: Vec<UpdateRecord>,
    /// `(t, Δ_t)` samples of the age sawtooth.
    pub age_samples: Vec<(f64, f64)>,
    pub horizon: f64,
    /// Long-run average of AoI cost plus payments per unit time.
    pub destination_cost_rate: f64,
    pub aoi_cost_rate: f64,
    /// Per-source average of `payment − cost` per unit time.
    pub payoff_rates: Vec<f64>,
    pub schedule_counts: Vec<usize>,
}

/// Closed-form long-run rates the simulation should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateForm {
    /// `F·G(1/F) + Σ h_i`.
    pub destination_cost_rate: f64,
    /// `π_i (p_i − c_i)/x = h_i − c_i f_i`.
    pub payoff_rates: Vec<f64>,
}

/// Rate-form destination cost and payoffs when sources report `costs` truthfully.
pub fn rate_form(mech: &dyn Mechanism, costs: &[f64]) -> Result<RateForm> {
    let f = mech.rates(costs)?;
    let h = mech.payment_rates(costs)?;
    let total: f64 = f.iter().sum();
    Ok(RateForm {
        destination_cost_rate: mech.aoi().rate_cost(total) + h.iter().sum::<f64>(),
        payoff_rates: f
            .iter()
            .zip(&h)
            .zip(costs)
            .map(|((f, h), c)| h - c * f)
            .collect(),
    })
}

/// Simulates `opts.updates` updates with every source reporting its true cost.
pub fn simulate(mech: &dyn Mechanism, costs: &[f64], opts: &SimOptions) -> Result<SimTrace> {
    if opts.updates == 0 {
        return Err(Error::config("simulation needs at least one update"));
    }
    let f = mech.rates(costs)?;
    let h = mech.payment_rates(costs)?;
    let total: f64 = f.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::config(format!(
            "aggregate update rate must be positive and finite, got {total}"
        )));
    }
    let x = 1.0 / total;
    let prices: Vec<f64> = f
        .iter()
        .zip(&h)
        .map(|(&f, &h)| if f > 0.0 { h / f } else { 0.0 })
        .collect();
    let pick = WeightedIndex::new(&f).map_err(|e| Error::config(format!("bad schedule: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let g_x = mech.aoi().cumulative_penalty(x)?;

    let n = costs.len();
    let mut updates = Vec::with_capacity(opts.updates);
    let mut age_samples = Vec::new();
    let mut earned = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let (mut aoi_cost, mut paid, mut now) = (0.0, 0.0, 0.0);
    for k in 0..opts.updates {
        if k < opts.trajectory_updates {
            for j in 0..opts.samples_per_update {
                let age = x * j as f64 / opts.samples_per_update as f64;
                age_samples.push((now + age, age));
            }
        }
        now += x;
        aoi_cost += g_x;
        let s = pick.sample(&mut rng);
        paid += prices[s];
        earned[s] += prices[s] - costs[s];
        counts[s] += 1;
        updates.push(UpdateRecord {
            time: now,
            interarrival: x,
            source: s,
            payment: prices[s],
        });
    }
    Ok(SimTrace {
        seed: opts.seed,
        updates,
        age_samples,
        horizon: now,
        destination_cost_rate: (aoi_cost + paid) / now,
        aoi_cost_rate: aoi_cost / now,
        payoff_rates: earned.iter().map(|e| e / now).collect(),
        schedule_counts: counts,
    })
}

/// Age `t − U_t` at time `t` given sorted arrival times, with an update at time 0.
pub fn age_at(arrivals: &[f64], t: f64) -> f64 {
    let k = arrivals.partition_point(|&a| a <= t);
    if k == 0 {
        t
    } else {
        t - arrivals[k - 1]
    }
}

/// Long-run AoI cost per unit time for a sequence of interarrival times.
pub fn aoi_cost_rate(aoi: &AoiCostModel, interarrivals: &[f64]) -> Result<f64> {
    let mut cost = 0.0;
    for &x in interarrivals {
        cost += aoi.cumulative_penalty(x)?;
    }
    Ok(cost / interarrivals.iter().sum::<f64>())
}
