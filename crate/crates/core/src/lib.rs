//! Optimal and quantized mechanisms for buying fresh updates from sources
//! with private sampling costs.
//!
//! A destination pays sources for status updates and suffers an age penalty
//! between updates. Each source knows its own per-update cost; the
//! destination only knows the prior. The crate builds the cost-minimizing
//! incentive-compatible mechanism, a quantized approximation of it, two
//! baselines, tools to certify truthfulness, and the sweeps used to compare
//! them.
//!
//! ```
//! use aoi_mech::{AoiCostModel, CostDistribution, SingleSourceMechanism};
//!
//! let aoi = AoiCostModel::power(1.0)?;
//! let prior = CostDistribution::uniform(5.0, 30.0)?;
//! let mech = SingleSourceMechanism::new(prior, aoi, 1e9)?;
//! let f = mech.optimal_rate(15.0)?;
//! assert!((f - 50f64.sqrt().recip()).abs() < 1e-12);
//! # Ok::<(), aoi_mech::Error>(())
//! ```

pub mod aoi_cost;
pub mod baselines;
pub mod cost_dist;
pub mod error;
pub mod eval;
pub mod mech_multi;
pub mod mech_quantized;
pub mod mech_single;
pub mod mechanism;
pub mod numeric;
pub mod sim;
pub mod verify;

pub use aoi_cost::AoiCostModel;
pub use baselines::{BaselineKind, BaselineOutcome, BenchmarkMechanism, CompleteInfoPricing};
pub use cost_dist::{CostDistribution, IronedVirtualCost};
pub use error::{Error, Result};
pub use eval::{
    closed_forms, expected_cost, paired_gap, run_sweep, ClosedForms, Estimator, EvaluationReport,
    Experiment, Forms, Setting, SweepConfig, SweepRow,
};
pub use mech_multi::{MultiAllocation, MultiSourceMechanism};
pub use mech_quantized::{
    build_quantized, loss_bound, quantize_report, QuantizedCell, QuantizedMechanism, Quantizer,
};
pub use mech_single::{NaiveMechanism, SingleSourceMechanism};
pub use mechanism::{Mechanism, PriceSchedule, Source, SourceProfile};
pub use sim::{simulate, SimOptions, SimTrace};
pub use verify::{verify, verify_ic, verify_ir, DeviationReport, VerifyOptions};
