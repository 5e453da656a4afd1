use std::path::{Path, PathBuf};

use aoi_mech::{
    AoiCostModel, Estimator, SimOptions, Source, SourceProfile, SweepConfig, VerifyOptions,
};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn default_aoi() -> AoiCostModel {
    AoiCostModel::Power { alpha: 1.0 }
}

/// Parsed run configuration.
///
/// Every section is optional; commands that need sources check for them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_aoi")]
    pub aoi: AoiCostModel,
    #[serde(default)]
    pub sources: Vec<Source>,
    /// Realized costs used by commands that take `--costs` when the flag is absent.
    #[serde(default)]
    pub costs: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_q: Option<f64>,
    /// Points of the single-source schedule table.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    /// Default output path when `--out` is not given.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub true_points: usize,
    pub report_points: usize,
    pub tolerance: f64,
    pub draws: usize,
    pub replicates: usize,
    pub sigmas: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        Self {
            true_points: d.true_points,
            report_points: d.report_points,
            tolerance: d.tolerance,
            draws: d.draws,
            replicates: d.replicates,
            sigmas: d.sigmas,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub qmc_points: usize,
    pub replicates: usize,
    pub max_relative_stderr: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            qmc_points: Estimator::DEFAULT_POINTS,
            replicates: 16,
            max_relative_stderr: 0.005,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub updates: usize,
    pub samples_per_update: usize,
    pub trajectory_updates: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimOptions::default();
        Self {
            updates: d.updates,
            samples_per_update: d.samples_per_update,
            trajectory_updates: d.trajectory_updates,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            aoi: default_aoi(),
            sources: Vec::new(),
            costs: None,
            delta_q: None,
            grid: None,
            seed: 0,
            verify: VerifySection::default(),
            evaluation: EvaluationSection::default(),
            simulation: SimulationSection::default(),
            out: None,
        }
    }
}

/// A configuration together with the SHA-256 of the bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let loaded = Self {
            config,
            sha256: sha256_hex(text.as_bytes()),
        };
        loaded.config.validate()?;
        Ok(loaded)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self {
                config: RunConfig::default(),
                sha256: sha256_hex(b""),
            }),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Validation(format!("cannot read {}: {e}", p.display()))
                })?;
                Self::parse(&text).map_err(|e| match e {
                    CliError::Validation(m) => {
                        CliError::Validation(format!("{}: {m}", p.display()))
                    }
                    other => other,
                })
            }
        }
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(d) = self.delta_q {
            positive("delta_q", d)?;
        }
        if let Some(g) = self.grid {
            if g < 2 {
                return Err(CliError::Validation(
                    "grid needs at least two points".into(),
                ));
            }
        }
        self.verify_options().validate()?;
        let e = &self.evaluation;
        if e.qmc_points == 0 || e.replicates < 2 || e.qmc_points < e.replicates {
            return Err(CliError::Validation(
                "evaluation needs at least two replicates and one point per replicate".into(),
            ));
        }
        positive("evaluation.max_relative_stderr", e.max_relative_stderr)?;
        if self.simulation.updates == 0 {
            return Err(CliError::Validation(
                "simulation.updates must be positive".into(),
            ));
        }
        if let Some(c) = &self.costs {
            if c.len() != self.sources.len() {
                return Err(CliError::Validation(format!(
                    "costs has {} entries for {} sources",
                    c.len(),
                    self.sources.len()
                )));
            }
        }
        if !self.sources.is_empty() {
            self.profile()?;
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<SourceProfile, CliError> {
        if self.sources.is_empty() {
            return Err(CliError::Validation(
                "the configuration lists no sources".into(),
            ));
        }
        Ok(SourceProfile::new(self.sources.clone())?)
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let v = &self.verify;
        VerifyOptions {
            true_points: v.true_points,
            report_points: v.report_points,
            tolerance: v.tolerance,
            draws: v.draws,
            replicates: v.replicates,
            seed: self.seed,
            sigmas: v.sigmas,
        }
    }

    pub fn sweep_config(&self, seed: u64) -> SweepConfig {
        SweepConfig {
            seed,
            qmc_points: self.evaluation.qmc_points,
            replicates: self.evaluation.replicates,
            max_relative_stderr: self.evaluation.max_relative_stderr,
        }
    }

    pub fn sim_options(&self, updates: Option<usize>, seed: u64) -> SimOptions {
        SimOptions {
            updates: updates.unwrap_or(self.simulation.updates),
            seed,
            samples_per_update: self.simulation.samples_per_update,
            trajectory_updates: self.simulation.trajectory_updates,
        }
    }

    /// Costs from the flag, else from the file, else each prior's median.
    pub fn realized_costs(
        &self,
        profile: &SourceProfile,
        flag: Option<&[f64]>,
    ) -> Result<Vec<f64>, CliError> {
        let costs = match (flag, &self.costs) {
            (Some(c), _) => c.to_vec(),
            (None, Some(c)) => c.clone(),
            (None, None) => (0..profile.len())
                .map(|i| profile.dist(i).quantile(0.5))
                .collect(),
        };
        if costs.len() != profile.len() {
            return Err(CliError::Validation(format!(
                "{} costs given for {} sources",
                costs.len(),
                profile.len()
            )));
        }
        profile.check_reports(&costs)?;
        Ok(costs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = LoadedConfig::parse(
            r#"{"aoi":{"kind":"power","alpha":2},
                "sources":[{"kind":"uniform","c_low":5,"c_high":30}]}"#,
        )
        .unwrap();
        assert_eq!(c.config.aoi.alpha(), Some(2.0));
        assert_eq!(c.config.sources[0].f_max, 1e9);
        assert_eq!(c.sha256.len(), 64);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = LoadedConfig::parse("{\n  \"seed\": ,\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            r#"{"delta_q": 0}"#,
            r#"{"verify": {"tolerance": -1}}"#,
            r#"{"sources": [{"kind":"uniform","c_low":5,"c_high":1}]}"#,
            r#"{"sources": [{"kind":"uniform","c_low":0,"c_high":1,"f_max":-1}]}"#,
            r#"{"colour": 1}"#,
        ] {
            assert!(LoadedConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn median_costs_by_default() {
        let c = LoadedConfig::parse(r#"{"sources":[{"kind":"uniform","c_low":0,"c_high":10}]}"#)
            .unwrap()
            .config;
        let p = c.profile().unwrap();
        assert_eq!(c.realized_costs(&p, None).unwrap(), vec![5.0]);
        assert!(c.realized_costs(&p, Some(&[11.0])).is_err());
    }
}
