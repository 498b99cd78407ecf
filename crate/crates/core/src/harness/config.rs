//! TOML experiment configuration.
//!
//! ```toml
//! [experiment]
//! terrain = "flat"            # flat | mattress | doormat
//! workspace = "5.0x2.0"       # width x height, meters
//! task_set = "two_task"       # two_task | four_task
//! scheduler = "center"        # center | round_robin | single_task
//! safety = "lagrangian"       # lagrangian | none | { fixed_weight = 1.0 }
//! seeds = [0, 1, 2, 3, 4]
//! steps_per_task = 60000
//!
//! [dynamics]
//! speed_tilt_gain = 1.5
//!
//! [sac]
//! hidden = [256, 256]
//! batch_size = 256
//! ```
//!
//! Every key is optional and unknown keys are rejected. Overrides given as
//! `section.key=value` are merged into the document before it is decoded.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::{Dynamics, TerrainKind, Workspace};
use crate::sac::SacConfig;
use crate::tasks::{
    SafetyMode, SchedulerMode, SessionConfig, TaskSetPreset, DEFAULT_HORIZON, DEFAULT_REWARD_SCALE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub terrain: TerrainKind,
    pub workspace: Workspace,
    pub task_set: TaskSetPreset,
    pub scheduler: SchedulerMode,
    pub safety: SafetyMode,
    pub seeds: Vec<u64>,
    pub steps_per_task: u64,
    pub horizon: usize,
    pub reward_scale: f64,
    pub boundary_termination: bool,
    /// Concurrent sessions; 0 uses every available core.
    pub workers: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            terrain: TerrainKind::Flat,
            workspace: Workspace::LARGE,
            task_set: TaskSetPreset::TwoTask,
            scheduler: SchedulerMode::Center,
            safety: SafetyMode::Lagrangian,
            seeds: (0..5).collect(),
            steps_per_task: 60_000,
            horizon: DEFAULT_HORIZON,
            reward_scale: DEFAULT_REWARD_SCALE,
            boundary_termination: true,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub dynamics: Dynamics,
    pub sac: SacConfig,
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string so that `terrain=mattress` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!(
            "override key {key:?} is malformed"
        )));
    }
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            HarnessError::Config(format!("override key {key:?}: {part} is not a section"))
        })?;
    }
    table.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Decodes a TOML document with `section.key=value` overrides applied on top.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.experiment.seeds.is_empty() {
            return Err(HarnessError::Config(
                "experiment.seeds must not be empty".into(),
            ));
        }
        for &seed in &self.experiment.seeds {
            self.session(seed)
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The single-seed session this config describes.
    pub fn session(&self, seed: u64) -> SessionConfig {
        let e = &self.experiment;
        SessionConfig {
            terrain: e.terrain,
            workspace: e.workspace,
            task_set: e.task_set,
            scheduler: e.scheduler,
            safety: e.safety,
            seed,
            steps_per_task: e.steps_per_task,
            horizon: e.horizon,
            reward_scale: e.reward_scale,
            boundary_termination: e.boundary_termination,
            dynamics: self.dynamics,
            sac: self.sac.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.experiment.seeds.len(), 5);
        assert_eq!(c.sac.hidden, vec![256, 256]);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.experiment.safety = SafetyMode::FixedWeight(1.0);
        c.experiment.workspace = Workspace::SMALL;
        c.sac.hidden = vec![32, 32];
        let back = ExperimentConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("[sac]\nlearnin_rate = 0.1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("learnin_rate"), "{err}");
        let err = ExperimentConfig::from_toml("", &["experiment.budget=3".into()]).unwrap_err();
        assert!(err.to_string().contains("budget"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let text = "[experiment]\nterrain = \"flat\"\n";
        let c = ExperimentConfig::from_toml(
            text,
            &[
                "experiment.terrain=mattress".into(),
                "experiment.seeds=[7]".into(),
                "experiment.safety={ fixed_weight = 100.0 }".into(),
                "sac.hidden=[16,16]".into(),
                "dynamics.noise=false".into(),
                "experiment.workspace=1.2x0.8".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.experiment.terrain, TerrainKind::Mattress);
        assert_eq!(c.experiment.seeds, vec![7]);
        assert_eq!(c.experiment.safety, SafetyMode::FixedWeight(100.0));
        assert_eq!(c.sac.hidden, vec![16, 16]);
        assert!(!c.dynamics.noise);
        assert_eq!(c.experiment.workspace, Workspace::SMALL);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[sac]\ngamma = 2.0\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nseeds = []\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nterrain = \"ice\"\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml("", &["nonsense".into()]).is_err());
    }
}
