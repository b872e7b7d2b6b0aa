//! Simulation settings from a JSON file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use deconfound_core::harness::{EstimatorOverrides, ExperimentPlan, Method, SignalKind};
use deconfound_core::{Basis, EvalGrid, ScenarioSpec, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioChoice {
    Linear,
    Quadratic,
    Both,
}

impl ScenarioChoice {
    pub fn shapes(self) -> Vec<Shape> {
        match self {
            ScenarioChoice::Linear => vec![Shape::Linear],
            ScenarioChoice::Quadratic => vec![Shape::Quadratic],
            ScenarioChoice::Both => Shape::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Single,
    Hierarchical,
    Both,
}

impl ModeChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            ModeChoice::Single => vec![Method::Rct1Only],
            ModeChoice::Hierarchical => vec![Method::Hierarchical],
            ModeChoice::Both => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignalChoice {
    /// Inverse-propensity transformed outcome.
    Transformed,
    /// Outcome minus the fitted opposite-arm mean.
    Arm,
}

impl From<SignalChoice> for SignalKind {
    fn from(s: SignalChoice) -> Self {
        match s {
            SignalChoice::Transformed => SignalKind::TransformedOutcome,
            SignalChoice::Arm => SignalKind::ArmImputation,
        }
    }
}

/// Every field is optional; unset fields fall back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Option<ScenarioChoice>,
    pub n1: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// `lo:hi:step`.
    pub grid: Option<String>,
    pub mode: Option<ModeChoice>,
    pub f_basis: Option<Basis>,
    pub g_basis: Option<Basis>,
    pub single_basis: Option<Basis>,
    pub omega_basis: Option<Basis>,
    pub signal: Option<SignalChoice>,
    pub obs_size: Option<usize>,
    pub rct2_size: Option<usize>,
    pub noise_sd: Option<f64>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl SimulateConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| LabError::parse(path, e.line() as u64, e.to_string()))
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: SimulateConfig) -> Self {
        overlay!(
            self, top, scenario, n1, reps, seed, workers, grid, mode, f_basis, g_basis, single_basis,
            omega_basis, signal, obs_size, rct2_size, noise_sd, out
        );
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("deconfound-out"))
    }

    pub fn to_plan(&self) -> Result<ExperimentPlan> {
        let defaults = ExperimentPlan::default();
        let shapes = self.scenario.unwrap_or(ScenarioChoice::Both).shapes();
        let mut scenarios = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let mut spec = ScenarioSpec::standard(shape);
            if let Some(n) = self.obs_size {
                spec.obs_size = n;
            }
            if let Some(n) = self.rct2_size {
                spec = spec.with_rct_size(2, n)?;
            }
            if let Some(sd) = self.noise_sd {
                spec = spec.with_noise_sd(sd);
            }
            scenarios.push(spec);
        }
        let grid = match &self.grid {
            Some(g) => g.parse::<EvalGrid>()?,
            None => defaults.grid,
        };
        let plan = ExperimentPlan {
            scenarios,
            n1_values: self.n1.clone().unwrap_or(defaults.n1_values),
            methods: self.mode.unwrap_or(ModeChoice::Both).methods(),
            replications: self.reps.unwrap_or(defaults.replications),
            grid,
            master_seed: self.seed.unwrap_or(defaults.master_seed),
            estimator: EstimatorOverrides {
                omega_basis: self.omega_basis.clone(),
                f: self.f_basis.clone(),
                g: self.g_basis.clone(),
                single_basis: self.single_basis.clone(),
                signal: self.signal.map(SignalKind::from).unwrap_or_default(),
            },
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: SimulateConfig = serde_json::from_str(r#"{"reps": 10, "seed": 3, "f_basis": [0, 1]}"#).unwrap();
        let flags = SimulateConfig {
            reps: Some(5),
            ..SimulateConfig::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.reps, Some(5));
        assert_eq!(merged.seed, Some(3));
        let plan = merged.to_plan().unwrap();
        assert_eq!(plan.replications, 5);
        assert_eq!(plan.estimator.f, Some(Basis::polynomial(1)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<SimulateConfig>(r#"{"replications": 3}"#).is_err());
    }

    #[test]
    fn defaults_mirror_the_study() {
        let plan = SimulateConfig::default().to_plan().unwrap();
        assert_eq!(plan, ExperimentPlan::default());
    }

    #[test]
    fn zero_reps_is_invalid() {
        let c = SimulateConfig {
            reps: Some(0),
            ..SimulateConfig::default()
        };
        assert_eq!(c.to_plan().unwrap_err().exit_code(), 2);
    }
}
