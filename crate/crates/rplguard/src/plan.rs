//! Batch execution: one base scenario, an optional swept field, a seed list.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rplguard_core::engine::{self, EngineError, RunOptions, RunTranscript};
use rplguard_core::metrics::{MetricsError, RunMetrics};
use rplguard_core::scenario::{ConfigError, ScenarioConfig};
use thiserror::Error;

use crate::output::RunRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    MaliciousFraction,
    AttackIntervalS,
    NodeCount,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::MaliciousFraction, Axis::AttackIntervalS, Axis::NodeCount];

    pub fn name(self) -> &'static str {
        match self {
            Axis::MaliciousFraction => "malicious_fraction",
            Axis::AttackIntervalS => "attack_interval_s",
            Axis::NodeCount => "node_count",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<(), ConfigError> {
        match self {
            Axis::MaliciousFraction => cfg.malicious_fraction = value,
            Axis::AttackIntervalS => cfg.attack_interval_s = value,
            Axis::NodeCount => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ConfigError::new("node_count", "sweep values must be whole numbers"));
                }
                cfg.node_count = value as usize;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!("unknown axis `{s}`; expected malicious_fraction, attack_interval_s or node_count")
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Detection {
    /// Whatever the base scenario says.
    #[default]
    AsConfigured,
    On,
    Off,
    /// Every cell twice, detection on first.
    Both,
}

impl Detection {
    fn settings(self, base: bool) -> Vec<bool> {
        match self {
            Detection::AsConfigured => vec![base],
            Detection::On => vec![true],
            Detection::Off => vec![false],
            Detection::Both => vec![true, false],
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("a plan needs at least one seed")]
    NoSeeds,
    #[error("sweep over `{0}` has no values")]
    NoValues(Axis),
    #[error("{axis} = {value}: {source}")]
    BadCell {
        axis: Axis,
        value: f64,
        source: ConfigError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {scenario} seed {seed}: {source}")]
    Engine {
        scenario: String,
        seed: u64,
        source: EngineError,
    },
    #[error("run {scenario} seed {seed}: {source}")]
    Metrics {
        scenario: String,
        seed: u64,
        source: MetricsError,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug)]
pub struct RunPlan {
    pub base: ScenarioConfig,
    pub sweep: Option<(Axis, Vec<f64>)>,
    pub seeds: Vec<u64>,
    pub detection: Detection,
}

impl RunPlan {
    pub fn single(base: ScenarioConfig) -> Self {
        let seed = base.seed;
        RunPlan {
            base,
            sweep: None,
            seeds: vec![seed],
            detection: Detection::AsConfigured,
        }
    }

    /// Every run configuration, validated, in output order: sweep value,
    /// then detection setting, then seed.
    pub fn cells(&self) -> Result<Vec<ScenarioConfig>, PlanError> {
        if self.seeds.is_empty() {
            return Err(PlanError::NoSeeds);
        }
        let mut bases = Vec::new();
        match &self.sweep {
            None => bases.push(self.base.clone()),
            Some((axis, values)) => {
                if values.is_empty() {
                    return Err(PlanError::NoValues(*axis));
                }
                for &value in values {
                    let mut cfg = self.base.clone();
                    axis.apply(&mut cfg, value)
                        .and_then(|()| cfg.validate())
                        .map_err(|source| PlanError::BadCell {
                            axis: *axis,
                            value,
                            source,
                        })?;
                    bases.push(cfg);
                }
            }
        }
        let mut cells = Vec::new();
        for b in bases {
            for detection in self.detection.settings(b.detection_enabled) {
                for &seed in &self.seeds {
                    let cfg = ScenarioConfig {
                        seed,
                        detection_enabled: detection,
                        ..b.clone()
                    };
                    cfg.validate()?;
                    cells.push(cfg);
                }
            }
        }
        Ok(cells)
    }

    /// Runs every cell on up to `jobs` threads (0 = all cores). Output order
    /// does not depend on `jobs`.
    pub fn execute(&self, jobs: usize) -> Result<Vec<RunRow>, PlanError> {
        let cells = self.cells()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|cfg| {
                    let t = run_one(cfg, RunOptions::default())?;
                    row_for(cfg, &t)
                })
                .collect()
        })
    }
}

pub fn run_one(cfg: &ScenarioConfig, options: RunOptions) -> Result<RunTranscript, PlanError> {
    engine::run_with(cfg, options).map_err(|source| PlanError::Engine {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        source,
    })
}

pub fn row_for(cfg: &ScenarioConfig, t: &RunTranscript) -> Result<RunRow, PlanError> {
    let m = RunMetrics::from_transcript(t).map_err(|source| PlanError::Metrics {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        source,
    })?;
    Ok(RunRow::new(cfg, &m))
}
