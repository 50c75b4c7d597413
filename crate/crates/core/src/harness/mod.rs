//! Experiment configuration, fixtures, the disperser experiment and the
//! bipartite-graph harness.

pub mod disperser;
pub mod fixtures;
pub mod ramsey;

use std::path::PathBuf;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::PipelineDescriptor;
use crate::rng;
use crate::source::ExplicitSource;
use crate::tree::EntropyTree;

pub use disperser::{disperser_experiment, run_disperser_experiment, DisperserReport};
pub use fixtures::{build_setup, Fixture, FixtureName, Setup};
pub use ramsey::{ramsey_edge, rectangle_search, BipartiteGraph, RectangleOutcome, SearchMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Where an experiment's source comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "from")]
pub enum FixtureChoice {
    /// One of the shipped fixtures.
    Named { name: FixtureName },
    /// A source file and a tree file carried at entropy `k`.
    Files { source: PathBuf, tree: PathBuf, k: f64 },
    /// The fixed-left shape with a seeded constant block.
    Generated { seed: u64 },
}

impl FixtureChoice {
    pub fn load(&self) -> Result<Fixture> {
        match self {
            FixtureChoice::Named { name } => Ok(name.build()),
            FixtureChoice::Files { source, tree, k } => {
                let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())));
                Ok(Fixture {
                    name: source.display().to_string(),
                    source: ExplicitSource::from_json(&read(source)?)?,
                    tree: EntropyTree::from_json(&read(tree)?)?,
                    k: *k,
                })
            }
            FixtureChoice::Generated { seed } => {
                let constant = rng::seeded(*seed).gen::<u8>();
                Ok(fixtures::fixed_left_with(u64::from(constant)))
            }
        }
    }

    fn check(&self) -> Result<()> {
        if let FixtureChoice::Files { source, tree, .. } = self {
            for p in [source, tree] {
                if !p.exists() {
                    return Err(Error::Config(format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFrom {
    /// Pairs drawn from the fixtures themselves.
    #[default]
    Full,
    /// Pairs drawn from the conditioned subsources of the setup.
    Conditioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pipeline: PipelineDescriptor,
    pub x: FixtureChoice,
    pub y: FixtureChoice,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub sample_from: SampleFrom,
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.x.check()?;
        self.y.check()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }
}
