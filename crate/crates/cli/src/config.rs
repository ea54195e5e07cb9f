use std::path::{Path, PathBuf};

use icworld::metrics::EvalConfig;
use icworld::policy::PolicyDims;
use icworld::trainer::TrainerConfig;
use icworld::world::WorldConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every seed a run uses. There are no defaults: a config must name them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub world: u64,
    pub init: u64,
    pub train: u64,
    pub eval: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self {
            world: seed,
            init: seed,
            train: seed,
            eval: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Seeds,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub policy: PolicyDims,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_train_worlds")]
    pub train_worlds: usize,
    #[serde(default = "default_eval_worlds")]
    pub eval_worlds: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_train_worlds() -> usize {
    8
}

fn default_eval_worlds() -> usize {
    20
}

impl RunConfig {
    pub fn with_seeds(seeds: Seeds) -> Self {
        Self {
            seeds,
            world: WorldConfig::default(),
            policy: PolicyDims::default(),
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
            train_worlds: default_train_worlds(),
            eval_worlds: default_eval_worlds(),
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every nested config before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        fn ctx(what: &'static str) -> impl Fn(icworld::Error) -> CliError {
            move |e| CliError::Config(format!("{what}: {e}"))
        }
        self.world.validate().map_err(ctx("world"))?;
        self.policy.validate().map_err(ctx("policy"))?;
        self.trainer.validate().map_err(ctx("trainer"))?;
        self.eval.validate().map_err(ctx("eval"))?;
        if self.policy.views != self.world.views {
            return Err(CliError::Config(format!(
                "policy.views ({}) must equal world.views ({})",
                self.policy.views, self.world.views
            )));
        }
        if self.train_worlds == 0 || self.eval_worlds == 0 {
            return Err(CliError::Config("train_worlds and eval_worlds must be >= 1".into()));
        }
        let tracks = self.world.object_count * self.world.points_per_object;
        if let Some(&d) = self.eval.densities.iter().max() {
            if tracks > 0 && d > tracks {
                return Err(CliError::Config(format!(
                    "eval density {d} exceeds the {tracks} tracks each world provides"
                )));
            }
        }
        if let Some(dir) = &self.output_dir {
            if dir.exists() && !dir.is_dir() {
                return Err(CliError::Config(format!("output_dir {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring where the output goes.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
