//! Experiment configuration documents and the built-in profiles.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use bounce_core::eval::EvalOptions;
use bounce_core::models::{Architecture, ModelSpec};
use bounce_core::raster::GeneratorConfig;
use bounce_core::training::TrainConfig;
use bounce_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Everything needed to reproduce a run, embedded in every artifact it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Frame geometry and physics; `n_sequences` is superseded by `splits`.
    pub generator: GeneratorConfig,
    pub splits: SplitSizes,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Full-size defaults: 60x60 frames, 6000/1200/1200 sequences, best configurations.
    Full,
    /// Desk-scale: 30x30 frames, 200/40/40 sequences, 2-layer models, 10 epochs.
    Smoke,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "default" => Ok(Profile::Full),
            "smoke" => Ok(Profile::Smoke),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

/// Model spec of `arch` under `profile`.
pub fn profile_model(profile: Profile, arch: Architecture) -> ModelSpec {
    match profile {
        Profile::Full => ModelSpec::best(arch),
        Profile::Smoke => match arch {
            Architecture::Lstm => ModelSpec::lstm(&[256, 900], 30),
            _ => ModelSpec::conv(arch, &[5, 3], &[10, 1], 30),
        },
    }
}

impl ExperimentConfig {
    pub fn profile(profile: Profile, arch: Architecture, seed: u64) -> Self {
        let model = profile_model(profile, arch);
        let mut generator = GeneratorConfig {
            resolution: model.height,
            ..Default::default()
        };
        generator.world.seed = seed;
        let (splits, train) = match profile {
            Profile::Full => (
                SplitSizes {
                    train: 6000,
                    valid: 1200,
                    test: 1200,
                },
                TrainConfig {
                    seed,
                    ..Default::default()
                },
            ),
            Profile::Smoke => (
                SplitSizes {
                    train: 200,
                    valid: 40,
                    test: 40,
                },
                TrainConfig {
                    lr: 0.01,
                    epochs: 10,
                    seed,
                    ..Default::default()
                },
            ),
        };
        generator.n_sequences = splits.train;
        Self {
            generator,
            splits,
            model,
            train,
            eval: EvalOptions::default(),
            out_dir: PathBuf::from("runs"),
            seed,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Sets the master seed everywhere it is consumed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.generator.world.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.world.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.detection.validate()?;
        if self.generator.resolution != self.model.height || self.generator.resolution != self.model.width {
            return Err(Error::Config(format!(
                "frames are {0}x{0} but the model expects {1}x{2}",
                self.generator.resolution, self.model.height, self.model.width
            )));
        }
        let needed = self.train.context + self.train.horizon;
        if self.generator.n_frames < needed.max(self.eval.context + self.eval.horizon) {
            return Err(Error::Config(format!(
                "sequences of {} frames are shorter than context + horizon",
                self.generator.n_frames
            )));
        }
        Ok(())
    }
}
