//! The run configuration shared by every command.
//!
//! A config file is TOML. Missing keys take their defaults, unknown keys are
//! rejected, and the fully resolved config can be written back out and read
//! again without change.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::SceneSpec;
use crate::model::MaskNetConfig;
use crate::spatial::DepanOptions;
use crate::training::{TrainConfig, TrainMode};
use crate::{Error, Result};

/// Name of the resolved-config echo written next to command outputs.
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// Input and output locations. Command-line arguments take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; copied into every nested seed on [`resolve`](Self::resolve).
    pub seed: u64,
    /// Worker threads for per-excerpt work.
    pub jobs: usize,
    /// Excerpts per synthesized dataset.
    pub count: usize,
    pub paths: PathsConfig,
    pub net: MaskNetConfig,
    pub scene: SceneSpec,
    /// Supervised training.
    pub train: TrainConfig,
    /// Unsupervised fit of one excerpt.
    pub fit: TrainConfig,
    /// Fine-tuning of a supervised checkpoint on one excerpt.
    pub finetune: TrainConfig,
    /// De-panning used at inference and by the mask oracles.
    pub depan: DepanOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            count: 50,
            paths: PathsConfig::default(),
            net: MaskNetConfig::default(),
            scene: SceneSpec::default(),
            train: TrainConfig::supervised(),
            fit: TrainConfig::unsupervised_fit(),
            finetune: TrainConfig::finetune(),
            depan: DepanOptions::default(),
        }
    }
}

/// Recursively overlay `over` onto `base`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parse TOML text. Keys absent from a section take that section's own
    /// defaults, so a partial `[fit]` table keeps the fit step count and
    /// batch size.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let over: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut base = toml::Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, over);
        let cfg: RunConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// Copy the master seed into the nested sections.
    pub fn resolve(mut self) -> Self {
        self.net.seed = self.seed;
        self.scene.seed = self.seed;
        self.train.seed = self.seed;
        self.fit.seed = self.seed;
        self.finetune.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.scene.validate()?;
        if self.net.n_objects != self.scene.n_objects {
            return Err(Error::Config(format!(
                "net.n_objects {} differs from scene.n_objects {}",
                self.net.n_objects, self.scene.n_objects
            )));
        }
        for (cfg, mode) in [
            (&self.train, TrainMode::Supervised),
            (&self.fit, TrainMode::UnsupervisedFit),
            (&self.finetune, TrainMode::Finetune),
        ] {
            cfg.expect_mode(mode)?;
            cfg.validate()?;
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{BedKind, SourceKind};

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_sections_keep_their_own_defaults() {
        let c = RunConfig::from_toml_str("[fit]\nlr = 0.001\n[train]\nsteps = 3\n").unwrap();
        assert_eq!(c.fit.lr, 0.001);
        assert_eq!(c.fit.batch, 1);
        assert_eq!(c.fit.steps, 500);
        assert_eq!(c.fit.mode, TrainMode::UnsupervisedFit);
        assert_eq!(c.train.steps, 3);
        assert_eq!(c.train.batch, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[net]\nwidth = 3\n").is_err());
        assert!(RunConfig::from_toml_str("[train.loss.reg]\nnope = 1.0\n").is_err());
        assert!(RunConfig::from_toml_str("seed = \"x\"\n").is_err());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.seed = 99;
        c.count = 3;
        c.paths.dataset = Some("data/set".into());
        c.scene.sources = vec![SourceKind::Tone, SourceKind::Corpus { path: "a.wav".into() }];
        c.scene.bed = BedKind::Silent;
        c.scene.bed_gain_db = -20.0;
        c.fit.lr = 1e-3;
        c.train.loss.layouts.surround91 = 0.25;
        c.depan.smooth = false;
        let c = c.resolve();
        let text = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn resolve_propagates_the_seed() {
        let c = RunConfig {
            seed: 5,
            ..RunConfig::default()
        }
        .resolve();
        assert_eq!((c.net.seed, c.scene.seed, c.train.seed, c.fit.seed), (5, 5, 5, 5));
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let mut c = RunConfig::default();
        c.net.n_objects = 3;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.fit.mode = TrainMode::Supervised;
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("[fit]\nbatch = 4\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(RESOLVED_CONFIG);
        let c = RunConfig::default().resolve();
        c.save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), c);
        assert!(RunConfig::load(&dir.path().join("missing.toml")).is_err());
    }
}
