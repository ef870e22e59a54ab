use std::fs;
use std::path::{Path, PathBuf};

use andt::model::ModelConfig;
use andt::training::{config_fingerprint, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const DEFAULT_SCENE: &str = "moving_dot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Dataset root; `--data` overrides.
    pub root: Option<PathBuf>,
    /// Scene directory under the root.
    pub scene: String,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            root: None,
            scene: DEFAULT_SCENE.into(),
        }
    }
}

/// Everything a training run depends on. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataSettings,
    /// Output directory; `--out` overrides.
    pub out: Option<PathBuf>,
}

/// The settings that determine results, without machine-specific paths.
#[derive(Serialize)]
struct Portable<'a> {
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    scene: &'a str,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    /// Applies derived settings: the decoder emits as many frames as the mode needs.
    pub fn resolve(mut self) -> Result<Self, Failure> {
        self.model.output_frames = self.train.mode.output_frames(self.model.frames);
        self.model.validate()?;
        self.train.validate()?;
        Ok(self)
    }

    pub fn fingerprint(&self) -> Result<String, Failure> {
        Ok(config_fingerprint(&Portable {
            model: &self.model,
            train: &self.train,
            scene: &self.data.scene,
        })?)
    }
}
