use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationPolicy;
use crate::dataset::{SplitRatios, SyntheticSpec};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::model::{ModelConfig, TrainingConfig};

/// Named overlays used by the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Pretrained backbone, four classes.
    FourClass,
    /// `four_class` with battery-vs-other labels.
    Binary,
    /// `four_class` with randomly initialised weights.
    Scratch,
    #[default]
    None,
}

impl Preset {
    /// Runs of an ablation, in order.
    pub const ABLATION: [Preset; 3] = [Preset::FourClass, Preset::Scratch, Preset::Binary];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::FourClass => "four_class",
            Preset::Binary => "binary",
            Preset::Scratch => "scratch",
            Preset::None => "none",
        }
    }
}

/// Exactly one field must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub split_ratios: SplitRatios,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub augmentation: AugmentationPolicy,
    #[serde(default)]
    pub preset: Preset,
    #[serde(default)]
    pub label_scheme: LabelScheme,
}

impl ExperimentConfig {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Parses a config file and returns it with its raw bytes. Relative
    /// dataset paths are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset.annotation_file, &mut cfg.dataset.manifest_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(w) = cfg.model.weights_path.as_mut().filter(|w| w.is_relative()) {
            *w = base.join(&*w);
        }
        Ok((cfg, bytes))
    }

    /// This config with `preset` applied on top.
    pub fn with_preset(&self, preset: Preset) -> Self {
        let mut c = self.clone();
        c.preset = preset;
        if preset != Preset::None {
            c.model.pretrained = true;
            c.model.num_classes = 4;
            c.label_scheme = LabelScheme::FourClass;
        }
        match preset {
            Preset::Binary => {
                c.model.num_classes = 2;
                c.label_scheme = LabelScheme::BatteryVsOther;
            }
            Preset::Scratch => c.model.pretrained = false,
            Preset::FourClass | Preset::None => {}
        }
        c
    }

    /// This config with its own preset applied.
    pub fn resolved(&self) -> Self {
        self.with_preset(self.preset)
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}", self.name, self.preset.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let safe = |c: char| c.is_ascii_alphanumeric() || "-_.".contains(c);
        if self.name.is_empty() || !self.name.chars().all(safe) {
            return Err(Error::Config(format!(
                "name `{}` must be non-empty and use only letters, digits, `-`, `_` or `.`",
                self.name
            )));
        }
        let d = &self.dataset;
        let set = [d.annotation_file.is_some(), d.manifest_path.is_some(), d.synthetic.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::Config(
                "dataset needs exactly one of annotation_file, manifest_path or synthetic".into(),
            ));
        }
        if let Some(s) = &d.synthetic {
            s.validate()?;
        }
        self.model.validate()?;
        self.training.validate()?;
        self.augmentation.validate()?;
        if self.model.num_classes != self.label_scheme.num_classes() {
            return Err(Error::Config(format!(
                "model.num_classes is {} but label_scheme {:?} has {} classes",
                self.model.num_classes,
                self.label_scheme,
                self.label_scheme.num_classes()
            )));
        }
        Ok(())
    }
}
