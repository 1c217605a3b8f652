use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::Split;
use crate::annotations::{ComponentClass, Face};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MANIFEST_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRecord {
    pub crop_id: String,
    pub class: ComponentClass,
    pub image_id: String,
    pub annotation_index: usize,
    pub face: Face,
    pub split: Split,
    /// Crop PNG, relative to the manifest's directory.
    pub path: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u64,
    pub classes: Vec<ComponentClass>,
    pub split_seed: u64,
    pub crops: Vec<CropRecord>,
    pub counts: BTreeMap<ComponentClass, SplitCounts>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut tally: BTreeMap<ComponentClass, SplitCounts> = BTreeMap::new();
        let mut paths = HashSet::new();
        for crop in &self.crops {
            if !self.classes.contains(&crop.class) {
                return Err(Error::Schema(format!("crop `{}` has class {} outside the manifest classes", crop.crop_id, crop.class)));
            }
            if !paths.insert(crop.path.as_str()) {
                return Err(Error::Schema(format!("duplicate crop path `{}`", crop.path)));
            }
            let c = tally.entry(crop.class).or_default();
            match crop.split {
                Split::Train => c.train += 1,
                Split::Val => c.val += 1,
                Split::Test => c.test += 1,
            }
        }
        for class in &self.classes {
            let declared = self.counts.get(class).copied().unwrap_or_default();
            let actual = tally.get(class).copied().unwrap_or_default();
            if declared != actual {
                return Err(Error::Schema(format!(
                    "counts for {class} ({declared:?}) disagree with the crop list ({actual:?})"
                )));
            }
        }
        Ok(())
    }

    pub fn crops_in(&self, split: Split) -> impl Iterator<Item = &CropRecord> {
        self.crops.iter().filter(move |c| c.split == split)
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.counts.values().map(|c| c.get(split)).sum()
    }

    /// Class-by-split table: one row per split plus a total row.
    pub fn split_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<12}", "Set");
        for class in &self.classes {
            let _ = write!(out, "{:>13}", class.display_name());
        }
        let _ = writeln!(out, "{:>8}", "Total");
        let labels = [(Split::Train, "Training"), (Split::Val, "Validation"), (Split::Test, "Test")];
        for (split, label) in labels {
            let _ = write!(out, "{label:<12}");
            for class in &self.classes {
                let n = self.counts.get(class).map(|c| c.get(split)).unwrap_or(0);
                let _ = write!(out, "{n:>13}");
            }
            let _ = writeln!(out, "{:>8}", self.split_total(split));
        }
        let _ = write!(out, "{:<12}", "Total");
        for class in &self.classes {
            let n = self.counts.get(class).map(|c| c.total()).unwrap_or(0);
            let _ = write!(out, "{n:>13}");
        }
        let _ = writeln!(out, "{:>8}", self.crops.len());
        out
    }
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let text = serde_json::to_string_pretty(manifest)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let found = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Schema(format!("{}: manifest has no numeric `version`", path.display())))?;
    if found != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: MANIFEST_VERSION,
        });
    }
    let manifest: DatasetManifest =
        serde_json::from_value(value).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    manifest.validate()?;
    Ok(manifest)
}
