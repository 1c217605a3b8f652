use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{CropRecord, DatasetManifest, SplitCounts, MANIFEST_VERSION};
use super::derive_seed;
use crate::annotations::ComponentClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown split `{s}` (expected train, val or test)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 70.0,
            val: 20.0,
            test: 10.0,
        }
    }
}

/// `(train, val, test)` sizes for a class of `n` items.
///
/// The test share is floored and the validation share is derived from it,
/// so 70:20:10 gives `test = n / 10`, `val = 2 * test`.
pub fn split_sizes(n: usize, ratios: SplitRatios) -> Result<(usize, usize, usize)> {
    let SplitRatios { train, val, test } = ratios;
    if !(train > 0.0 && val > 0.0 && test > 0.0) || !(train + val + test).is_finite() {
        return Err(Error::Argument(format!("split ratios must be positive, got {train}:{val}:{test}")));
    }
    let total = train + val + test;
    let n_test = (n as f64 * test / total + 1e-9).floor() as usize;
    let n_val = ((n_test as f64 * val / test).round() as usize).min(n - n_test);
    Ok((n - n_test - n_val, n_val, n_test))
}

/// Per-class seeded assignment of crops to train/val/test.
pub fn stratified_split(crops: &[CropRecord], ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    if crops.is_empty() {
        return Err(Error::Argument("cannot split an empty crop list".into()));
    }
    let mut assigned: Vec<CropRecord> = crops.to_vec();
    let mut counts = BTreeMap::new();
    for (class_idx, class) in ComponentClass::ALL.into_iter().enumerate() {
        let mut members: Vec<usize> = (0..assigned.len()).filter(|&i| assigned[i].class == class).collect();
        let n = members.len();
        if n == 0 {
            counts.insert(class, SplitCounts::default());
            continue;
        }
        if n < 10 {
            log::warn!("class {class} has only {n} crops; validation/test splits may be empty");
        }
        let (n_train, n_val, n_test) = split_sizes(n, ratios)?;
        members.sort_by(|&a, &b| assigned[a].crop_id.cmp(&assigned[b].crop_id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[class_idx as u64]));
        members.shuffle(&mut rng);
        for (rank, &i) in members.iter().enumerate() {
            assigned[i].split = if rank < n_test {
                Split::Test
            } else if rank < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
        }
        counts.insert(
            class,
            SplitCounts {
                train: n_train,
                val: n_val,
                test: n_test,
            },
        );
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        classes: ComponentClass::ALL.to_vec(),
        split_seed: seed,
        crops: assigned,
        counts,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Fraction of crops per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub fractions: BTreeMap<ComponentClass, f64>,
}

pub fn class_distribution(manifest: &DatasetManifest) -> Result<ClassDistribution> {
    let total = manifest.crops.len();
    if total == 0 {
        return Err(Error::Argument("class distribution of an empty manifest".into()));
    }
    let mut fractions = BTreeMap::new();
    for crop in &manifest.crops {
        *fractions.entry(crop.class).or_insert(0.0) += 1.0;
    }
    for v in fractions.values_mut() {
        *v /= total as f64;
    }
    Ok(ClassDistribution { fractions })
}
