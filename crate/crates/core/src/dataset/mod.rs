//! From annotated photographs to a split, on-disk classification dataset.

mod build;
mod crop;
mod manifest;
mod split;
pub mod synthetic;

pub use build::{build_dataset, CROPS_DIR, MANIFEST_FILE};
pub use crop::{crop_component, crop_window, extract_crops, ComponentCrop, CropSource, FsImageLoader, ImageLoader};
pub use manifest::{read_manifest, write_manifest, CropRecord, DatasetManifest, SplitCounts, MANIFEST_VERSION};
pub use split::{class_distribution, split_sizes, stratified_split, ClassDistribution, Split, SplitRatios};
pub use synthetic::{generate_synthetic_dataset, SyntheticOutput, SyntheticSpec};

/// Side length of every component crop, in pixels.
pub const CROP_SIZE: u32 = 500;

/// File name used for a crop on disk (`:` is not portable in file names).
pub fn crop_file_name(crop_id: &str) -> String {
    format!("{}.png", crop_id.replace(':', "_"))
}

/// Mixes a base seed with stream coordinates (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
