use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::crop::{extract_crops, save_png, ImageLoader};
use super::manifest::{write_manifest, CropRecord, DatasetManifest};
use super::split::{stratified_split, Split, SplitRatios};
use super::crop_file_name;
use crate::annotations::AnnotatedImageRecord;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CROPS_DIR: &str = "crops";

/// Crops every annotation, splits per class and writes `crops/*.png` plus
/// `manifest.json` under `out_dir`. Nothing is written if cropping or
/// splitting fails.
pub fn build_dataset(
    records: &[AnnotatedImageRecord],
    loader: &dyn ImageLoader,
    out_dir: &Path,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(DatasetManifest, PathBuf)> {
    if records.iter().all(|r| r.annotations.is_empty()) {
        return Err(Error::Schema("annotation set contains no components".into()));
    }
    let crops = extract_crops(records, loader)?;
    let rows: Vec<CropRecord> = crops
        .iter()
        .map(|c| CropRecord {
            crop_id: c.crop_id.clone(),
            class: c.class_label,
            image_id: c.source.image_id.clone(),
            annotation_index: c.source.annotation_index,
            face: c.source.face,
            split: Split::Train,
            path: format!("{CROPS_DIR}/{}", crop_file_name(&c.crop_id)),
        })
        .collect();
    let manifest = stratified_split(&rows, ratios, seed)?;
    crops
        .par_iter()
        .zip(rows.par_iter())
        .try_for_each(|(c, r)| save_png(&c.pixels, &out_dir.join(&r.path)))?;
    let path = out_dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &path)?;
    Ok((manifest, path))
}
