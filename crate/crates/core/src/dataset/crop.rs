use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::RgbImage;
use rayon::prelude::*;

use super::split::Split;
use super::CROP_SIZE;
use crate::annotations::{AnnotatedImageRecord, ComponentClass, Face};
use crate::error::{Error, Result};
use crate::geometry::{circumscribe_square, fit_square_to_image, min_area_obb, Polygon};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CropSource {
    pub image_id: String,
    pub annotation_index: usize,
    pub face: Face,
}

/// One 500x500 RGB component image.
#[derive(Debug, Clone)]
pub struct ComponentCrop {
    pub crop_id: String,
    pub pixels: RgbImage,
    pub class_label: ComponentClass,
    pub source: CropSource,
    pub split: Option<Split>,
}

pub trait ImageLoader: Sync {
    fn load(&self, image_path: &str) -> Result<RgbImage>;
}

/// Loads images relative to a base directory (usually the annotation file's).
#[derive(Debug, Clone)]
pub struct FsImageLoader {
    base_dir: PathBuf,
}

impl FsImageLoader {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        FsImageLoader {
            base_dir: base_dir.into(),
        }
    }
}

impl ImageLoader for FsImageLoader {
    fn load(&self, image_path: &str) -> Result<RgbImage> {
        let path = self.base_dir.join(image_path);
        let img = image::open(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        Ok(img.to_rgb8())
    }
}

/// The square window around a component, cut from the source image with
/// edge replication wherever it overhangs the image. Not yet resized.
pub fn crop_window(image: &RgbImage, polygon: &Polygon) -> Result<RgbImage> {
    let (w, h) = image.dimensions();
    let square = circumscribe_square(&min_area_obb(polygon)?);
    let fitted = fit_square_to_image(&square, w as f64, h as f64)?;

    // Snap to the pixel grid, then re-apply the same per-axis fitting rule.
    let side = (fitted.square.side.round() as i64).max(1);
    let snap = |min: f64, dim: u32| {
        let slack = dim as i64 - side;
        (min.round() as i64).clamp(slack.min(0), slack.max(0))
    };
    let x0 = snap(fitted.square.min_x, w);
    let y0 = snap(fitted.square.min_y, h);
    let (max_x, max_y) = (w as i64 - 1, h as i64 - 1);

    let side = side as u32;
    Ok(RgbImage::from_fn(side, side, |i, j| {
        let sx = (x0 + i as i64).clamp(0, max_x) as u32;
        let sy = (y0 + j as i64).clamp(0, max_y) as u32;
        *image.get_pixel(sx, sy)
    }))
}

/// Crop window resized (bilinear) to `CROP_SIZE`.
pub fn crop_component(image: &RgbImage, polygon: &Polygon) -> Result<RgbImage> {
    let window = crop_window(image, polygon)?;
    Ok(imageops::resize(&window, CROP_SIZE, CROP_SIZE, FilterType::Triangle))
}

/// One crop per annotation, ordered by `(image_id, annotation_index)`.
pub fn extract_crops(records: &[AnnotatedImageRecord], loader: &dyn ImageLoader) -> Result<Vec<ComponentCrop>> {
    let mut ordered: Vec<&AnnotatedImageRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let per_image: Vec<Result<Vec<ComponentCrop>>> = ordered
        .par_iter()
        .map(|record| {
            let image = loader.load(&record.image_path)?;
            if image.dimensions() != (record.width, record.height) {
                return Err(Error::Consistency(format!(
                    "image `{}` ({}) is {}x{}, record declares {}x{}",
                    record.image_id,
                    record.image_path,
                    image.width(),
                    image.height(),
                    record.width,
                    record.height
                )));
            }
            let mut annotations: Vec<_> = record.annotations.iter().collect();
            annotations.sort_by_key(|a| a.annotation_index);
            annotations
                .par_iter()
                .map(|ann| {
                    let pixels = crop_component(&image, &ann.polygon).map_err(|e| {
                        Error::Geometry(format!("image `{}` annotation {}: {e}", record.image_id, ann.annotation_index))
                    })?;
                    Ok(ComponentCrop {
                        crop_id: format!("{}:{}", record.image_id, ann.annotation_index),
                        pixels,
                        class_label: ann.class_label,
                        source: CropSource {
                            image_id: record.image_id.clone(),
                            annotation_index: ann.annotation_index,
                            face: record.face,
                        },
                        split: None,
                    })
                })
                .collect()
        })
        .collect();

    let mut crops = Vec::new();
    for batch in per_image {
        crops.extend(batch?);
    }
    Ok(crops)
}

pub(crate) fn save_png(image: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
