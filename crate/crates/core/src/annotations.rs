//! Annotation file model: source photographs with polygon-outlined components.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentClass {
    MetalPiece,
    Battery,
    Pcb,
    Glass,
}

impl ComponentClass {
    /// Canonical column order used by every table and matrix.
    pub const ALL: [ComponentClass; 4] = [
        ComponentClass::MetalPiece,
        ComponentClass::Battery,
        ComponentClass::Pcb,
        ComponentClass::Glass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentClass::MetalPiece => "metal_piece",
            ComponentClass::Battery => "battery",
            ComponentClass::Pcb => "pcb",
            ComponentClass::Glass => "glass",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ComponentClass::MetalPiece => "Metal Piece",
            ComponentClass::Battery => "Battery",
            ComponentClass::Pcb => "PCB",
            ComponentClass::Glass => "Glass",
        }
    }
}

impl fmt::Display for ComponentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ComponentClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown class label `{s}`")))
    }
}

/// Which side of the component faces the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Gray,
    Black,
    White,
}

impl Background {
    pub const ALL: [Background; 3] = [Background::Gray, Background::Black, Background::White];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub polygon: Polygon,
    pub class_label: ComponentClass,
    pub annotation_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImageRecord {
    pub image_id: String,
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub face: Face,
    pub background: Background,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone)]
pub struct ParsedAnnotations {
    pub records: Vec<AnnotatedImageRecord>,
    /// Number of vertices that were moved into the image bounds.
    pub clamped_vertices: usize,
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    images: Vec<RawImage>,
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    image_id: String,
    image_path: String,
    width: u32,
    height: u32,
    face: Face,
    background: Background,
    annotations: Vec<RawAnnotation>,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    class: String,
    polygon: Vec<[f64; 2]>,
}

pub fn parse_annotation_file(path: impl AsRef<Path>) -> Result<ParsedAnnotations> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_str(&text).map_err(|e| match e {
        Error::Parse { line, column, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        },
        other => other,
    })
}

pub fn parse_annotations_str(text: &str) -> Result<ParsedAnnotations> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<annotations>".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut seen = HashSet::new();
    let mut clamped_vertices = 0;
    let mut records = Vec::with_capacity(raw.images.len());
    for img in raw.images {
        if !seen.insert(img.image_id.clone()) {
            return Err(Error::Schema(format!("duplicate image_id `{}`", img.image_id)));
        }
        if img.width == 0 || img.height == 0 {
            return Err(Error::Schema(format!("image `{}` has zero dimensions", img.image_id)));
        }
        let (w, h) = (img.width as f64, img.height as f64);
        let mut annotations = Vec::with_capacity(img.annotations.len());
        for (annotation_index, ann) in img.annotations.into_iter().enumerate() {
            let ctx = |e: Error| Error::Schema(format!("image `{}` annotation {annotation_index}: {e}", img.image_id));
            let class_label: ComponentClass = ann.class.parse().map_err(ctx)?;
            if ann.polygon.len() < 3 {
                return Err(ctx(Error::Schema(format!(
                    "polygon needs at least 3 vertices, got {}",
                    ann.polygon.len()
                ))));
            }
            let vertices = ann
                .polygon
                .iter()
                .map(|&[x, y]| {
                    let p = Point::new(x.clamp(0.0, w), y.clamp(0.0, h));
                    if p.x != x || p.y != y {
                        clamped_vertices += 1;
                    }
                    p
                })
                .collect();
            let polygon = Polygon::new(vertices).map_err(ctx)?;
            annotations.push(Annotation {
                polygon,
                class_label,
                annotation_index,
            });
        }
        records.push(AnnotatedImageRecord {
            image_id: img.image_id,
            image_path: img.image_path,
            width: img.width,
            height: img.height,
            face: img.face,
            background: img.background,
            annotations,
        });
    }
    if clamped_vertices > 0 {
        log::warn!("clamped {clamped_vertices} annotation vertices into image bounds");
    }
    Ok(ParsedAnnotations {
        records,
        clamped_vertices,
    })
}

pub fn annotations_to_string(records: &[AnnotatedImageRecord]) -> Result<String> {
    let raw = RawFile {
        images: records
            .iter()
            .map(|r| RawImage {
                image_id: r.image_id.clone(),
                image_path: r.image_path.clone(),
                width: r.width,
                height: r.height,
                face: r.face,
                background: r.background,
                annotations: r
                    .annotations
                    .iter()
                    .map(|a| RawAnnotation {
                        class: a.class_label.as_str().to_string(),
                        polygon: a.polygon.clone().into(),
                    })
                    .collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn write_annotation_file(records: &[AnnotatedImageRecord], path: impl AsRef<Path>) -> Result<()> {
    crate::fsutil::write_atomic(path.as_ref(), annotations_to_string(records)?.as_bytes())
}
