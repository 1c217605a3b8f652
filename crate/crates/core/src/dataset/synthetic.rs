//! Procedural stand-in for the photographed component dataset.
//!
//! Each class has its own shape and texture family so a small network can
//! separate them:
//! - battery: striped rounded rectangle
//! - pcb: perforated green plate
//! - glass: pale gradient pane with a highlight band
//! - metal_piece: irregular solid grey blob

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crop::save_png;
use super::derive_seed;
use crate::annotations::{write_annotation_file, AnnotatedImageRecord, Annotation, Background, ComponentClass, Face};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub counts: BTreeMap<ComponentClass, usize>,
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_palette")]
    pub backgrounds: Vec<Background>,
}

fn default_image_size() -> u32 {
    256
}

fn default_palette() -> Vec<Background> {
    Background::ALL.to_vec()
}

impl SyntheticSpec {
    pub fn new(counts: impl IntoIterator<Item = (ComponentClass, usize)>, seed: u64) -> Self {
        SyntheticSpec {
            counts: counts.into_iter().collect(),
            image_size: default_image_size(),
            seed,
            backgrounds: default_palette(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 32 {
            return Err(Error::Config(format!("synthetic image_size must be >= 32, got {}", self.image_size)));
        }
        if self.backgrounds.is_empty() {
            return Err(Error::Config("synthetic background palette is empty".into()));
        }
        if self.total() == 0 {
            return Err(Error::Config("synthetic spec has zero components".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub annotation_path: PathBuf,
    pub records: Vec<AnnotatedImageRecord>,
}

const ANNOTATION_FILE: &str = "annotations.json";

/// Renders images into `out_dir/images/` and writes `out_dir/annotations.json`.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<SyntheticOutput> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut pool: Vec<ComponentClass> = spec
        .counts
        .iter()
        .flat_map(|(&class, &n)| std::iter::repeat_n(class, n))
        .collect();
    pool.shuffle(&mut rng);

    let mut groups = Vec::new();
    let mut rest = pool.as_slice();
    while !rest.is_empty() {
        let k = rng.random_range(1..=4usize).min(rest.len());
        groups.push(rest[..k].to_vec());
        rest = &rest[k..];
    }

    let size = spec.image_size;
    let mut records = Vec::with_capacity(groups.len());
    for (idx, classes) in groups.into_iter().enumerate() {
        let image_id = format!("syn_{idx:05}");
        let background = spec.backgrounds[idx % spec.backgrounds.len()];
        let face = if idx % 2 == 0 { Face::A } else { Face::B };
        let mut img_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[idx as u64]));
        let (image, annotations) = render_scene(size, background, &classes, &mut img_rng)?;

        let rel = format!("images/{image_id}.png");
        save_png(&image, &out_dir.join(&rel))?;
        records.push(AnnotatedImageRecord {
            image_id,
            image_path: rel,
            width: size,
            height: size,
            face,
            background,
            annotations,
        });
    }

    let annotation_path = out_dir.join(ANNOTATION_FILE);
    write_annotation_file(&records, &annotation_path)?;
    Ok(SyntheticOutput {
        annotation_path,
        records,
    })
}

fn background_level(bg: Background) -> u8 {
    match bg {
        Background::Gray => 128,
        Background::Black => 22,
        Background::White => 232,
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn render_scene(
    size: u32,
    background: Background,
    classes: &[ComponentClass],
    rng: &mut ChaCha8Rng,
) -> Result<(RgbImage, Vec<Annotation>)> {
    let level = background_level(background) as f64;
    let mut image = RgbImage::from_fn(size, size, |_, _| {
        let v = clamp_u8(level + rng.random_range(-6.0..=6.0));
        Rgb([v, v, v])
    });

    let mut cells = [0usize, 1, 2, 3];
    cells.shuffle(rng);
    let cell = size as f64 / 2.0;
    let mut annotations = Vec::with_capacity(classes.len());
    for (annotation_index, (&class, &slot)) in classes.iter().zip(cells.iter()).enumerate() {
        let shape = ComponentShape::sample(class, cell, rng);
        let slack = (cell / 2.0 - shape.bounding_radius()).max(0.0);
        let center = Point::new(
            cell * ((slot % 2) as f64 + 0.5) + rng.random_range(-slack..=slack),
            cell * ((slot / 2) as f64 + 0.5) + rng.random_range(-slack..=slack),
        );
        let polygon = shape.polygon(center)?;
        shape.paint(&mut image, &polygon, center, rng);
        annotations.push(Annotation {
            polygon,
            class_label: class,
            annotation_index,
        });
    }
    Ok((image, annotations))
}

struct ComponentShape {
    class: ComponentClass,
    /// Outline in local coordinates (before rotation and translation).
    outline: Vec<Point>,
    rotation: f64,
    half_w: f64,
    half_h: f64,
}

impl ComponentShape {
    fn sample(class: ComponentClass, cell: f64, rng: &mut ChaCha8Rng) -> Self {
        let rotation = rng.random_range(0.0..360.0);
        let scale = cell * rng.random_range(0.22..0.34);
        let (half_w, half_h, outline) = match class {
            ComponentClass::Battery => {
                let (hw, hh) = (scale, scale * 0.6);
                (hw, hh, rounded_rect(hw, hh, hh * 0.3))
            }
            ComponentClass::Pcb => {
                let (hw, hh) = (scale, scale * 0.75);
                (hw, hh, rect(hw, hh))
            }
            ComponentClass::Glass => {
                let (hw, hh) = (scale, scale * 0.85);
                let skew = hw * rng.random_range(0.0..0.2);
                let outline = vec![
                    Point::new(-hw + skew, -hh),
                    Point::new(hw, -hh),
                    Point::new(hw - skew, hh),
                    Point::new(-hw, hh),
                ];
                (hw, hh, outline)
            }
            ComponentClass::MetalPiece => {
                let k = rng.random_range(7..=11);
                let mut angles: Vec<f64> = (0..k)
                    .map(|i| (i as f64 + rng.random_range(0.1..0.9)) * 2.0 * PI / k as f64)
                    .collect();
                angles.sort_by(f64::total_cmp);
                let outline = angles
                    .into_iter()
                    .map(|a| {
                        let r = scale * rng.random_range(0.55..1.0);
                        Point::new(r * a.cos(), r * a.sin())
                    })
                    .collect();
                (scale, scale, outline)
            }
        };
        ComponentShape {
            class,
            outline,
            rotation,
            half_w,
            half_h,
        }
    }

    fn bounding_radius(&self) -> f64 {
        self.outline.iter().map(|p| p.dot(*p).sqrt()).fold(0.0, f64::max)
    }

    fn polygon(&self, center: Point) -> Result<Polygon> {
        let origin = Point::new(0.0, 0.0);
        Polygon::new(
            self.outline
                .iter()
                .map(|p| {
                    let r = p.rotate_about(origin, self.rotation);
                    Point::new(r.x + center.x, r.y + center.y)
                })
                .collect(),
        )
    }

    fn paint(&self, image: &mut RgbImage, polygon: &Polygon, center: Point, rng: &mut ChaCha8Rng) {
        let (w, h) = image.dimensions();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for v in polygon.vertices() {
            x0 = x0.min(v.x);
            y0 = y0.min(v.y);
            x1 = x1.max(v.x);
            y1 = y1.max(v.y);
        }
        let tint: f64 = rng.random_range(-12.0..12.0);
        let xs = (x0.floor().max(0.0) as u32)..(x1.ceil().min(w as f64) as u32);
        for y in (y0.floor().max(0.0) as u32)..(y1.ceil().min(h as f64) as u32) {
            for x in xs.clone() {
                let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if !polygon.contains(p) {
                    continue;
                }
                // local frame, normalised to the half extents
                let l = p.rotate_about(center, -self.rotation);
                let (u, v) = ((l.x - center.x) / self.half_w, (l.y - center.y) / self.half_h);
                let noise = rng.random_range(-5.0..5.0);
                let [r, g, b] = self.texture(u, v);
                image.put_pixel(x, y, Rgb([clamp_u8(r + tint + noise), clamp_u8(g + tint + noise), clamp_u8(b + tint + noise)]));
            }
        }
    }

    fn texture(&self, u: f64, v: f64) -> [f64; 3] {
        match self.class {
            ComponentClass::Battery => {
                if ((v + 1.0) * 4.0).floor() as i64 % 2 == 0 {
                    [45.0, 55.0, 95.0]
                } else {
                    [190.0, 190.0, 205.0]
                }
            }
            ComponentClass::Pcb => {
                let (fu, fv) = ((u + 1.0) * 4.0, (v + 1.0) * 3.0);
                let (du, dv) = (fu - fu.floor() - 0.5, fv - fv.floor() - 0.5);
                if du * du + dv * dv < 0.06 {
                    [15.0, 35.0, 18.0]
                } else {
                    [45.0, 135.0, 60.0]
                }
            }
            ComponentClass::Glass => {
                let t = ((u + v) / 4.0 + 0.5).clamp(0.0, 1.0);
                let highlight = if (u - v).abs() < 0.15 { 25.0 } else { 0.0 };
                [150.0 + 70.0 * t + highlight, 200.0 + 40.0 * t + highlight, 225.0 + 25.0 * t]
            }
            ComponentClass::MetalPiece => [140.0, 138.0, 132.0],
        }
    }
}

fn rect(hw: f64, hh: f64) -> Vec<Point> {
    vec![Point::new(-hw, -hh), Point::new(hw, -hh), Point::new(hw, hh), Point::new(-hw, hh)]
}

fn rounded_rect(hw: f64, hh: f64, r: f64) -> Vec<Point> {
    let corners = [(hw - r, -hh + r, -PI / 2.0), (hw - r, hh - r, 0.0), (-hw + r, hh - r, PI / 2.0), (-hw + r, -hh + r, PI)];
    let mut pts = Vec::new();
    for (cx, cy, start) in corners {
        for s in 0..=4 {
            let a = start + s as f64 * (PI / 2.0) / 4.0;
            pts.push(Point::new(cx + r * a.cos(), cy + r * a.sin()));
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::parse_annotation_file;

    #[test]
    fn deterministic_annotation_bytes() {
        let spec = SyntheticSpec::new([(ComponentClass::Battery, 10)], 7);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let oa = generate_synthetic_dataset(&spec, a.path()).unwrap();
        let ob = generate_synthetic_dataset(&spec, b.path()).unwrap();
        assert_eq!(std::fs::read(oa.annotation_path).unwrap(), std::fs::read(ob.annotation_path).unwrap());
        let img = &oa.records[0].image_path;
        assert_eq!(std::fs::read(a.path().join(img)).unwrap(), std::fs::read(b.path().join(img)).unwrap());
    }

    #[test]
    fn images_hold_one_to_four_components_and_parse_back() {
        let spec = SyntheticSpec::new(ComponentClass::ALL.map(|c| (c, 7)), 3);
        let dir = tempfile::tempdir().unwrap();
        let out = generate_synthetic_dataset(&spec, dir.path()).unwrap();
        assert!(out.records.iter().all(|r| (1..=4).contains(&r.annotations.len())));
        let parsed = parse_annotation_file(&out.annotation_path).unwrap();
        assert_eq!(parsed.clamped_vertices, 0);
        assert_eq!(parsed.records, out.records);
        let total: usize = parsed.records.iter().map(|r| r.annotations.len()).sum();
        assert_eq!(total, 28);
    }

    #[test]
    fn zero_total_rejected() {
        let spec = SyntheticSpec::new([(ComponentClass::Glass, 0)], 1);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(generate_synthetic_dataset(&spec, dir.path()), Err(Error::Config(_))));
    }

    #[test]
    fn tiny_image_size_rejected() {
        let mut spec = SyntheticSpec::new([(ComponentClass::Glass, 1)], 1);
        spec.image_size = 16;
        assert!(spec.validate().is_err());
    }
}
