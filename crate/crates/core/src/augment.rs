//! Per-sample random image transforms used during training.
//!
//! Transform order is fixed: flips, then rotation, shear and zoom (one
//! composed affine warp about the image centre, bilinear, edge-replicated),
//! then the per-channel intensity shift with clipping.

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub enabled: bool,
    /// Rotation drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Horizontal shear angle drawn from `[-shear_deg, shear_deg]`.
    pub shear_deg: f64,
    /// Scale drawn from `[1 - zoom, 1 + zoom]`.
    pub zoom: f64,
    /// Additive shift per channel on the 0-255 scale, drawn from `[-channel_shift, channel_shift]`.
    pub channel_shift: f64,
    pub h_flip_prob: f64,
    pub v_flip_prob: f64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        AugmentationPolicy {
            enabled: true,
            rotation_deg: 45.0,
            shear_deg: 5.0,
            zoom: 0.2,
            channel_shift: 10.0,
            h_flip_prob: 0.5,
            v_flip_prob: 0.5,
        }
    }
}

impl AugmentationPolicy {
    pub fn disabled() -> Self {
        AugmentationPolicy {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [self.rotation_deg, self.shear_deg, self.zoom, self.channel_shift];
        if ranges.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config("augmentation ranges must be finite and non-negative".into()));
        }
        if self.shear_deg >= 90.0 || self.zoom >= 1.0 {
            return Err(Error::Config("augmentation shear must be < 90 degrees and zoom < 1".into()));
        }
        if ![self.h_flip_prob, self.v_flip_prob].iter().all(|p| (0.0..=1.0).contains(p)) {
            return Err(Error::Config("flip probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentationParams {
        if !self.enabled {
            return AugmentationParams::identity();
        }
        let mut sym = |r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let rotation = sym(self.rotation_deg);
        let shear = sym(self.shear_deg);
        let zoom = 1.0 + sym(self.zoom);
        let channel_shift = [sym(self.channel_shift), sym(self.channel_shift), sym(self.channel_shift)];
        AugmentationParams {
            rotation,
            shear,
            zoom,
            channel_shift,
            h_flip: rng.random_bool(self.h_flip_prob),
            v_flip: rng.random_bool(self.v_flip_prob),
        }
    }

    fn admits(&self, p: &AugmentationParams) -> bool {
        const TOL: f64 = 1e-12;
        let within = |v: f64, r: f64| v.is_finite() && v.abs() <= r + TOL;
        if !self.enabled {
            return *p == AugmentationParams::identity();
        }
        within(p.rotation, self.rotation_deg)
            && within(p.shear, self.shear_deg)
            && within(p.zoom - 1.0, self.zoom)
            && p.channel_shift.iter().all(|&s| within(s, self.channel_shift))
            && (!p.h_flip || self.h_flip_prob > 0.0)
            && (!p.v_flip || self.v_flip_prob > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub rotation: f64,
    pub shear: f64,
    pub zoom: f64,
    pub channel_shift: [f64; 3],
    pub h_flip: bool,
    pub v_flip: bool,
}

impl AugmentationParams {
    pub fn identity() -> Self {
        AugmentationParams {
            rotation: 0.0,
            shear: 0.0,
            zoom: 1.0,
            channel_shift: [0.0; 3],
            h_flip: false,
            v_flip: false,
        }
    }

    fn is_geometric_identity(&self) -> bool {
        self.rotation == 0.0 && self.shear == 0.0 && self.zoom == 1.0
    }
}

/// Applies `params`, which must lie inside `policy`'s ranges.
pub fn apply_augmentation(image: &RgbImage, params: &AugmentationParams, policy: &AugmentationPolicy) -> Result<RgbImage> {
    if !policy.admits(params) {
        return Err(Error::Argument(format!("augmentation params {params:?} fall outside the policy")));
    }
    let mut out = image.clone();
    if params.h_flip {
        image::imageops::flip_horizontal_in_place(&mut out);
    }
    if params.v_flip {
        image::imageops::flip_vertical_in_place(&mut out);
    }
    if !params.is_geometric_identity() {
        out = warp(&out, params);
    }
    if params.channel_shift != [0.0; 3] {
        for px in out.pixels_mut() {
            for (c, shift) in px.0.iter_mut().zip(params.channel_shift) {
                *c = (*c as f64 + shift).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Inverse-maps every output pixel through zoom, shear and rotation.
fn warp(src: &RgbImage, p: &AugmentationParams) -> RgbImage {
    let (w, h) = src.dimensions();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = p.rotation.to_radians().sin_cos();
    let tan_shear = p.shear.to_radians().tan();
    let inv_zoom = 1.0 / p.zoom;
    let (max_x, max_y) = (w as f64 - 1.0, h as f64 - 1.0);

    RgbImage::from_fn(w, h, |x, y| {
        // undo zoom
        let zx = (x as f64 - cx) * inv_zoom;
        let zy = (y as f64 - cy) * inv_zoom;
        // undo shear x' = x + tan * y
        let sx = zx - tan_shear * zy;
        let sy = zy;
        // undo rotation
        let rx = cos * sx + sin * sy + cx;
        let ry = -sin * sx + cos * sy + cy;
        bilinear(src, rx.clamp(0.0, max_x), ry.clamp(0.0, max_y))
    })
}

fn bilinear(src: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = src.dimensions();
    let (x0, y0) = (x.floor() as u32, y.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let (a, b, c, d) = (src.get_pixel(x0, y0), src.get_pixel(x1, y0), src.get_pixel(x0, y1), src.get_pixel(x1, y1));
    let mut out = [0u8; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let top = a[i] as f64 * (1.0 - fx) + b[i] as f64 * fx;
        let bottom = c[i] as f64 * (1.0 - fx) + d[i] as f64 * fx;
        *o = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}
