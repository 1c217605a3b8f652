#![allow(dead_code)]

use pyrosort::geometry::{Point, Polygon};
use rand::Rng;

/// Star-shaped polygon around `(cx, cy)`: sorted distinct angles, random radii.
pub fn random_star<R: Rng>(rng: &mut R, n: usize, cx: f64, cy: f64, r_max: f64) -> Polygon {
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        if angles.len() < 3 {
            continue;
        }
        let pts = angles
            .iter()
            .map(|&t| {
                let r = rng.random_range(0.2 * r_max..r_max);
                Point::new(cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        if let Ok(p) = Polygon::new(pts) {
            return p;
        }
    }
}

/// Minimum-area rectangle by trying every hull edge direction.
pub fn brute_force_obb_area(points: &[Point]) -> f64 {
    let hull = pyrosort::geometry::convex_hull(points);
    let mut best = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in points {
            let u = p.x * ux + p.y * uy;
            let v = -p.x * uy + p.y * ux;
            lo_u = lo_u.min(u);
            hi_u = hi_u.max(u);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        best = best.min((hi_u - lo_u) * (hi_v - lo_v));
    }
    best
}
