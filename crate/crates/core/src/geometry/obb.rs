use serde::{Deserialize, Serialize};

use super::{convex_hull, Point, Polygon, GEOMETRY_EPS};
use crate::error::{Error, Result};

const ANGLE_SNAP_DEG: f64 = 1e-9;

/// Rotated rectangle. `angle` is the rotation of the width axis from the
/// image x-axis in degrees, kept in `[0, 90)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

impl OrientedBox {
    pub fn new(center: Point, width: f64, height: f64, angle: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(Error::Geometry(format!(
                "oriented box needs positive extents, got {width} x {height}"
            )));
        }
        if !angle.is_finite() || !center.x.is_finite() || !center.y.is_finite() {
            return Err(Error::Geometry("oriented box has non-finite fields".into()));
        }
        let (width, height, angle) = canonicalize(width, height, angle);
        Ok(OrientedBox {
            center,
            width,
            height,
            angle,
        })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = self.angle.to_radians().sin_cos();
        (Point::new(c, s), Point::new(-s, c))
    }

    pub fn corners(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |a: f64, b: f64| Point::new(self.center.x + u.x * a + v.x * b, self.center.y + u.y * a + v.y * b);
        [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.width / 2.0 + tol && d.dot(v).abs() <= self.height / 2.0 + tol
    }
}

fn canonicalize(mut width: f64, mut height: f64, angle: f64) -> (f64, f64, f64) {
    let mut a = angle.rem_euclid(180.0);
    if a >= 90.0 {
        a -= 90.0;
        std::mem::swap(&mut width, &mut height);
    }
    if a >= 90.0 - ANGLE_SNAP_DEG {
        a = 0.0;
        std::mem::swap(&mut width, &mut height);
    }
    if a.abs() < ANGLE_SNAP_DEG {
        a = 0.0;
    }
    (width, height, a)
}

/// Minimum-area enclosing rectangle via rotating calipers over the convex hull.
pub fn min_area_obb(polygon: &Polygon) -> Result<OrientedBox> {
    let hull = convex_hull(polygon.vertices());
    let m = hull.len();
    if m < 3 {
        return Err(Error::Geometry("polygon hull is degenerate".into()));
    }

    let edge_dir = |i: usize| {
        let d = hull[(i + 1) % m] - hull[i];
        let len = d.dot(d).sqrt();
        Point::new(d.x / len, d.y / len)
    };

    // Caliper indices: farthest along the inward normal, max and min along the edge.
    let u0 = edge_dir(0);
    let n0 = Point::new(-u0.y, u0.x);
    let argmax = |f: &dyn Fn(Point) -> f64| {
        (0..m).max_by(|&a, &b| f(hull[a]).total_cmp(&f(hull[b]))).unwrap()
    };
    let mut top = argmax(&|p| p.dot(n0));
    let mut right = argmax(&|p| p.dot(u0));
    let mut left = argmax(&|p| -p.dot(u0));

    let mut best: Option<(f64, Point, f64, f64, f64, f64)> = None;
    for i in 0..m {
        let u = edge_dir(i);
        let n = Point::new(-u.y, u.x);
        let advance = |mut k: usize, f: &dyn Fn(Point) -> f64| {
            for _ in 0..m {
                let next = (k + 1) % m;
                if f(hull[next]) > f(hull[k]) {
                    k = next;
                } else {
                    break;
                }
            }
            k
        };
        top = advance(top, &|p| p.dot(n));
        right = advance(right, &|p| p.dot(u));
        left = advance(left, &|p| -p.dot(u));

        let base = hull[i].dot(n);
        let umin = hull[left].dot(u);
        let umax = hull[right].dot(u);
        let nmax = hull[top].dot(n);
        let area = (umax - umin) * (nmax - base);
        if best.is_none_or(|b| area < b.0) {
            best = Some((area, u, umin, umax, base, nmax));
        }
    }

    let (_, u, umin, umax, nmin, nmax) = best.expect("hull has edges");
    let n = Point::new(-u.y, u.x);
    let (cu, cn) = ((umin + umax) / 2.0, (nmin + nmax) / 2.0);
    let center = Point::new(u.x * cu + n.x * cn, u.y * cu + n.y * cn);
    let angle = u.y.atan2(u.x).to_degrees();
    let obb = OrientedBox::new(center, umax - umin, nmax - nmin, angle)?;
    debug_assert!(polygon.vertices().iter().all(|&p| obb.contains(p, GEOMETRY_EPS * 1e3)));
    Ok(obb)
}
