use serde::{Deserialize, Serialize};

use super::OrientedBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedSquare {
    pub min_x: f64,
    pub min_y: f64,
    pub side: f64,
}

impl AxisAlignedSquare {
    pub fn new(min_x: f64, min_y: f64, side: f64) -> Result<Self> {
        if side <= 0.0 || !side.is_finite() || !min_x.is_finite() || !min_y.is_finite() {
            return Err(Error::Geometry(format!("invalid square side {side}")));
        }
        Ok(AxisAlignedSquare { min_x, min_y, side })
    }

    pub fn max_x(&self) -> f64 {
        self.min_x + self.side
    }

    pub fn max_y(&self) -> f64 {
        self.min_y + self.side
    }

    pub fn center(&self) -> (f64, f64) {
        (self.min_x + self.side / 2.0, self.min_y + self.side / 2.0)
    }
}

/// Per-edge padding, in pixels, needed to restore a clipped window to its
/// full square extent. Pad pixels replicate the nearest image edge.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PaddingSpec {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl PaddingSpec {
    pub fn is_empty(&self) -> bool {
        self.left == 0.0 && self.top == 0.0 && self.right == 0.0 && self.bottom == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedSquare {
    /// The translated square. May extend past the image on padded axes.
    pub square: AxisAlignedSquare,
    pub padding: PaddingSpec,
}

impl FittedSquare {
    /// The part of the square that lies inside the image: `(min_x, min_y, width, height)`.
    pub fn clipped_region(&self) -> (f64, f64, f64, f64) {
        let s = &self.square;
        (
            s.min_x + self.padding.left,
            s.min_y + self.padding.top,
            s.side - self.padding.left - self.padding.right,
            s.side - self.padding.top - self.padding.bottom,
        )
    }
}

/// Smallest axis-aligned square centred on the box's axis-aligned bounds.
pub fn circumscribe_square(obb: &OrientedBox) -> AxisAlignedSquare {
    let corners = obb.corners();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in corners {
        min_x = min_x.min(c.x);
        max_x = max_x.max(c.x);
        min_y = min_y.min(c.y);
        max_y = max_y.max(c.y);
    }
    let side = (max_x - min_x).max(max_y - min_y);
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    AxisAlignedSquare {
        min_x: cx - side / 2.0,
        min_y: cy - side / 2.0,
        side,
    }
}

/// Moves the square the least distance needed to fit each image axis. On an
/// axis shorter than the side, the square is placed to cover the whole axis and
/// the overhang is reported as padding.
pub fn fit_square_to_image(square: &AxisAlignedSquare, width: f64, height: f64) -> Result<FittedSquare> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Argument(format!("image dimensions must be positive, got {width} x {height}")));
    }
    let fit_axis = |min: f64, dim: f64| {
        let slack = dim - square.side;
        let min = min.clamp(slack.min(0.0), slack.max(0.0));
        let lo = (-min).max(0.0);
        let hi = (min - slack).max(0.0);
        (min, lo, hi)
    };
    let (min_x, left, right) = fit_axis(square.min_x, width);
    let (min_y, top, bottom) = fit_axis(square.min_y, height);
    Ok(FittedSquare {
        square: AxisAlignedSquare {
            min_x,
            min_y,
            side: square.side,
        },
        padding: PaddingSpec {
            left,
            top,
            right,
            bottom,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use approx::assert_abs_diff_eq;

    #[test]
    fn circumscribe_axis_aligned() {
        let obb = OrientedBox::new(Point::new(100.0, 100.0), 40.0, 20.0, 0.0).unwrap();
        let sq = circumscribe_square(&obb);
        assert_eq!(sq, AxisAlignedSquare { min_x: 80.0, min_y: 80.0, side: 40.0 });
    }

    #[test]
    fn circumscribe_quarter_turn() {
        let obb = OrientedBox::new(Point::new(0.0, 0.0), 40.0, 20.0, 90.0).unwrap();
        assert_abs_diff_eq!(circumscribe_square(&obb).side, 40.0, epsilon = 1e-12);
    }

    #[test]
    fn circumscribe_diamond() {
        let s = 10.0 * 2f64.sqrt();
        let obb = OrientedBox::new(Point::new(0.0, 0.0), s, s, 45.0).unwrap();
        let sq = circumscribe_square(&obb);
        assert_abs_diff_eq!(sq.side, 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sq.min_x, -10.0, epsilon = 1e-9);
    }

    #[test]
    fn minimal_shift_into_image() {
        let sq = AxisAlignedSquare::new(-5.0, 10.0, 40.0).unwrap();
        let fit = fit_square_to_image(&sq, 1000.0, 1000.0).unwrap();
        assert_eq!(fit.square, AxisAlignedSquare { min_x: 0.0, min_y: 10.0, side: 40.0 });
        assert!(fit.padding.is_empty());
    }

    #[test]
    fn interior_square_unchanged() {
        let sq = AxisAlignedSquare::new(100.0, 200.0, 50.0).unwrap();
        let fit = fit_square_to_image(&sq, 1000.0, 800.0).unwrap();
        assert_eq!(fit.square, sq);
        assert!(fit.padding.is_empty());
    }

    #[test]
    fn oversized_square_is_clipped_and_padded() {
        let sq = AxisAlignedSquare::new(-100.0, -100.0, 1200.0).unwrap();
        let fit = fit_square_to_image(&sq, 1000.0, 1000.0).unwrap();
        let (x, y, w, h) = fit.clipped_region();
        assert_eq!((x, y, w, h), (0.0, 0.0, 1000.0, 1000.0));
        assert_eq!(fit.padding.top, 100.0);
        assert_eq!(fit.padding.bottom, 100.0);
        assert_eq!(fit.padding.left, 100.0);
        assert_eq!(fit.padding.right, 100.0);
        // reassembled window is square again
        assert_eq!(fit.padding.left + w + fit.padding.right, fit.padding.top + h + fit.padding.bottom);
    }

    #[test]
    fn oversized_on_one_axis_only() {
        // 1000 wide, 600 tall: shift horizontally, pad vertically
        let sq = AxisAlignedSquare::new(950.0, 0.0, 800.0).unwrap();
        let fit = fit_square_to_image(&sq, 1000.0, 600.0).unwrap();
        assert_eq!(fit.square.min_x, 200.0);
        assert_eq!((fit.padding.left, fit.padding.right), (0.0, 0.0));
        assert_eq!(fit.padding.top + fit.padding.bottom, 200.0);
        let (_, _, w, h) = fit.clipped_region();
        assert_eq!((w, h), (800.0, 600.0));
    }

    #[test]
    fn rejects_non_positive_dims() {
        let sq = AxisAlignedSquare::new(0.0, 0.0, 10.0).unwrap();
        assert!(matches!(fit_square_to_image(&sq, 0.0, 10.0), Err(Error::Argument(_))));
    }
}
