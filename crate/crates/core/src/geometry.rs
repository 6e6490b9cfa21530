//! Axis-aligned geometry in page space.
//!
//! Coordinates are PDF points with the origin in the top-left corner of the
//! page and `y` growing downward. Conversion from the native bottom-left PDF
//! frame happens once, during extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate in box ({0}, {1}, {2}, {3})")]
    NonFinite(f64, f64, f64, f64),
    #[error("inverted box ({0}, {1}, {2}, {3}): expected x0 <= x1 and y0 <= y1")]
    Inverted(f64, f64, f64, f64),
    #[error("page dimensions must be positive, got {0} x {1}")]
    EmptyPage(f64, f64),
    #[error("unsupported page rotation {0}")]
    Rotation(i64),
}

/// An axis-aligned rectangle `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(GeometryError::NonFinite(x0, y0, x1, y1));
        }
        if x0 > x1 || y0 > y1 {
            return Err(GeometryError::Inverted(x0, y0, x1, y1));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Builds the box spanned by two arbitrary corners.
    pub fn from_corners(a: (f64, f64), b: (f64, f64)) -> Result<Self, GeometryError> {
        Self::new(a.0.min(b.0), a.1.min(b.1), a.0.max(b.0), a.1.max(b.1))
    }

    /// Smallest box containing every point. `None` for an empty iterator.
    pub fn hull_of_points<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let (x, y) = it.next()?;
        let mut b = Self { x0: x, y0: y, x1: x, y1: y };
        for (x, y) in it {
            b.x0 = b.x0.min(x);
            b.y0 = b.y0.min(y);
            b.x1 = b.x1.max(x);
            b.y1 = b.y1.max(y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Midpoint `((x0 + x1) / 2, (y0 + y1) / 2)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 <= x1 && y0 <= y1).then_some(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Fraction of `self` covered by `other`: `area(self ∩ other) / area(self)`.
    ///
    /// A zero-area `self` yields 0.
    pub fn overlap_fraction(&self, other: &BoundingBox) -> f64 {
        let own = self.area();
        if own <= 0.0 {
            return 0.0;
        }
        match self.intersection(other) {
            Some(i) => (i.area() / own).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    /// Intersection over union. Two degenerate boxes have IoU 0.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |i| i.area());
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    /// True when the box extends past `[0, width] x [0, height]`.
    pub fn exceeds(&self, width: f64, height: f64) -> bool {
        self.x0 < 0.0 || self.y0 < 0.0 || self.x1 > width || self.y1 > height
    }
}

/// Free-function form of [`BoundingBox::area`].
pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Free-function form of [`BoundingBox::overlap_fraction`].
pub fn overlap_fraction(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.overlap_fraction(b)
}

/// Free-function form of [`BoundingBox::center`].
pub fn center(b: &BoundingBox) -> (f64, f64) {
    b.center()
}

/// Page rotation in degrees, clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Rotation {
    #[default]
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl Rotation {
    pub fn degrees(self) -> i64 {
        match self {
            Rotation::Deg0 => 0,
            Rotation::Deg90 => 90,
            Rotation::Deg180 => 180,
            Rotation::Deg270 => 270,
        }
    }

    /// Normalizes any multiple of 90 (negative values included).
    pub fn from_degrees(d: i64) -> Result<Self, GeometryError> {
        match d.rem_euclid(360) {
            0 if d % 90 == 0 => Ok(Rotation::Deg0),
            90 => Ok(Rotation::Deg90),
            180 => Ok(Rotation::Deg180),
            270 => Ok(Rotation::Deg270),
            _ => Err(GeometryError::Rotation(d)),
        }
    }
}

impl TryFrom<i64> for Rotation {
    type Error = GeometryError;

    fn try_from(d: i64) -> Result<Self, Self::Error> {
        Rotation::from_degrees(d)
    }
}

impl From<Rotation> for i64 {
    fn from(r: Rotation) -> Self {
        r.degrees()
    }
}

/// Size and position of one page within its document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageGeometry {
    pub page_index: usize,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub rotation: Rotation,
}

impl PageGeometry {
    pub fn new(page_index: usize, width: f64, height: f64) -> Result<Self, GeometryError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(GeometryError::EmptyPage(width, height));
        }
        Ok(Self { page_index, width, height, rotation: Rotation::Deg0 })
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox { x0: 0.0, y0: 0.0, x1: self.width, y1: self.height }
    }
}

/// Distance from a block to each page edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageMargins {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    /// Set when the block extended past the page and the distances were clamped.
    pub clipped: bool,
}

impl PageMargins {
    pub fn as_array(&self) -> [f64; 4] {
        [self.left, self.top, self.right, self.bottom]
    }
}

/// `(x0, y0, width - x1, height - y1)`, each clamped at zero.
pub fn page_margins(b: &BoundingBox, g: &PageGeometry) -> PageMargins {
    let raw = [b.x0, b.y0, g.width - b.x1, g.height - b.y1];
    let clipped = raw.iter().any(|v| *v < 0.0);
    PageMargins {
        left: raw[0].max(0.0),
        top: raw[1].max(0.0),
        right: raw[2].max(0.0),
        bottom: raw[3].max(0.0),
        clipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(bb(0.0, 0.0, 10.0, 20.0).area(), 200.0);
        assert_eq!(bb(5.0, 5.0, 5.0, 9.0).area(), 0.0);
        assert_eq!(bb(1.5, 2.5, 4.0, 7.0).area(), 11.25);
    }

    #[test]
    fn overlap_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.overlap_fraction(&a), 1.0);
        assert_eq!(a.overlap_fraction(&bb(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert!((a.overlap_fraction(&bb(5.0, 0.0, 15.0, 10.0)) - 0.5).abs() < 1e-12);
        // degenerate subject
        assert_eq!(bb(1.0, 1.0, 1.0, 5.0).overlap_fraction(&a), 0.0);
    }

    #[test]
    fn center_examples() {
        assert_eq!(bb(0.0, 0.0, 10.0, 20.0).center(), (5.0, 10.0));
        assert_eq!(bb(3.0, 3.0, 3.0, 3.0).center(), (3.0, 3.0));
        assert_eq!(bb(2.0, 4.0, 8.0, 10.0).center(), (5.0, 7.0));
    }

    #[test]
    fn margins_examples() {
        let square = PageGeometry::new(0, 100.0, 100.0).unwrap();
        let m = page_margins(&bb(10.0, 20.0, 90.0, 80.0), &square);
        assert_eq!(m.as_array(), [10.0, 20.0, 10.0, 20.0]);
        assert!(!m.clipped);
        assert_eq!(page_margins(&square.bounds(), &square).as_array(), [0.0; 4]);
        let tall = PageGeometry::new(0, 100.0, 200.0).unwrap();
        assert_eq!(page_margins(&bb(50.0, 0.0, 100.0, 50.0), &tall).as_array(), [50.0, 0.0, 0.0, 150.0]);
    }

    #[test]
    fn margins_clamp_and_flag() {
        let g = PageGeometry::new(0, 100.0, 100.0).unwrap();
        let m = page_margins(&bb(-5.0, 10.0, 120.0, 50.0), &g);
        assert_eq!(m.as_array(), [0.0, 10.0, 0.0, 50.0]);
        assert!(m.clipped);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(matches!(BoundingBox::new(2.0, 0.0, 1.0, 1.0), Err(GeometryError::Inverted(..))));
        assert!(matches!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0), Err(GeometryError::NonFinite(..))));
        assert!(PageGeometry::new(0, 0.0, 10.0).is_err());
        assert!(serde_json::from_str::<BoundingBox>("[3,0,1,1]").is_err());
    }

    #[test]
    fn rotation_parsing() {
        assert_eq!(Rotation::from_degrees(-90).unwrap(), Rotation::Deg270);
        assert_eq!(Rotation::from_degrees(450).unwrap(), Rotation::Deg90);
        assert!(Rotation::from_degrees(45).is_err());
    }

    #[test]
    fn iou_of_shifted_box() {
        // shifting a 10-wide box by 20% of its width: inter = 8*h, union = 12*h
        let a = bb(0.0, 0.0, 10.0, 5.0);
        let b = a.translate(2.0, 0.0);
        assert!((a.iou(&b) - 8.0 / 12.0).abs() < 1e-12);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.0..50.0f64, 0.0..50.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox { x0: x, y0: y, x1: x + w, y1: y + h })
    }

    proptest! {
        #[test]
        fn overlap_in_unit_interval(a in arb_box(), b in arb_box()) {
            let f = a.overlap_fraction(&b);
            prop_assert!((0.0..=1.0).contains(&f));
            if a.area() > 0.0 {
                prop_assert_eq!(a.overlap_fraction(&a), 1.0);
            }
        }

        #[test]
        fn contained_box_is_fully_overlapped(a in arb_box(), pad in 0.0..10.0f64) {
            let outer = BoundingBox { x0: a.x0 - pad, y0: a.y0 - pad, x1: a.x1 + pad, y1: a.y1 + pad };
            if a.area() > 0.0 {
                prop_assert!((a.overlap_fraction(&outer) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn center_and_margins_closed_form(a in arb_box()) {
            let (xc, yc) = a.center();
            prop_assert_eq!(xc, (a.x0 + a.x1) / 2.0);
            prop_assert_eq!(yc, (a.y0 + a.y1) / 2.0);
            let g = PageGeometry::new(0, 200.0, 200.0).unwrap();
            let m = page_margins(&a, &g);
            prop_assert_eq!(m.as_array(), [a.x0, a.y0, 200.0 - a.x1, 200.0 - a.y1]);
        }

        #[test]
        fn iou_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert!((a.iou(&b) - b.iou(&a)).abs() < 1e-12);
        }
    }
}
