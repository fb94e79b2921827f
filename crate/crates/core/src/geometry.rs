//! Planar primitives shared by every other module: boxes, rays, quantized
//! spatial anchors, slab intersection, overlap and coordinate-mode
//! conversion.
//!
//! Boxes are stored as corner pairs `(x1, y1, x2, y2)` tagged with the
//! coordinate system they are expressed in. Image space has its origin at
//! the top-left corner with `y` growing downwards.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `‖direction‖ = 1` for rays and direction estimates.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("axis extent must be positive, got {0}")]
    NonPositiveExtent(f64),
    #[error("coordinate {value} lies outside [0, {extent}]")]
    OutOfRange { value: f64, extent: f64 },
    #[error("at least two bins are required, got {0}")]
    TooFewBins(u32),
    #[error("expected an absolute-mode box, got {0}")]
    NotAbsolute(CoordinateMode),
    #[error("direction vector has zero or non-finite length")]
    DegenerateDirection,
}

/// Coordinate system a box is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum CoordinateMode {
    /// Pixels.
    #[default]
    #[serde(rename = "absolute")]
    Absolute,
    /// Fractions of the image width/height.
    #[serde(rename = "relative_1")]
    Relative1,
    /// Thousandths of the image width/height.
    #[serde(rename = "relative_1000")]
    Relative1000,
}

impl CoordinateMode {
    pub const ALL: [CoordinateMode; 3] = [
        CoordinateMode::Absolute,
        CoordinateMode::Relative1,
        CoordinateMode::Relative1000,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CoordinateMode::Absolute => "absolute",
            CoordinateMode::Relative1 => "relative_1",
            CoordinateMode::Relative1000 => "relative_1000",
        }
    }

    /// Pixels per unit along x and y for an image of the given size.
    fn scale(self, width: f64, height: f64) -> (f64, f64) {
        match self {
            CoordinateMode::Absolute => (1.0, 1.0),
            CoordinateMode::Relative1 => (width, height),
            CoordinateMode::Relative1000 => (width / 1000.0, height / 1000.0),
        }
    }

    /// Upper coordinate bounds of the image in this mode.
    fn extent(self, width: f64, height: f64) -> (f64, f64) {
        match self {
            CoordinateMode::Absolute => (width, height),
            CoordinateMode::Relative1 => (1.0, 1.0),
            CoordinateMode::Relative1000 => (1000.0, 1000.0),
        }
    }
}

impl fmt::Display for CoordinateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoordinateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(CoordinateMode::Absolute),
            "relative_1" => Ok(CoordinateMode::Relative1),
            "relative_1000" => Ok(CoordinateMode::Relative1000),
            other => Err(format!(
                "unknown coordinate mode `{other}` (expected absolute, relative_1 or relative_1000)"
            )),
        }
    }
}

/// A 2-D vector, also used for points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub type Point2 = Vec2;

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction, or `None` for a zero/non-finite vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n.is_finite() && n > 0.0 {
            Some(Vec2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    /// Counter-clockwise rotation in a y-up frame (clockwise on screen).
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned box in corner-pair form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(default)]
    pub mode: CoordinateMode,
}

impl BBox2D {
    /// Absolute-mode box from corner coordinates.
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::with_mode(x1, y1, x2, y2, CoordinateMode::Absolute)
    }

    pub const fn with_mode(x1: f64, y1: f64, x2: f64, y2: f64, mode: CoordinateMode) -> Self {
        Self { x1, y1, x2, y2, mode }
    }

    pub fn from_xyxy(c: [f64; 4], mode: CoordinateMode) -> Self {
        Self::with_mode(c[0], c[1], c[2], c[3], mode)
    }

    /// Converts an `[x, y, w, h]` box into corner form.
    pub fn from_xywh(c: [f64; 4], mode: CoordinateMode) -> Self {
        Self::with_mode(c[0], c[1], c[0] + c[2], c[1] + c[3], mode)
    }

    pub fn xyxy(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.xyxy().iter().all(|v| v.is_finite())
    }

    /// Closed-box membership.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x1 && p.x <= self.x2 && p.y >= self.y1 && p.y <= self.y2
    }

    /// Uniformly scales every coordinate; the mode is kept.
    pub fn scaled(&self, factor: f64) -> BBox2D {
        BBox2D::with_mode(
            self.x1 * factor,
            self.y1 * factor,
            self.x2 * factor,
            self.y2 * factor,
            self.mode,
        )
    }

    /// Intersection-area test between closed boxes with positive overlap.
    pub fn overlaps(&self, other: &BBox2D) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }

    /// Box grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> BBox2D {
        BBox2D::with_mode(
            self.x1 - margin,
            self.y1 - margin,
            self.x2 + margin,
            self.y2 + margin,
            self.mode,
        )
    }
}

impl fmt::Display for BBox2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Quantized anchor tokens for a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialAnchor {
    pub bins: [u32; 4],
    pub n_bins: u32,
}

impl SpatialAnchor {
    /// Token strings of the form `<bin_k>`.
    pub fn tokens(&self) -> Vec<String> {
        self.bins.iter().map(|b| format!("<bin_{b}>")).collect()
    }
}

impl fmt::Display for SpatialAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bins {
            write!(f, "<bin_{b}>")?;
        }
        Ok(())
    }
}

/// A half-line `origin + t * direction`, `t >= 0`, with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray2D {
    pub origin: Point2,
    pub direction: Vec2,
}

impl Ray2D {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Point2, direction: Vec2) -> Result<Self, GeometryError> {
        let direction = direction
            .normalized()
            .ok_or(GeometryError::DegenerateDirection)?;
        Ok(Self { origin, direction })
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.origin + self.direction * t
    }

    pub fn rotated(&self, angle: f64) -> Ray2D {
        Ray2D {
            origin: self.origin,
            direction: self.direction.rotated(angle),
        }
    }
}

/// Forward-ray parameter interval inside a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayInterval {
    pub t_entry: f64,
    pub t_exit: f64,
}

/// Maps a coordinate on `[0, axis_extent]` to one of `n_bins` bins with
/// `floor(c / extent * (n_bins - 1))`.
pub fn quantize_coord(c: f64, axis_extent: f64, n_bins: u32) -> Result<u32, GeometryError> {
    if !axis_extent.is_finite() || axis_extent <= 0.0 {
        return Err(GeometryError::NonPositiveExtent(axis_extent));
    }
    if n_bins < 2 {
        return Err(GeometryError::TooFewBins(n_bins));
    }
    if !(0.0..=axis_extent).contains(&c) {
        return Err(GeometryError::OutOfRange {
            value: c,
            extent: axis_extent,
        });
    }
    let top = n_bins - 1;
    let bin = ((c / axis_extent) * f64::from(top)).floor();
    Ok((bin as u32).min(top))
}

/// Anchor tokens for an absolute box; x uses the image width as extent and
/// y the image height.
pub fn anchor_tokens(
    bbox: &BBox2D,
    width: f64,
    height: f64,
    n_bins: u32,
) -> Result<SpatialAnchor, GeometryError> {
    if bbox.mode != CoordinateMode::Absolute {
        return Err(GeometryError::NotAbsolute(bbox.mode));
    }
    Ok(SpatialAnchor {
        bins: [
            quantize_coord(bbox.x1, width, n_bins)?,
            quantize_coord(bbox.y1, height, n_bins)?,
            quantize_coord(bbox.x2, width, n_bins)?,
            quantize_coord(bbox.y2, height, n_bins)?,
        ],
        n_bins,
    })
}

pub fn centroid(bbox: &BBox2D) -> Point2 {
    Point2::new((bbox.x1 + bbox.x2) / 2.0, (bbox.y1 + bbox.y2) / 2.0)
}

/// Slab-method intersection of the forward ray with a closed box.
///
/// Returns `None` when the half-line misses. An origin inside the box yields
/// `t_entry = 0`.
pub fn ray_box_intersect(ray: &Ray2D, bbox: &BBox2D) -> Option<RayInterval> {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    let axes = [
        (ray.origin.x, ray.direction.x, bbox.x1, bbox.x2),
        (ray.origin.y, ray.direction.y, bbox.y1, bbox.y2),
    ];
    for (o, d, lo, hi) in axes {
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let a = (lo - o) / d;
        let b = (hi - o) / d;
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        t_lo = t_lo.max(near);
        t_hi = t_hi.min(far);
    }
    if t_hi < t_lo || t_hi < 0.0 || t_lo.is_nan() || t_hi.is_nan() {
        return None;
    }
    Some(RayInterval {
        t_entry: t_lo.max(0.0),
        t_exit: t_hi,
    })
}

/// Continuous-area intersection over union. Two zero-area boxes give 0.
pub fn iou(a: &BBox2D, b: &BBox2D) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Re-expresses a box in another coordinate mode for an image of
/// `width x height` pixels. Relative-1000 uses a uniform `/1000` scale.
pub fn convert_mode(
    bbox: &BBox2D,
    target: CoordinateMode,
    width: f64,
    height: f64,
) -> Result<BBox2D, GeometryError> {
    for extent in [width, height] {
        if !extent.is_finite() || extent <= 0.0 {
            return Err(GeometryError::NonPositiveExtent(extent));
        }
    }
    if bbox.mode == target {
        return Ok(*bbox);
    }
    let (sx, sy) = bbox.mode.scale(width, height);
    let (tx, ty) = target.scale(width, height);
    Ok(BBox2D::with_mode(
        bbox.x1 * sx / tx,
        bbox.y1 * sy / ty,
        bbox.x2 * sx / tx,
        bbox.y2 * sy / ty,
        target,
    ))
}

/// Orders corners and clamps to the image bounds of the box's own mode.
/// Returns `None` when the clamped box has no positive width or height.
pub fn sanitize(bbox: &BBox2D, width: f64, height: f64) -> Option<BBox2D> {
    if !bbox.is_finite() {
        return None;
    }
    let (max_x, max_y) = bbox.mode.extent(width, height);
    let x1 = bbox.x1.min(bbox.x2).clamp(0.0, max_x);
    let x2 = bbox.x1.max(bbox.x2).clamp(0.0, max_x);
    let y1 = bbox.y1.min(bbox.y2).clamp(0.0, max_y);
    let y2 = bbox.y1.max(bbox.y2).clamp(0.0, max_y);
    if x2 - x1 <= 0.0 || y2 - y1 <= 0.0 {
        return None;
    }
    Some(BBox2D::with_mode(x1, y1, x2, y2, bbox.mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ray(ox: f64, oy: f64, dx: f64, dy: f64) -> Ray2D {
        Ray2D::new(Point2::new(ox, oy), Vec2::new(dx, dy)).unwrap()
    }

    #[test]
    fn quantize_endpoints_and_midpoint() {
        assert_eq!(quantize_coord(0.0, 1000.0, 1000).unwrap(), 0);
        assert_eq!(quantize_coord(1000.0, 1000.0, 1000).unwrap(), 999);
        assert_eq!(quantize_coord(500.0, 1000.0, 1000).unwrap(), 499);
    }

    #[test]
    fn quantize_rejects_bad_domain() {
        assert!(matches!(
            quantize_coord(1.0, 0.0, 1000),
            Err(GeometryError::NonPositiveExtent(_))
        ));
        assert!(matches!(
            quantize_coord(-0.5, 10.0, 1000),
            Err(GeometryError::OutOfRange { .. })
        ));
        assert!(matches!(
            quantize_coord(10.5, 10.0, 1000),
            Err(GeometryError::OutOfRange { .. })
        ));
        assert!(quantize_coord(f64::NAN, 10.0, 1000).is_err());
        assert!(matches!(
            quantize_coord(1.0, 10.0, 1),
            Err(GeometryError::TooFewBins(1))
        ));
    }

    #[test]
    fn anchors_are_per_axis() {
        let full = BBox2D::new(0.0, 0.0, 640.0, 480.0);
        assert_eq!(anchor_tokens(&full, 640.0, 480.0, 1000).unwrap().bins, [0, 0, 999, 999]);
        let b = BBox2D::new(500.0, 250.0, 1000.0, 500.0);
        let a = anchor_tokens(&b, 1000.0, 500.0, 1000).unwrap();
        assert_eq!(a.bins, [499, 499, 999, 999]);
        assert_eq!(a.to_string(), "<bin_499><bin_499><bin_999><bin_999>");
        assert!(anchor_tokens(&b, 0.0, 500.0, 1000).is_err());
        let rel = BBox2D::with_mode(0.0, 0.0, 0.5, 0.5, CoordinateMode::Relative1);
        assert!(matches!(
            anchor_tokens(&rel, 10.0, 10.0, 1000),
            Err(GeometryError::NotAbsolute(_))
        ));
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&BBox2D::new(10.0, 20.0, 30.0, 40.0)), Point2::new(20.0, 30.0));
        assert_eq!(centroid(&BBox2D::new(0.0, 0.0, 0.0, 0.0)), Point2::new(0.0, 0.0));
        assert_eq!(centroid(&BBox2D::new(0.0, 0.0, 7.0, 3.0)), Point2::new(3.5, 1.5));
    }

    #[test]
    fn slab_examples() {
        let b = BBox2D::new(5.0, -1.0, 6.0, 1.0);
        let hit = ray_box_intersect(&ray(0.0, 0.0, 1.0, 0.0), &b).unwrap();
        assert_eq!((hit.t_entry, hit.t_exit), (5.0, 6.0));

        let inside = BBox2D::new(-1.0, -1.0, 1.0, 1.0);
        let hit = ray_box_intersect(&ray(0.0, 0.0, 1.0, 0.0), &inside).unwrap();
        assert_eq!((hit.t_entry, hit.t_exit), (0.0, 1.0));

        assert!(ray_box_intersect(&ray(0.0, 0.0, 0.0, 1.0), &b).is_none());
    }

    #[test]
    fn slab_ignores_boxes_behind_origin() {
        let b = BBox2D::new(-6.0, -1.0, -5.0, 1.0);
        assert!(ray_box_intersect(&ray(0.0, 0.0, 1.0, 0.0), &b).is_none());
        assert!(ray_box_intersect(&ray(0.0, 0.0, -1.0, 0.0), &b).is_some());
    }

    #[test]
    fn ray_normalizes_and_rejects_zero() {
        let r = ray(1.0, 1.0, 3.0, 4.0);
        assert!(r.direction.is_unit());
        assert_eq!(r.direction, Vec2::new(0.6, 0.8));
        assert_eq!(
            Ray2D::new(Point2::new(0.0, 0.0), Vec2::new(0.0, 0.0)),
            Err(GeometryError::DegenerateDirection)
        );
    }

    #[test]
    fn iou_examples() {
        let a = BBox2D::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(
            iou(&BBox2D::new(0.0, 0.0, 1.0, 1.0), &BBox2D::new(5.0, 5.0, 6.0, 6.0)),
            0.0
        );
        let b = BBox2D::new(5.0, 0.0, 15.0, 10.0);
        assert!((iou(&a, &b) - 50.0 / 150.0).abs() < 1e-12);
        let p = BBox2D::new(3.0, 3.0, 3.0, 3.0);
        assert_eq!(iou(&p, &p), 0.0);
    }

    #[test]
    fn convert_worked_example() {
        let b = BBox2D::with_mode(250.0, 500.0, 750.0, 1000.0, CoordinateMode::Relative1000);
        let abs = convert_mode(&b, CoordinateMode::Absolute, 400.0, 200.0).unwrap();
        assert_eq!(abs, BBox2D::new(100.0, 100.0, 300.0, 200.0));
        assert_eq!(convert_mode(&abs, CoordinateMode::Absolute, 400.0, 200.0).unwrap(), abs);
        assert!(convert_mode(&abs, CoordinateMode::Relative1, 0.0, 200.0).is_err());
    }

    #[test]
    fn sanitize_examples() {
        let clamped = sanitize(&BBox2D::new(-5.0, 10.0, 2000.0, 50.0), 640.0, 480.0).unwrap();
        assert_eq!(clamped, BBox2D::new(0.0, 10.0, 640.0, 50.0));
        let swapped = sanitize(&BBox2D::new(30.0, 40.0, 10.0, 20.0), 640.0, 480.0).unwrap();
        assert_eq!(swapped, BBox2D::new(10.0, 20.0, 30.0, 40.0));
        assert!(sanitize(&BBox2D::new(100.0, 100.0, 100.0, 300.0), 640.0, 480.0).is_none());
        assert!(sanitize(&BBox2D::new(700.0, 10.0, 900.0, 50.0), 640.0, 480.0).is_none());
        assert!(sanitize(&BBox2D::new(f64::NAN, 10.0, 900.0, 50.0), 640.0, 480.0).is_none());
    }

    #[test]
    fn sanitize_uses_mode_extent() {
        let b = BBox2D::with_mode(-1.0, 0.0, 1200.0, 500.0, CoordinateMode::Relative1000);
        let s = sanitize(&b, 640.0, 480.0).unwrap();
        assert_eq!(s.xyxy(), [0.0, 0.0, 1000.0, 500.0]);
    }

    #[test]
    fn mode_strings_round_trip() {
        for m in CoordinateMode::ALL {
            assert_eq!(m.as_str().parse::<CoordinateMode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("pixels".parse::<CoordinateMode>().is_err());
    }
}
