//! Geometric primitives shared by the whole crate: axis-aligned bounding
//! boxes, the centre/area/ratio observation parameterization, and IoU.
//!
//! Coordinates follow the image convention: origin at the top-left corner,
//! y grows downward. Boxes are stored as (left, top, width, height) with
//! continuous pixel values; corners are derived on demand.

use thiserror::Error;

/// Raised when a centre/area/ratio state cannot be converted back into a
/// box because the area or aspect ratio is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("degenerate state: area={area}, ratio={ratio} (both must be positive)")]
pub struct DegenerateState {
    pub area: f64,
    pub ratio: f64,
}

/// Axis-aligned box in pixel coordinates: (left, top, width, height).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// True when both sides are strictly positive.
    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Centre point (x + w/2, y + h/2).
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Centre/area/aspect-ratio parameterization of this box.
    pub fn to_observation(&self) -> Observation {
        Observation {
            cx: self.x + self.w / 2.0,
            cy: self.y + self.h / 2.0,
            s: self.w * self.h,
            r: self.w / self.h,
        }
    }

    /// Inverse of [`BoundingBox::to_observation`]: w = sqrt(s*r),
    /// h = sqrt(s/r). Fails if the area or ratio is not positive.
    pub fn from_observation(o: &Observation) -> Result<Self, DegenerateState> {
        if o.s <= 0.0 || o.r <= 0.0 {
            return Err(DegenerateState {
                area: o.s,
                ratio: o.r,
            });
        }
        let w = (o.s * o.r).sqrt();
        let h = (o.s / o.r).sqrt();
        Ok(Self {
            x: o.cx - w / 2.0,
            y: o.cy - h / 2.0,
            w,
            h,
        })
    }
}

/// What a detector can see of an object in a single frame: centre
/// coordinate, area and width/height ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Centre x in pixels.
    pub cx: f64,
    /// Centre y in pixels.
    pub cy: f64,
    /// Area in pixels².
    pub s: f64,
    /// Width divided by height.
    pub r: f64,
}

impl Observation {
    pub fn new(cx: f64, cy: f64, s: f64, r: f64) -> Self {
        Self { cx, cy, s, r }
    }

    pub fn to_box(&self) -> Result<BoundingBox, DegenerateState> {
        BoundingBox::from_observation(self)
    }
}

/// One detector output row: frame index (1-based), box and confidence on
/// the detector's native scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(frame: u64, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
        }
    }
}

/// Intersection over union (Jaccard index) of two boxes. Symmetric, in
/// [0, 1], and 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}
