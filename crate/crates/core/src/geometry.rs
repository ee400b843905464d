//! Page geometry: absolute rectangles and page-relative boxes.
//!
//! Absolute rectangles use the bundle's page units with the origin at the
//! top-left corner and y growing downward. [`NormalizedBox`] expresses the
//! same rectangle as fractions of the page size so overlays stay aligned at
//! any zoom level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::PageInfo;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("page {page} has non-positive dimensions {width}x{height}")]
    DegeneratePage { page: usize, width: f64, height: f64 },
    #[error("rectangle has non-finite or negative extent: {0:?}")]
    InvalidRect(Rect),
}

/// Absolute rectangle `(x, y, w, h)`; serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w >= 0.0 && self.h >= 0.0
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Rect) -> Rect {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        Rect::new(x, y, self.right().max(other.right()) - x, self.bottom().max(other.bottom()) - y)
    }

    pub fn union_all<'a>(rects: impl IntoIterator<Item = &'a Rect>) -> Option<Rect> {
        rects.into_iter().fold(None, |acc: Option<Rect>, r| Some(acc.map_or(*r, |a| a.union(r))))
    }
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

/// Rectangle expressed as fractions of its page's width and height.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct NormalizedBox {
    pub page: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl NormalizedBox {
    /// `x + w` and `y + h` are compared with a 1e-12 slack: the decimal
    /// fractions written to schema files do not always sum exactly in binary.
    pub fn in_bounds(&self) -> bool {
        const SLACK: f64 = 1e-12;
        self.x >= 0.0
            && self.y >= 0.0
            && self.w >= 0.0
            && self.h >= 0.0
            && self.x + self.w <= 1.0 + SLACK
            && self.y + self.h <= 1.0 + SLACK
    }

    /// Rounds every fraction to the 6 decimals used in serialized schemas,
    /// keeping `x + w` and `y + h` within the page.
    pub fn quantized(&self) -> NormalizedBox {
        let x = quantize6(self.x).clamp(0.0, 1.0);
        let y = quantize6(self.y).clamp(0.0, 1.0);
        let w = quantize6(self.w).clamp(0.0, quantize6(1.0 - x));
        let h = quantize6(self.h).clamp(0.0, quantize6(1.0 - y));
        NormalizedBox { page: self.page, x, y, w, h }
    }
}

impl Serialize for NormalizedBox {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("NormalizedBox", 5)?;
        s.serialize_field("page", &self.page)?;
        s.serialize_field("x", &crate::schema::Fixed6(self.x))?;
        s.serialize_field("y", &crate::schema::Fixed6(self.y))?;
        s.serialize_field("w", &crate::schema::Fixed6(self.w))?;
        s.serialize_field("h", &crate::schema::Fixed6(self.h))?;
        s.end()
    }
}

pub fn quantize6(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    // normalise -0.0 so serialization is stable
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Converts an absolute rectangle to page fractions.
///
/// Rectangles that spill over the page edge are clamped to the page and a
/// warning is logged; a page with a non-positive dimension is an error.
pub fn normalize_box(rect: &Rect, page: &PageInfo) -> Result<NormalizedBox, GeometryError> {
    if !(page.width > 0.0 && page.height > 0.0) || !page.width.is_finite() || !page.height.is_finite() {
        return Err(GeometryError::DegeneratePage {
            page: page.index,
            width: page.width,
            height: page.height,
        });
    }
    if !rect.is_valid() {
        return Err(GeometryError::InvalidRect(*rect));
    }
    let x0 = rect.x.clamp(0.0, page.width);
    let y0 = rect.y.clamp(0.0, page.height);
    let x1 = rect.right().clamp(0.0, page.width);
    let y1 = rect.bottom().clamp(0.0, page.height);
    if x0 != rect.x || y0 != rect.y || x1 != rect.right() || y1 != rect.bottom() {
        tracing::warn!(page = page.index, ?rect, "rectangle exceeds page bounds, clamped");
    }
    let nb = NormalizedBox {
        page: page.index,
        x: x0 / page.width,
        y: y0 / page.height,
        w: (x1 - x0) / page.width,
        h: (y1 - y0) / page.height,
    };
    // x0/W + (x1-x0)/W can round one ulp past 1.0
    Ok(NormalizedBox {
        w: nb.w.min(1.0 - nb.x).max(0.0),
        h: nb.h.min(1.0 - nb.y).max(0.0),
        ..nb
    })
}

/// Inverse of [`normalize_box`] for in-page rectangles.
pub fn denormalize(nb: &NormalizedBox, page: &PageInfo) -> Rect {
    Rect::new(nb.x * page.width, nb.y * page.height, nb.w * page.width, nb.h * page.height)
}
