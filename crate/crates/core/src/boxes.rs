//! Detected text and face boxes, exchanged as JSON:
//! `[{"kind":"existing-text","quad":[[x,y],[x,y],[x,y],[x,y]]}]`.
//!
//! Axis-aligned boxes may also be written as `{"kind":"face","rect":[x0,y0,x1,y1]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{self, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKind {
    ExistingText,
    Face,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectedBox {
    pub kind: BoxKind,
    /// Positive-orientation quadrilateral clamped to the image.
    pub quad: [Point; 4],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoxList {
    pub boxes: Vec<DetectedBox>,
}

#[derive(Debug, Error)]
pub enum BoxListError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed box list {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("box {index} in {path} has neither `quad` nor `rect`")]
    MissingShape { path: String, index: usize },
}

#[derive(Serialize, Deserialize)]
struct BoxJson {
    kind: BoxKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quad: Option<[[f64; 2]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rect: Option<[f64; 4]>,
}

impl DetectedBox {
    pub fn rect(kind: BoxKind, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { kind, quad: [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)] }
    }

    /// Clamps the vertices to `[0, width] x [0, height]` and fixes the orientation.
    pub fn normalized(mut self, width: usize, height: usize) -> Self {
        for p in &mut self.quad {
            p.x = p.x.clamp(0.0, width as f64);
            p.y = p.y.clamp(0.0, height as f64);
        }
        poly::orient_positive(&mut self.quad);
        self
    }

    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = poly::bounds(&self.quad);
        lo.dist(hi)
    }
}

impl BoxList {
    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn of_kind(&self, kind: BoxKind) -> impl Iterator<Item = &DetectedBox> {
        self.boxes.iter().filter(move |b| b.kind == kind)
    }

    pub fn normalized(self, width: usize, height: usize) -> Self {
        Self { boxes: self.boxes.into_iter().map(|b| b.normalized(width, height)).collect() }
    }

    pub fn extend(&mut self, other: BoxList) {
        self.boxes.extend(other.boxes);
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, BoxListError> {
        let raw: Vec<BoxJson> =
            serde_json::from_str(text).map_err(|source| BoxListError::Json { path: origin.to_string(), source })?;
        let mut boxes = Vec::with_capacity(raw.len());
        for (index, b) in raw.into_iter().enumerate() {
            let quad = match (b.quad, b.rect) {
                (Some(q), _) => q.map(Point::from),
                (None, Some([x0, y0, x1, y1])) => DetectedBox::rect(b.kind, x0, y0, x1, y1).quad,
                (None, None) => return Err(BoxListError::MissingShape { path: origin.to_string(), index }),
            };
            let mut quad = quad;
            poly::orient_positive(&mut quad);
            boxes.push(DetectedBox { kind: b.kind, quad });
        }
        Ok(Self { boxes })
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<BoxJson> = self
            .boxes
            .iter()
            .map(|b| BoxJson { kind: b.kind, quad: Some(b.quad.map(<[f64; 2]>::from)), rect: None })
            .collect();
        serde_json::to_string(&raw).expect("box list serializes")
    }

    pub fn load(path: &Path) -> Result<Self, BoxListError> {
        let text = fs::read_to_string(path)
            .map_err(|source| BoxListError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }
}
