//! Uniform placement regions from a hierarchical boundary-strength map.
//!
//! A single global threshold selects the scale: pixels with boundary strength
//! below it are grouped into 4-connected components.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::raster::{Mask, Raster};

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("boundary map must have 1 channel, found {0}")]
    WrongChannelCount(usize),
    #[error("boundary threshold {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn aspect(&self) -> f64 {
        let (w, h) = (self.width() as f64, self.height() as f64);
        w.max(h) / w.min(h)
    }
}

/// A 4-connected set of pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// Row-major linear indices, ascending.
    pixels: Vec<u32>,
    bbox: PixelRect,
    centroid: (f64, f64),
    image_width: usize,
    image_height: usize,
}

impl Region {
    /// Builds a region from sorted, de-duplicated linear pixel indices.
    pub fn from_pixels(mut pixels: Vec<u32>, image_width: usize, image_height: usize) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        assert!(!pixels.is_empty(), "region must contain a pixel");
        let mut bbox = PixelRect { x0: usize::MAX, y0: usize::MAX, x1: 0, y1: 0 };
        let (mut sx, mut sy) = (0.0, 0.0);
        for &p in &pixels {
            let (x, y) = (p as usize % image_width, p as usize / image_width);
            bbox.x0 = bbox.x0.min(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.x1 = bbox.x1.max(x + 1);
            bbox.y1 = bbox.y1.max(y + 1);
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
        }
        let n = pixels.len() as f64;
        Self { pixels, bbox, centroid: (sx / n, sy / n), image_width, image_height }
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pixels.iter().map(move |&p| (p as usize % self.image_width, p as usize / self.image_width))
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox(&self) -> PixelRect {
        self.bbox
    }

    /// Mean of the pixel centers.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.image_width && y < self.image_height && self.pixels.binary_search(&((y * self.image_width + x) as u32)).is_ok()
    }

    pub fn mask(&self) -> Mask {
        let mut m = Mask::new(self.image_width, self.image_height);
        for (x, y) in self.coords() {
            m.set(x, y, true);
        }
        m
    }

    /// The region pixel center closest to the centroid (the centroid itself
    /// when it falls inside the region).
    pub fn anchor(&self) -> (f64, f64) {
        let (cx, cy) = self.centroid;
        if self.contains(cx as usize, cy as usize) {
            return (cx, cy);
        }
        self.coords()
            .map(|(x, y)| (x as f64 + 0.5, y as f64 + 0.5))
            .min_by(|a, b| {
                let da = (a.0 - cx).powi(2) + (a.1 - cy).powi(2);
                let db = (b.0 - cx).powi(2) + (b.1 - cy).powi(2);
                da.total_cmp(&db)
            })
            .expect("non-empty region")
    }
}

/// Minimum region size, either absolute or relative to the image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MinArea {
    Pixels(usize),
    FractionOfImage(f64),
}

impl MinArea {
    pub fn pixels(self, image_area: usize) -> f64 {
        match self {
            MinArea::Pixels(n) => n as f64,
            MinArea::FractionOfImage(f) => f * image_area as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionParams {
    pub boundary_threshold: f64,
    pub min_area: MinArea,
    pub max_aspect: f64,
    pub max_text_occupancy: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            boundary_threshold: 0.35,
            min_area: MinArea::FractionOfImage(0.005),
            max_aspect: 12.0,
            max_text_occupancy: 0.05,
        }
    }
}

impl RegionParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.boundary_threshold) {
            return Err(format!("boundary threshold {} not in [0, 1]", self.boundary_threshold));
        }
        if !(self.max_aspect > 0.0) || !(self.max_text_occupancy >= 0.0) {
            return Err("region aspect and occupancy limits must be positive".into());
        }
        Ok(())
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

/// 4-connected components of `{strength < threshold}` ordered by area
/// (descending), then centroid y, then centroid x.
pub fn regions_from_boundaries(b: &Raster, p: &RegionParams) -> Result<Vec<Region>, RegionError> {
    if b.channels() != 1 {
        return Err(RegionError::WrongChannelCount(b.channels()));
    }
    if !(0.0..=1.0).contains(&p.boundary_threshold) {
        return Err(RegionError::ThresholdOutOfRange(p.boundary_threshold));
    }
    let (w, h) = (b.width(), b.height());
    let open: Vec<bool> = b.data().iter().map(|&v| (v as f64) < p.boundary_threshold).collect();
    // two-pass union-find labeling
    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !open[i] {
                continue;
            }
            if x > 0 && open[i - 1] {
                let (a, c) = (find(&mut parent, i as u32), find(&mut parent, (i - 1) as u32));
                parent[a.max(c) as usize] = a.min(c);
            }
            if y > 0 && open[i - w] {
                let (a, c) = (find(&mut parent, i as u32), find(&mut parent, (i - w) as u32));
                parent[a.max(c) as usize] = a.min(c);
            }
        }
    }
    let mut slot_of_root = vec![u32::MAX; w * h];
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for (i, _) in open.iter().enumerate().filter(|(_, &o)| o) {
        let root = find(&mut parent, i as u32) as usize;
        if slot_of_root[root] == u32::MAX {
            slot_of_root[root] = groups.len() as u32;
            groups.push(Vec::new());
        }
        groups[slot_of_root[root] as usize].push(i as u32);
    }
    let mut regions: Vec<Region> = groups.into_iter().map(|px| Region::from_pixels(px, w, h)).collect();
    regions.sort_by(region_order);
    Ok(regions)
}

fn region_order(a: &Region, b: &Region) -> Ordering {
    b.area()
        .cmp(&a.area())
        .then(a.centroid.1.total_cmp(&b.centroid.1))
        .then(a.centroid.0.total_cmp(&b.centroid.0))
        .then(a.pixels[0].cmp(&b.pixels[0]))
}

/// Fraction of the region covered by `occupancy`.
pub fn occupancy_fraction(r: &Region, occupancy: &Mask) -> f64 {
    let hits = r.coords().filter(|&(x, y)| occupancy.get(x, y)).count();
    hits as f64 / r.area() as f64
}

/// Keeps regions that are large enough, not too elongated and not already
/// covered by text. Input order is preserved.
pub fn filter_regions<'a>(rs: &'a [Region], p: &RegionParams, occupancy: Option<&Mask>) -> Vec<&'a Region> {
    rs.iter()
        .filter(|r| {
            let (w, h) = r.image_dims();
            r.area() as f64 >= p.min_area.pixels(w * h)
                && r.bbox().aspect() <= p.max_aspect
                && occupancy.is_none_or(|occ| occupancy_fraction(r, occ) <= p.max_text_occupancy)
        })
        .collect()
}

/// Area-proportional choice.
pub fn pick_region<'a, R: Rng + ?Sized>(rs: &[&'a Region], rng: &mut R) -> Option<&'a Region> {
    match rs.len() {
        0 => None,
        1 => Some(rs[0]),
        _ => {
            let total: u64 = rs.iter().map(|r| r.area() as u64).sum();
            let mut ticket = rng.gen_range(0..total);
            for r in rs {
                let a = r.area() as u64;
                if ticket < a {
                    return Some(r);
                }
                ticket -= a;
            }
            unreachable!("ticket below total area")
        }
    }
}
