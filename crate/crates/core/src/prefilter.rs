//! Background screening: discard images crowded with existing text and blur
//! the remaining text and faces before synthesis.

use crate::boxes::{BoxKind, BoxList, DetectedBox};
use crate::poly::{self, Point};
use crate::raster::{Mask, Raster};

#[derive(Clone, Debug, PartialEq)]
pub struct PrefilterPolicy {
    /// Discard when existing text covers more than this fraction of the image.
    pub discard_coverage_threshold: f64,
    /// Fixed blur sigma; `None` uses `max(3, 0.04 * box diagonal)` per box.
    pub blur_sigma: Option<f64>,
    pub face_blur: bool,
    pub feather_px: f64,
}

impl Default for PrefilterPolicy {
    fn default() -> Self {
        Self { discard_coverage_threshold: 0.25, blur_sigma: None, face_blur: true, feather_px: 2.0 }
    }
}

impl PrefilterPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.discard_coverage_threshold > 0.0 && self.discard_coverage_threshold <= 1.0) {
            return Err(format!("discard threshold {} not in (0, 1]", self.discard_coverage_threshold));
        }
        if let Some(s) = self.blur_sigma {
            if !(s > 0.0) {
                return Err(format!("blur sigma {s} must be positive"));
            }
        }
        if !(self.feather_px >= 0.0) {
            return Err(format!("feather {} must be non-negative", self.feather_px));
        }
        Ok(())
    }

    pub fn sigma_for(&self, b: &DetectedBox) -> f64 {
        self.blur_sigma.unwrap_or_else(|| (0.04 * b.diagonal()).max(3.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Discard,
    BlurThenKeep,
}

/// Rasterized union of the existing-text boxes.
pub fn text_coverage_mask(boxes: &BoxList, width: usize, height: usize) -> Mask {
    let mut m = Mask::new(width, height);
    for b in boxes.of_kind(BoxKind::ExistingText) {
        poly::fill_into(&b.quad, &mut m);
    }
    m
}

pub fn decide_image(boxes: &BoxList, policy: &PrefilterPolicy, width: usize, height: usize) -> Decision {
    if boxes.is_empty() {
        return Decision::Keep;
    }
    let covered = text_coverage_mask(boxes, width, height).count() as f64;
    if covered / (width * height) as f64 > policy.discard_coverage_threshold {
        Decision::Discard
    } else {
        Decision::BlurThenKeep
    }
}

/// The boxes `blur_regions` will touch under `policy`.
pub fn boxes_to_blur<'a>(boxes: &'a BoxList, policy: &'a PrefilterPolicy) -> impl Iterator<Item = &'a DetectedBox> {
    boxes.boxes.iter().filter(|b| b.kind == BoxKind::ExistingText || policy.face_blur)
}

/// Pixels whose values `blur_regions` may change.
pub fn blur_footprint(boxes: &BoxList, policy: &PrefilterPolicy, width: usize, height: usize) -> Mask {
    let mut m = Mask::new(width, height);
    for b in boxes_to_blur(boxes, policy) {
        let (x0, y0, x1, y1) = feather_window(b, policy.feather_px, width, height);
        for y in y0..y1 {
            for x in x0..x1 {
                if feather_weight(b, policy.feather_px, x, y) > 0.0 {
                    m.set(x, y, true);
                }
            }
        }
    }
    m
}

fn feather_window(b: &DetectedBox, feather: f64, width: usize, height: usize) -> (usize, usize, usize, usize) {
    let (lo, hi) = poly::bounds(&b.quad);
    let x0 = (lo.x - feather - 1.0).floor().max(0.0) as usize;
    let y0 = (lo.y - feather - 1.0).floor().max(0.0) as usize;
    let x1 = ((hi.x + feather + 1.0).ceil().max(0.0) as usize).min(width);
    let y1 = ((hi.y + feather + 1.0).ceil().max(0.0) as usize).min(height);
    (x0, y0, x1, y1)
}

/// 1 inside the quad, linear ramp to 0 at `feather` pixels outside.
fn feather_weight(b: &DetectedBox, feather: f64, x: usize, y: usize) -> f64 {
    let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
    let d = poly::outside_distance(&b.quad, p);
    if d == 0.0 {
        1.0
    } else if feather > 0.0 && d < feather {
        1.0 - d / feather
    } else {
        0.0
    }
}

/// Normalized Gaussian taps truncated at `3 sigma`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    (-radius..=radius).map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp()).collect()
}

/// Separable Gaussian blur of the window `[x0, x1) x [y0, y1)` of `img`;
/// taps that fall outside the image are dropped and the rest renormalized.
fn blur_window(img: &Raster, sigma: f64, (x0, y0, x1, y1): (usize, usize, usize, usize)) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h, ch) = (img.width() as isize, img.height() as isize, img.channels());
    let ry0 = (y0 as isize - r).max(0);
    let ry1 = (y1 as isize + r).min(h);
    let ww = x1 - x0;
    // horizontal pass over the rows the vertical pass needs
    let mut horiz = vec![0.0f64; (ry1 - ry0) as usize * ww * ch];
    for y in ry0..ry1 {
        for x in x0..x1 {
            let mut acc = vec![0.0; ch];
            let mut norm = 0.0;
            for (t, &wt) in k.iter().enumerate() {
                let sx = x as isize + t as isize - r;
                if (0..w).contains(&sx) {
                    norm += wt;
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += wt * img.get(sx as usize, y as usize, c) as f64;
                    }
                }
            }
            let base = (((y - ry0) as usize) * ww + (x - x0)) * ch;
            for c in 0..ch {
                horiz[base + c] = acc[c] / norm;
            }
        }
    }
    let mut out = vec![0.0f64; (y1 - y0) * ww * ch];
    for y in y0..y1 {
        for x in 0..ww {
            let mut norm = 0.0;
            let base = ((y - y0) * ww + x) * ch;
            for (t, &wt) in k.iter().enumerate() {
                let sy = y as isize + t as isize - r;
                if (0..h).contains(&sy) {
                    norm += wt;
                    let src = (((sy - ry0) as usize) * ww + x) * ch;
                    for c in 0..ch {
                        out[base + c] += wt * horiz[src + c];
                    }
                }
            }
            for c in 0..ch {
                out[base + c] /= norm;
            }
        }
    }
    out
}

/// Blurs each box (existing text, and faces when enabled) with a feathered
/// edge. Pixels farther than `feather_px` from every box keep their exact
/// input values. Boxes are applied in list order, each blurring the input image.
pub fn blur_regions(img: &Raster, boxes: &BoxList, policy: &PrefilterPolicy) -> Raster {
    let mut out = img.clone();
    let ch = img.channels();
    for b in boxes_to_blur(boxes, policy) {
        let win = feather_window(b, policy.feather_px, img.width(), img.height());
        let (x0, y0, x1, y1) = win;
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let blurred = blur_window(img, policy.sigma_for(b), win);
        let ww = x1 - x0;
        for y in y0..y1 {
            for x in x0..x1 {
                let wgt = feather_weight(b, policy.feather_px, x, y);
                if wgt <= 0.0 {
                    continue;
                }
                let base = ((y - y0) * ww + (x - x0)) * ch;
                let px = out.pixel_mut(x, y);
                for c in 0..ch {
                    let v = (1.0 - wgt) * px[c] as f64 + wgt * blurred[base + c];
                    px[c] = v.clamp(0.0, 1.0) as f32;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(kind: BoxKind, x0: f64, y0: f64, x1: f64, y1: f64) -> DetectedBox {
        DetectedBox::rect(kind, x0, y0, x1, y1)
    }

    /// Brute-force union area: count pixel centers inside any convex quad via
    /// edge cross products.
    fn union_area_oracle(quads: &[[Point; 4]], w: usize, h: usize) -> usize {
        let inside = |q: &[Point; 4], px: f64, py: f64| {
            (0..4).all(|i| {
                let a = q[i];
                let b = q[(i + 1) % 4];
                (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x) >= 0.0
            })
        };
        let mut n = 0;
        for y in 0..h {
            for x in 0..w {
                if quads.iter().any(|q| inside(q, x as f64 + 0.5, y as f64 + 0.5)) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn empty_list_keeps() {
        assert_eq!(decide_image(&BoxList::default(), &PrefilterPolicy::default(), 10, 10), Decision::Keep);
    }

    #[test]
    fn heavy_coverage_discards() {
        let boxes = BoxList { boxes: vec![rect(BoxKind::ExistingText, 0.0, 0.0, 10.0, 3.0)] };
        assert_eq!(decide_image(&boxes, &PrefilterPolicy::default(), 10, 10), Decision::Discard);
    }

    #[test]
    fn overlapping_boxes_use_union_area() {
        // 10x10 image: two 15-px boxes overlapping in 10 px -> union 20 px
        let a = rect(BoxKind::ExistingText, 0.0, 0.0, 5.0, 3.0);
        let b = rect(BoxKind::ExistingText, 0.0, 1.0, 5.0, 4.0);
        assert_eq!(union_area_oracle(&[a.quad, b.quad], 10, 10), 20);
        let boxes = BoxList { boxes: vec![a, b] };
        assert_eq!(text_coverage_mask(&boxes, 10, 10).count(), 20);
        assert_eq!(decide_image(&boxes, &PrefilterPolicy::default(), 10, 10), Decision::BlurThenKeep);
    }

    #[test]
    fn faces_never_discard() {
        let boxes = BoxList { boxes: vec![rect(BoxKind::Face, 0.0, 0.0, 10.0, 10.0)] };
        assert_eq!(decide_image(&boxes, &PrefilterPolicy::default(), 10, 10), Decision::BlurThenKeep);
    }

    #[test]
    fn rotated_quads_match_oracle() {
        // vertices chosen so no pixel center sits exactly on an edge
        let q1 = [Point::new(3.03, 1.01), Point::new(12.07, 5.43), Point::new(9.41, 11.09), Point::new(1.02, 6.21)];
        let q2 = [Point::new(8.01, 8.03), Point::new(19.02, 9.07), Point::new(18.03, 19.01), Point::new(7.53, 18.02)];
        let boxes = BoxList {
            boxes: vec![
                DetectedBox { kind: BoxKind::ExistingText, quad: q1 },
                DetectedBox { kind: BoxKind::ExistingText, quad: q2 },
            ],
        };
        assert_eq!(text_coverage_mask(&boxes, 20, 20).count(), union_area_oracle(&[q1, q2], 20, 20));
    }

    #[test]
    fn monotone_in_boxes() {
        let policy = PrefilterPolicy::default();
        let mut boxes = BoxList::default();
        let mut last = decide_image(&boxes, &policy, 20, 20);
        for i in 0..8 {
            boxes.boxes.push(rect(BoxKind::ExistingText, i as f64 * 2.0, 0.0, i as f64 * 2.0 + 3.0, 9.0));
            let d = decide_image(&boxes, &policy, 20, 20);
            assert!(!(last == Decision::Discard && d != Decision::Discard));
            last = d;
        }
        assert_eq!(last, Decision::Discard);
    }

    #[test]
    fn blur_of_empty_list_is_identity() {
        let img = Raster::from_fn(9, 7, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f32 / 10.0);
        assert_eq!(blur_regions(&img, &BoxList::default(), &PrefilterPolicy::default()), img);
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let img = Raster::filled(20, 20, 3, 0.37);
        let boxes = BoxList { boxes: vec![rect(BoxKind::ExistingText, 2.0, 3.0, 15.0, 12.0), rect(BoxKind::Face, 0.0, 0.0, 5.0, 5.0)] };
        let out = blur_regions(&img, &boxes, &PrefilterPolicy::default());
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() <= 1e-6));
    }

    #[test]
    fn face_blur_can_be_disabled() {
        let img = Raster::from_fn(16, 16, 3, |x, y, _| ((x + y) % 2) as f32);
        let boxes = BoxList { boxes: vec![rect(BoxKind::Face, 2.0, 2.0, 12.0, 12.0)] };
        let policy = PrefilterPolicy { face_blur: false, ..Default::default() };
        assert_eq!(blur_regions(&img, &boxes, &policy), img);
    }

    /// Dense 2D convolution with the un-factored Gaussian, renormalized over
    /// in-image taps.
    fn dense_blur_oracle(img: &Raster, sigma: f64, x: usize, y: usize, c: usize) -> f64 {
        let r = (3.0 * sigma).ceil() as isize;
        let (mut acc, mut norm) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = (x as isize + dx, y as isize + dy);
                if sx < 0 || sy < 0 || sx >= img.width() as isize || sy >= img.height() as isize {
                    continue;
                }
                let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                acc += wgt * img.get(sx as usize, sy as usize, c) as f64;
                norm += wgt;
            }
        }
        acc / norm
    }

    #[test]
    fn checkerboard_blur_matches_dense_oracle() {
        let img = Raster::from_fn(32, 32, 3, |x, y, c| if (x + y) % 2 == 0 { 0.9 - 0.1 * c as f32 } else { 0.1 });
        let b = rect(BoxKind::ExistingText, 8.0, 8.0, 24.0, 24.0);
        let boxes = BoxList { boxes: vec![b.clone()] };
        let policy = PrefilterPolicy::default();
        let sigma = policy.sigma_for(&b);
        let out = blur_regions(&img, &boxes, &policy);
        let mut var_in = [0.0f64; 3];
        let mut var_out = [0.0f64; 3];
        let mut mean_in = [0.0f64; 3];
        let mut mean_out = [0.0f64; 3];
        let mut n = 0.0;
        for y in 8..24 {
            for x in 8..24 {
                n += 1.0;
                for c in 0..3 {
                    let oracle = dense_blur_oracle(&img, sigma, x, y, c);
                    assert!((out.get(x, y, c) as f64 - oracle).abs() < 1e-5, "({x},{y},{c})");
                    mean_in[c] += img.get(x, y, c) as f64;
                    mean_out[c] += out.get(x, y, c) as f64;
                }
            }
        }
        for c in 0..3 {
            mean_in[c] /= n;
            mean_out[c] /= n;
            assert!((mean_in[c] - mean_out[c]).abs() < 1e-3);
        }
        for y in 8..24 {
            for x in 8..24 {
                for c in 0..3 {
                    var_in[c] += (img.get(x, y, c) as f64 - mean_in[c]).powi(2);
                    var_out[c] += (out.get(x, y, c) as f64 - mean_out[c]).powi(2);
                }
            }
        }
        for c in 0..3 {
            assert!(var_out[c] < var_in[c]);
        }
    }

    #[test]
    fn pixels_beyond_feather_are_untouched() {
        let img = Raster::from_fn(40, 30, 3, |x, y, c| ((x * 13 + y * 7 + c * 5) % 17) as f32 / 16.0);
        let boxes = BoxList {
            boxes: vec![
                DetectedBox {
                    kind: BoxKind::ExistingText,
                    quad: [Point::new(5.0, 4.0), Point::new(20.0, 7.0), Point::new(18.0, 15.0), Point::new(4.0, 12.0)],
                },
                rect(BoxKind::Face, 25.0, 10.0, 36.0, 26.0),
            ],
        };
        let policy = PrefilterPolicy::default();
        let out = blur_regions(&img, &boxes, &policy);
        let footprint = blur_footprint(&boxes, &policy, 40, 30);
        let mut changed = 0;
        for y in 0..30 {
            for x in 0..40 {
                if !footprint.get(x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                } else if out.pixel(x, y) != img.pixel(x, y) {
                    changed += 1;
                }
                // outside the feathered union means farther than feather from every quad
                let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                let far = boxes.boxes.iter().all(|b| poly::outside_distance(&b.quad, p) >= policy.feather_px);
                if far {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        assert!(changed > 100);
    }
}
