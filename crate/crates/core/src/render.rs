//! Font loading, text layout, sine-curve warping and alpha rasterization.
//!
//! Layout coordinates are pixels with the origin at the top-left corner of
//! the text patch. Character boxes are advance boxes: the pen advance wide,
//! and from the ascent line to the descent line tall.

use std::fs;
use std::path::{Path, PathBuf};

use ab_glyph::{point, Font, FontVec, PxScale, ScaleFont};
use rand::Rng;
use thiserror::Error;

use crate::alphabet;
use crate::corpus::TextSample;
use crate::poly::{self, Point, Polygon};
use crate::raster::Raster;

/// Padding between the character boxes and the word, line and paragraph
/// polygons. The patch margin matches it so every polygon stays in the patch.
pub const POLYGON_PAD_PX: f64 = 4.0;
/// Alpha is kept only within this distance of a character box.
pub const ALPHA_DILATION_PX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("no usable fonts in {0}")]
    NoUsableFonts(String),
    #[error("cannot read fonts from {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("font has no glyph for {0:?}")]
    UnsupportedGlyph(char),
    #[error("invalid size {0} px")]
    InvalidSize(f64),
    #[error("invalid warp: {0}")]
    InvalidWarp(String),
}

pub struct FontFace {
    pub name: String,
    font: FontVec,
}

impl std::fmt::Debug for FontFace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FontFace").field("name", &self.name).finish()
    }
}

impl FontFace {
    pub fn from_bytes(name: impl Into<String>, data: Vec<u8>) -> Option<Self> {
        FontVec::try_from_vec(data).ok().map(|font| Self { name: name.into(), font })
    }

    pub fn missing_glyphs(&self) -> Vec<char> {
        alphabet::required_glyphs().filter(|&c| self.font.glyph_id(c).0 == 0).collect()
    }
}

#[derive(Debug)]
pub struct FontSet {
    fonts: Vec<FontFace>,
}

/// A font file that was not loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct FontWarning {
    pub path: PathBuf,
    pub reason: String,
}

impl FontSet {
    pub fn new(fonts: Vec<FontFace>) -> Self {
        Self { fonts }
    }

    pub fn len(&self) -> usize {
        self.fonts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fonts.is_empty()
    }

    pub fn get(&self, i: usize) -> &FontFace {
        &self.fonts[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FontFace> {
        self.fonts.iter()
    }
}

/// Loads every `.ttf`/`.otf` file in `dir` (sorted by file name) and keeps
/// the fonts covering the whole required alphabet.
pub fn load_fonts(dir: &Path) -> Result<(FontSet, Vec<FontWarning>), RenderError> {
    let io = |source| RenderError::Io { path: dir.display().to_string(), source };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ttf") || e.eq_ignore_ascii_case("otf"))
        })
        .collect();
    paths.sort();
    let mut fonts = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        let data = fs::read(&path).map_err(io)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("font").to_string();
        let Some(face) = FontFace::from_bytes(name, data) else {
            warnings.push(FontWarning { path, reason: "unparseable font file".into() });
            continue;
        };
        let missing = face.missing_glyphs();
        if missing.is_empty() {
            fonts.push(face);
        } else {
            let list: String = missing.iter().collect();
            log::warn!("rejecting {}: missing {list}", path.display());
            warnings.push(FontWarning { path, reason: format!("missing glyphs: {list}") });
        }
    }
    if fonts.is_empty() {
        return Err(RenderError::NoUsableFonts(dir.display().to_string()));
    }
    Ok((FontSet { fonts }, warnings))
}

/// Multipliers on glyph advance, space advance and line height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spacing {
    pub letter: f64,
    pub word: f64,
    pub line: f64,
}

impl Default for Spacing {
    fn default() -> Self {
        Self { letter: 1.0, word: 1.0, line: 1.0 }
    }
}

/// Vertical displacement `amplitude * sin(2 pi x / period + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SineWarpParams {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl SineWarpParams {
    pub fn new(amplitude: f64, period: f64, phase: f64) -> Result<Self, RenderError> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) || !(period > 0.0 && period.is_finite()) || !phase.is_finite() {
            return Err(RenderError::InvalidWarp(format!("A={amplitude} period={period} phase={phase}")));
        }
        Ok(Self { amplitude, period, phase })
    }

    #[inline]
    pub fn displacement(&self, x: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * x / self.period + self.phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaidChar {
    pub ch: char,
    /// Pen position on the baseline before warping.
    pub origin: Point,
    pub quad: [Point; 4],
    /// False for symbols that are drawn but left out of annotations.
    pub annotated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordSpan {
    pub chars: std::ops::Range<usize>,
    pub polygon: Polygon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSpan {
    pub words: std::ops::Range<usize>,
    pub polygon: Polygon,
}

/// Patch extent in layout coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PatchRect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn corners(&self) -> [Point; 4] {
        [Point::new(self.x0, self.y0), Point::new(self.x1, self.y0), Point::new(self.x1, self.y1), Point::new(self.x0, self.y1)]
    }

    /// Raster size covering the rect.
    pub fn pixel_dims(&self) -> (usize, usize) {
        ((self.width().ceil() as usize).max(1), (self.height().ceil() as usize).max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlyphLayout {
    pub chars: Vec<LaidChar>,
    pub words: Vec<WordSpan>,
    pub lines: Vec<LineSpan>,
    /// Convex hull of the word polygons.
    pub paragraph: Polygon,
    pub bounds: PatchRect,
    pub baselines: Vec<f64>,
    pub size_px: f64,
    pub line_height: f64,
    /// Warps applied so far; displacements add up.
    pub warps: Vec<SineWarpParams>,
    unwarped_height: f64,
}

/// Annotation-facing geometry of one paragraph.
#[derive(Clone, Debug, PartialEq)]
pub struct TextGeometry {
    pub paragraph: Polygon,
    pub text: String,
    pub lines: Vec<LineGeometry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineGeometry {
    pub polygon: Polygon,
    pub text: String,
    pub words: Vec<WordGeometry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordGeometry {
    pub polygon: Polygon,
    pub text: String,
    pub chars: Vec<CharGeometry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharGeometry {
    pub polygon: Polygon,
    pub ch: char,
}

impl TextGeometry {
    /// Applies `f` to every vertex.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> TextGeometry {
        let m = |p: &Polygon| p.iter().map(|&q| f(q)).collect::<Polygon>();
        TextGeometry {
            paragraph: m(&self.paragraph),
            text: self.text.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| LineGeometry {
                    polygon: m(&l.polygon),
                    text: l.text.clone(),
                    words: l
                        .words
                        .iter()
                        .map(|w| WordGeometry {
                            polygon: m(&w.polygon),
                            text: w.text.clone(),
                            chars: w.chars.iter().map(|c| CharGeometry { polygon: m(&c.polygon), ch: c.ch }).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn all_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.paragraph.iter().copied().chain(self.lines.iter().flat_map(|l| {
            l.polygon.iter().copied().chain(l.words.iter().flat_map(|w| {
                w.polygon.iter().copied().chain(w.chars.iter().flat_map(|c| c.polygon.iter().copied()))
            }))
        }))
    }
}

/// Top chain left to right, bottom chain right to left.
fn band_polygon(xs: &[f64], top: f64, bottom: f64) -> Polygon {
    xs.iter().map(|&x| Point::new(x, top)).chain(xs.iter().rev().map(|&x| Point::new(x, bottom))).collect()
}

fn rect_quad(x0: f64, y0: f64, x1: f64, y1: f64) -> [Point; 4] {
    [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
}

/// Left-aligned layout of `sample` in one font at `size_px`.
pub fn layout_text(sample: &TextSample, face: &FontFace, size_px: f64, spacing: &Spacing) -> Result<GlyphLayout, RenderError> {
    if !(size_px > 0.0 && size_px.is_finite()) {
        return Err(RenderError::InvalidSize(size_px));
    }
    let scale = PxScale::from(size_px as f32);
    let scaled = face.font.as_scaled(scale);
    let ascent = scaled.ascent() as f64;
    let descent = scaled.descent() as f64;
    let line_height = ascent - descent;
    let line_step = (line_height + scaled.line_gap() as f64) * spacing.line;
    let space_adv = scaled.h_advance(face.font.glyph_id(' ')) as f64 * spacing.word;
    let margin = POLYGON_PAD_PX;
    let pad = POLYGON_PAD_PX;

    let mut chars = Vec::new();
    let mut words = Vec::new();
    let mut lines = Vec::new();
    let mut baselines = Vec::new();
    let mut right = margin;
    for (k, line) in sample.lines.iter().enumerate() {
        let baseline = margin + ascent + k as f64 * line_step;
        let (top, bottom) = (baseline - ascent, baseline - descent);
        baselines.push(baseline);
        let mut pen = margin;
        let first_word = words.len();
        let mut line_xs: Vec<f64> = Vec::new();
        for word in line.iter().flat_map(|t| t.text.split_whitespace()) {
            let first_char = chars.len();
            let mut xs = vec![pen - pad, pen];
            for ch in word.chars() {
                let id = face.font.glyph_id(ch);
                if id.0 == 0 {
                    return Err(RenderError::UnsupportedGlyph(ch));
                }
                let adv = scaled.h_advance(id) as f64 * spacing.letter;
                chars.push(LaidChar {
                    ch,
                    origin: Point::new(pen, baseline),
                    quad: rect_quad(pen, top, pen + adv, bottom),
                    annotated: alphabet::is_allowed(ch),
                });
                pen += adv;
                xs.push(pen);
            }
            xs.push(pen + pad);
            right = right.max(pen);
            line_xs.extend_from_slice(&xs);
            words.push(WordSpan { chars: first_char..chars.len(), polygon: band_polygon(&xs, top - pad, bottom + pad) });
            pen += space_adv;
        }
        line_xs.sort_by(f64::total_cmp);
        line_xs.dedup();
        // words share the line's vertex columns so a warped word never pokes
        // out of its line between vertices
        for word in &mut words[first_word..] {
            let (lo, hi) = (word.polygon[0].x, word.polygon[word.polygon.len() / 2 - 1].x);
            let xs: Vec<f64> = line_xs.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
            word.polygon = band_polygon(&xs, top - pad, bottom + pad);
        }
        let polygon = if line_xs.is_empty() { Vec::new() } else { band_polygon(&line_xs, top - pad, bottom + pad) };
        lines.push(LineSpan { words: first_word..words.len(), polygon });
    }
    let bottom = baselines.last().map_or(2.0 * margin, |b| b - descent + margin);
    let bounds = PatchRect { x0: 0.0, y0: 0.0, x1: right + margin, y1: bottom };
    let mut layout = GlyphLayout {
        chars,
        words,
        lines,
        paragraph: Vec::new(),
        bounds,
        baselines,
        size_px,
        line_height,
        warps: Vec::new(),
        unwarped_height: bounds.y1,
    };
    layout.paragraph = layout.hull_of_words();
    Ok(layout)
}

impl GlyphLayout {
    fn hull_of_words(&self) -> Polygon {
        let pts: Vec<Point> = self.words.iter().flat_map(|w| w.polygon.iter().copied()).collect();
        poly::convex_hull(&pts)
    }

    /// Total vertical displacement at `x`.
    pub fn displacement(&self, x: f64) -> f64 {
        self.warps.iter().map(|w| w.displacement(x)).sum()
    }

    /// Annotation text: lines joined by `\n`, words by a space.
    pub fn text(&self) -> String {
        self.geometry().text
    }

    /// Hierarchical polygons for annotation. Ignored symbols are dropped from
    /// the char lists; collinear vertices are removed.
    pub fn geometry(&self) -> TextGeometry {
        let simplify = |p: &Polygon| poly::simplify_collinear(p, 1e-9);
        let mut lines = Vec::new();
        for l in &self.lines {
            let words: Vec<WordGeometry> = self.words[l.words.clone()]
                .iter()
                .map(|w| {
                    let chars: Vec<CharGeometry> = self.chars[w.chars.clone()]
                        .iter()
                        .filter(|c| c.annotated)
                        .map(|c| CharGeometry { polygon: c.quad.to_vec(), ch: c.ch })
                        .collect();
                    WordGeometry { polygon: simplify(&w.polygon), text: chars.iter().map(|c| c.ch).collect(), chars }
                })
                .filter(|w| !w.chars.is_empty())
                .collect();
            if words.is_empty() {
                continue;
            }
            let text = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
            lines.push(LineGeometry { polygon: simplify(&l.polygon), text, words });
        }
        let text = lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join("\n");
        TextGeometry { paragraph: self.paragraph.clone(), text, lines }
    }
}

/// Moves every vertex `(x, y)` to `(x, y + A sin(2 pi x / period + phase))`.
/// The patch grows by `A` above and below; the paragraph hull is rebuilt from
/// the warped word polygons.
pub fn apply_sine_warp(g: &GlyphLayout, w: SineWarpParams) -> Result<GlyphLayout, RenderError> {
    if w.amplitude > 0.5 * g.line_height {
        return Err(RenderError::InvalidWarp(format!(
            "amplitude {} exceeds half the line height {}",
            w.amplitude, g.line_height
        )));
    }
    let mv = |p: &mut Point| p.y += w.displacement(p.x);
    let mut out = g.clone();
    for c in &mut out.chars {
        c.quad.iter_mut().for_each(mv);
    }
    for word in &mut out.words {
        word.polygon.iter_mut().for_each(mv);
    }
    for line in &mut out.lines {
        line.polygon.iter_mut().for_each(mv);
    }
    out.bounds.y0 -= w.amplitude;
    out.bounds.y1 += w.amplitude;
    out.warps.push(w);
    out.paragraph = out.hull_of_words();
    Ok(out)
}

/// Rasterized text: constant color plus anti-aliased coverage. Pixel `(i, j)`
/// covers layout point `(layout.bounds.x0 + i, layout.bounds.y0 + j)`.
#[derive(Clone, Debug)]
pub struct TextPatch {
    pub color: Raster,
    pub alpha: Raster,
    pub layout: GlyphLayout,
}

pub fn rasterize(g: &GlyphLayout, face: &FontFace, color: [f32; 3]) -> TextPatch {
    let (w, h) = g.bounds.pixel_dims();
    let uh = (g.unwarped_height.ceil() as usize).max(1);
    // unwarped coverage; layout x = column, layout y = row (origin 0, 0)
    let mut flat = vec![0.0f32; w * uh];
    let scale = PxScale::from(g.size_px as f32);
    for c in &g.chars {
        let glyph = face.font.glyph_id(c.ch).with_scale_and_position(scale, point(c.origin.x as f32, c.origin.y as f32));
        let Some(outlined) = face.font.outline_glyph(glyph) else { continue };
        let b = outlined.px_bounds();
        outlined.draw(|x, y, cov| {
            let px = b.min.x as i64 + x as i64;
            let py = b.min.y as i64 + y as i64;
            if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < uh {
                let v = &mut flat[py as usize * w + px as usize];
                *v = (*v + cov).min(1.0);
            }
        });
    }
    let mut alpha = vec![0.0f32; w * h];
    let sample_flat = |col: usize, y: f64| -> f32 {
        let fy = y - 0.5;
        let r0 = fy.floor();
        let t = (fy - r0) as f32;
        let at = |r: f64| if r < 0.0 || r >= uh as f64 { 0.0 } else { flat[r as usize * w + col] };
        at(r0) * (1.0 - t) + at(r0 + 1.0) * t
    };
    for i in 0..w {
        let x = g.bounds.x0 + i as f64 + 0.5;
        let d = g.displacement(x);
        for j in 0..h {
            let y = g.bounds.y0 + j as f64 + 0.5;
            alpha[j * w + i] = if g.warps.is_empty() && g.bounds.y0 == 0.0 {
                if j < uh { flat[j * w + i] } else { 0.0 }
            } else {
                sample_flat(i, y - d)
            };
        }
    }
    // keep coverage only near character boxes
    let mut keep = vec![false; w * h];
    for c in &g.chars {
        let (lo, hi) = poly::bounds(&c.quad);
        let i0 = ((lo.x - ALPHA_DILATION_PX - g.bounds.x0).floor().max(0.0)) as usize;
        let i1 = ((hi.x + ALPHA_DILATION_PX - g.bounds.x0).ceil().max(0.0) as usize).min(w);
        let j0 = ((lo.y - ALPHA_DILATION_PX - g.bounds.y0).floor().max(0.0)) as usize;
        let j1 = ((hi.y + ALPHA_DILATION_PX - g.bounds.y0).ceil().max(0.0) as usize).min(h);
        for j in j0..j1 {
            for i in i0..i1 {
                let p = Point::new(g.bounds.x0 + i as f64 + 0.5, g.bounds.y0 + j as f64 + 0.5);
                if !keep[j * w + i] && poly::outside_distance(&c.quad, p) <= ALPHA_DILATION_PX {
                    keep[j * w + i] = true;
                }
            }
        }
    }
    for (a, k) in alpha.iter_mut().zip(&keep) {
        if !k {
            *a = 0.0;
        }
        *a = a.clamp(0.0, 1.0);
    }
    let color = Raster::from_fn(w, h, 3, |_, _, c| color[c].clamp(0.0, 1.0));
    TextPatch { color, alpha: Raster::new(w, h, 1, alpha).expect("patch dims"), layout: g.clone() }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn lab_f(t: f64) -> f64 {
    if t > 216.0 / 24389.0 {
        t.cbrt()
    } else {
        (24389.0 / 27.0 * t + 16.0) / 116.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t.powi(3) > 216.0 / 24389.0 {
        t.powi(3)
    } else {
        (116.0 * t - 16.0) * 27.0 / 24389.0
    }
}

/// sRGB in `[0, 1]` to CIE L*a*b* (D65).
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (fx, fy, fz) = (lab_f(x / WHITE[0]), lab_f(y / WHITE[1]), lab_f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let (x, y, z) = (lab_f_inv(fx) * WHITE[0], lab_f_inv(fy) * WHITE[1], lab_f_inv(fz) * WHITE[2]);
    let r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    let g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    let b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    [r, g, b].map(|c| linear_to_srgb(c.clamp(0.0, 1.0)).clamp(0.0, 1.0))
}

/// Text color from the mean background color: L* moved to the opposite half
/// of the lightness range, chroma hue rotated by up to 20 degrees.
pub fn contrast_color<R: Rng + ?Sized>(mean: [f32; 3], rng: &mut R) -> [f32; 3] {
    let [l, a, b] = rgb_to_lab(mean.map(|v| v as f64));
    let flipped = 100.0 - l;
    let target = if l >= 50.0 { flipped.min(40.0) } else { flipped.max(60.0) };
    let target = (target + rng.gen_range(-5.0..5.0)).clamp(0.0, 100.0);
    let angle = rng.gen_range(-20.0f64..20.0).to_radians();
    let (s, c) = angle.sin_cos();
    let rgb = lab_to_rgb([target, a * c - b * s, a * s + b * c]);
    rgb.map(|v| v as f32)
}
