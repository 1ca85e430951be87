//! Annotation records, instance masks, validation and dataset statistics.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::BitOr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet;
use crate::par::{self, Execution};
use crate::poly::{Point, Polygon};
use crate::render::TextGeometry;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {message}")]
    Image { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paragraph {
    pub id: u32,
    pub polygon: Polygon,
    pub text: String,
    pub lines: Vec<Line>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub polygon: Polygon,
    pub text: String,
    pub words: Vec<Word>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Word {
    pub polygon: Polygon,
    pub text: String,
    pub chars: Vec<CharBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharBox {
    pub polygon: Polygon,
    #[serde(rename = "char")]
    pub ch: String,
}

fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl AnnotationRecord {
    /// Builds a record from image-space geometries; ids follow input order
    /// starting at 1. Vertices are clamped to the image and rounded to two
    /// decimals.
    pub fn from_geometries(image_id: &str, width: u32, height: u32, paragraphs: &[TextGeometry]) -> Self {
        let fix = |poly: &Polygon| -> Polygon {
            poly.iter()
                .map(|p| Point::new(round2(p.x.clamp(0.0, width as f64)), round2(p.y.clamp(0.0, height as f64))))
                .collect()
        };
        let paragraphs = paragraphs
            .iter()
            .enumerate()
            .map(|(i, g)| Paragraph {
                id: i as u32 + 1,
                polygon: fix(&g.paragraph),
                text: g.text.clone(),
                lines: g
                    .lines
                    .iter()
                    .map(|l| Line {
                        polygon: fix(&l.polygon),
                        text: l.text.clone(),
                        words: l
                            .words
                            .iter()
                            .map(|w| Word {
                                polygon: fix(&w.polygon),
                                text: w.text.clone(),
                                chars: w.chars.iter().map(|c| CharBox { polygon: fix(&c.polygon), ch: c.ch.to_string() }).collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Self { image_id: image_id.to_string(), width, height, paragraphs }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("annotation serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, AnnotateError> {
        serde_json::from_str(text).map_err(|source| AnnotateError::Json { path: origin.to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, AnnotateError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnnotateError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotateError> {
        std::fs::write(path, self.to_json()).map_err(|source| AnnotateError::Io { path: path.display().to_string(), source })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DisallowedCharacter { paragraph: u32, ch: char },
    VertexOutOfBounds { paragraph: u32, x: f64, y: f64 },
    IdGap { expected: u32, found: u32 },
    TextMismatch { paragraph: u32, level: &'static str },
    TooFewVertices { paragraph: u32, level: &'static str },
    NotSingleChar { paragraph: u32, value: String },
    EmptyText { paragraph: u32, level: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DisallowedCharacter { paragraph, ch } => write!(f, "paragraph {paragraph}: disallowed character {ch:?}"),
            Violation::VertexOutOfBounds { paragraph, x, y } => write!(f, "paragraph {paragraph}: vertex ({x}, {y}) outside the image"),
            Violation::IdGap { expected, found } => write!(f, "expected paragraph id {expected}, found {found}"),
            Violation::TextMismatch { paragraph, level } => write!(f, "paragraph {paragraph}: {level} text does not match its parts"),
            Violation::TooFewVertices { paragraph, level } => write!(f, "paragraph {paragraph}: {level} polygon has too few vertices"),
            Violation::NotSingleChar { paragraph, value } => write!(f, "paragraph {paragraph}: char entry {value:?} is not one character"),
            Violation::EmptyText { paragraph, level } => write!(f, "paragraph {paragraph}: empty {level} text"),
        }
    }
}

/// Checks a record against the annotation rules. An empty list means clean.
pub fn validate_record(r: &AnnotationRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let (w, h) = (r.width as f64, r.height as f64);
    for (i, p) in r.paragraphs.iter().enumerate() {
        let expected = i as u32 + 1;
        if p.id != expected {
            out.push(Violation::IdGap { expected, found: p.id });
        }
        let id = p.id;
        let check_poly = |poly: &Polygon, min: usize, level: &'static str, out: &mut Vec<Violation>| {
            if poly.len() < min {
                out.push(Violation::TooFewVertices { paragraph: id, level });
            }
            for v in poly {
                if !(v.x >= 0.0 && v.x <= w && v.y >= 0.0 && v.y <= h) {
                    out.push(Violation::VertexOutOfBounds { paragraph: id, x: v.x, y: v.y });
                }
            }
        };
        check_poly(&p.polygon, 4, "paragraph", &mut out);
        let mut seen = BTreeSet::new();
        for ch in p.text.chars().filter(|&c| c != '\n' && !alphabet::is_allowed(c)) {
            if seen.insert(ch) {
                out.push(Violation::DisallowedCharacter { paragraph: id, ch });
            }
        }
        if p.text.trim().is_empty() {
            out.push(Violation::EmptyText { paragraph: id, level: "paragraph" });
        }
        let joined = p.lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join("\n");
        if joined != p.text {
            out.push(Violation::TextMismatch { paragraph: id, level: "paragraph" });
        }
        for l in &p.lines {
            check_poly(&l.polygon, 3, "line", &mut out);
            let joined = l.words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
            if joined != l.text {
                out.push(Violation::TextMismatch { paragraph: id, level: "line" });
            }
            for wd in &l.words {
                check_poly(&wd.polygon, 3, "word", &mut out);
                if wd.text.is_empty() {
                    out.push(Violation::EmptyText { paragraph: id, level: "word" });
                }
                let joined: String = wd.chars.iter().map(|c| c.ch.as_str()).collect();
                if joined != wd.text {
                    out.push(Violation::TextMismatch { paragraph: id, level: "word" });
                }
                for c in &wd.chars {
                    check_poly(&c.polygon, 3, "char", &mut out);
                    if c.ch.chars().count() != 1 {
                        out.push(Violation::NotSingleChar { paragraph: id, value: c.ch.clone() });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoxFlags {
    pub russian: bool,
    pub english: bool,
    pub digits: bool,
    pub punctuation: bool,
}

impl BitOr for BoxFlags {
    type Output = BoxFlags;

    fn bitor(self, o: BoxFlags) -> BoxFlags {
        BoxFlags {
            russian: self.russian || o.russian,
            english: self.english || o.english,
            digits: self.digits || o.digits,
            punctuation: self.punctuation || o.punctuation,
        }
    }
}

/// Presence-based content flags; a box may set several.
pub fn classify_box(text: &str) -> BoxFlags {
    text.chars().fold(BoxFlags::default(), |f, c| {
        f | BoxFlags {
            russian: alphabet::is_cyrillic_letter(c),
            english: alphabet::is_latin_letter(c),
            digits: c.is_ascii_digit(),
            punctuation: alphabet::is_punctuation(c),
        }
    })
}

/// One column of the statistics table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsRow {
    pub images: u64,
    pub boxes: u64,
    pub boxes_russian: u64,
    pub boxes_english: u64,
    pub boxes_digits: u64,
    pub boxes_punctuation: u64,
    pub lines: u64,
    pub words: u64,
    pub unique_words_cs: u64,
    pub unique_words_no_numbers: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsTable {
    pub training: StatsRow,
    pub test: StatsRow,
    pub joint: StatsRow,
}

impl StatsTable {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Training,
    Test,
}

/// Mergeable statistics for one subset. Counts add; unique words are kept
/// as a set so merging stays exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsAccumulator {
    counts: StatsRow,
    unique: BTreeSet<String>,
}

impl StatsAccumulator {
    pub fn add(&mut self, r: &AnnotationRecord) {
        let c = &mut self.counts;
        c.images += 1;
        for p in &r.paragraphs {
            c.boxes += 1;
            let f = classify_box(&p.text);
            c.boxes_russian += f.russian as u64;
            c.boxes_english += f.english as u64;
            c.boxes_digits += f.digits as u64;
            c.boxes_punctuation += f.punctuation as u64;
            c.lines += p.lines.len() as u64;
            for tok in p.text.split_whitespace() {
                c.words += 1;
                if !self.unique.contains(tok) {
                    self.unique.insert(tok.to_string());
                }
            }
        }
    }

    pub fn merge(mut self, other: StatsAccumulator) -> StatsAccumulator {
        let (a, b) = (&mut self.counts, other.counts);
        a.images += b.images;
        a.boxes += b.boxes;
        a.boxes_russian += b.boxes_russian;
        a.boxes_english += b.boxes_english;
        a.boxes_digits += b.boxes_digits;
        a.boxes_punctuation += b.boxes_punctuation;
        a.lines += b.lines;
        a.words += b.words;
        if self.unique.len() < other.unique.len() {
            let mut u = other.unique;
            u.extend(self.unique);
            self.unique = u;
        } else {
            self.unique.extend(other.unique);
        }
        self
    }

    pub fn finish(&self) -> StatsRow {
        StatsRow {
            unique_words_cs: self.unique.len() as u64,
            unique_words_no_numbers: self.unique.iter().filter(|t| !t.chars().any(|c| c.is_ascii_digit())).count() as u64,
            ..self.counts
        }
    }
}

/// Statistics over labeled records; `joint` is computed from the merged
/// accumulators, so its unique-word counts are exact.
pub fn compute_stats(records: &[(AnnotationRecord, Subset)], exec: Execution) -> StatsTable {
    let (train, test) = par::fold_reduce(
        exec,
        records,
        || (StatsAccumulator::default(), StatsAccumulator::default()),
        |(mut tr, mut te), (r, s)| {
            match s {
                Subset::Training => tr.add(r),
                Subset::Test => te.add(r),
            }
            (tr, te)
        },
        |(a, b), (c, d)| (a.merge(c), b.merge(d)),
    );
    let (training, test_row) = (train.finish(), test.finish());
    StatsTable { training, test: test_row, joint: train.merge(test).finish() }
}

/// Instance mask: paragraph id where the placement's alpha exceeds 0.5,
/// later placements overwrite earlier ones.
pub fn emit_mask(width: usize, height: usize, placements: &[(u16, &crate::raster::Raster)]) -> Vec<u16> {
    let mut m = vec![0u16; width * height];
    for (id, alpha) in placements {
        for (v, &a) in m.iter_mut().zip(alpha.data()) {
            if a > 0.5 {
                *v = *id;
            }
        }
    }
    m
}

pub fn save_mask_png(path: &Path, width: usize, height: usize, mask: &[u16]) -> Result<(), AnnotateError> {
    let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width as u32, height as u32, mask.to_vec())
        .ok_or_else(|| AnnotateError::Image { path: path.display().to_string(), message: "mask size mismatch".into() })?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| AnnotateError::Image { path: path.display().to_string(), message: e.to_string() })
}

/// Loads a 16-bit grayscale mask; other PNG layouts are rejected.
pub fn load_mask_png(path: &Path) -> Result<(usize, usize, Vec<u16>), AnnotateError> {
    let err = |message: String| AnnotateError::Image { path: path.display().to_string(), message };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma16(b) => Ok((b.width() as usize, b.height() as usize, b.into_raw())),
        other => Err(err(format!("expected 16-bit grayscale, found {:?}", other.color()))),
    }
}
