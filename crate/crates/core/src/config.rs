//! Pipeline configuration: a flat `key = value` text format with dotted
//! section prefixes, e.g. `region.boundary_threshold = 0.35`. Lines starting
//! with `#` are comments. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::blend::{BlendMode, SolverConfig};
use crate::corpus::{CorpusConfig, SampleLayout};
use crate::geometry::{HomographyConfig, PlaneFitConfig};
use crate::prefilter::PrefilterPolicy;
use crate::regions::{MinArea, RegionParams};
use crate::render::Spacing;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}` points to missing path {path}")]
    MissingPath { key: String, path: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compositing {
    Poisson(BlendMode),
    Alpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub images_dir: PathBuf,
    pub maps_dir: PathBuf,
    pub fonts_dir: PathBuf,
    pub words: PathBuf,
    pub blocklist: Option<PathBuf>,
    pub surnames: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    /// Inclusive range of placements attempted per image.
    pub placements: (usize, usize),
    pub retries: usize,
    pub train_fraction: f64,
    pub prefilter: PrefilterPolicy,
    pub regions: RegionParams,
    pub plane: PlaneFitConfig,
    pub homography: HomographyConfig,
    /// Projected patch area as a fraction of the region area.
    pub area_fraction: (f64, f64),
    /// Each retry shrinks the area fraction by this factor.
    pub retry_shrink: f64,
    pub min_coverage: f64,
    pub size_px: (f64, f64),
    pub spacing: Spacing,
    pub warp_prob: f64,
    /// Amplitude as a fraction of the line height.
    pub warp_amplitude: (f64, f64),
    /// Period in multiples of the font size.
    pub warp_period: (f64, f64),
    pub text: SampleLayout,
    pub corpus: CorpusConfig,
    pub compositing: Compositing,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            images_dir: "images".into(),
            maps_dir: "maps".into(),
            fonts_dir: "fonts".into(),
            words: "words.txt".into(),
            blocklist: None,
            surnames: None,
            seed: 0,
            workers: 1,
            placements: (1, 4),
            retries: 3,
            train_fraction: 0.946,
            prefilter: PrefilterPolicy::default(),
            regions: RegionParams::default(),
            plane: PlaneFitConfig::default(),
            homography: HomographyConfig::default(),
            area_fraction: (0.2, 0.7),
            retry_shrink: 0.7,
            min_coverage: 0.98,
            size_px: (12.0, 96.0),
            spacing: Spacing { letter: 1.0, word: 1.0, line: 1.2 },
            warp_prob: 0.7,
            warp_amplitude: (0.0, 0.15),
            warp_period: (6.0, 16.0),
            text: SampleLayout::default(),
            corpus: CorpusConfig::default(),
            compositing: Compositing::Poisson(BlendMode::Mixed),
            solver: SolverConfig::default(),
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, target: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((_, v)) = self.take(key) {
            *target = v.parse().map_err(|e: T::Err| ConfigError::Invalid { key: key.into(), message: e.to_string() })?;
        }
        Ok(())
    }

    fn bool(&mut self, key: &str, target: &mut bool) -> Result<(), ConfigError> {
        if let Some((_, v)) = self.take(key) {
            *target = match v.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(ConfigError::Invalid { key: key.into(), message: format!("expected a boolean, found {v:?}") }),
            };
        }
        Ok(())
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

fn range_ok<T: PartialOrd + Copy + std::fmt::Display>(key: &str, r: (T, T)) -> Result<(), ConfigError> {
    if r.0 > r.1 {
        return Err(invalid(key, format!("empty range {}..{}", r.0, r.1)));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, message: format!("expected `key = value`, found {line:?}") });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
            }
            if map.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(ConfigError::Syntax { line: i + 1, message: format!("duplicate key `{k}`") });
            }
        }
        let mut e = Entries { map };
        let mut c = PipelineConfig::default();
        // Path::join keeps absolute values as they are
        let path = |e: &mut Entries, key: &str| e.take(key).map(|(_, v)| PathBuf::from(v));
        for (key, slot) in [
            ("paths.images", &mut c.images_dir),
            ("paths.maps", &mut c.maps_dir),
            ("paths.fonts", &mut c.fonts_dir),
            ("paths.words", &mut c.words),
        ] {
            *slot = base.join(path(&mut e, key).unwrap_or_else(|| slot.clone()));
        }
        c.blocklist = path(&mut e, "paths.blocklist").map(|p| base.join(p));
        c.surnames = path(&mut e, "paths.surnames").map(|p| base.join(p));

        e.parse("seed", &mut c.seed)?;
        e.parse("workers", &mut c.workers)?;
        e.parse("placement.min", &mut c.placements.0)?;
        e.parse("placement.max", &mut c.placements.1)?;
        e.parse("placement.retries", &mut c.retries)?;
        e.parse("split.train_fraction", &mut c.train_fraction)?;

        e.parse("prefilter.discard_coverage", &mut c.prefilter.discard_coverage_threshold)?;
        if let Some((_, v)) = e.take("prefilter.blur_sigma") {
            c.prefilter.blur_sigma = match v.as_str() {
                "auto" => None,
                s => Some(s.parse().map_err(|e: std::num::ParseFloatError| invalid("prefilter.blur_sigma", e.to_string()))?),
            };
        }
        e.bool("prefilter.face_blur", &mut c.prefilter.face_blur)?;
        e.parse("prefilter.feather_px", &mut c.prefilter.feather_px)?;

        e.parse("region.boundary_threshold", &mut c.regions.boundary_threshold)?;
        if let Some((_, v)) = e.take("region.min_area_fraction") {
            c.regions.min_area = MinArea::FractionOfImage(v.parse().map_err(|e: std::num::ParseFloatError| invalid("region.min_area_fraction", e.to_string()))?);
        }
        if let Some((_, v)) = e.take("region.min_area_px") {
            c.regions.min_area = MinArea::Pixels(v.parse().map_err(|e: std::num::ParseIntError| invalid("region.min_area_px", e.to_string()))?);
        }
        e.parse("region.max_aspect", &mut c.regions.max_aspect)?;
        e.parse("region.max_text_occupancy", &mut c.regions.max_text_occupancy)?;

        e.parse("geometry.focal_factor", &mut c.plane.focal_factor)?;
        c.homography.focal_factor = c.plane.focal_factor;
        e.parse("geometry.ransac_iters", &mut c.plane.ransac_iters)?;
        e.parse("geometry.inlier_tol", &mut c.plane.inlier_tol)?;
        e.parse("geometry.min_normal_z", &mut c.homography.min_normal_z)?;
        e.parse("geometry.area_fraction_min", &mut c.area_fraction.0)?;
        e.parse("geometry.area_fraction_max", &mut c.area_fraction.1)?;
        e.parse("geometry.retry_shrink", &mut c.retry_shrink)?;
        e.parse("geometry.min_coverage", &mut c.min_coverage)?;

        e.parse("render.size_min", &mut c.size_px.0)?;
        e.parse("render.size_max", &mut c.size_px.1)?;
        e.parse("render.letter_spacing", &mut c.spacing.letter)?;
        e.parse("render.word_spacing", &mut c.spacing.word)?;
        e.parse("render.line_spacing", &mut c.spacing.line)?;
        e.parse("render.warp_prob", &mut c.warp_prob)?;
        e.parse("render.warp_amplitude_min", &mut c.warp_amplitude.0)?;
        e.parse("render.warp_amplitude_max", &mut c.warp_amplitude.1)?;
        e.parse("render.warp_period_min", &mut c.warp_period.0)?;
        e.parse("render.warp_period_max", &mut c.warp_period.1)?;

        e.parse("text.max_lines", &mut c.text.max_lines)?;
        e.parse("text.words_per_line_min", &mut c.text.words_per_line.0)?;
        e.parse("text.words_per_line_max", &mut c.text.words_per_line.1)?;
        e.parse("text.punctuation_prob", &mut c.text.punctuation_prob)?;

        e.parse("corpus.word_weight", &mut c.corpus.word_weight)?;
        e.parse("corpus.surname_weight", &mut c.corpus.surname_weight)?;
        for (key, slot) in [("corpus.number_weight", &mut c.corpus.number_weight), ("corpus.phone_weight", &mut c.corpus.phone_weight)] {
            if let Some((_, v)) = e.take(key) {
                *slot = match v.as_str() {
                    "off" => None,
                    s => Some(s.parse().map_err(|e: std::num::ParseFloatError| invalid(key, e.to_string()))?),
                };
            }
        }
        e.parse("corpus.digits_min", &mut c.corpus.digits_len.0)?;
        e.parse("corpus.digits_max", &mut c.corpus.digits_len.1)?;

        if let Some((_, v)) = e.take("blend.mode") {
            c.compositing = match v.as_str() {
                "mixed" => Compositing::Poisson(BlendMode::Mixed),
                "replace" => Compositing::Poisson(BlendMode::Replace),
                "alpha" => Compositing::Alpha,
                other => return Err(invalid("blend.mode", format!("expected mixed, replace or alpha, found {other:?}"))),
            };
        }
        e.parse("blend.tolerance", &mut c.solver.tolerance)?;
        if let Some((_, v)) = e.take("blend.max_iters") {
            c.solver.max_iters = Some(v.parse().map_err(|e: std::num::ParseIntError| invalid("blend.max_iters", e.to_string()))?);
        }

        if let Some((key, (line, _))) = e.map.into_iter().next() {
            return Err(ConfigError::UnknownKey { line, key });
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        range_ok("placement", self.placements)?;
        if self.placements.1 == 0 || self.placements.1 > u16::MAX as usize {
            return Err(invalid("placement.max", "must be in 1..=65535"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("split.train_fraction", "must be in (0, 1)"));
        }
        self.prefilter.validate().map_err(|m| invalid("prefilter", m))?;
        self.regions.validate().map_err(|m| invalid("region", m))?;
        range_ok("geometry.area_fraction", self.area_fraction)?;
        if !(self.area_fraction.0 > 0.0 && self.area_fraction.1 <= 1.0) {
            return Err(invalid("geometry.area_fraction", "must lie in (0, 1]"));
        }
        if !(self.retry_shrink > 0.0 && self.retry_shrink <= 1.0) {
            return Err(invalid("geometry.retry_shrink", "must be in (0, 1]"));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(invalid("geometry.min_coverage", "must be in (0, 1]"));
        }
        if !(self.plane.focal_factor > 0.0) || self.plane.ransac_iters == 0 || !(self.plane.inlier_tol > 0.0) {
            return Err(invalid("geometry", "focal factor, RANSAC iterations and inlier tolerance must be positive"));
        }
        range_ok("render.size", self.size_px)?;
        if !(self.size_px.0 >= 4.0 && self.size_px.1 <= 512.0) {
            return Err(invalid("render.size", "must lie in [4, 512]"));
        }
        let s = self.spacing;
        if !(s.letter > 0.0 && s.word > 0.0 && s.line > 0.0) {
            return Err(invalid("render.spacing", "multipliers must be positive"));
        }
        if !(0.0..=1.0).contains(&self.warp_prob) {
            return Err(invalid("render.warp_prob", "must be in [0, 1]"));
        }
        range_ok("render.warp_amplitude", self.warp_amplitude)?;
        if !(self.warp_amplitude.0 >= 0.0 && self.warp_amplitude.1 <= 0.5) {
            return Err(invalid("render.warp_amplitude", "must lie in [0, 0.5] line heights"));
        }
        range_ok("render.warp_period", self.warp_period)?;
        if !(self.warp_period.0 > 0.0) {
            return Err(invalid("render.warp_period", "must be positive"));
        }
        range_ok("text.words_per_line", self.text.words_per_line)?;
        if self.text.max_lines == 0 || self.text.words_per_line.0 == 0 {
            return Err(invalid("text", "line and word counts must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.text.punctuation_prob) {
            return Err(invalid("text.punctuation_prob", "must be in [0, 1]"));
        }
        range_ok("corpus.digits", self.corpus.digits_len)?;
        if !(self.solver.tolerance > 0.0) {
            return Err(invalid("blend.tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Startup check that every referenced input exists.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let mut required = vec![
            ("paths.images", &self.images_dir),
            ("paths.maps", &self.maps_dir),
            ("paths.fonts", &self.fonts_dir),
            ("paths.words", &self.words),
        ];
        if let Some(p) = &self.blocklist {
            required.push(("paths.blocklist", p));
        }
        if let Some(p) = &self.surnames {
            required.push(("paths.surnames", p));
        }
        for (key, p) in required {
            if !p.exists() {
                return Err(ConfigError::MissingPath { key: key.into(), path: p.display().to_string() });
            }
        }
        Ok(())
    }
}
