//! End-to-end generation: per-image worker, batch runner with an ordered
//! manifest, statistics, previews and output validation.
//!
//! Inputs for image `<id>`: `images/<id>.png`, `maps/<id>.depth.rtw`,
//! `maps/<id>.boundary.rtw`, and optionally `maps/<id>.text.json` and
//! `maps/<id>.faces.json`. Outputs land in `images/`, `annotations/` and
//! `masks/` under the output directory, next to `manifest.jsonl` and
//! `stats.json`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{self, AnnotationRecord, StatsTable, Subset};
use crate::blend::{self, BlendError};
use crate::boxes::BoxList;
use crate::config::{Compositing, ConfigError, PipelineConfig};
use crate::corpus::{Corpus, CorpusError};
use crate::geometry::{self, Homography, WarpedPatch};
use crate::par::{self, Execution};
use crate::poly::{self, Point};
use crate::prefilter::{self, Decision};
use crate::raster::{self, Mask, Raster};
use crate::regions::{self, Region};
use crate::render::{self, FontSet, FontWarning, RenderError, SineWarpParams};
use crate::rng::{derive_rng, split_position, ImageRng};

/// Placements are kept this far apart (in pixels).
const OCCUPANCY_MARGIN_PX: usize = 2;
/// Added to normalized depth before plane fitting.
const DEPTH_NEAR: f32 = 1.0;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fonts(#[from] RenderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Corrupt { path: String, reason: String },
}

impl PipelineError {
    /// 2 for configuration problems, 1 for bad or unreadable data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Fonts(_) | PipelineError::Corpus(_) => 2,
            PipelineError::Io { .. } | PipelineError::Corrupt { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("missing {kind} map {path}")]
    MissingMap { kind: &'static str, path: String },
    #[error("corrupt input {path}: {reason}")]
    CorruptInput { path: String, reason: String },
}

/// Fonts and corpus shared read-only by all workers.
pub struct Resources {
    pub fonts: FontSet,
    pub font_warnings: Vec<FontWarning>,
    pub corpus: Corpus,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.check_paths()?;
        let (fonts, font_warnings) = render::load_fonts(&cfg.fonts_dir)?;
        for w in &font_warnings {
            log::warn!("font {} rejected: {}", w.path.display(), w.reason);
        }
        let corpus = Corpus::build(&cfg.words, cfg.blocklist.as_deref(), cfg.surnames.as_deref(), &cfg.corpus)?;
        Ok(Self { fonts, font_warnings, corpus })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NoPlacement,
    PreexistingText,
}

/// One text instance placed in an image.
#[derive(Clone, Debug)]
pub struct Placement {
    pub id: u16,
    pub region_area: usize,
    pub homography: Homography,
    pub text: String,
    pub font: String,
    pub size_px: f64,
    pub warp: Option<SineWarpParams>,
    pub compositing: Compositing,
    pub quad: [Point; 4],
}

#[derive(Clone, Debug)]
pub struct GeneratedImage {
    pub image: Raster,
    pub record: AnnotationRecord,
    pub mask: Vec<u16>,
    /// Pixels that may differ from the input: blur footprints and blend
    /// domains.
    pub edit_mask: Mask,
    pub placements: Vec<Placement>,
}

#[derive(Clone, Debug)]
pub enum ImageOutcome {
    Generated(Box<GeneratedImage>),
    Skipped(SkipReason),
}

pub struct InputPaths {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub boundary: PathBuf,
    pub text_boxes: PathBuf,
    pub face_boxes: PathBuf,
}

impl InputPaths {
    pub fn new(cfg: &PipelineConfig, id: &str) -> Self {
        let m = |suffix: &str| cfg.maps_dir.join(format!("{id}.{suffix}"));
        Self {
            image: cfg.images_dir.join(format!("{id}.png")),
            depth: m("depth.rtw"),
            boundary: m("boundary.rtw"),
            text_boxes: m("text.json"),
            face_boxes: m("faces.json"),
        }
    }
}

fn corrupt(path: &Path, reason: impl ToString) -> ImageError {
    ImageError::CorruptInput { path: path.display().to_string(), reason: reason.to_string() }
}

fn load_map(path: &Path, kind: &'static str, dims: (usize, usize)) -> Result<Raster, ImageError> {
    if !path.exists() {
        return Err(ImageError::MissingMap { kind, path: path.display().to_string() });
    }
    let r = raster::load_map(path).map_err(|e| corrupt(path, e))?;
    if r.channels() != 1 {
        return Err(corrupt(path, format!("expected 1 channel, found {}", r.channels())));
    }
    if (r.width(), r.height()) != dims {
        return Err(corrupt(path, format!("map is {}x{}, image is {}x{}", r.width(), r.height(), dims.0, dims.1)));
    }
    Ok(r)
}

fn load_boxes(path: &Path) -> Result<BoxList, ImageError> {
    if path.exists() {
        BoxList::load(path).map_err(|e| corrupt(path, e))
    } else {
        Ok(BoxList::default())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn mean_color(img: &Raster, region: &Region) -> [f32; 3] {
    let mut sum = [0.0f64; 3];
    for (x, y) in region.coords() {
        for (c, s) in sum.iter_mut().enumerate() {
            *s += img.get(x, y, c) as f64;
        }
    }
    sum.map(|s| (s / region.area() as f64) as f32)
}

fn dilate(m: &Mask, r: usize) -> Mask {
    let (w, h) = (m.width(), m.height());
    let mut out = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) {
                for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                    for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                        out.set(xx, yy, true);
                    }
                }
            }
        }
    }
    out
}

struct Candidate {
    warped: WarpedPatch,
    homography: Homography,
    font: String,
    size_px: f64,
    warp: Option<SineWarpParams>,
}

/// Renders text for `region` and searches for a scale at which the warped
/// patch fits the region without touching occupied pixels.
fn try_candidate(
    cfg: &PipelineConfig,
    res: &Resources,
    region: &Region,
    depth: &Raster,
    current: &Raster,
    occupancy: &Mask,
    rng: &mut ImageRng,
) -> Option<Candidate> {
    let plane = geometry::fit_plane(depth, region, &cfg.plane, rng).ok()?;
    let sample = res.corpus.sample_text(rng, &cfg.text);
    let face = res.fonts.get(rng.gen_range(0..res.fonts.len()));
    let size_px = uniform(rng, cfg.size_px);
    let mut layout = render::layout_text(&sample, face, size_px, &cfg.spacing).ok()?;
    let mut warp = None;
    if rng.gen_bool(cfg.warp_prob) {
        let w = SineWarpParams::new(
            uniform(rng, cfg.warp_amplitude) * layout.line_height,
            uniform(rng, cfg.warp_period) * size_px,
            rng.gen_range(0.0..TAU),
        )
        .ok()?;
        layout = render::apply_sine_warp(&layout, w).ok()?;
        warp = Some(w);
    }
    let color = render::contrast_color(mean_color(current, region), rng);
    let patch = render::rasterize(&layout, face, color);
    let dims = (patch.alpha.width() as f64, patch.alpha.height() as f64);
    let region_mask = region.mask();
    let mut fraction = uniform(rng, cfg.area_fraction);
    for _ in 0..=cfg.retries {
        let h = geometry::region_homography(&plane, region, dims, fraction, &cfg.homography).ok()?;
        fraction *= cfg.retry_shrink;
        if !geometry::fits(dims, &region_mask, &h, cfg.min_coverage) {
            continue;
        }
        let quad = h.transform(&geometry::patch_corners(dims.0, dims.1));
        let footprint = poly::fill(&quad, occupancy.width(), occupancy.height());
        if footprint.bits().iter().zip(occupancy.bits()).any(|(a, b)| *a && *b) {
            continue;
        }
        let warped = geometry::warp_patch(&patch, &h, (current.width(), current.height())).ok()?;
        if warped.geometry.lines.is_empty() {
            return None;
        }
        return Some(Candidate { warped, homography: h, font: face.name.clone(), size_px, warp });
    }
    None
}

/// Runs the full per-image pipeline: prefilter, regions, text sampling,
/// rendering, plane fit and homography, warping, blending and annotation.
pub fn generate_image(cfg: &PipelineConfig, res: &Resources, image_id: &str, exec: Execution) -> Result<ImageOutcome, ImageError> {
    let paths = InputPaths::new(cfg, image_id);
    if !paths.image.exists() {
        return Err(corrupt(&paths.image, "image file is missing"));
    }
    let image = raster::load_png_rgb(&paths.image).map_err(|e| corrupt(&paths.image, e))?;
    let (w, h) = (image.width(), image.height());
    let depth = load_map(&paths.depth, "depth", (w, h))?;
    let mut depth = raster::normalize_depth(&depth).map_err(|e| corrupt(&paths.depth, e))?;
    // keep every back-projected point off the camera center
    depth.data_mut().iter_mut().for_each(|d| *d += DEPTH_NEAR);
    let boundary = load_map(&paths.boundary, "boundary", (w, h))?;
    let mut boxes = load_boxes(&paths.text_boxes)?;
    boxes.extend(load_boxes(&paths.face_boxes)?);
    let boxes = boxes.normalized(w, h);

    let mut rng = derive_rng(cfg.seed, image_id);
    if prefilter::decide_image(&boxes, &cfg.prefilter, w, h) == Decision::Discard {
        return Ok(ImageOutcome::Skipped(SkipReason::PreexistingText));
    }
    let mut current = prefilter::blur_regions(&image, &boxes, &cfg.prefilter);
    let mut edit_mask = prefilter::blur_footprint(&boxes, &cfg.prefilter, w, h);
    let all_regions = regions::regions_from_boundaries(&boundary, &cfg.regions).map_err(|e| corrupt(&paths.boundary, e))?;
    let mut occupancy = prefilter::text_coverage_mask(&boxes, w, h);

    let target = rng.gen_range(cfg.placements.0..=cfg.placements.1);
    let mut placements: Vec<Placement> = Vec::new();
    let mut geometries = Vec::new();
    let mut mask_alphas: Vec<Raster> = Vec::new();
    'slots: for _ in 0..target {
        for _ in 0..=cfg.retries {
            let candidates = regions::filter_regions(&all_regions, &cfg.regions, Some(&occupancy));
            let Some(region) = regions::pick_region(&candidates, &mut rng) else { break 'slots };
            let Some(cand) = try_candidate(cfg, res, region, &depth, &current, &occupancy, &mut rng) else { continue };
            let id = placements.len() as u16 + 1;
            let WarpedPatch { color, alpha, geometry, quad } = cand.warped;
            let domain = match cfg.compositing {
                Compositing::Poisson(mode) => match blend::build_problem(&current, &color, &alpha, mode, cfg.solver) {
                    Ok(problem) => {
                        let domain = problem.domain_mask();
                        if !alpha.data().iter().zip(domain.bits()).any(|(&a, &d)| d && a > 0.5) {
                            continue;
                        }
                        let solution = blend::solve(&problem, exec);
                        current = blend::compose(&current, &solution, &problem);
                        domain
                    }
                    Err(BlendError::EmptyDomain) => continue,
                    Err(e) => {
                        log::warn!("{image_id}: blend failed: {e}");
                        continue;
                    }
                },
                Compositing::Alpha => {
                    if !alpha.data().iter().any(|&a| a > 0.5) {
                        continue;
                    }
                    current = blend::alpha_blend(&current, &color, &alpha).expect("patch matches image");
                    Mask::from_fn(w, h, |x, y| alpha.get(x, y, 0) > 0.0)
                }
            };
            let masked = Raster::from_fn(w, h, 1, |x, y, _| if domain.get(x, y) { alpha.get(x, y, 0) } else { 0.0 });
            edit_mask.union_with(&domain);
            let mut stamp = poly::fill(&quad, w, h);
            stamp.union_with(&domain);
            occupancy.union_with(&dilate(&stamp, OCCUPANCY_MARGIN_PX));
            placements.push(Placement {
                id,
                region_area: region.area(),
                homography: cand.homography,
                text: geometry.text.clone(),
                font: cand.font,
                size_px: cand.size_px,
                warp: cand.warp,
                compositing: cfg.compositing,
                quad,
            });
            geometries.push(geometry);
            mask_alphas.push(masked);
            continue 'slots;
        }
    }
    if placements.is_empty() {
        return Ok(ImageOutcome::Skipped(SkipReason::NoPlacement));
    }
    let record = AnnotationRecord::from_geometries(image_id, w as u32, h as u32, &geometries);
    let layers: Vec<(u16, &Raster)> = placements.iter().map(|p| p.id).zip(mask_alphas.iter()).collect();
    let mask = annotate::emit_mask(w, h, &layers);
    Ok(ImageOutcome::Generated(Box::new(GeneratedImage { image: current, record, mask, edit_mask, placements })))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Generated,
    Skipped,
    Error,
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_id: String,
    pub status: Status,
    pub subset: Subset,
    pub seed: u64,
    pub placements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn subset_for(image_id: &str, train_fraction: f64) -> Subset {
    if split_position(image_id) < train_fraction {
        Subset::Training
    } else {
        Subset::Test
    }
}

/// Image ids (PNG file stems) in file-name order.
pub fn list_images(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect();
    ids.sort();
    Ok(ids)
}

pub struct RunSummary {
    pub entries: Vec<ManifestEntry>,
    pub stats: StatsTable,
    /// Images whose inputs could not be read.
    pub corrupt: usize,
}

fn write_outputs(out: &Path, id: &str, g: &GeneratedImage) -> Result<(), PipelineError> {
    let img = out.join("images").join(format!("{id}.png"));
    raster::save_png(&g.image, &img).map_err(|e| PipelineError::Corrupt { path: img.display().to_string(), reason: e.to_string() })?;
    let ann = out.join("annotations").join(format!("{id}.json"));
    g.record.save(&ann).map_err(|e| PipelineError::Corrupt { path: ann.display().to_string(), reason: e.to_string() })?;
    let mask = out.join("masks").join(format!("{id}.png"));
    annotate::save_mask_png(&mask, g.image.width(), g.image.height(), &g.mask)
        .map_err(|e| PipelineError::Corrupt { path: mask.display().to_string(), reason: e.to_string() })
}

/// Generates every image under `cfg.images_dir` (up to `limit`), writing
/// outputs, `manifest.jsonl` and `stats.json` into `out`. Per-image input
/// errors are recorded in the manifest rather than aborting the batch.
pub fn run(cfg: &PipelineConfig, res: &Resources, out: &Path, limit: Option<usize>, exec: Execution) -> Result<RunSummary, PipelineError> {
    let mut ids = list_images(&cfg.images_dir)?;
    if let Some(n) = limit {
        ids.truncate(n);
    }
    for sub in ["images", "annotations", "masks"] {
        fs::create_dir_all(out.join(sub)).map_err(io_err(out))?;
    }
    log::info!("generating {} images with {:?}", ids.len(), exec);
    // nested work shares the outer pool instead of building its own
    let inner = if exec.is_parallel() { Execution::Parallel { workers: 0 } } else { Execution::Sequential };
    let results = par::map_ordered(exec, &ids, |id| -> Result<(ManifestEntry, Option<AnnotationRecord>, bool), PipelineError> {
        let subset = subset_for(id, cfg.train_fraction);
        let mut entry = ManifestEntry {
            image_id: id.clone(),
            status: Status::Skipped,
            subset,
            seed: cfg.seed,
            placements: 0,
            image: None,
            annotation: None,
            mask: None,
            reason: None,
        };
        match generate_image(cfg, res, id, inner) {
            Ok(ImageOutcome::Generated(g)) => {
                write_outputs(out, id, &g)?;
                entry.status = Status::Generated;
                entry.placements = g.placements.len();
                entry.image = Some(format!("images/{id}.png"));
                entry.annotation = Some(format!("annotations/{id}.json"));
                entry.mask = Some(format!("masks/{id}.png"));
                log::debug!("{id}: {} placements", g.placements.len());
                Ok((entry, Some(g.record), false))
            }
            Ok(ImageOutcome::Skipped(reason)) => {
                entry.reason = Some(serde_json::to_value(reason).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default());
                log::info!("{id}: skipped ({})", entry.reason.as_deref().unwrap_or(""));
                Ok((entry, None, false))
            }
            Err(e) => {
                log::error!("{id}: {e}");
                entry.status = Status::Error;
                entry.reason = Some(e.to_string());
                Ok((entry, None, matches!(e, ImageError::CorruptInput { .. })))
            }
        }
    });
    let mut entries = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    let mut corrupt = 0;
    for r in results {
        let (entry, record, bad) = r?;
        corrupt += bad as usize;
        if let Some(rec) = record {
            records.push((rec, entry.subset));
        }
        entries.push(entry);
    }
    let manifest: String = entries.iter().map(|e| serde_json::to_string(e).expect("manifest serializes") + "\n").collect();
    let mpath = out.join("manifest.jsonl");
    fs::write(&mpath, manifest).map_err(io_err(&mpath))?;
    let stats = annotate::compute_stats(&records, exec);
    let spath = out.join("stats.json");
    fs::write(&spath, stats.to_json()).map_err(io_err(&spath))?;
    Ok(RunSummary { entries, stats, corrupt })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Corrupt { path: format!("{}:{}", path.display(), i + 1), reason: e.to_string() })
        })
        .collect()
}

/// Statistics over the generated entries of a manifest; annotation paths
/// resolve against the manifest's directory.
pub fn stats_from_manifest(path: &Path, exec: Execution) -> Result<StatsTable, PipelineError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::new();
    for e in read_manifest(path)? {
        if e.status != Status::Generated {
            continue;
        }
        let Some(rel) = &e.annotation else {
            return Err(PipelineError::Corrupt { path: path.display().to_string(), reason: format!("{} has no annotation path", e.image_id) });
        };
        let p = base.join(rel);
        let rec = AnnotationRecord::load(&p).map_err(|err| PipelineError::Corrupt { path: p.display().to_string(), reason: err.to_string() })?;
        records.push((rec, e.subset));
    }
    Ok(annotate::compute_stats(&records, exec))
}

const PARAGRAPH_COLOR: [f32; 3] = [1.0, 0.0, 0.0];
const WORD_COLOR: [f32; 3] = [0.0, 1.0, 0.0];
const TINT_COLOR: [f32; 3] = [0.0, 0.4, 1.0];
const TINT_OPACITY: f32 = 0.3;

fn stroke(img: &mut Raster, poly: &[Point], width: f64, color: [f32; 3]) {
    if poly.len() < 2 {
        return;
    }
    let half = width / 2.0;
    let (lo, hi) = poly::bounds(poly);
    let x0 = (lo.x - half - 1.0).floor().max(0.0) as usize;
    let y0 = (lo.y - half - 1.0).floor().max(0.0) as usize;
    let x1 = ((hi.x + half + 1.0).ceil().max(0.0) as usize).min(img.width());
    let y1 = ((hi.y + half + 1.0).ceil().max(0.0) as usize).min(img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if poly::boundary_distance(poly, Point::new(x as f64 + 0.5, y as f64 + 0.5)) <= half {
                img.pixel_mut(x, y)[..3].copy_from_slice(&color);
            }
        }
    }
}

/// Overlay with the instance mask tinted at 30 %, word outlines (1 px) and
/// paragraph outlines (2 px).
pub fn preview(image: &Raster, record: &AnnotationRecord, mask: Option<&[u16]>) -> Raster {
    let mut out = image.clone();
    if let Some(m) = mask {
        for y in 0..out.height() {
            for x in 0..out.width() {
                if m.get(y * out.width() + x).is_some_and(|&v| v != 0) {
                    let px = out.pixel_mut(x, y);
                    for c in 0..3 {
                        px[c] = (1.0 - TINT_OPACITY) * px[c] + TINT_OPACITY * TINT_COLOR[c];
                    }
                }
            }
        }
    }
    for p in &record.paragraphs {
        for w in p.lines.iter().flat_map(|l| &l.words) {
            stroke(&mut out, &w.polygon, 1.0, WORD_COLOR);
        }
    }
    for p in &record.paragraphs {
        stroke(&mut out, &p.polygon, 2.0, PARAGRAPH_COLOR);
    }
    out
}

/// Files checked and the problems found by [`validate_dir`].
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub checked: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn check_file(path: &Path) -> Result<bool, String> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let parent = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".rtw") {
        let r = raster::load_map(path).map_err(|e| e.to_string())?;
        if name.ends_with(".depth.rtw") || name.ends_with(".boundary.rtw") {
            r.expect_channels(1).map_err(|e| e.to_string())?;
        }
        if name.ends_with(".boundary.rtw") {
            if let Some(v) = r.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(format!("boundary sample {v} outside [0, 1]"));
            }
        }
        return Ok(true);
    }
    if name.ends_with(".text.json") || name.ends_with(".faces.json") {
        BoxList::load(path).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    if name == "manifest.jsonl" {
        read_manifest(path).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    if name == "stats.json" {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        StatsTable::from_json(&text).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    if name.ends_with(".json") && parent == "annotations" {
        let rec = AnnotationRecord::load(path).map_err(|e| e.to_string())?;
        let violations = annotate::validate_record(&rec);
        if !violations.is_empty() {
            return Err(violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "));
        }
        let mask_path = path.parent().and_then(Path::parent).map(|p| p.join("masks").join(format!("{}.png", rec.image_id)));
        if let Some(mp) = mask_path.filter(|p| p.exists()) {
            let (w, h, m) = annotate::load_mask_png(&mp).map_err(|e| e.to_string())?;
            if (w as u32, h as u32) != (rec.width, rec.height) {
                return Err(format!("mask is {w}x{h}, annotation says {}x{}", rec.width, rec.height));
            }
            let mask_ids: BTreeSet<u32> = m.iter().filter(|&&v| v != 0).map(|&v| v as u32).collect();
            let para_ids: BTreeSet<u32> = rec.paragraphs.iter().map(|p| p.id).collect();
            if mask_ids != para_ids {
                return Err(format!("mask ids {mask_ids:?} do not match paragraph ids {para_ids:?}"));
            }
        }
        return Ok(true);
    }
    if name.ends_with(".png") && parent == "masks" {
        annotate::load_mask_png(path).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    Ok(false)
}

/// Format checks for every known file type under `dir`: maps, box lists,
/// annotations (with mask/paragraph id agreement), masks, manifests and
/// stats tables. Unknown files are ignored.
pub fn validate_dir(dir: &Path) -> Result<ValidationReport, PipelineError> {
    let mut files = Vec::new();
    walk(dir, &mut files).map_err(io_err(dir))?;
    let mut report = ValidationReport::default();
    for f in files {
        match check_file(&f) {
            Ok(true) => report.checked += 1,
            Ok(false) => {}
            Err(msg) => {
                report.checked += 1;
                report.problems.push(format!("{}: {msg}", f.display()));
            }
        }
    }
    Ok(report)
}
