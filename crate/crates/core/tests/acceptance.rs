//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rtw_core::annotate::{self, AnnotationRecord, CharBox, Line, Paragraph, StatsRow, StatsTable, Subset, Word};
use rtw_core::blend::{self, PoissonProblem, SolverConfig};
use rtw_core::config::PipelineConfig;
use rtw_core::corpus::{Corpus, CorpusConfig, SampleLayout};
use rtw_core::geometry::{self, Camera, Homography, HomographyConfig, Plane, PlaneFitConfig};
use rtw_core::par::Execution;
use rtw_core::pipeline::{self, ImageOutcome, Resources};
use rtw_core::poly::{self, Point};
use rtw_core::raster::{self, Mask, Raster};
use rtw_core::regions::{self, Region, RegionParams};
use rtw_core::render::{self, FontFace, SineWarpParams, Spacing};
use rtw_core::rng::{rng_from_key, ImageRng};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Dense LU solve, independent of the conjugate-gradient solver.
fn dense_solve(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    a.lu().solve(&b).expect("system is nonsingular")
}

/// A random 4-connected blob of at most `max` pixels in the interior of a
/// `w x h` image.
fn random_domain(rng: &mut ImageRng, w: usize, h: usize, max: usize) -> Mask {
    let mut m = Mask::new(w, h);
    let (mut x, mut y) = (rng.gen_range(1..w - 1), rng.gen_range(1..h - 1));
    let target = rng.gen_range(1..=max);
    let mut n = 0;
    for _ in 0..target * 8 {
        if !m.get(x, y) {
            m.set(x, y, true);
            n += 1;
            if n == target {
                break;
            }
        }
        let (dx, dy) = DIRS[rng.gen_range(0..4)];
        x = (x as i64 + dx).clamp(1, w as i64 - 2) as usize;
        y = (y as i64 + dy).clamp(1, h as i64 - 2) as usize;
    }
    m
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_key(101);
    let mut worst = 0.0f64;
    let mut max_cells = 0;
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(4..14), rng.gen_range(4..14));
        let base = Raster::from_fn(w, h, 1, |_, _, _| rng.gen::<f32>());
        let domain = random_domain(&mut rng, w, h, 64);
        let field: Vec<f64> = (0..w * h * 4).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let v = |_: usize, p: (usize, usize), q: (usize, usize)| {
            let d = DIRS.iter().position(|&(dx, dy)| (p.0 as i64 + dx, p.1 as i64 + dy) == (q.0 as i64, q.1 as i64)).unwrap();
            field[(p.1 * w + p.0) * 4 + d]
        };
        let cfg = SolverConfig { tolerance: 1e-15, max_iters: Some(10_000) };
        let p = PoissonProblem::new(&base, &domain, cfg, v).map_err(|e| e.to_string())?;
        let s = blend::solve(&p, Execution::Sequential);
        let cells: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| domain.get(x, y)).collect();
        let index: BTreeMap<(usize, usize), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let n = cells.len();
        max_cells = max_cells.max(n);
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (i, &(x, y)) in cells.iter().enumerate() {
            a[(i, i)] = 4.0;
            for (dx, dy) in DIRS {
                let q = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                b[i] += v(0, (x, y), q);
                match index.get(&q) {
                    Some(&j) => a[(i, j)] -= 1.0,
                    None => b[i] += base.get(q.0, q.1, 0) as f64,
                }
            }
        }
        let x = dense_solve(a, b);
        for (k, c) in p.cells().enumerate() {
            worst = worst.max((s.channels[0].values[k] - x[index[&c]]).abs());
        }
    }
    let t = start.elapsed();
    check(
        worst <= 1e-8 && t < Duration::from_secs(30),
        format!("200 problems, |omega| <= {max_cells}, max |x - x_dense| = {worst:.2e} (tol 1e-8), {:.2} s (limit 30 s)", t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_key(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(5..40), rng.gen_range(5..40));
        let base = Raster::from_fn(w, h, 1, |_, _, _| rng.gen::<f32>());
        let domain = random_domain(&mut rng, w, h, (w - 2) * (h - 2));
        let cfg = SolverConfig { tolerance: 1e-12, max_iters: None };
        let p = PoissonProblem::new(&base, &domain, cfg, |_, _, _| 0.0).map_err(|e| e.to_string())?;
        let s = blend::solve(&p, Execution::Sequential);
        let inside = p.domain_mask();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in p.cells() {
            for (dx, dy) in DIRS {
                let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                if !inside.get(qx, qy) {
                    lo = lo.min(base.get(qx, qy, 0) as f64);
                    hi = hi.max(base.get(qx, qy, 0) as f64);
                }
            }
        }
        for &u in &s.channels[0].values {
            worst = worst.max(lo - u).max(u - hi);
        }
    }
    check(worst <= 1e-6, format!("100 domains, worst excursion beyond boundary range {:.2e} (tol 1e-6)", worst.max(0.0)))
}

fn random_quad(rng: &mut ImageRng) -> [Point; 4] {
    loop {
        let q = [0; 4].map(|_| Point::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)));
        // no three points close to collinear
        let tri = |a: Point, b: Point, c: Point| ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() / 2.0;
        if [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)].iter().all(|&(i, j, k)| tri(q[i], q[j], q[k]) > 200.0) {
            return q;
        }
    }
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_key(303);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 1000 {
        let m = Matrix3::from_fn(|i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            if i == 2 && j < 2 {
                rng.gen_range(-2e-3..2e-3)
            } else if j == 2 && i < 2 {
                rng.gen_range(-50.0..50.0)
            } else {
                id + rng.gen_range(-0.5..0.5)
            }
        });
        let Ok(truth) = Homography::from_matrix(m) else { continue };
        let src = random_quad(&mut rng);
        // keep every point in front of the camera
        if src.iter().any(|&p| truth.w(p) < 0.2) {
            continue;
        }
        let dst = src.map(|p| truth.apply(p));
        let h = geometry::dlt(&src, &dst).map_err(|e| e.to_string())?;
        worst = worst.max((h.h - truth.h).norm() / truth.h.norm());
        n += 1;
    }
    let mut fronto = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(40..200), rng.gen_range(40..200));
        let (x0, y0) = (rng.gen_range(0..w / 2), rng.gen_range(0..h / 2));
        let (x1, y1) = (rng.gen_range(x0 + 10..w), rng.gen_range(y0 + 10..h));
        let px = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (y * w + x) as u32)).collect();
        let region = Region::from_pixels(px, w, h);
        let plane = Plane { normal: Vector3::z(), offset: rng.gen_range(0.1..3.0), inlier_fraction: 1.0 };
        let patch = (rng.gen_range(10.0..80.0), rng.gen_range(5.0..30.0));
        let hm = geometry::region_homography(&plane, &region, patch, rng.gen_range(0.1..0.8), &HomographyConfig::default())
            .map_err(|e| e.to_string())?;
        fronto = fronto.max(hm.h[(2, 0)].abs()).max(hm.h[(2, 1)].abs());
    }
    check(
        worst < 1e-6 && fronto < 1e-9,
        format!("1000 correspondences, max relative Frobenius error {worst:.2e} (tol 1e-6); fronto-parallel max |h31|,|h32| {fronto:.1e} (tol 1e-9)"),
    )
}

fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.normalize().dot(&b.normalize()).abs().clamp(-1.0, 1.0).acos().to_degrees()
}

fn rect_region(x0: usize, y0: usize, x1: usize, y1: usize, w: usize, h: usize) -> Region {
    Region::from_pixels((y0..y1).flat_map(|y| (x0..x1).map(move |x| (y * w + x) as u32)).collect(), w, h)
}

fn criterion_4() -> Outcome {
    // noise-free ramp against an SVD fit of the back-projected points
    let (w, h) = (64, 64);
    let ramp = Raster::from_fn(w, h, 1, |x, _, _| (0.3 + 0.001 * x as f64) as f32);
    let region = rect_region(7, 7, 57, 57, w, h);
    let cam = Camera::for_image(w, h, 1.2);
    let pts: Vec<Vector3<f64>> =
        region.coords().map(|(x, y)| cam.back_project(x as f64 + 0.5, y as f64 + 0.5, ramp.get(x, y, 0) as f64)).collect();
    let c = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let svd = DMatrix::from_fn(pts.len(), 3, |i, j| pts[i][j] - c[j]).svd(false, true);
    let vt = svd.v_t.unwrap();
    let k = (0..3).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
    let oracle = Vector3::new(vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]);
    let cfg = PlaneFitConfig { inlier_tol: 1.0, ..Default::default() };
    let p = geometry::fit_plane(&ramp, &region, &cfg, &mut rng_from_key(4)).map_err(|e| e.to_string())?;
    let clean = angle_deg(&p.normal, &oracle);

    // exact planes with 20 % outliers
    let mut rng = rng_from_key(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (w, h) = (80, 60);
        let cam = Camera::for_image(w, h, 1.2);
        let n = Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 1.0).normalize();
        let d = rng.gen_range(0.5..2.0);
        let mut depth = Raster::from_fn(w, h, 1, |x, y, _| (d / n.dot(&cam.ray(x as f64 + 0.5, y as f64 + 0.5))) as f32);
        let (lo, hi) = depth.data().iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for v in depth.data_mut() {
            if rng.gen_bool(0.2) {
                *v = rng.gen_range(lo..hi);
            }
        }
        let region = rect_region(0, 0, w, h, w, h);
        let p = geometry::fit_plane(&depth, &region, &PlaneFitConfig::default(), &mut rng).map_err(|e| e.to_string())?;
        worst = worst.max(angle_deg(&p.normal, &n));
    }
    check(clean < 0.1 && worst < 1.0, format!("noise-free ramp error {clean:.2e} deg (tol 0.1); 20% outliers worst {worst:.3} deg over 50 trials (tol 1)"))
}

fn flood_fill(b: &Raster, t: f64) -> Vec<Vec<u32>> {
    let (w, h) = (b.width(), b.height());
    let open = |i: usize| (b.data()[i] as f64) < t;
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for s in 0..w * h {
        if seen[s] || !open(s) {
            continue;
        }
        let (mut comp, mut stack) = (Vec::new(), vec![s]);
        seen[s] = true;
        while let Some(i) = stack.pop() {
            comp.push(i as u32);
            let (x, y) = (i % w, i / w);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && open(j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from_key(505);
    let mut mismatches = 0;
    let mut components = 0;
    for i in 0..500 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.0..0.7);
        let b = if i % 2 == 0 {
            Raster::from_fn(w, h, 1, |_, _, _| if rng.gen_bool(density) { rng.gen_range(0.5..1.0) } else { rng.gen_range(0.0..0.5) })
        } else {
            // straight seams
            let cols: BTreeSet<usize> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..w)).collect();
            let rows: BTreeSet<usize> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..h)).collect();
            Raster::from_fn(w, h, 1, |x, y, _| if cols.contains(&x) || rows.contains(&y) { 1.0 } else { 0.0 })
        };
        let t = rng.gen_range(0.05..0.95);
        let params = RegionParams { boundary_threshold: t, ..Default::default() };
        let rs = regions::regions_from_boundaries(&b, &params).map_err(|e| e.to_string())?;
        let mut got: Vec<Vec<u32>> = rs.iter().map(|r| r.pixels().to_vec()).collect();
        got.sort();
        let want = flood_fill(&b, t);
        components += want.len();
        mismatches += (got != want) as usize;
    }
    check(mismatches == 0, format!("500 maps, {components} components, {mismatches} mismatches"))
}

fn criterion_6() -> Outcome {
    let fonts: Vec<FontFace> = ["DejaVuSans-subset.ttf", "DejaVuSerif-subset.ttf"]
        .iter()
        .map(|f| FontFace::from_bytes(*f, fs::read(fixtures().join("fonts").join(f)).unwrap()).unwrap())
        .collect();
    let c = fixtures().join("corpus");
    let corpus = Corpus::build(&c.join("words.txt"), Some(&c.join("blocklist.txt")), Some(&c.join("surnames.txt")), &CorpusConfig::default())
        .map_err(|e| e.to_string())?;
    let layout = SampleLayout { max_lines: 4, words_per_line: (1, 4), punctuation_prob: 0.3 };
    let mut rng = rng_from_key(606);
    let mut identity_ok = true;
    let mut failures = 0;
    let mut checked = 0;
    for i in 0..200 {
        let sample = corpus.sample_text(&mut rng, &layout);
        let face = &fonts[i % fonts.len()];
        let size = rng.gen_range(12.0..96.0);
        let spacing = Spacing { letter: rng.gen_range(0.9..1.3), word: rng.gen_range(0.8..1.5), line: rng.gen_range(1.0..1.6) };
        let g = render::layout_text(&sample, face, size, &spacing).map_err(|e| e.to_string())?;
        let flat = render::apply_sine_warp(&g, SineWarpParams::new(0.0, size * 8.0, rng.gen_range(0.0..std::f64::consts::TAU)).unwrap()).map_err(|e| e.to_string())?;
        identity_ok &= flat.chars == g.chars && flat.words == g.words && flat.lines == g.lines && flat.paragraph == g.paragraph;
        let amp = rng.gen_range(0.0..0.15) * g.line_height;
        let period = rng.gen_range(6.0..16.0) * size;
        let w = render::apply_sine_warp(&g, SineWarpParams::new(amp, period, rng.gen_range(0.0..std::f64::consts::TAU)).unwrap()).map_err(|e| e.to_string())?;
        let geo = w.geometry();
        let mut ok = true;
        {
            for line in &geo.lines {
                ok &= poly::polygon_within(&geo.paragraph, &line.polygon, 0.5);
                for word in &line.words {
                    ok &= poly::polygon_within(&line.polygon, &word.polygon, 0.5);
                    for ch in &word.chars {
                        ok &= poly::polygon_within(&word.polygon, &ch.polygon, 0.5);
                        checked += 1;
                    }
                }
            }
        }
        failures += (!ok) as usize;
    }
    check(
        identity_ok && failures == 0,
        format!("A=0 identity {}; 200 warped layouts ({checked} chars), {failures} containment failures at 0.5 px", if identity_ok { "exact" } else { "BROKEN" }),
    )
}

fn scene_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures().join("scenes/pipeline.conf")).expect("fixture config");
    cfg.seed = seed;
    cfg
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn criterion_7(out: &Path) -> Outcome {
    let cfg = scene_config(42);
    let res = Resources::load(&cfg).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut trees = Vec::new();
    for (run, workers) in [1, 8, 1, 8].into_iter().enumerate() {
        let dir = out.join(format!("run{run}_w{workers}"));
        let summary = pipeline::run(&cfg, &res, &dir, None, Execution::with_workers(workers)).map_err(|e| e.to_string())?;
        if summary.entries.len() != 10 {
            return Err(format!("expected 10 manifest entries, got {}", summary.entries.len()));
        }
        trees.push(tree(&dir));
    }
    let t = start.elapsed();
    let identical = trees.windows(2).all(|w| w[0] == w[1]);
    check(
        identical && t < Duration::from_secs(60),
        format!(
            "4 runs (workers 1, 8, 1, 8), {} files each, {}; {:.2} s (limit 60 s)",
            trees[0].len(),
            if identical { "byte-identical" } else { "DIFFER" },
            t.as_secs_f64()
        ),
    )
}

fn criterion_8(out: &Path) -> Outcome {
    let dir = out.join("run0_w1");
    let report = pipeline::validate_dir(&dir).map_err(|e| e.to_string())?;
    let mut records = 0;
    let mut bijective = 0;
    for e in pipeline::read_manifest(&dir.join("manifest.jsonl")).map_err(|e| e.to_string())? {
        let (Some(a), Some(m)) = (e.annotation, e.mask) else { continue };
        let rec = AnnotationRecord::load(&dir.join(a)).map_err(|e| e.to_string())?;
        let (_, _, mask) = annotate::load_mask_png(&dir.join(m)).map_err(|e| e.to_string())?;
        let mask_ids: BTreeSet<u32> = mask.iter().filter(|&&v| v != 0).map(|&v| v as u32).collect();
        let para_ids: BTreeSet<u32> = rec.paragraphs.iter().map(|p| p.id).collect();
        records += 1;
        bijective += (mask_ids == para_ids && annotate::validate_record(&rec).is_empty()) as usize;
    }
    for p in &report.problems {
        eprintln!("    {p}");
    }
    check(
        report.is_clean() && records > 0 && bijective == records,
        format!("{} files validated, {} problems; {bijective}/{records} annotations with mask ids == paragraph ids", report.checked, report.problems.len()),
    )
}

fn para(id: u32, text: &str) -> Paragraph {
    let lines = text
        .split('\n')
        .map(|l| Line {
            polygon: vec![],
            text: l.into(),
            words: l.split(' ').map(|w| Word { polygon: vec![], text: w.into(), chars: vec![CharBox { polygon: vec![], ch: "x".into() }] }).collect(),
        })
        .collect();
    Paragraph { id, polygon: vec![], text: text.into(), lines }
}

fn record(id: &str, texts: &[&str]) -> AnnotationRecord {
    AnnotationRecord { image_id: id.into(), width: 10, height: 10, paragraphs: texts.iter().enumerate().map(|(i, t)| para(i as u32 + 1, t)).collect() }
}

fn row(v: [u64; 10]) -> StatsRow {
    StatsRow {
        images: v[0],
        boxes: v[1],
        boxes_russian: v[2],
        boxes_english: v[3],
        boxes_digits: v[4],
        boxes_punctuation: v[5],
        lines: v[6],
        words: v[7],
        unique_words_cs: v[8],
        unique_words_no_numbers: v[9],
    }
}

fn criterion_9() -> Outcome {
    let records = vec![
        (record("r1", &["Привет мир", "Hello 2024"]), Subset::Training),
        (record("r2", &["дом,\nулица 5"]), Subset::Training),
        (record("r3", &["мир"]), Subset::Training),
        (record("r4", &["Мир! 12-34"]), Subset::Test),
        (record("r5", &["OK ok\nOK"]), Subset::Test),
    ];
    // counted by hand
    let expected = StatsTable {
        training: row([3, 4, 3, 1, 2, 1, 5, 8, 7, 5]),
        test: row([2, 2, 1, 1, 1, 1, 3, 5, 4, 3]),
        joint: row([5, 6, 4, 2, 3, 2, 8, 13, 11, 8]),
    };
    let seq = annotate::compute_stats(&records, Execution::Sequential);
    let par = annotate::compute_stats(&records, Execution::with_workers(4));
    let published = StatsTable {
        training: row([10000, 27645, 8155, 3483, 3441, 4217, 46479, 96810, 33504, 26804]),
        ..Default::default()
    };
    let back = StatsTable::from_json(&published.to_json()).map_err(|e| e.to_string())?;
    check(
        seq == expected && par == expected && back == published,
        format!(
            "hand-counted fixture {}; training column (10000 images, 27645 boxes, 46479 lines, 96810 words) round trip {}",
            if seq == expected && par == expected { "matches" } else { "DIFFERS" },
            if back == published { "unchanged" } else { "CHANGED" }
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = scene_config(42);
    let res = Resources::load(&cfg).map_err(|e| e.to_string())?;
    let (mut images, mut changed_outside, mut edited, mut total) = (0, 0usize, 0usize, 0usize);
    for id in pipeline::list_images(&cfg.images_dir).map_err(|e| e.to_string())? {
        let ImageOutcome::Generated(g) = pipeline::generate_image(&cfg, &res, &id, Execution::Sequential).map_err(|e| e.to_string())? else {
            continue;
        };
        let input = image::open(cfg.images_dir.join(format!("{id}.png"))).map_err(|e| e.to_string())?.to_rgb8();
        images += 1;
        for y in 0..g.image.height() {
            for x in 0..g.image.width() {
                total += 1;
                if g.edit_mask.get(x, y) {
                    edited += 1;
                    continue;
                }
                let out: Vec<u8> = g.image.pixel(x, y).iter().map(|&v| raster::to_u8(v)).collect();
                changed_outside += (out[..] != input.get_pixel(x as u32, y as u32).0[..]) as usize;
            }
        }
    }
    check(
        images > 0 && changed_outside == 0,
        format!(
            "{images} images, {changed_outside} changed pixels outside blend domains and blur boxes ({:.1}% of pixels were editable)",
            100.0 * edited as f64 / total.max(1) as f64
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("poisson solver matches dense solve", Box::new(criterion_1)),
        ("harmonic maximum principle", Box::new(criterion_2)),
        ("homography round trip", Box::new(criterion_3)),
        ("plane fitting", Box::new(criterion_4)),
        ("region proposal matches flood fill", Box::new(criterion_5)),
        ("sine warp identity and containment", Box::new(criterion_6)),
        ("end-to-end determinism", Box::new(|| criterion_7(tmp.path()))),
        ("self-consistency", Box::new(|| criterion_8(tmp.path()))),
        ("statistics", Box::new(criterion_9)),
        ("pixel locality", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
