//! Writes the checked-in scene fixtures: small RGB images with analytic
//! depth and boundary maps (flat, ramp and two-plane scenes) and a few box
//! lists exercising the prefilter.
//!
//! Usage: `cargo run -p rtw-core --example make_fixtures [OUT_DIR]`

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw_core::raster::{self, Raster};

const W: usize = 128;
const H: usize = 96;

#[derive(Clone, Copy)]
enum Scene {
    Flat,
    Ramp,
    TwoPlane,
}

fn depth(scene: Scene, x: usize, y: usize) -> f32 {
    let (x, y) = (x as f32 / W as f32, y as f32 / H as f32);
    match scene {
        Scene::Flat => 0.5,
        // recedes toward the top of the frame
        Scene::Ramp => 1.0 / (1.0 + 0.8 * y),
        Scene::TwoPlane if x < 0.5 => 1.0 / (1.0 + 0.6 * x),
        Scene::TwoPlane => 1.0 / (1.6 - 0.6 * x),
    }
}

/// Panel layout: vertical cuts at `cols`, horizontal cuts at `rows`.
fn boundary(cols: &[usize], rows: &[usize], x: usize, y: usize) -> f32 {
    let near = |c: &usize, v: usize| v + 1 >= *c && v <= *c;
    if cols.iter().any(|c| near(c, x)) || rows.iter().any(|r| near(r, y)) {
        1.0
    } else {
        0.0
    }
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scenes"));
    let images = out.join("images");
    let maps = out.join("maps");
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&maps).unwrap();

    let scenes = [Scene::Flat, Scene::Ramp, Scene::TwoPlane];
    let layouts: [(&[usize], &[usize]); 4] = [(&[64], &[]), (&[], &[48]), (&[64], &[48]), (&[], &[])];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..10 {
        let id = format!("scene_{i:02}");
        let scene = scenes[i % 3];
        let (mut cols, rows) = layouts[i % 4];
        if matches!(scene, Scene::TwoPlane) {
            cols = &[64];
        }
        let base: [f32; 3] = [rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)];
        let tilt: [f32; 3] = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
        let mut img = Raster::filled(W, H, 3, 0.0);
        for y in 0..H {
            for x in 0..W {
                let panel = cols.iter().filter(|&&c| x >= c).count() + 2 * rows.iter().filter(|&&r| y >= r).count();
                for c in 0..3 {
                    let shade = 0.12 * panel as f32 * if c == panel % 3 { 1.0 } else { -0.5 };
                    let v = base[c] + shade + tilt[c] * (x as f32 / W as f32 - 0.5) + rng.gen_range(-0.02..0.02);
                    img.set(x, y, c, v.clamp(0.0, 1.0));
                }
            }
        }
        raster::save_png(&img, &images.join(format!("{id}.png"))).unwrap();
        let d = Raster::from_fn(W, H, 1, |x, y, _| depth(scene, x, y));
        raster::save_map(&raster::normalize_depth(&d).unwrap(), &maps.join(format!("{id}.depth.rtw"))).unwrap();
        let b = Raster::from_fn(W, H, 1, |x, y, _| boundary(cols, rows, x, y));
        raster::save_map(&b, &maps.join(format!("{id}.boundary.rtw"))).unwrap();
    }
    // a small sign to blur, a face, and one image mostly covered by text
    fs::write(maps.join("scene_03.text.json"), r#"[{"kind":"existing-text","rect":[8,8,40,20]}]"#).unwrap();
    fs::write(maps.join("scene_05.faces.json"), r#"[{"kind":"face","rect":[90,10,120,40]}]"#).unwrap();
    fs::write(maps.join("scene_08.text.json"), r#"[{"kind":"existing-text","rect":[0,0,128,60]}]"#).unwrap();
    println!("wrote fixtures to {}", out.display());
}
