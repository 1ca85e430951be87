use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtw_core::annotate::{self, AnnotationRecord};
use rtw_core::config::PipelineConfig;
use rtw_core::par::Execution;
use rtw_core::pipeline::{self, PipelineError, Resources};
use rtw_core::raster;

const EXIT_CORRUPT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "rtw", version, about = "Synthetic scene-text generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render text into every input image and write annotations.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Recompute the statistics table from a manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every known file under a directory.
    Validate {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Draw annotation outlines over an image.
    Preview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_logging() {
    let level = match std::env::var("RTW_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Error,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    log::error!("{msg}");
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn pipeline_fail(e: PipelineError) -> ExitCode {
    fail(e.exit_code() as u8, e)
}

fn generate(config: &Path, seed: u64, out: &Path, workers: Option<usize>, limit: Option<usize>) -> ExitCode {
    let mut cfg = match PipelineConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    cfg.seed = seed;
    if let Some(w) = workers {
        if w == 0 {
            return fail(EXIT_CONFIG, "--workers must be at least 1");
        }
        cfg.workers = w;
    }
    let res = match Resources::load(&cfg) {
        Ok(r) => r,
        Err(e) => return pipeline_fail(e),
    };
    match pipeline::run(&cfg, &res, out, limit, Execution::with_workers(cfg.workers)) {
        Ok(summary) => {
            let generated = summary.entries.iter().filter(|e| e.status == pipeline::Status::Generated).count();
            log::info!("{generated} of {} images generated", summary.entries.len());
            if summary.corrupt > 0 {
                fail(EXIT_CORRUPT, format!("{} images had corrupt inputs", summary.corrupt))
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => pipeline_fail(e),
    }
}

fn stats(manifest: &Path, out: &Path) -> ExitCode {
    match pipeline::stats_from_manifest(manifest, Execution::default()) {
        Ok(table) => match std::fs::write(out, table.to_json()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(EXIT_CORRUPT, format!("{}: {e}", out.display())),
        },
        Err(e) => pipeline_fail(e),
    }
}

fn validate(dir: &Path) -> ExitCode {
    match pipeline::validate_dir(dir) {
        Ok(report) => {
            for p in &report.problems {
                println!("{p}");
            }
            println!("{} files checked, {} problems", report.checked, report.problems.len());
            if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CORRUPT)
            }
        }
        Err(e) => pipeline_fail(e),
    }
}

fn preview(image: &Path, annotation: &Path, out: &Path) -> ExitCode {
    let img = match raster::load_png_rgb(image) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_CORRUPT, e),
    };
    let record = match AnnotationRecord::load(annotation) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CORRUPT, e),
    };
    // masks/<id>.png next to annotations/<id>.json, if present
    let mask_path = annotation.parent().and_then(Path::parent).map(|d| d.join("masks").join(format!("{}.png", record.image_id)));
    let mask = match mask_path.filter(|p| p.exists()) {
        Some(p) => match annotate::load_mask_png(&p) {
            Ok((w, h, m)) if (w, h) == (img.width(), img.height()) => Some(m),
            Ok(_) => return fail(EXIT_CORRUPT, format!("{}: mask size differs from image", p.display())),
            Err(e) => return fail(EXIT_CORRUPT, e),
        },
        None => None,
    };
    let overlay = pipeline::preview(&img, &record, mask.as_deref());
    match raster::save_png(&overlay, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_CORRUPT, e),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Generate { config, seed, out, workers, limit } => generate(&config, seed, &out, workers, limit),
        Command::Stats { manifest, out } => stats(&manifest, &out),
        Command::Validate { dir } => validate(&dir),
        Command::Preview { image, annotation, out } => preview(&image, &annotation, &out),
    }
}
