use std::path::{Path, PathBuf};

use clap::Args;
use detkit::dataset::{parse_detections, DatasetManifest, Detection};
use detkit::io::write_png_atomic;
use detkit::report::fmt_fixed;
use detkit::ImageDims;
use image::{Rgb, RgbImage};
use rayon::prelude::*;

use crate::util::{require_exists, usage, CliError, Classify, CliResult};
use crate::{report_written, GlobalOptions};

#[derive(Debug, Args)]
pub struct OverlayArgs {
    /// One PNG image (with --detections pointing at its .txt file)
    #[arg(long, conflicts_with = "manifest")]
    pub image: Option<PathBuf>,
    /// Manifest of images (with --detections pointing at a directory)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Detection file or directory of <image id>.txt files
    #[arg(long)]
    pub detections: PathBuf,
    /// Skip detections below this confidence
    #[arg(long, default_value_t = 0.25)]
    pub min_conf: f64,
}

const PALETTE: [[u8; 3]; 6] = [
    [255, 56, 56],
    [72, 249, 10],
    [0, 194, 255],
    [255, 178, 29],
    [207, 210, 49],
    [146, 204, 23],
];

/// 3x5 glyphs, one row per entry, bit 2 is the left column.
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];
const DOT: [u8; 5] = [0, 0, 0, 0, 2];
const SCALE: i64 = 2;

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn fill(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb<u8>) {
    for y in y0..y1 {
        for x in x0..x1 {
            put(img, x, y, c);
        }
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, fg: Rgb<u8>, bg: Rgb<u8>) {
    let n = text.chars().count() as i64;
    fill(img, x, y, x + n * 4 * SCALE + SCALE, y + 7 * SCALE, bg);
    for (i, ch) in text.chars().enumerate() {
        let glyph = match ch {
            '0'..='9' => DIGITS[ch as usize - '0' as usize],
            '.' => DOT,
            _ => continue,
        };
        let gx = x + SCALE + i as i64 * 4 * SCALE;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (4 >> col) != 0 {
                    let px = gx + col * SCALE;
                    let py = y + SCALE + row as i64 * SCALE;
                    fill(img, px, py, px + SCALE, py + SCALE, fg);
                }
            }
        }
    }
}

pub fn draw_detections(img: &mut RgbImage, dets: &[Detection]) {
    let dims = ImageDims::new(img.width(), img.height()).expect("decoded image is non-empty");
    for d in dets {
        let c = Rgb(PALETTE[d.class_id as usize % PALETTE.len()]);
        let b = d.bbox.to_abs(dims);
        let (x1, y1) = (b.x1.floor() as i64, b.y1.floor() as i64);
        let (x2, y2) = (b.x2.ceil() as i64 - 1, b.y2.ceil() as i64 - 1);
        for t in 0..2 {
            for x in x1..=x2 {
                put(img, x, y1 + t, c);
                put(img, x, y2 - t, c);
            }
            for y in y1..=y2 {
                put(img, x1 + t, y, c);
                put(img, x2 - t, y, c);
            }
        }
        let label = fmt_fixed(d.confidence, 2);
        let ty = if y1 >= 7 * SCALE { y1 - 7 * SCALE } else { y1 };
        draw_text(img, x1, ty, &label, Rgb([255, 255, 255]), c);
    }
}

fn read_dets(path: &Path, min_conf: f64) -> CliResult<Vec<Detection>> {
    let text = std::fs::read_to_string(path).data()?;
    let mut dets =
        parse_detections(&text).map_err(|e| CliError::Data(anyhow::anyhow!("{}: {e}", path.display())))?;
    dets.retain(|d| d.confidence >= min_conf);
    // Low confidences first so strong boxes end up on top.
    dets.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    Ok(dets)
}

fn overlay_one(image: &Path, dets_path: &Path, min_conf: f64, out: &Path) -> CliResult {
    let dets = if dets_path.exists() { read_dets(dets_path, min_conf)? } else { Vec::new() };
    if dets.is_empty() {
        if let Some(p) = out.parent() {
            std::fs::create_dir_all(p).internal()?;
        }
        std::fs::copy(image, out).data()?;
        return Ok(());
    }
    let mut img = image::open(image)
        .map_err(|e| CliError::Data(anyhow::anyhow!("{}: {e}", image.display())))?
        .to_rgb8();
    draw_detections(&mut img, &dets);
    write_png_atomic(out, &img).internal()
}

pub fn overlay(g: &GlobalOptions, a: &OverlayArgs) -> CliResult {
    require_exists(&a.detections, "detections")?;
    let dir = g.out_dir("overlay");
    let jobs: Vec<(PathBuf, PathBuf, PathBuf)> = match (&a.image, &a.manifest) {
        (Some(img), None) => {
            require_exists(img, "image")?;
            let stem = img.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            vec![(img.clone(), a.detections.clone(), dir.join(format!("{stem}.png")))]
        }
        (None, Some(m)) => {
            require_exists(m, "manifest")?;
            let manifest = DatasetManifest::load(m).data()?;
            let sub = dir.join(&manifest.name);
            manifest
                .entries
                .iter()
                .map(|e| {
                    let id = e.image_id();
                    (
                        manifest.resolve(&e.image),
                        a.detections.join(format!("{id}.txt")),
                        sub.join(format!("{id}.png")),
                    )
                })
                .collect()
        }
        _ => return usage("give either --image or --manifest"),
    };
    jobs.par_iter()
        .map(|(img, det, out)| overlay_one(img, det, a.min_conf, out))
        .collect::<CliResult<Vec<()>>>()?;
    let written: Vec<PathBuf> = jobs.into_iter().map(|(_, _, o)| o).collect();
    report_written(g, &written);
    println!("{} overlay images in {}", written.len(), dir.display());
    Ok(())
}
