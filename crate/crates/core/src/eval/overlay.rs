use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use super::records::{EvalRecord, VISUALIZE_DIR};
use super::EvalError;
use crate::geometry::BBox2D;
use crate::schema::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlayColors {
    pub gt: Rgb<u8>,
    pub pred: Rgb<u8>,
    pub hand: Rgb<u8>,
    pub ray: Rgb<u8>,
    pub candidate: Rgb<u8>,
    pub canvas: Rgb<u8>,
}

impl Default for OverlayColors {
    fn default() -> Self {
        Self {
            gt: Rgb([0, 200, 0]),
            pred: Rgb([230, 0, 0]),
            hand: Rgb([0, 90, 255]),
            ray: Rgb([255, 150, 0]),
            candidate: Rgb([150, 150, 150]),
            canvas: Rgb([255, 255, 255]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderSummary {
    pub dir: PathBuf,
    pub images: Vec<PathBuf>,
    pub text_files: Vec<PathBuf>,
}

/// File-name stem for a case id.
pub fn overlay_stem(case_id: &str) -> String {
    case_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn draw_box(img: &mut RgbImage, b: &BBox2D, color: Rgb<u8>, thickness: i32) {
    let (w, h) = img.dimensions();
    let x1 = b.x1.floor().clamp(0.0, w as f64 - 1.0) as i32;
    let y1 = b.y1.floor().clamp(0.0, h as f64 - 1.0) as i32;
    let x2 = b.x2.ceil().clamp(0.0, w as f64 - 1.0) as i32;
    let y2 = b.y2.ceil().clamp(0.0, h as f64 - 1.0) as i32;
    for k in 0..thickness {
        let (bw, bh) = (x2 - x1 - 2 * k + 1, y2 - y1 - 2 * k + 1);
        if bw <= 0 || bh <= 0 {
            break;
        }
        draw_hollow_rect_mut(img, Rect::at(x1 + k, y1 + k).of_size(bw as u32, bh as u32), color);
    }
}

fn load_canvas(sample: &Sample, image_root: Option<&Path>, colors: &OverlayColors) -> RgbImage {
    let photo = image_root
        .map(|r| r.join(&sample.image_ref))
        .filter(|p| p.is_file())
        .and_then(|p| image::open(p).ok());
    match photo {
        Some(img) => img.to_rgb8(),
        None => RgbImage::from_pixel(sample.width.max(1), sample.height.max(1), colors.canvas),
    }
}

fn render_one(
    record: &EvalRecord,
    sample: &Sample,
    image_root: Option<&Path>,
    colors: &OverlayColors,
) -> RgbImage {
    let mut img = load_canvas(sample, image_root, colors);
    if let Some(trace) = &record.trace {
        for c in &trace.pruned {
            draw_box(&mut img, &c.bbox, colors.candidate, 1);
        }
        if let Some(ray) = &trace.ray {
            let reach = (img.width() as f64).hypot(img.height() as f64);
            let end = ray.at(reach);
            draw_line_segment_mut(
                &mut img,
                (ray.origin.x as f32, ray.origin.y as f32),
                (end.x as f32, end.y as f32),
                colors.ray,
            );
        }
    }
    if let Some(h) = record.hand_box {
        draw_box(&mut img, &BBox2D::new(h[0], h[1], h[2], h[3]), colors.hand, 2);
    }
    if let Some(g) = &record.gt_box {
        draw_box(&mut img, &g.bbox(), colors.gt, 2);
    }
    if let Some(p) = &record.pred_box {
        draw_box(&mut img, &p.bbox(), colors.pred, 2);
    }
    img
}

/// Writes one PNG per record plus `<case>_prompt.txt` and `<case>_output.txt`
/// under `<run_dir>/visualize/<scorer>/`. Samples without a backing photo in
/// `image_root` are drawn on a blank canvas of their size.
pub fn render_overlays(
    records: &[EvalRecord],
    samples: &[Arc<Sample>],
    image_root: Option<&Path>,
    run_dir: &Path,
    scorer: &str,
    colors: &OverlayColors,
) -> Result<RenderSummary, EvalError> {
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.sample_id.as_str(), &**s)).collect();
    let dir = run_dir.join(VISUALIZE_DIR).join(overlay_stem(scorer));
    fs::create_dir_all(&dir).map_err(|e| EvalError::io(&dir, e))?;
    let mut summary = RenderSummary {
        dir: dir.clone(),
        ..Default::default()
    };
    for record in records {
        let sample = by_id
            .get(record.sample_id.as_str())
            .ok_or_else(|| EvalError::UnknownSample(record.sample_id.clone()))?;
        let stem = overlay_stem(&record.case_id);
        let png = dir.join(format!("{stem}.png"));
        render_one(record, sample, image_root, colors).save(&png)?;
        summary.images.push(png);
        for (suffix, text) in [("prompt", &record.prompt), ("output", &record.raw_output)] {
            let path = dir.join(format!("{stem}_{suffix}.txt"));
            fs::write(&path, text).map_err(|e| EvalError::io(&path, e))?;
            summary.text_files.push(path);
        }
    }
    Ok(summary)
}
