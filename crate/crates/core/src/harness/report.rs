//! Static report artifacts: per-sample error table and field heatmaps laid
//! out as input | truth | prediction | absolute error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::checkpoint::Checkpoint;
use super::eval::{evaluate, predict_raw, EvalReport};
use super::metrics::{write_metrics, MetricsRecord};
use crate::error::{Error, Result};
use crate::physics::ProblemId;
use crate::problems::Dataset;

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub out_dir: PathBuf,
    /// Test samples to draw.
    pub samples: Vec<usize>,
    /// Output channel shown for multi-frame problems (default: last).
    pub frame: Option<usize>,
    /// Pixels per grid point.
    pub scale: u32,
}

impl ReportOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), samples: vec![0], frame: None, scale: 4 }
    }
}

const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn colour(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Draws panels of equal `rows × cols` size side by side, each scaled to its
/// own range.
pub fn heatmap_row(panels: &[&[f64]], rows: usize, cols: usize, scale: u32) -> Result<RgbImage> {
    if panels.iter().any(|p| p.len() != rows * cols) {
        return Err(Error::InvalidArgument("heatmap panel does not match the grid".into()));
    }
    let gap = 2 * scale;
    let (pw, ph) = (cols as u32 * scale, rows as u32 * scale);
    let width = panels.len() as u32 * pw + (panels.len() as u32 + 1) * gap;
    let mut img = RgbImage::from_pixel(width, ph + 2 * gap, Rgb([255, 255, 255]));
    for (k, p) in panels.iter().enumerate() {
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x0 = gap + k as u32 * (pw + gap);
        for i in 0..rows {
            for j in 0..cols {
                let c = colour((p[i * cols + j] - lo) / span);
                // Row index runs downward; first axis drawn vertically.
                for dy in 0..scale {
                    for dx in 0..scale {
                        img.put_pixel(x0 + j as u32 * scale + dx, gap + i as u32 * scale + dy, c);
                    }
                }
            }
        }
    }
    Ok(img)
}

/// Evaluates `ck` on `data`, writes `errors.csv`, optional `metrics.csv`,
/// and one `sample_<k>.png` per requested sample.
pub fn write_report(
    ck: &Checkpoint,
    data: &Dataset,
    metrics: Option<&[MetricsRecord]>,
    opts: &ReportOptions,
) -> Result<EvalReport> {
    let spec = &ck.spec;
    if data.problem() != spec.id || data.spec().grid != spec.grid {
        return Err(Error::Config("report dataset does not match the checkpoint".into()));
    }
    fs::create_dir_all(&opts.out_dir)?;
    let report = evaluate(&ck.model, spec, data)?;
    let mut table = String::from("sample,rel_mse\n");
    for (k, v) in report.per_sample.iter().enumerate() {
        match v {
            Some(v) => writeln!(table, "{k},{v}"),
            None => writeln!(table, "{k},"),
        }
        .expect("string write");
    }
    fs::write(opts.out_dir.join("errors.csv"), table)?;
    if let Some(m) = metrics {
        write_metrics(&opts.out_dir.join("metrics.csv"), m)?;
    }
    let (rows, cols) = (spec.rows(), spec.cols());
    let n = spec.points();
    let ch = spec.out_channels();
    let frame = opts.frame.unwrap_or(ch - 1).min(ch - 1);
    for &k in &opts.samples {
        if k >= data.count {
            return Err(Error::InvalidArgument(format!("sample {k} out of range (count {})", data.count)));
        }
        let raw = data.input(k);
        let pred = predict_raw(&ck.model, spec, raw)?;
        let truth = data.solution(k).expect("evaluate checked solutions");
        let pick = |f: &[f64]| (0..n).map(|p| f[p * ch + frame]).collect::<Vec<_>>();
        let (pt, tt) = (pick(&pred), pick(truth));
        let err: Vec<f64> = pt.iter().zip(&tt).map(|(a, b)| (a - b).abs()).collect();
        let input: Vec<f64> = match spec.id {
            ProblemId::Burgers | ProblemId::Nagumo => (0..n).map(|p| raw[p / cols]).collect(),
            ProblemId::Poisson => raw.to_vec(),
            ProblemId::AllenCahn => raw[(spec.frames_in - 1) * n..].to_vec(),
        };
        let img = heatmap_row(&[&input, &tt, &pt, &err], rows, cols, opts.scale)?;
        save_png(&img, &opts.out_dir.join(format!("sample_{k}.png")))?;
    }
    Ok(report)
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Image(e.to_string()))
}
