//! Evaluation: ball detection from pixels, the two frame metrics, per-horizon
//! error curves and hidden-state visualization.
//!
//! Metrics are computed on the `[0, 1]` intensity view. Model outputs are
//! clamped into `[-1, 1]` and denormalized first.

use std::fmt::Write as _;
use std::path::Path;

use image::{GrayImage, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::Scalar;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::raster::{Dataset, Frame, VideoSequence};
use crate::training::window;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Intensity at or above which a pixel counts as foreground.
    ///
    /// At 0.5 the summed kernel tails of two nearly touching balls form a
    /// bridge several pixels wide that one erosion pass does not cut; 0.75
    /// keeps them apart.
    pub threshold: f64,
    /// Erosion passes with a 3x3 cross before labeling.
    pub erosion_passes: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            erosion_passes: 1,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "detection threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Smallest component (in eroded pixels) accepted as a ball.
pub const MIN_AREA: usize = 2;

fn erode(mask: &[bool], height: usize, width: usize) -> Vec<bool> {
    let on = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width && mask[r as usize * width + c as usize]
    };
    let mut out = vec![false; mask.len()];
    for r in 0..height as isize {
        for c in 0..width as isize {
            out[r as usize * width + c as usize] =
                on(r, c) && on(r - 1, c) && on(r + 1, c) && on(r, c - 1) && on(r, c + 1);
        }
    }
    out
}

/// Intensity-weighted centroids `(col, row)` of the 8-connected foreground
/// components left after thresholding and erosion.
pub fn detect_balls(frame: &Frame, cfg: &DetectionConfig) -> Vec<[f64; 2]> {
    let (h, w) = (frame.height, frame.width);
    let mut mask: Vec<bool> = frame.data.iter().map(|&v| v >= cfg.threshold).collect();
    for _ in 0..cfg.erosion_passes {
        mask = erode(&mask, h, w);
    }
    let mut seen = vec![false; mask.len()];
    let mut centroids = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut area, mut mass, mut sx, mut sy) = (0usize, 0.0, 0.0, 0.0);
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            let v = frame.data[idx];
            area += 1;
            mass += v;
            sx += v * c as f64;
            sy += v * r as f64;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if area >= MIN_AREA && mass > 0.0 {
            centroids.push([sx / mass, sy / mass]);
        }
    }
    centroids
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matching {
    /// Each predicted centroid, in canonical order, takes its nearest unused
    /// ground-truth centroid while any remain.
    #[default]
    Greedy,
    /// Minimum-total-distance assignment (sensitivity check).
    Optimal,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn canonical(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = points.to_vec();
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out
}

fn nearest(p: [f64; 2], gt: &[[f64; 2]]) -> f64 {
    gt.iter().map(|&g| dist(p, g)).fold(f64::INFINITY, f64::min)
}

fn greedy_sum(pred: &[[f64; 2]], gt: &[[f64; 2]]) -> f64 {
    let mut free: Vec<bool> = vec![true; gt.len()];
    let mut remaining = gt.len();
    let mut total = 0.0;
    for &p in pred {
        if remaining > 0 {
            let (j, d) = gt
                .iter()
                .enumerate()
                .filter(|(j, _)| free[*j])
                .map(|(j, &g)| (j, dist(p, g)))
                .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            free[j] = false;
            remaining -= 1;
            total += d;
        } else {
            total += nearest(p, gt);
        }
    }
    total
}

const OPTIMAL_MAX_GT: usize = 16;

fn optimal_sum(pred: &[[f64; 2]], gt: &[[f64; 2]]) -> f64 {
    let (np, ng) = (pred.len(), gt.len());
    if ng > OPTIMAL_MAX_GT {
        return greedy_sum(pred, gt);
    }
    let extras = np.saturating_sub(ng);
    let full = (1usize << ng) - 1;
    // best[mask] after assigning the first i predictions; extras = i - popcount(mask).
    let mut best = vec![f64::INFINITY; 1 << ng];
    best[0] = 0.0;
    for (i, &p) in pred.iter().enumerate() {
        let mut next = vec![f64::INFINITY; 1 << ng];
        for mask in 0..=full {
            let cur = best[mask];
            if !cur.is_finite() {
                continue;
            }
            let used_extras = i - mask.count_ones() as usize;
            for (j, &g) in gt.iter().enumerate() {
                if mask & (1 << j) == 0 {
                    let m = mask | (1 << j);
                    next[m] = next[m].min(cur + dist(p, g));
                }
            }
            if used_extras < extras {
                next[mask] = next[mask].min(cur + nearest(p, gt));
            }
        }
        best = next;
    }
    let matched = np.min(ng);
    (0..=full)
        .filter(|m| m.count_ones() as usize == matched)
        .map(|m| best[m])
        .fold(f64::INFINITY, f64::min)
}

/// Summed matched distances plus `penalty` per count mismatch.
pub fn match_distance(pred: &[[f64; 2]], gt: &[[f64; 2]], penalty: f64, matching: Matching) -> f64 {
    let pred = canonical(pred);
    let gt = canonical(gt);
    let matched = if gt.is_empty() {
        0.0
    } else {
        match matching {
            Matching::Greedy => greedy_sum(&pred, &gt),
            Matching::Optimal => optimal_sum(&pred, &gt),
        }
    };
    matched + pred.len().abs_diff(gt.len()) as f64 * penalty
}

/// Length of the frame diagonal in pixels, the per-ball count-mismatch penalty.
pub fn diagonal(frame: &Frame) -> f64 {
    (frame.height as f64).hypot(frame.width as f64)
}

fn check_dims(a: &Frame, b: &Frame) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) || a.data.len() != b.data.len() {
        return Err(Error::DimensionMismatch(format!(
            "frames are {}x{} and {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

pub fn centroid_distance(pred: &Frame, gt: &Frame, cfg: &DetectionConfig) -> Result<f64> {
    centroid_distance_with(pred, gt, cfg, Matching::Greedy)
}

pub fn centroid_distance_with(pred: &Frame, gt: &Frame, cfg: &DetectionConfig, matching: Matching) -> Result<f64> {
    check_dims(pred, gt)?;
    Ok(match_distance(
        &detect_balls(pred, cfg),
        &detect_balls(gt, cfg),
        diagonal(gt),
        matching,
    ))
}

/// Summed squared pixel error divided by 4.
pub fn mse_scaled(pred: &Frame, gt: &Frame) -> Result<f64> {
    check_dims(pred, gt)?;
    Ok(pred.data.iter().zip(&gt.data).map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / 4.0)
}

/// Produces `k` normalized frames from a window of normalized frames.
///
/// The window holds `t + k` frames; honest forecasters read only the first `t`.
pub trait Forecaster: Sync {
    fn forecast(&self, window: &[Vec<f64>], t: usize, k: usize) -> Result<Vec<Vec<f64>>>;
}

impl<T: Scalar> Forecaster for Model<T> {
    fn forecast(&self, window: &[Vec<f64>], t: usize, k: usize) -> Result<Vec<Vec<f64>>> {
        let context: Vec<Vec<T>> = window[..t]
            .iter()
            .map(|f| f.iter().map(|&v| T::of(v)).collect())
            .collect();
        Ok(self
            .generate(&context, k)?
            .into_iter()
            .map(|f| f.into_iter().map(|v| v.to_f64().unwrap()).collect())
            .collect())
    }
}

/// Null model that always predicts an empty (black) frame.
pub struct EmptyFrames;

impl Forecaster for EmptyFrames {
    fn forecast(&self, window: &[Vec<f64>], _t: usize, k: usize) -> Result<Vec<Vec<f64>>> {
        Ok(vec![vec![-1.0; window[0].len()]; k])
    }
}

/// Repeats the last context frame.
pub struct CopyLast;

impl Forecaster for CopyLast {
    fn forecast(&self, window: &[Vec<f64>], t: usize, k: usize) -> Result<Vec<Vec<f64>>> {
        Ok(vec![window[t - 1].clone(); k])
    }
}

/// Returns the ground truth; every metric is zero.
pub struct Oracle;

impl Forecaster for Oracle {
    fn forecast(&self, window: &[Vec<f64>], t: usize, k: usize) -> Result<Vec<Vec<f64>>> {
        Ok(window[t..t + k].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub context: usize,
    pub horizon: usize,
    pub detection: DetectionConfig,
    #[serde(default)]
    pub matching: Matching,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            context: 10,
            horizon: 20,
            detection: DetectionConfig::default(),
            matching: Matching::Greedy,
        }
    }
}

/// Predicted components per frame above this multiple of the true count marks
/// the centroid metric as not meaningful.
pub const NOISE_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub context: usize,
    pub horizon: usize,
    pub n_sequences: usize,
    pub mse_mean: Vec<f64>,
    pub mse_se: Vec<f64>,
    pub cd_mean: Vec<f64>,
    pub cd_se: Vec<f64>,
    /// `[sequence][frame]` raw values.
    pub per_sequence_mse: Vec<Vec<f64>>,
    pub per_sequence_cd: Vec<Vec<f64>>,
    /// Predictions were mostly noise: far more components than balls.
    pub cd_not_available: bool,
}

/// Mean and standard error (sample standard deviation over `√n`; 0 when `n < 2`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

struct SequenceScores {
    mse: Vec<f64>,
    cd: Vec<f64>,
    predicted_components: usize,
    true_components: usize,
}

fn score_sequence(f: &dyn Forecaster, seq: &VideoSequence, opts: &EvalOptions) -> Result<SequenceScores> {
    let (t, k) = (opts.context, opts.horizon);
    let frames = window::<f64>(seq, 0, t + k)?;
    let preds = f.forecast(&frames, t, k)?;
    if preds.len() != k {
        return Err(Error::Shape(format!("forecaster returned {} frames, expected {k}", preds.len())));
    }
    let mut out = SequenceScores {
        mse: Vec::with_capacity(k),
        cd: Vec::with_capacity(k),
        predicted_components: 0,
        true_components: 0,
    };
    for (i, p) in preds.iter().enumerate() {
        let pred = Frame::from_normalized_clamped(seq.height, seq.width, p)?;
        let gt = seq.frame(t + i);
        out.mse.push(mse_scaled(&pred, &gt)?);
        let pc = detect_balls(&pred, &opts.detection);
        let gc = detect_balls(&gt, &opts.detection);
        out.predicted_components += pc.len();
        out.true_components += gc.len();
        out.cd.push(match_distance(&pc, &gc, diagonal(&gt), opts.matching));
    }
    Ok(out)
}

/// Scores `forecaster` on the first `context + horizon` frames of every sequence.
pub fn evaluate(forecaster: &dyn Forecaster, data: &Dataset, opts: &EvalOptions) -> Result<EvalReport> {
    opts.detection.validate()?;
    if opts.context < 1 || opts.horizon < 1 {
        return Err(Error::Config("context and horizon must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Config("evaluation dataset is empty".into()));
    }
    let scores: Vec<SequenceScores> = data
        .sequences
        .par_iter()
        .map(|seq| score_sequence(forecaster, seq, opts))
        .collect::<Result<_>>()?;
    let per_sequence_mse: Vec<Vec<f64>> = scores.iter().map(|s| s.mse.clone()).collect();
    let per_sequence_cd: Vec<Vec<f64>> = scores.iter().map(|s| s.cd.clone()).collect();
    let (mut mse_mean, mut mse_se, mut cd_mean, mut cd_se) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..opts.horizon {
        let (m, s) = mean_se(&column(&per_sequence_mse, i));
        mse_mean.push(m);
        mse_se.push(s);
        let (m, s) = mean_se(&column(&per_sequence_cd, i));
        cd_mean.push(m);
        cd_se.push(s);
    }
    let predicted: usize = scores.iter().map(|s| s.predicted_components).sum();
    let truth: usize = scores.iter().map(|s| s.true_components).sum();
    Ok(EvalReport {
        context: opts.context,
        horizon: opts.horizon,
        n_sequences: data.len(),
        mse_mean,
        mse_se,
        cd_mean,
        cd_se,
        per_sequence_mse,
        per_sequence_cd,
        cd_not_available: predicted as f64 > NOISE_FACTOR * truth.max(1) as f64,
    })
}

/// Mean one-step scaled MSE of `model` given `context` frames.
pub fn one_step_mse<T: Scalar>(model: &Model<T>, data: &Dataset, context: usize) -> Result<f64> {
    let opts = EvalOptions {
        context,
        horizon: 1,
        ..Default::default()
    };
    let report = evaluate(model, data, &opts)?;
    Ok(report.mse_mean[0])
}

const CSV_HEADER: &str = "frame_index,mse_mean,mse_se,cd_mean,cd_se,n_sequences";

impl EvalReport {
    pub fn horizon_mean_mse(&self) -> f64 {
        self.mse_mean.iter().sum::<f64>() / self.mse_mean.len() as f64
    }

    pub fn horizon_mean_cd(&self) -> f64 {
        self.cd_mean.iter().sum::<f64>() / self.cd_mean.len() as f64
    }

    /// One row per predicted frame, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for i in 0..self.horizon {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                self.mse_mean[i],
                self.mse_se[i],
                self.cd_mean[i],
                self.cd_se[i],
                self.n_sequences
            )
            .unwrap();
        }
        out
    }

    /// Reads the curves back from [`EvalReport::to_csv`] output; per-sequence values are not stored there.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Config(format!("report CSV must start with {CSV_HEADER:?}")));
        }
        let mut report = EvalReport {
            context: 0,
            horizon: 0,
            n_sequences: 0,
            mse_mean: Vec::new(),
            mse_se: Vec::new(),
            cd_mean: Vec::new(),
            cd_se: Vec::new(),
            per_sequence_mse: Vec::new(),
            per_sequence_cd: Vec::new(),
            cd_not_available: false,
        };
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Config(format!("report CSV line {}: cannot parse {line:?}", n + 2));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad());
            }
            let num = |i: usize| fields[i].trim().parse::<f64>().map_err(|_| bad());
            report.mse_mean.push(num(1)?);
            report.mse_se.push(num(2)?);
            report.cd_mean.push(num(3)?);
            report.cd_se.push(num(4)?);
            report.n_sequences = fields[5].trim().parse().map_err(|_| bad())?;
            report.horizon += 1;
        }
        if report.horizon == 0 {
            return Err(Error::Config("report CSV has no rows".into()));
        }
        Ok(report)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Least-squares slope of `values` against their 1-based index.
pub fn slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mx = (n + 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let dx = i as f64 + 1.0 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// A line chart with a shaded ±1 standard-error band per series.
pub fn svg_chart(title: &str, y_label: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(1);
    let finite = |v: &f64| v.is_finite();
    let hi = series
        .iter()
        .flat_map(|(_, m, s)| m.iter().zip(*s).map(|(m, s)| m + s))
        .filter(finite)
        .fold(0.0f64, f64::max);
    let y_max = if hi > 0.0 { hi * 1.05 } else { 1.0 };
    let x = |i: usize| L + (W - L - R) * if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    let y = |v: f64| T + (H - T - B) * (1.0 - (v.max(0.0) / y_max).min(1.0));

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, W / 2.0, escape(title)).unwrap();
    writeln!(svg, r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - B, W - R, H - B).unwrap();
    writeln!(svg, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#, H - B).unwrap();
    for tick in 0..=4 {
        let v = y_max * tick as f64 / 4.0;
        writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.2}</text>"#, L - 6.0, y(v) + 4.0, v).unwrap();
    }
    for i in 0..n {
        writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, x(i), H - B + 16.0, i + 1).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">predicted frame</text>"#, (L + W - R) / 2.0, H - 12.0).unwrap();
    writeln!(svg, r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, escape(y_label)).unwrap();

    for (si, (name, mean, se)) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let pts = |f: &dyn Fn(usize) -> f64| -> Vec<String> {
            (0..mean.len()).filter(|&i| mean[i].is_finite()).map(|i| format!("{:.2},{:.2}", x(i), y(f(i)))).collect()
        };
        let mut band = pts(&|i| mean[i] + se[i]);
        let mut lower = pts(&|i| mean[i] - se[i]);
        lower.reverse();
        band.extend(lower);
        writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" ")).unwrap();
        writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts(&|i| mean[i]).join(" ")).unwrap();
        let ly = T + 16.0 * (si as f64 + 1.0);
        writeln!(svg, r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#, W - R - 150.0, escape(name)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl EvalReport {
    /// `(mse chart, centroid-distance chart)`.
    pub fn to_svg(&self, label: &str) -> (String, String) {
        let mse = svg_chart("Scaled MSE per predicted frame", "scaled MSE", &[(label, &self.mse_mean, &self.mse_se)]);
        let cd = svg_chart("Centroid distance per predicted frame", "pixels", &[(label, &self.cd_mean, &self.cd_se)]);
        (mse, cd)
    }
}

/// Per-channel min-max normalized tiles of layer `layer`'s hidden state after
/// consuming `context`. Constant channels become mid-gray.
pub fn hidden_tiles<T: Scalar>(model: &Model<T>, context: &[Vec<T>], layer: usize) -> Result<Vec<GrayImage>> {
    let spec = &model.spec;
    if !spec.architecture.is_convolutional() {
        return Err(Error::UnsupportedArchitecture(format!(
            "hidden-state images need a convolutional model, got {}",
            spec.architecture
        )));
    }
    if layer >= spec.n_layers() {
        return Err(Error::Config(format!(
            "layer {layer} out of range for a {}-layer model",
            spec.n_layers()
        )));
    }
    let states = model.encoder_states(context)?;
    let h = &states[layer].0;
    let plane = spec.frame_len();
    Ok(h.chunks(plane)
        .map(|ch| {
            let vals: Vec<f64> = ch.iter().map(|v| v.to_f64().unwrap()).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            GrayImage::from_fn(spec.width as u32, spec.height as u32, |c, r| {
                let v = vals[r as usize * spec.width + c as usize];
                let g = if hi - lo > 1e-12 { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 128 };
                Luma([g])
            })
        })
        .collect())
}

/// Lays tiles out on a near-square grid separated by 2-pixel black gutters.
pub fn tile_grid(tiles: &[GrayImage]) -> GrayImage {
    const GAP: u32 = 2;
    let n = tiles.len().max(1) as u32;
    let cols = (n as f64).sqrt().ceil() as u32;
    let rows = n.div_ceil(cols);
    let (tw, th) = tiles.first().map_or((1, 1), |t| t.dimensions());
    let mut grid = GrayImage::new(cols * tw + (cols + 1) * GAP, rows * th + (rows + 1) * GAP);
    for (i, tile) in tiles.iter().enumerate() {
        let (gc, gr) = (i as u32 % cols, i as u32 / cols);
        image::imageops::replace(
            &mut grid,
            tile,
            i64::from(GAP + gc * (tw + GAP)),
            i64::from(GAP + gr * (th + GAP)),
        );
    }
    grid
}

/// Writes the hidden-state grid of `layer` as a PNG; returns the number of tiles.
pub fn dump_hidden_states<T: Scalar>(model: &Model<T>, context: &[Vec<T>], layer: usize, out: &Path) -> Result<usize> {
    let tiles = hidden_tiles(model, context, layer)?;
    tile_grid(&tiles)
        .save(out)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(tiles.len())
}
