//! Rendering of simulated worlds to grayscale frames, and the `BBV1` dataset format.
//!
//! Frames hold intensities in `[0, 1]`; models consume the affine `[-1, 1]`
//! view produced by [`normalize`]. On disk every pixel is quantized to 8 bits.
//!
//! File layout (little-endian):
//!
//! ```text
//! "BBV1" | u32 n_sequences | u32 frames_per_seq | u16 height | u16 width | u8 flags
//! per sequence: frames as u8 row-major
//!               if flags & 1: u16 n_balls, then (px, py, vx, vy) f64 per ball per frame
//! ```
//!
//! A JSON twin (`<name>.json`) next to the binary file records the split, the
//! world configuration and the master seed.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, WorldConfig, WorldState};

pub const MAGIC: [u8; 4] = *b"BBV1";
const FLAG_SIDECAR: u8 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 2 + 2 + 1;

/// A grayscale frame with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Sum of squared intensities.
    pub fn squared_mass(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn quantize(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        normalize(&self.data)
    }

    /// Builds a frame from a `[-1, 1]` model output, clamping stray values into range first.
    pub fn from_normalized_clamped(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width} frame",
                values.len()
            )));
        }
        let clamped: Vec<f64> = values.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Ok(Self {
            height,
            width,
            data: denormalize(&clamped)?,
        })
    }
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn dequantize(v: u8) -> f64 {
    f64::from(v) / 255.0
}

/// Maps `[0, 1]` onto `[-1, 1]` via `2x - 1`.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&x| {
            if (0.0..=1.0).contains(&x) {
                Ok(2.0 * x - 1.0)
            } else {
                Err(Error::Range(format!("intensity {x} outside [0, 1]")))
            }
        })
        .collect()
}

/// Inverse of [`normalize`].
pub fn denormalize(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&y| {
            if (-1.0..=1.0).contains(&y) {
                Ok((y + 1.0) / 2.0)
            } else {
                Err(Error::Range(format!("normalized value {y} outside [-1, 1]")))
            }
        })
        .collect()
}

/// Box-units per pixel at the given resolution.
pub fn pixel_size(config: &WorldConfig, resolution: usize) -> f64 {
    config.box_side / resolution as f64
}

/// Position of a ball center in pixel coordinates `(col, row)`, pixel centers at integers.
pub fn to_pixel_coords(pos: [f64; 2], config: &WorldConfig, resolution: usize) -> [f64; 2] {
    let s = pixel_size(config, resolution);
    [pos[0] / s - 0.5, pos[1] / s - 0.5]
}

/// Renders every ball with the super-Gaussian kernel `exp(-(d²/r²)⁴)`, clamped at 1.
pub fn render(state: &WorldState, config: &WorldConfig, resolution: usize) -> Result<Frame> {
    if resolution < 8 {
        return Err(Error::Config(format!("resolution must be >= 8, got {resolution}")));
    }
    let s = pixel_size(config, resolution);
    let r2 = config.radius * config.radius;
    // Beyond d² = 6r² the kernel underflows to exactly 0.0.
    let reach = (6.0 * r2).sqrt();
    let mut frame = Frame::zeros(resolution, resolution);
    for p in &state.positions {
        let col_lo = (((p[0] - reach) / s - 0.5).floor().max(0.0)) as usize;
        let col_hi = (((p[0] + reach) / s - 0.5).ceil().max(0.0) as usize).min(resolution - 1);
        let row_lo = (((p[1] - reach) / s - 0.5).floor().max(0.0)) as usize;
        let row_hi = (((p[1] + reach) / s - 0.5).ceil().max(0.0) as usize).min(resolution - 1);
        for row in row_lo..=row_hi {
            let y = (row as f64 + 0.5) * s;
            for col in col_lo..=col_hi {
                let x = (col as f64 + 0.5) * s;
                let d2 = (x - p[0]).powi(2) + (y - p[1]).powi(2);
                let q = d2 / r2;
                frame.data[row * resolution + col] += (-(q * q * q * q)).exp();
            }
        }
    }
    for v in &mut frame.data {
        *v = v.min(1.0);
    }
    Ok(frame)
}

/// Renders at half resolution and upsamples 2x by nearest neighbour.
pub fn render_legacy(state: &WorldState, config: &WorldConfig, resolution: usize) -> Result<Frame> {
    if !resolution.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "legacy upsampling needs an even resolution, got {resolution}"
        )));
    }
    let half = render(state, config, resolution / 2)?;
    let mut frame = Frame::zeros(resolution, resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            frame.data[row * resolution + col] = half.at(row / 2, col / 2);
        }
    }
    Ok(frame)
}

/// A video of quantized frames with an optional ground-truth trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub height: usize,
    pub width: usize,
    /// `n_frames * height * width` bytes, frame-major.
    pub pixels: Vec<u8>,
    pub trajectory: Option<Vec<WorldState>>,
}

impl VideoSequence {
    pub fn from_frames(frames: &[Frame], trajectory: Option<Vec<WorldState>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Config("a sequence needs at least one frame".into()))?;
        let (height, width) = (first.height, first.width);
        if let Some(t) = &trajectory {
            if t.len() != frames.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} frames but {} trajectory states",
                    frames.len(),
                    t.len()
                )));
            }
        }
        let mut pixels = Vec::with_capacity(frames.len() * height * width);
        for f in frames {
            if f.height != height || f.width != width {
                return Err(Error::DimensionMismatch(format!(
                    "frame {}x{} in a {height}x{width} sequence",
                    f.height, f.width
                )));
            }
            pixels.extend(f.quantize());
        }
        Ok(Self {
            height,
            width,
            pixels,
            trajectory,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn n_frames(&self) -> usize {
        self.pixels.len() / self.frame_len()
    }

    pub fn frame_bytes(&self, index: usize) -> &[u8] {
        let n = self.frame_len();
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn frame(&self, index: usize) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            data: self.frame_bytes(index).iter().map(|&b| dequantize(b)).collect(),
        }
    }

    /// Frame `index` in the `[-1, 1]` view.
    pub fn normalized_frame(&self, index: usize) -> Vec<f64> {
        self.frame_bytes(index)
            .iter()
            .map(|&b| 2.0 * dequantize(b) - 1.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    /// Master seed of this split, derived from the experiment seed so splits never share sequences.
    pub fn master_seed(self, seed: u64) -> u64 {
        let offset = match self {
            Split::Train => 0u64,
            Split::Valid => 1,
            Split::Test => 2,
        };
        seed.wrapping_add(offset << 32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub world: WorldConfig,
    pub n_sequences: usize,
    pub n_frames: usize,
    pub resolution: usize,
    #[serde(default)]
    pub legacy_upsample: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            n_sequences: 6000,
            n_frames: 40,
            resolution: 60,
            legacy_upsample: false,
        }
    }
}

/// Contents of the JSON twin file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub split: Split,
    pub generator: GeneratorConfig,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<VideoSequence>,
    /// Absent when a dataset file was read without its JSON twin.
    pub meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn frame_shape(&self) -> Option<(usize, usize)> {
        self.sequences.first().map(|s| (s.height, s.width))
    }
}

/// Simulates and renders one sequence; the world seed is `master_seed + index`.
pub fn generate_sequence(
    generator: &GeneratorConfig,
    master_seed: u64,
    index: usize,
) -> Result<VideoSequence> {
    let world = WorldConfig {
        seed: master_seed.wrapping_add(index as u64),
        ..generator.world
    };
    let trajectory = sim::simulate(&world, generator.n_frames)?;
    let frames = trajectory
        .iter()
        .map(|state| {
            if generator.legacy_upsample {
                render_legacy(state, &world, generator.resolution)
            } else {
                render(state, &world, generator.resolution)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::from_frames(&frames, Some(trajectory))
}

pub fn generate_dataset(generator: &GeneratorConfig, split: Split, master_seed: u64) -> Result<Dataset> {
    generator.world.validate()?;
    let sequences = (0..generator.n_sequences)
        .into_par_iter()
        .map(|i| generate_sequence(generator, master_seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sequences,
        meta: Some(DatasetMeta {
            split,
            generator: generator.clone(),
            master_seed,
        }),
    })
}

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let first = dataset
        .sequences
        .first()
        .ok_or_else(|| Error::Config("cannot write an empty dataset".into()))?;
    let (height, width, n_frames) = (first.height, first.width, first.n_frames());
    let sidecar = first.trajectory.is_some();
    for (i, s) in dataset.sequences.iter().enumerate() {
        if s.height != height || s.width != width || s.n_frames() != n_frames {
            return Err(Error::DimensionMismatch(format!(
                "sequence {i} is {}x{}x{}, expected {n_frames}x{height}x{width}",
                s.n_frames(),
                s.height,
                s.width
            )));
        }
        if s.trajectory.is_some() != sidecar {
            return Err(Error::DimensionMismatch(format!(
                "sequence {i} disagrees on trajectory sidecar presence"
            )));
        }
    }
    let to_u16 = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} exceeds u16")))
    };
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} exceeds u32")))
    };

    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&to_u32(dataset.sequences.len(), "sequence count")?.to_le_bytes())?;
    out.write_all(&to_u32(n_frames, "frame count")?.to_le_bytes())?;
    out.write_all(&to_u16(height, "height")?.to_le_bytes())?;
    out.write_all(&to_u16(width, "width")?.to_le_bytes())?;
    out.write_all(&[if sidecar { FLAG_SIDECAR } else { 0 }])?;
    for s in &dataset.sequences {
        out.write_all(&s.pixels)?;
        if let Some(trajectory) = &s.trajectory {
            let n_balls = trajectory.first().map_or(0, WorldState::n_balls);
            out.write_all(&to_u16(n_balls, "ball count")?.to_le_bytes())?;
            for state in trajectory {
                if state.n_balls() != n_balls {
                    return Err(Error::DimensionMismatch("ball count varies within a sequence".into()));
                }
                for (p, v) in state.positions.iter().zip(&state.velocities) {
                    for x in [p[0], p[1], v[0], v[1]] {
                        out.write_all(&x.to_le_bytes())?;
                    }
                }
            }
        }
    }
    out.flush()?;

    if let Some(meta) = &dataset.meta {
        fs::write(meta_path(path), serde_json::to_string_pretty(meta)?)?;
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(what.to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<VideoSequence>> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(Error::Truncated("header".into()));
    }
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated("header".into()));
    }
    let n_sequences = r.u32("header")? as usize;
    let n_frames = r.u32("header")? as usize;
    let height = r.u16("header")? as usize;
    let width = r.u16("header")? as usize;
    let flags = r.take(1, "header")?[0];
    if height == 0 || width == 0 || n_frames == 0 {
        return Err(Error::DimensionMismatch(format!(
            "degenerate header: {n_frames} frames of {height}x{width}"
        )));
    }
    let sidecar = flags & FLAG_SIDECAR != 0;
    let frame_bytes = n_frames * height * width;

    let mut sequences = Vec::with_capacity(n_sequences);
    for i in 0..n_sequences {
        let what = format!("frames of sequence {i}");
        let pixels = r.take(frame_bytes, &what)?.to_vec();
        let trajectory = if sidecar {
            let what = format!("trajectory of sequence {i}");
            let n_balls = r.u16(&what)? as usize;
            let mut states = Vec::with_capacity(n_frames);
            for _ in 0..n_frames {
                let mut positions = Vec::with_capacity(n_balls);
                let mut velocities = Vec::with_capacity(n_balls);
                for _ in 0..n_balls {
                    positions.push([r.f64(&what)?, r.f64(&what)?]);
                    velocities.push([r.f64(&what)?, r.f64(&what)?]);
                }
                states.push(WorldState {
                    positions,
                    velocities,
                });
            }
            Some(states)
        } else {
            None
        };
        sequences.push(VideoSequence {
            height,
            width,
            pixels,
            trajectory,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after {n_sequences} sequences",
            bytes.len() - r.pos
        )));
    }
    Ok(sequences)
}

/// Reads a dataset and, when present, its JSON twin.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let sequences = decode_dataset(&bytes)?;
    let meta_file = meta_path(path);
    let meta = if meta_file.exists() {
        Some(serde_json::from_slice(&fs::read(meta_file)?)?)
    } else {
        None
    };
    Ok(Dataset { sequences, meta })
}
