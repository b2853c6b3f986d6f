//! Training regimens, the training loop and the one-axis hyperparameter search.
//!
//! A training window holds `t` context frames followed by `k` target frames.
//! The first prediction always follows the last context frame; every later
//! prediction step consumes either the ground-truth previous frame or the
//! model's own previous output. The regimen decides which:
//!
//! * forced: always ground truth;
//! * blind: always the model's own output;
//! * curriculum: `n = min(k, epoch / 10)` steps use the model's own output,
//!   placed at the tail of the horizon by default.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{clip_global_norm, Adam, Optimizer, Scalar, Sgd, Tape, Var};
use crate::error::{Error, Result};
use crate::eval;
use crate::models::{Feed, Model, ModelSpec, Predictor};
use crate::raster::{Dataset, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forced,
    Blind,
    Curriculum,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Forced => "forced",
            Mode::Blind => "blind",
            Mode::Curriculum => "curriculum",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forced" => Ok(Mode::Forced),
            "blind" => Ok(Mode::Blind),
            "curriculum" => Ok(Mode::Curriculum),
            other => Err(Error::Config(format!("unknown training mode {other:?}"))),
        }
    }
}

/// Which prediction steps become self-fed as the curriculum advances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The last `n` steps of the horizon.
    #[default]
    Tail,
    /// The first `n` steps after the context.
    Head,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tail" => Ok(Strategy::Tail),
            "head" => Ok(Strategy::Head),
            other => Err(Error::Config(format!("unknown curriculum strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

fn default_clip() -> Option<f64> {
    Some(5.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub lr: f64,
    pub minibatch: usize,
    pub epochs: usize,
    pub context: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap; `None` disables clipping.
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
    /// Seq2seq decoders always consume their own outputs, whatever the regimen.
    #[serde(default)]
    pub decoder_self_feed: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Forced,
            lr: 0.001,
            minibatch: 16,
            epochs: 100,
            context: 10,
            horizon: 20,
            seed: 0,
            strategy: Strategy::Tail,
            optimizer: OptimizerKind::Adam,
            clip_norm: default_clip(),
            decoder_self_feed: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("train config: {msg}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.minibatch < 1 {
            return fail("minibatch must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.context < 1 || self.horizon < 1 {
            return fail("context and horizon must be at least 1");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return fail("clip norm must be positive");
        }
        Ok(())
    }

    /// Number of self-fed prediction steps during `epoch`.
    pub fn n_self_fed(&self, epoch: usize) -> usize {
        match self.mode {
            Mode::Forced => 0,
            Mode::Blind => self.horizon,
            Mode::Curriculum => curriculum_schedule(epoch, self.horizon),
        }
    }
}

/// Self-fed step count at `epoch`: one more every 10 epochs, capped at `k`.
pub fn curriculum_schedule(epoch: usize, k: usize) -> usize {
    (epoch / 10).min(k)
}

/// `mask[i]` is true when prediction `i` (0-based) consumes the model's own
/// previous output. `mask[0]` is always false.
pub fn self_fed_mask(k: usize, n_self_fed: usize, strategy: Strategy) -> Vec<bool> {
    let n = n_self_fed.min(k);
    (0..k)
        .map(|i| {
            i > 0
                && match strategy {
                    Strategy::Tail => i >= k - n,
                    Strategy::Head => i <= n,
                }
        })
        .collect()
}

fn feed_from(mask: &[bool], truth: impl Fn(usize) -> Var) -> Vec<Option<Var>> {
    mask.iter()
        .enumerate()
        .map(|(i, &own)| if i == 0 || own { None } else { Some(truth(i)) })
        .collect()
}

fn check_window(len: usize, t: usize, k: usize) -> Result<()> {
    if len < t + k {
        return Err(Error::SequenceTooShort { len, needed: t + k });
    }
    if t < 1 || k < 1 {
        return Err(Error::Config("context and horizon must be at least 1".into()));
    }
    Ok(())
}

/// Records the regimen loss of one window on `tape`.
///
/// `frames` holds at least `t + k` normalized frames shaped `[1, H, W]`. A
/// model with a reconstruction decoder adds the reversed-context loss, the
/// total being the mean of the two; its inputs follow `recon_mask`.
pub fn window_loss<T: Scalar, P: Predictor<T>>(
    tape: &mut Tape<T>,
    predictor: &P,
    frames: &[Var],
    t: usize,
    k: usize,
    mask: &[bool],
    recon_mask: &[bool],
) -> Result<Var> {
    check_window(frames.len(), t, k)?;
    let feed = Feed {
        future: feed_from(mask, |i| frames[t + i - 1]),
        reconstruction: feed_from(recon_mask, |j| frames[t - j]),
    };
    let rollout = predictor.predict(tape, &frames[..t], k, &feed)?;
    let mut terms = Vec::with_capacity(k);
    for (i, &pred) in rollout.future.iter().enumerate() {
        terms.push(tape.mse(pred, frames[t + i])?);
    }
    let future = tape.mean(&terms)?;
    match rollout.reconstruction {
        None => Ok(future),
        Some(recon) => {
            let mut terms = Vec::with_capacity(t);
            for (j, &pred) in recon.iter().enumerate() {
                terms.push(tape.mse(pred, frames[t - 1 - j])?);
            }
            let back = tape.mean(&terms)?;
            tape.mean(&[future, back])
        }
    }
}

fn window_on_tape<T: Scalar>(tape: &mut Tape<T>, spec: &ModelSpec, frames: &[Vec<T>]) -> Result<Vec<Var>> {
    frames
        .iter()
        .map(|f| tape.constant(vec![1, spec.height, spec.width], f.clone()))
        .collect()
}

/// Masks for the future and reconstruction decoders under `n_self_fed`.
///
/// The reconstruction decoder always consumes its own outputs; regimens only
/// concern the future frames.
fn masks(spec: &ModelSpec, t: usize, k: usize, n_self_fed: usize, strategy: Strategy, decoder_self_feed: bool) -> (Vec<bool>, Vec<bool>) {
    let future = if decoder_self_feed && spec.architecture.is_seq2seq() {
        vec![true; k]
    } else {
        self_fed_mask(k, n_self_fed, strategy)
    };
    (future, vec![true; t])
}

fn loss_value<T: Scalar>(model: &Model<T>, frames: &[Vec<T>], t: usize, k: usize, n: usize, strategy: Strategy) -> Result<T> {
    check_window(frames.len(), t, k)?;
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let vars = window_on_tape(&mut tape, &model.spec, &frames[..t + k])?;
    let (mask, recon) = masks(&model.spec, t, k, n, strategy, false);
    let loss = window_loss(&mut tape, &bound, &vars, t, k, &mask, &recon)?;
    Ok(tape.scalar(loss))
}

/// Loss with ground truth fed at every step.
pub fn teacher_forced_loss<T: Scalar>(model: &Model<T>, frames: &[Vec<T>], t: usize, k: usize) -> Result<T> {
    loss_value(model, frames, t, k, 0, Strategy::Tail)
}

/// Loss with the model's own outputs fed at every step after the context.
pub fn blind_loss<T: Scalar>(model: &Model<T>, frames: &[Vec<T>], t: usize, k: usize) -> Result<T> {
    loss_value(model, frames, t, k, k, Strategy::Tail)
}

pub fn curriculum_loss<T: Scalar>(
    model: &Model<T>,
    frames: &[Vec<T>],
    t: usize,
    k: usize,
    n_self_fed: usize,
    strategy: Strategy,
) -> Result<T> {
    if n_self_fed > k {
        return Err(Error::Config(format!("n_self_fed {n_self_fed} exceeds horizon {k}")));
    }
    loss_value(model, frames, t, k, n_self_fed, strategy)
}

/// Normalized frames `offset..offset + len` of a sequence.
pub fn window<T: Scalar>(seq: &VideoSequence, offset: usize, len: usize) -> Result<Vec<Vec<T>>> {
    if offset + len > seq.n_frames() {
        return Err(Error::SequenceTooShort {
            len: seq.n_frames(),
            needed: offset + len,
        });
    }
    Ok((offset..offset + len)
        .map(|i| seq.normalized_frame(i).into_iter().map(T::of).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    /// 1-based optimizer step counted over the whole run.
    pub step: usize,
    pub mode: Mode,
    pub n_self_fed: usize,
    /// Mean window loss over the minibatch.
    pub loss: f64,
}

pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut out = String::from("epoch,step,mode,n_self_fed,loss\n");
    for r in records {
        out.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.step, r.mode, r.n_self_fed, r.loss));
    }
    out
}

pub fn write_loss_log(records: &[LossRecord], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(loss_log_csv(records).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters, or the last finite ones if training diverged.
    pub model: Model<f32>,
    pub log: Vec<LossRecord>,
    pub steps: usize,
    /// Step at which a non-finite loss or update appeared.
    pub diverged_at: Option<usize>,
}

struct ItemResult {
    loss: f32,
    grads: Vec<Vec<f32>>,
}

fn item_gradients(
    model: &Model<f32>,
    seq: &VideoSequence,
    offset: usize,
    cfg: &TrainConfig,
    mask: &[bool],
    recon_mask: &[bool],
) -> Result<ItemResult> {
    let (t, k) = (cfg.context, cfg.horizon);
    let frames = window::<f32>(seq, offset, t + k)?;
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true);
    let vars = window_on_tape(&mut tape, &model.spec, &frames)?;
    let loss = window_loss(&mut tape, &bound, &vars, t, k, mask, recon_mask)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Ok(ItemResult {
            loss: value,
            grads: Vec::new(),
        });
    }
    tape.backward(loss)?;
    let grads = bound
        .vars
        .iter()
        .zip(&model.params)
        .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.len()], <[f32]>::to_vec))
        .collect();
    Ok(ItemResult { loss: value, grads })
}

fn check_dataset(data: &Dataset, spec: &ModelSpec, needed: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    for seq in &data.sequences {
        if (seq.height, seq.width) != (spec.height, spec.width) {
            return Err(Error::DimensionMismatch(format!(
                "dataset frames are {}x{}, model expects {}x{}",
                seq.height, seq.width, spec.height, spec.width
            )));
        }
        if seq.n_frames() < needed {
            return Err(Error::SequenceTooShort {
                len: seq.n_frames(),
                needed,
            });
        }
    }
    Ok(())
}

/// Trains `model`; `progress` sees each finished epoch and its mean minibatch loss.
///
/// Each epoch shuffles the sequences and draws one random window offset per
/// sequence from a generator seeded by `cfg.seed`. Minibatch items are
/// evaluated in parallel, but their gradients are summed in item order, so
/// results do not depend on the worker count.
pub fn train(
    mut model: Model<f32>,
    data: &Dataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.spec.validate()?;
    let (t, k) = (cfg.context, cfg.horizon);
    check_dataset(data, &model.spec, t + k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer: Box<dyn Optimizer<f32>> = match cfg.optimizer {
        OptimizerKind::Adam => Box::new(Adam::default()),
        OptimizerKind::Sgd => Box::new(Sgd::new()),
    };
    let lr = cfg.lr as f32;
    let mut log = Vec::new();
    let mut steps = 0;

    for epoch in 0..cfg.epochs {
        let n_self_fed = cfg.n_self_fed(epoch);
        let (mask, recon_mask) = masks(&model.spec, t, k, n_self_fed, cfg.strategy, cfg.decoder_self_feed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let items: Vec<(usize, usize)> = order
            .into_iter()
            .map(|i| (i, rng.gen_range(0..=data.sequences[i].n_frames() - (t + k))))
            .collect();

        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in items.chunks(cfg.minibatch) {
            steps += 1;
            let results: Vec<ItemResult> = batch
                .par_iter()
                .map(|&(i, offset)| item_gradients(&model, &data.sequences[i], offset, cfg, &mask, &recon_mask))
                .collect::<Result<_>>()?;
            let loss = results.iter().map(|r| f64::from(r.loss)).sum::<f64>() / batch.len() as f64;
            if !loss.is_finite() {
                return Ok(TrainOutcome {
                    model,
                    log,
                    steps: steps - 1,
                    diverged_at: Some(steps),
                });
            }
            let snapshot = model.params.clone();
            let scale = 1.0 / batch.len() as f32;
            for (pi, p) in model.params.iter_mut().enumerate() {
                for (gi, g) in p.grad.iter_mut().enumerate() {
                    let mut sum = 0.0f32;
                    for r in &results {
                        sum += r.grads[pi][gi];
                    }
                    *g = sum * scale;
                }
            }
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut model.params, max as f32);
            }
            let stepped = optimizer.step(&mut model.params, lr);
            let finite = model.params.iter().all(|p| p.values.iter().all(|v| v.is_finite()));
            if stepped.is_err() || !finite {
                model.params = snapshot;
                model.zero_grad();
                return Ok(TrainOutcome {
                    model,
                    log,
                    steps: steps - 1,
                    diverged_at: Some(steps),
                });
            }
            model.zero_grad();
            log.push(LossRecord {
                epoch,
                step: steps,
                mode: cfg.mode,
                n_self_fed,
                loss,
            });
            epoch_loss += loss;
            batches += 1;
        }
        progress(epoch, epoch_loss / batches as f64);
    }
    Ok(TrainOutcome {
        model,
        log,
        steps,
        diverged_at: None,
    })
}

/// Hyperparameters the one-at-a-time search can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Lr,
    Minibatch,
    Epochs,
    Layers,
    Channels,
    Kernel,
    HiddenUnits,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" | "learning_rate" => Ok(Axis::Lr),
            "minibatch" | "batch" => Ok(Axis::Minibatch),
            "epochs" => Ok(Axis::Epochs),
            "layers" => Ok(Axis::Layers),
            "channels" => Ok(Axis::Channels),
            "kernel" => Ok(Axis::Kernel),
            "hidden_units" | "hidden" => Ok(Axis::HiddenUnits),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }
}

fn as_count(axis: Axis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!("{axis:?} needs a positive integer, got {value}")))
    }
}

/// Applies one axis value to a copy of the base spec and config.
///
/// Layer-shaped axes keep the final output layer and change the hidden ones:
/// `layers = n` repeats the first layer's shape `n - 1` times before it.
pub fn apply_axis(spec: &ModelSpec, cfg: &TrainConfig, axis: Axis, value: f64) -> Result<(ModelSpec, TrainConfig)> {
    let mut spec = spec.clone();
    let mut cfg = cfg.clone();
    let conv = spec.architecture.is_convolutional();
    let needs = |want_conv: bool| -> Result<()> {
        if want_conv != conv {
            Err(Error::Config(format!("axis {axis:?} does not apply to {}", spec.architecture)))
        } else {
            Ok(())
        }
    };
    match axis {
        Axis::Lr => cfg.lr = value,
        Axis::Minibatch => cfg.minibatch = as_count(axis, value)?,
        Axis::Epochs => cfg.epochs = as_count(axis, value)?,
        Axis::Layers => {
            let n = as_count(axis, value)?;
            if conv {
                let (k0, c0) = (spec.kernels[0], spec.channels[0].max(2));
                let (k_last, c_last) = (*spec.kernels.last().unwrap(), *spec.channels.last().unwrap());
                spec.kernels = std::iter::repeat_n(k0, n - 1).chain([k_last]).collect();
                spec.channels = std::iter::repeat_n(c0, n - 1).chain([c_last]).collect();
            } else {
                let h0 = if spec.hidden_units.len() > 1 { spec.hidden_units[0] } else { spec.frame_len() };
                let last = *spec.hidden_units.last().unwrap();
                spec.hidden_units = std::iter::repeat_n(h0, n - 1).chain([last]).collect();
            }
        }
        Axis::Channels => {
            needs(true)?;
            let c = as_count(axis, value)?;
            let n = spec.channels.len();
            spec.channels[..n - 1].iter_mut().for_each(|x| *x = c);
        }
        Axis::Kernel => {
            needs(true)?;
            let k = as_count(axis, value)?;
            spec.kernels.iter_mut().for_each(|x| *x = k);
        }
        Axis::HiddenUnits => {
            needs(false)?;
            let h = as_count(axis, value)?;
            let n = spec.hidden_units.len();
            spec.hidden_units[..n - 1].iter_mut().for_each(|x| *x = h);
        }
    }
    spec.validate()?;
    cfg.validate()?;
    Ok((spec, cfg))
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub value: f64,
    /// Mean one-step scaled MSE on the validation split.
    pub score: f64,
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub outcome: TrainOutcome,
}

/// Trains one model per axis value and ranks them by one-step validation error (best first).
pub fn grid_search(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    axis: Axis,
    values: &[f64],
    train_data: &Dataset,
    valid_data: &Dataset,
) -> Result<Vec<GridResult>> {
    if values.is_empty() {
        return Err(Error::Config("grid search needs at least one value".into()));
    }
    let runs: Vec<(ModelSpec, TrainConfig)> = values
        .iter()
        .map(|&v| apply_axis(spec, cfg, axis, v))
        .collect::<Result<_>>()?;
    let mut results = Vec::with_capacity(values.len());
    for (&value, (spec, config)) in values.iter().zip(runs) {
        let model = Model::init(spec.clone(), config.seed)?;
        let outcome = train(model, train_data, &config, |_, _| {})?;
        if let Some(step) = outcome.diverged_at {
            return Err(Error::Diverged { step });
        }
        let score = eval::one_step_mse(&outcome.model, valid_data, config.context)?;
        results.push(GridResult {
            value,
            score,
            spec,
            config,
            outcome,
        });
    }
    results.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Architecture;

    #[test]
    fn schedule_anchors() {
        assert_eq!(curriculum_schedule(0, 20), 0);
        assert_eq!(curriculum_schedule(9, 20), 0);
        assert_eq!(curriculum_schedule(10, 20), 1);
        assert_eq!(curriculum_schedule(95, 20), 9);
        assert_eq!(curriculum_schedule(300, 20), 20);
    }

    #[test]
    fn masks_by_strategy() {
        assert_eq!(self_fed_mask(2, 1, Strategy::Tail), [false, true]);
        assert_eq!(self_fed_mask(5, 2, Strategy::Tail), [false, false, false, true, true]);
        assert_eq!(self_fed_mask(5, 2, Strategy::Head), [false, true, true, false, false]);
        assert_eq!(self_fed_mask(4, 0, Strategy::Head), [false; 4]);
        assert_eq!(self_fed_mask(4, 4, Strategy::Tail), [false, true, true, true]);
        assert_eq!(self_fed_mask(4, 4, Strategy::Head), [false, true, true, true]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { minibatch: 0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { horizon: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn axis_names() {
        assert_eq!("lr".parse::<Axis>().unwrap(), Axis::Lr);
        assert!(matches!("dropout".parse::<Axis>(), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn layer_axis_keeps_output_layer() {
        let spec = ModelSpec::conv(Architecture::Convlstm, &[5, 3], &[8, 1], 10);
        let cfg = TrainConfig::default();
        for n in 1..=5 {
            let (s, _) = apply_axis(&spec, &cfg, Axis::Layers, n as f64).unwrap();
            assert_eq!(s.channels.len(), n);
            assert_eq!(*s.channels.last().unwrap(), 1);
        }
        assert!(apply_axis(&spec, &cfg, Axis::Kernel, 4.0).is_err());
        assert!(apply_axis(&spec, &cfg, Axis::HiddenUnits, 64.0).is_err());
        let (_, c) = apply_axis(&spec, &cfg, Axis::Lr, 0.1).unwrap();
        assert_eq!(c.lr, 0.1);
    }

    #[test]
    fn csv_header_and_rows() {
        let rec = LossRecord {
            epoch: 2,
            step: 7,
            mode: Mode::Curriculum,
            n_self_fed: 0,
            loss: 0.25,
        };
        assert_eq!(loss_log_csv(&[rec]), "epoch,step,mode,n_self_fed,loss\n2,7,curriculum,0,0.25\n");
    }
}
