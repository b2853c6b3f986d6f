//! Recurrent frame predictors built from [`cell`] steps on an autodiff tape.
//!
//! Four architectures are supported:
//!
//! * `lstm`: fully connected LSTM stack over flattened frames;
//! * `convlstm`: ConvLSTM stack over `[1, H, W]` frames;
//! * `seq2seq`: ConvLSTM encoder whose final per-layer `(h, c)` states seed a
//!   ConvLSTM decoder of identical shape;
//! * `seq2seq_multi`: one encoder, two decoders (future frames and the
//!   reversed context).
//!
//! Every model reads and writes frames in the `[-1, 1]` view. The prediction
//! is read off the last layer's hidden state `h ∈ (-1, 1)` as an intensity,
//! i.e. the emitted normalized frame is `2h - 1`: a zero state is a black
//! frame and `h → 1` is full intensity. Outputs can dip below `-1`; the loss
//! pulls them back and scoring clamps them.
//!
//! The cell update is the standard `c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t`.

pub mod cell;
mod checkpoint;

pub use cell::{convlstm_cell_step, lstm_cell_step, CellKind, CellVars, GATES};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{numel, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Lstm,
    Convlstm,
    Seq2seq,
    Seq2seqMulti,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Lstm,
        Architecture::Convlstm,
        Architecture::Seq2seq,
        Architecture::Seq2seqMulti,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Lstm => "lstm",
            Architecture::Convlstm => "convlstm",
            Architecture::Seq2seq => "seq2seq",
            Architecture::Seq2seqMulti => "seq2seq-multi",
        }
    }

    pub fn is_convolutional(self) -> bool {
        self != Architecture::Lstm
    }

    pub fn is_seq2seq(self) -> bool {
        matches!(self, Architecture::Seq2seq | Architecture::Seq2seqMulti)
    }

    /// Parameter-name prefixes of the stacks making up the model.
    fn stacks(self) -> &'static [&'static str] {
        match self {
            Architecture::Lstm | Architecture::Convlstm => &[""],
            Architecture::Seq2seq => &["encoder.", "decoder."],
            Architecture::Seq2seqMulti => &["encoder.", "decoder.", "reconstructor."],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(Architecture::Lstm),
            "convlstm" => Ok(Architecture::Convlstm),
            "seq2seq" => Ok(Architecture::Seq2seq),
            "seq2seq-multi" | "seq2seq_multi" => Ok(Architecture::Seq2seqMulti),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Architecture description, serialized into checkpoint manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    /// Per-layer odd kernel sizes (convolutional architectures).
    #[serde(default)]
    pub kernels: Vec<usize>,
    /// Per-layer channel counts; the last layer emits the single frame channel.
    #[serde(default)]
    pub channels: Vec<usize>,
    /// Per-layer hidden units of the fully connected LSTM; the last equals `height * width`.
    #[serde(default)]
    pub hidden_units: Vec<usize>,
    pub height: usize,
    pub width: usize,
    pub context: usize,
    pub horizon: usize,
}

/// Shape of one recurrent layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub kind: CellKind,
    pub inputs: usize,
    pub hidden: usize,
    pub kernel: usize,
}

impl LayerShape {
    fn weight_shape(&self, recurrent: bool) -> Vec<usize> {
        let fan = if recurrent { self.hidden } else { self.inputs };
        match self.kind {
            CellKind::Dense => vec![self.hidden, fan],
            CellKind::Conv => vec![self.hidden, fan, self.kernel, self.kernel],
        }
    }

    /// State shape for a frame of `height x width`.
    pub fn state_shape(&self, height: usize, width: usize) -> Vec<usize> {
        match self.kind {
            CellKind::Dense => vec![self.hidden],
            CellKind::Conv => vec![self.hidden, height, width],
        }
    }
}

impl ModelSpec {
    /// ConvLSTM-family spec at the given frame size with context 10 and horizon 20.
    pub fn conv(architecture: Architecture, kernels: &[usize], channels: &[usize], size: usize) -> Self {
        Self {
            architecture,
            kernels: kernels.to_vec(),
            channels: channels.to_vec(),
            hidden_units: Vec::new(),
            height: size,
            width: size,
            context: 10,
            horizon: 20,
        }
    }

    pub fn lstm(hidden_units: &[usize], size: usize) -> Self {
        Self {
            architecture: Architecture::Lstm,
            kernels: Vec::new(),
            channels: Vec::new(),
            hidden_units: hidden_units.to_vec(),
            height: size,
            width: size,
            context: 10,
            horizon: 20,
        }
    }

    /// Best configurations found by the one-at-a-time search at 60x60.
    pub fn best(architecture: Architecture) -> Self {
        match architecture {
            Architecture::Lstm => Self::lstm(&[2048, 1024, 1024, 3600], 60),
            Architecture::Convlstm | Architecture::Seq2seq => {
                Self::conv(architecture, &[7, 5, 3, 3], &[10, 10, 10, 1], 60)
            }
            Architecture::Seq2seqMulti => Self::conv(architecture, &[7, 5, 3, 3, 3], &[10, 10, 10, 10, 1], 60),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn n_layers(&self) -> usize {
        if self.architecture.is_convolutional() {
            self.channels.len()
        } else {
            self.hidden_units.len()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("model spec: {msg}")));
        if self.height == 0 || self.width == 0 {
            return fail("frame size must be positive".into());
        }
        if self.context < 1 || self.horizon < 1 {
            return fail("context and horizon must be at least 1".into());
        }
        if self.architecture.is_convolutional() {
            if self.channels.is_empty() {
                return fail("layer list is empty".into());
            }
            if self.kernels.len() != self.channels.len() {
                return fail(format!(
                    "{} kernels for {} layers",
                    self.kernels.len(),
                    self.channels.len()
                ));
            }
            if let Some(k) = self.kernels.iter().find(|k| *k % 2 == 0) {
                return fail(format!("kernel sizes must be odd, got {k}"));
            }
            if self.channels.contains(&0) {
                return fail("channel counts must be positive".into());
            }
            if *self.channels.last().unwrap() != 1 {
                return fail("last layer must emit 1 channel".into());
            }
        } else {
            if self.hidden_units.is_empty() {
                return fail("layer list is empty".into());
            }
            if self.hidden_units.contains(&0) {
                return fail("hidden units must be positive".into());
            }
            if *self.hidden_units.last().unwrap() != self.frame_len() {
                return fail(format!(
                    "last layer must have {} units to emit a frame",
                    self.frame_len()
                ));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        if self.architecture.is_convolutional() {
            self.channels
                .iter()
                .zip(&self.kernels)
                .enumerate()
                .map(|(l, (&hidden, &kernel))| LayerShape {
                    kind: CellKind::Conv,
                    inputs: if l == 0 { 1 } else { self.channels[l - 1] },
                    hidden,
                    kernel,
                })
                .collect()
        } else {
            self.hidden_units
                .iter()
                .enumerate()
                .map(|(l, &hidden)| LayerShape {
                    kind: CellKind::Dense,
                    inputs: if l == 0 { self.frame_len() } else { self.hidden_units[l - 1] },
                    hidden,
                    kernel: 1,
                })
                .collect()
        }
    }

    /// Names and shapes of every parameter tensor, in storage order.
    ///
    /// Per layer: the eight weights `w_ii, w_if, w_io, w_ig, w_hi, w_hf, w_ho,
    /// w_hg` followed by the eight biases in the same order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for prefix in self.architecture.stacks() {
            for (l, layer) in self.layers().iter().enumerate() {
                for kind in ["w", "b"] {
                    for src in ["i", "h"] {
                        for gate in GATES {
                            let name = format!("{prefix}layer{l}.{kind}_{src}{gate}");
                            let shape = if kind == "w" {
                                layer.weight_shape(src == "h")
                            } else {
                                vec![layer.hidden]
                            };
                            out.push((name, shape));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_layout().iter().map(|(_, s)| numel(s)).sum()
    }
}

/// Architecture description plus its parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub params: Vec<Tensor<T>>,
}

const PARAMS_PER_LAYER: usize = 16;

impl<T: Scalar> Model<T> {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let (names, params) = spec
            .param_layout()
            .into_iter()
            .map(|(name, shape)| (name, Tensor::zeros(shape)))
            .unzip();
        Ok(Self {
            spec,
            names,
            params,
        })
    }

    /// Weights uniform in `±1/√fan_in`; biases zero except the input-side forget bias, set to 1.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, tensor) in model.names.iter().zip(model.params.iter_mut()) {
            let field = name.rsplit('.').next().unwrap();
            if field.starts_with('w') {
                let fan_in: usize = tensor.shape[1..].iter().product();
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in &mut tensor.values {
                    *v = T::of(rng.gen_range(-bound..=bound));
                }
            } else if field == "b_if" {
                tensor.values.iter_mut().for_each(|v| *v = T::one());
            }
        }
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Records the parameters on `tape`, as trainable leaves or as constants.
    pub fn bind<'a>(&'a self, tape: &mut Tape<T>, trainable: bool) -> Bound<'a, T> {
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p)
                } else {
                    tape.constant(p.shape.clone(), p.values.clone()).expect("tensor shape is consistent")
                }
            })
            .collect();
        let layers = self.spec.layers();
        let n_layers = layers.len();
        let stacks = (0..self.spec.architecture.stacks().len())
            .map(|s| {
                layers
                    .iter()
                    .enumerate()
                    .map(|(l, layer)| {
                        let base = (s * n_layers + l) * PARAMS_PER_LAYER;
                        CellVars {
                            kind: layer.kind,
                            w: std::array::from_fn(|q| vars[base + q]),
                            b: std::array::from_fn(|q| vars[base + 8 + q]),
                        }
                    })
                    .collect()
            })
            .collect();
        Bound {
            model: self,
            vars,
            stacks,
        }
    }

    fn frames_on_tape(&self, tape: &mut Tape<T>, frames: &[Vec<T>]) -> Result<Vec<Var>> {
        let shape = vec![1, self.spec.height, self.spec.width];
        frames
            .iter()
            .map(|f| tape.constant(shape.clone(), f.clone()))
            .collect()
    }

    fn run(&self, context: &[Vec<T>], k: usize) -> Result<(Vec<Vec<T>>, Option<Vec<Vec<T>>>)> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let ctx = self.frames_on_tape(&mut tape, context)?;
        let rollout = bound.predict(&mut tape, &ctx, k, &Feed::default())?;
        let read = |vars: &[Var]| vars.iter().map(|v| tape.value(*v).to_vec()).collect::<Vec<_>>();
        Ok((read(&rollout.future), rollout.reconstruction.as_deref().map(read)))
    }

    /// Autoregressive rollout of `k` frames after the context; no ground truth is consumed.
    pub fn generate(&self, context: &[Vec<T>], k: usize) -> Result<Vec<Vec<T>>> {
        Ok(self.run(context, k)?.0)
    }

    /// One-step prediction of a plain (non-seq2seq) stack.
    pub fn forward_stack(&self, context: &[Vec<T>]) -> Result<Vec<T>> {
        if self.spec.architecture.is_seq2seq() {
            return Err(Error::UnsupportedArchitecture(format!(
                "forward_stack needs lstm or convlstm, got {}",
                self.spec.architecture
            )));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let ctx = self.frames_on_tape(&mut tape, context)?;
        let out = bound.forward_stack(&mut tape, &ctx)?;
        Ok(tape.value(out).to_vec())
    }

    pub fn seq2seq_forward(&self, context: &[Vec<T>], k: usize) -> Result<Vec<Vec<T>>> {
        if !self.spec.architecture.is_seq2seq() {
            return Err(Error::UnsupportedArchitecture(format!(
                "seq2seq_forward needs an encoder-decoder model, got {}",
                self.spec.architecture
            )));
        }
        self.generate(context, k)
    }

    /// Returns `(reconstruction of the reversed context, k future frames)`.
    pub fn multidecoder_forward(&self, context: &[Vec<T>], k: usize) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        if self.spec.architecture != Architecture::Seq2seqMulti {
            return Err(Error::UnsupportedArchitecture(format!(
                "multidecoder_forward needs seq2seq-multi, got {}",
                self.spec.architecture
            )));
        }
        let (future, recon) = self.run(context, k)?;
        Ok((recon.expect("multi-decoder always reconstructs"), future))
    }

    /// Per-layer `(h, c)` values after consuming `context` (the encoder for seq2seq models).
    pub fn encoder_states(&self, context: &[Vec<T>]) -> Result<Vec<(Vec<T>, Vec<T>)>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let ctx = self.frames_on_tape(&mut tape, context)?;
        let state = bound.encode(&mut tape, &ctx)?;
        Ok(state
            .iter()
            .map(|(h, c)| (tape.value(*h).to_vec(), tape.value(*c).to_vec()))
            .collect())
    }
}

/// Ground-truth inputs to splice into a rollout.
///
/// `future[i]`, when present, replaces the model's own previous output as the
/// input that produces future prediction `i` (0-based). Entry 0 is never used:
/// the first prediction always follows the last context frame. The same
/// convention applies to `reconstruction`.
#[derive(Debug, Clone, Default)]
pub struct Feed {
    pub future: Vec<Option<Var>>,
    pub reconstruction: Vec<Option<Var>>,
}

fn fed(list: &[Option<Var>], i: usize) -> Option<Var> {
    list.get(i).copied().flatten()
}

/// Output of a rollout on the tape, frames shaped `[1, H, W]`.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub future: Vec<Var>,
    pub reconstruction: Option<Vec<Var>>,
}

/// Anything that can roll frames forward on a tape.
pub trait Predictor<T: Scalar> {
    fn predict(&self, tape: &mut Tape<T>, context: &[Var], k: usize, feed: &Feed) -> Result<Rollout>;
}

type State = Vec<(Var, Var)>;

/// A model whose parameters have been recorded on a tape.
pub struct Bound<'a, T> {
    pub model: &'a Model<T>,
    /// Tape handle of each parameter, parallel to `model.params`.
    pub vars: Vec<Var>,
    stacks: Vec<Vec<CellVars>>,
}

impl<T: Scalar> Bound<'_, T> {
    fn spec(&self) -> &ModelSpec {
        &self.model.spec
    }

    fn zero_state(&self, tape: &mut Tape<T>) -> State {
        let (h, w) = (self.spec().height, self.spec().width);
        self.spec()
            .layers()
            .iter()
            .map(|layer| {
                let shape = layer.state_shape(h, w);
                (tape.zeros(shape.clone()), tape.zeros(shape))
            })
            .collect()
    }

    fn check_frame(&self, tape: &Tape<T>, frame: Var) -> Result<()> {
        let expected = [1, self.spec().height, self.spec().width];
        if tape.shape(frame) != expected {
            return Err(Error::Shape(format!(
                "frame {:?} does not match model input {expected:?}",
                tape.shape(frame)
            )));
        }
        Ok(())
    }

    /// Feeds one frame through a stack, returning the last layer's hidden state.
    fn advance(&self, tape: &mut Tape<T>, stack: usize, state: &mut State, frame: Var) -> Result<Var> {
        self.check_frame(tape, frame)?;
        let mut x = frame;
        if !self.spec().architecture.is_convolutional() {
            x = tape.reshape(x, vec![self.spec().frame_len()])?;
        }
        for (cell, slot) in self.stacks[stack].iter().zip(state.iter_mut()) {
            let (h, c) = match cell.kind {
                CellKind::Dense => lstm_cell_step(tape, x, slot.0, slot.1, cell)?,
                CellKind::Conv => convlstm_cell_step(tape, x, slot.0, slot.1, cell)?,
            };
            *slot = (h, c);
            x = h;
        }
        Ok(x)
    }

    /// Maps the last hidden state to a normalized frame: `2h - 1`, shaped `[1, H, W]`.
    fn to_frame(&self, tape: &mut Tape<T>, h: Var) -> Result<Var> {
        let y = tape.affine(h, T::of(2.0), T::of(-1.0));
        if self.spec().architecture.is_convolutional() {
            Ok(y)
        } else {
            tape.reshape(y, vec![1, self.spec().height, self.spec().width])
        }
    }

    fn check_context(context: &[Var]) -> Result<()> {
        if context.is_empty() {
            return Err(Error::Config("context must hold at least one frame".into()));
        }
        Ok(())
    }

    /// Consumes the context with the first stack and returns its final state.
    pub fn encode(&self, tape: &mut Tape<T>, context: &[Var]) -> Result<State> {
        Self::check_context(context)?;
        let mut state = self.zero_state(tape);
        for &frame in context {
            self.advance(tape, 0, &mut state, frame)?;
        }
        Ok(state)
    }

    /// Prediction of the frame following `context` by a plain stack.
    pub fn forward_stack(&self, tape: &mut Tape<T>, context: &[Var]) -> Result<Var> {
        Self::check_context(context)?;
        let mut state = self.zero_state(tape);
        let mut h = None;
        for &frame in context {
            h = Some(self.advance(tape, 0, &mut state, frame)?);
        }
        self.to_frame(tape, h.expect("context is non-empty"))
    }

    fn decode(
        &self,
        tape: &mut Tape<T>,
        stack: usize,
        mut state: State,
        first: Var,
        n: usize,
        teacher: &[Option<Var>],
    ) -> Result<Vec<Var>> {
        let mut preds: Vec<Var> = Vec::with_capacity(n);
        let mut input = first;
        for i in 0..n {
            if i > 0 {
                input = fed(teacher, i).unwrap_or(preds[i - 1]);
            }
            let h = self.advance(tape, stack, &mut state, input)?;
            preds.push(self.to_frame(tape, h)?);
        }
        Ok(preds)
    }
}

impl<T: Scalar> Predictor<T> for Bound<'_, T> {
    fn predict(&self, tape: &mut Tape<T>, context: &[Var], k: usize, feed: &Feed) -> Result<Rollout> {
        Self::check_context(context)?;
        if k < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let last = *context.last().unwrap();
        match self.spec().architecture {
            Architecture::Lstm | Architecture::Convlstm => {
                let mut state = self.zero_state(tape);
                for &frame in &context[..context.len() - 1] {
                    self.advance(tape, 0, &mut state, frame)?;
                }
                Ok(Rollout {
                    future: self.decode(tape, 0, state, last, k, &feed.future)?,
                    reconstruction: None,
                })
            }
            Architecture::Seq2seq | Architecture::Seq2seqMulti => {
                let encoded = self.encode(tape, context)?;
                let future = self.decode(tape, 1, encoded.clone(), last, k, &feed.future)?;
                let reconstruction = if self.spec().architecture == Architecture::Seq2seqMulti {
                    let blank = tape.constant(
                        vec![1, self.spec().height, self.spec().width],
                        vec![-T::one(); self.spec().frame_len()],
                    )?;
                    Some(self.decode(tape, 2, encoded, blank, context.len(), &feed.reconstruction)?)
                } else {
                    None
                };
                Ok(Rollout {
                    future,
                    reconstruction,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    fn dense_count(inputs: usize, hidden: usize) -> usize {
        4 * (inputs * hidden + hidden * hidden + 2 * hidden)
    }

    #[test]
    fn parameter_counts() {
        let lstm = ModelSpec::best(Architecture::Lstm);
        let expected = dense_count(3600, 2048) + dense_count(2048, 1024) + dense_count(1024, 1024) + dense_count(1024, 3600);
        assert_eq!(lstm.param_count(), expected);

        let conv = ModelSpec::best(Architecture::Convlstm);
        assert_eq!(conv.param_count(), 49_404);
        assert!(conv.param_count() < lstm.param_count());
        assert_eq!(ModelSpec::best(Architecture::Seq2seq).param_count(), 2 * 49_404);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ModelSpec::conv(Architecture::Convlstm, &[3, 4], &[2, 1], 8);
        assert!(spec.validate().is_err());
        spec.kernels = vec![3, 5];
        assert!(spec.validate().is_ok());
        spec.channels = vec![2, 2];
        assert!(spec.validate().is_err());
        assert!(ModelSpec::lstm(&[16, 63], 8).validate().is_err());
        assert!(ModelSpec::lstm(&[16, 64], 8).validate().is_ok());
        assert_eq!("seq2seq-multi".parse::<Architecture>().unwrap(), Architecture::Seq2seqMulti);
        assert!("gru".parse::<Architecture>().is_err());
    }

    #[test]
    fn zero_parameters_predict_black() {
        for arch in Architecture::ALL {
            let spec = match arch {
                Architecture::Lstm => ModelSpec::lstm(&[5, 16], 4),
                _ => ModelSpec::conv(arch, &[3, 3], &[2, 1], 4),
            };
            let model = Model::<f64>::zeros(spec).unwrap();
            let out = model.generate(&frames(3, 16, 1), 4).unwrap();
            assert_eq!(out.len(), 4);
            assert!(out.iter().flatten().all(|&v| v == -1.0), "{arch}");
        }
    }

    #[test]
    fn one_step_generate_matches_forward_stack() {
        for spec in [ModelSpec::lstm(&[7, 25], 5), ModelSpec::conv(Architecture::Convlstm, &[3, 1], &[3, 1], 5)] {
            let model = Model::<f32>::init(spec, 3).unwrap();
            let ctx: Vec<Vec<f32>> = frames(4, 25, 2)
                .iter()
                .map(|f| f.iter().map(|&v| v as f32).collect())
                .collect();
            let one = model.forward_stack(&ctx).unwrap();
            let gen = model.generate(&ctx, 1).unwrap();
            assert_eq!(gen[0], one);
            assert_eq!(model.generate(&ctx, 6).unwrap()[0], one);
        }
    }

    #[test]
    fn outputs_stay_in_normalized_range() {
        let model = Model::<f64>::init(ModelSpec::conv(Architecture::Seq2seqMulti, &[3, 3], &[4, 1], 6), 8).unwrap();
        let (recon, future) = model.multidecoder_forward(&frames(5, 36, 4), 7).unwrap();
        assert_eq!((recon.len(), future.len()), (5, 7));
        assert!(recon.iter().chain(&future).flatten().all(|v| (-3.0..1.0).contains(v)));
        assert!(model.forward_stack(&frames(2, 36, 4)).is_err());
    }

    #[test]
    fn ground_truth_feed_only_affects_later_steps() {
        let model = Model::<f64>::init(ModelSpec::conv(Architecture::Convlstm, &[3], &[1], 4), 5).unwrap();
        let ctx = frames(3, 16, 6);
        let truth = frames(4, 16, 7);
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, false);
        let c: Vec<Var> = ctx.iter().map(|f| tape.constant(vec![1, 4, 4], f.clone()).unwrap()).collect();
        let t: Vec<Var> = truth.iter().map(|f| tape.constant(vec![1, 4, 4], f.clone()).unwrap()).collect();
        let own = bound.predict(&mut tape, &c, 4, &Feed::default()).unwrap();
        let feed = Feed {
            future: vec![None, Some(t[0]), None, None],
            reconstruction: Vec::new(),
        };
        let forced = bound.predict(&mut tape, &c, 4, &feed).unwrap();
        assert_eq!(tape.value(own.future[0]), tape.value(forced.future[0]));
        assert_ne!(tape.value(own.future[1]), tape.value(forced.future[1]));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = ModelSpec::conv(Architecture::Convlstm, &[5, 3], &[4, 1], 6);
        let a = Model::<f64>::init(spec.clone(), 11).unwrap();
        assert_eq!(a, Model::<f64>::init(spec.clone(), 11).unwrap());
        assert_ne!(a, Model::<f64>::init(spec, 12).unwrap());
        for (name, p) in a.names.iter().zip(&a.params) {
            if name.ends_with("b_if") {
                assert!(p.values.iter().all(|&v| v == 1.0));
            } else if name.contains(".w_") {
                let bound = 1.0 / (p.shape[1..].iter().product::<usize>() as f64).sqrt();
                assert!(p.values.iter().all(|v| v.abs() <= bound), "{name}");
            } else {
                assert!(p.values.iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }
}
