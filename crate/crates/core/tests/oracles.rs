//! Model and loss behavior checked against independent reference computations.

use bounce_core::models::{Architecture, Model, ModelSpec};
use bounce_core::raster::{generate_dataset, GeneratorConfig, Split};
use bounce_core::training::{blind_loss, curriculum_loss, teacher_forced_loss, window, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar LSTM step with weights `w[q]` (input side q < 4, hidden side q >= 4) and biases `b`.
fn scalar_lstm(x: f64, h: f64, c: f64, w: &[f64; 8], b: &[f64; 8]) -> (f64, f64) {
    let pre = |q: usize| w[q] * x + b[q] + w[4 + q] * h + b[4 + q];
    let (i, f, o, g) = (sigmoid(pre(0)), sigmoid(pre(1)), sigmoid(pre(2)), pre(3).tanh());
    let c = f * c + i * g;
    (o * c.tanh(), c)
}

#[test]
fn one_by_one_convlstm_is_a_per_pixel_lstm() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = ModelSpec::conv(Architecture::Convlstm, &[1], &[1], 4);
    let mut model = Model::<f64>::init(spec, 1).unwrap();
    for p in &mut model.params {
        p.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.5..1.5));
    }
    let w: [f64; 8] = std::array::from_fn(|q| model.params[q].values[0]);
    let b: [f64; 8] = std::array::from_fn(|q| model.params[8 + q].values[0]);

    let context: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let states = model.encoder_states(&context).unwrap();
    let predicted = model.generate(&context, 3).unwrap();

    for px in 0..16 {
        let (mut h, mut c) = (0.0, 0.0);
        for frame in &context {
            (h, c) = scalar_lstm(frame[px], h, c, &w, &b);
        }
        assert!((states[0].0[px] - h).abs() < 1e-10);
        assert!((states[0].1[px] - c).abs() < 1e-10);
        // Continue the rollout: each output 2h - 1 is fed back.
        let mut out = 2.0 * h - 1.0;
        assert!((predicted[0][px] - out).abs() < 1e-10);
        for step in 1..3 {
            (h, c) = scalar_lstm(out, h, c, &w, &b);
            out = 2.0 * h - 1.0;
            assert!((predicted[step][px] - out).abs() < 1e-10);
        }
    }
}

fn toy_data(seed: u64) -> Vec<Vec<f64>> {
    let gen = GeneratorConfig {
        n_sequences: 1,
        n_frames: 12,
        resolution: 10,
        ..Default::default()
    };
    let data = generate_dataset(&gen, Split::Train, seed).unwrap();
    window(&data.sequences[0], 0, 12).unwrap()
}

#[test]
fn curriculum_endpoints_are_bitwise() {
    let frames = toy_data(3);
    for arch in Architecture::ALL {
        let spec = match arch {
            Architecture::Lstm => ModelSpec::lstm(&[6, 100], 10),
            _ => ModelSpec::conv(arch, &[3, 3], &[3, 1], 10),
        };
        let model = Model::<f64>::init(spec, 4).unwrap();
        let (t, k) = (4, 6);
        for strategy in [Strategy::Tail, Strategy::Head] {
            let forced = teacher_forced_loss(&model, &frames, t, k).unwrap();
            let blind = blind_loss(&model, &frames, t, k).unwrap();
            assert_eq!(curriculum_loss(&model, &frames, t, k, 0, strategy).unwrap().to_bits(), forced.to_bits());
            assert_eq!(curriculum_loss(&model, &frames, t, k, k, strategy).unwrap().to_bits(), blind.to_bits());
            assert!(curriculum_loss(&model, &frames, t, k, k + 1, strategy).is_err());
        }
        assert_eq!(
            teacher_forced_loss(&model, &frames, t, 1).unwrap().to_bits(),
            blind_loss(&model, &frames, t, 1).unwrap().to_bits(),
            "{arch}"
        );
    }
}

#[test]
fn generate_one_step_is_forward_stack_bitwise() {
    let frames = toy_data(5);
    for spec in [ModelSpec::lstm(&[12, 100], 10), ModelSpec::conv(Architecture::Convlstm, &[5, 3], &[4, 1], 10)] {
        let f32_frames: Vec<Vec<f32>> = frames.iter().map(|f| f.iter().map(|&v| v as f32).collect()).collect();
        let model = Model::<f32>::init(spec, 9).unwrap();
        let one = model.forward_stack(&f32_frames[..10]).unwrap();
        let gen = model.generate(&f32_frames[..10], 1).unwrap();
        assert_eq!(gen.len(), 1);
        assert!(gen[0].iter().zip(&one).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn background_model_loss_is_squared_mass() {
    // Zero parameters emit -1 everywhere; in the [-1, 1] view the error at a
    // pixel of intensity x is (2x)^2.
    let gen = GeneratorConfig {
        n_sequences: 3,
        n_frames: 15,
        resolution: 12,
        ..Default::default()
    };
    let data = generate_dataset(&gen, Split::Valid, 17).unwrap();
    let model = Model::<f64>::zeros(ModelSpec::conv(Architecture::Convlstm, &[3], &[1], 12)).unwrap();
    let (t, k) = (5, 7);
    for seq in &data.sequences {
        let frames = window(seq, 0, t + k).unwrap();
        let expected: f64 = (t..t + k)
            .map(|i| 4.0 * seq.frame(i).squared_mass() / 144.0)
            .sum::<f64>()
            / k as f64;
        let forced = teacher_forced_loss(&model, &frames, t, k).unwrap();
        assert!((forced - expected).abs() < 1e-12, "{forced} vs {expected}");
    }
}

#[test]
fn drifting_model_loses_more_when_blind() {
    // Open input and output gates, closed forget gate: the output follows the
    // input through two tanh squashes, shifted by a constant candidate bias.
    let spec = ModelSpec::conv(Architecture::Convlstm, &[1], &[1], 10);
    let mut model = Model::<f64>::zeros(spec).unwrap();
    let set = |m: &mut Model<f64>, name: &str, v: f64| {
        let i = m.names.iter().position(|n| n == name).unwrap();
        m.params[i].values[0] = v;
    };
    set(&mut model, "layer0.w_ig", 1.0);
    set(&mut model, "layer0.b_ii", 6.0);
    set(&mut model, "layer0.b_io", 6.0);
    set(&mut model, "layer0.b_if", -6.0);
    set(&mut model, "layer0.b_ig", 1.3);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let frames = toy_data(rng.gen());
        let forced = teacher_forced_loss(&model, &frames, 4, 8).unwrap();
        let blind = blind_loss(&model, &frames, 4, 8).unwrap();
        assert!(blind >= forced, "blind {blind} < forced {forced}");
    }
}

#[test]
fn seq2seq_decoder_starts_from_encoder_state() {
    // With zero encoder parameters the decoder starts from zero states, so the
    // first prediction only depends on the last context frame.
    let spec = ModelSpec::conv(Architecture::Seq2seq, &[3], &[1], 10);
    let mut model = Model::<f64>::init(spec, 6).unwrap();
    for (name, p) in model.names.iter().zip(model.params.iter_mut()) {
        if name.starts_with("encoder.") {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let a = toy_data(1);
    let mut b = toy_data(2);
    b[3] = a[3].clone();
    let pa = model.generate(&a[..4], 1).unwrap();
    let pb = model.generate(&b[..4], 1).unwrap();
    assert_eq!(pa, pb);

    let states = model.encoder_states(&a[..4]).unwrap();
    assert!(states.iter().all(|(h, c)| h.iter().chain(c).all(|&v| v == 0.0)));
}
