//! Subcommand implementations.

use std::io;
use std::path::{Path, PathBuf};

use bounce_core::eval::{
    dump_hidden_states, evaluate, mean_se, slope, svg_chart, CopyLast, EmptyFrames, EvalOptions, EvalReport,
    Forecaster,
};
use bounce_core::models::{load_checkpoint, save_checkpoint, Architecture, Model};
use bounce_core::raster::{generate_dataset, read_dataset, write_dataset, Dataset, GeneratorConfig, Split};
use bounce_core::training::{grid_search, train, window, write_loss_log, Mode};
use bounce_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Profile, SplitSizes};
use crate::{
    Baseline, Command, CompareArgs, EvaluateArgs, GenerateArgs, GridsearchArgs, InspectArgs, ModelArgs,
    PipelineArgs, ReportArgs, TrainArgs,
};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Gridsearch(a) => cmd_gridsearch(&a),
        Command::InspectHidden(a) => cmd_inspect_hidden(&a),
        Command::CompareCurriculum(a) => cmd_compare_curriculum(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
    }
}

fn not_found(what: &str, path: &Path, hint: &str) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!("{what} {} not found; {hint}", path.display()),
    ))
}

fn split_path(path: &Path, split: Split) -> PathBuf {
    if path.is_dir() {
        path.join(format!("{}.bbv", split.name()))
    } else {
        path.to_path_buf()
    }
}

/// Reads `path`, or `path/<split>.bbv` when `path` is a directory.
pub fn load_split(path: &Path, split: Split) -> Result<Dataset> {
    let file = split_path(path, split);
    if !file.is_file() {
        return Err(not_found("dataset", &file, "run `bounce generate` first"));
    }
    read_dataset(&file)
}

fn require_dir(path: &Path, contents: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(not_found("data directory", path, &format!("it must hold {contents}")))
    }
}

fn checkpoint_path(path: &Path) -> Result<PathBuf> {
    let file = if path.is_dir() {
        path.join("checkpoint.json")
    } else {
        path.to_path_buf()
    };
    if file.is_file() {
        Ok(file)
    } else {
        Err(not_found("checkpoint", &file, "run `bounce train` first"))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn check_frames(data: &Dataset, height: usize, width: usize) -> Result<()> {
    match data.frame_shape() {
        None => Err(Error::Config("dataset is empty".into())),
        Some(shape) if shape != (height, width) => Err(Error::DimensionMismatch(format!(
            "dataset frames are {}x{} but the model expects {height}x{width}",
            shape.0, shape.1
        ))),
        Some(_) => Ok(()),
    }
}

impl ModelArgs {
    /// Builds the experiment config from `--config` or a profile, then applies flag overrides.
    pub fn resolve(&self, default_arch: Architecture) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::Config(format!("config file {} not found", path.display())));
                }
                let mut cfg = ExperimentConfig::load(path)?;
                if let Some(arch) = self.model {
                    cfg.model.architecture = arch;
                }
                cfg
            }
            None => ExperimentConfig::profile(
                self.profile.unwrap_or(Profile::Full),
                self.model.unwrap_or(default_arch),
                self.seed.unwrap_or(0),
            ),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        let t = &mut cfg.train;
        if let Some(mode) = self.mode {
            t.mode = mode;
        }
        if let Some(epochs) = self.epochs {
            t.epochs = epochs;
        }
        if let Some(lr) = self.lr {
            t.lr = lr;
        }
        if let Some(batch) = self.batch {
            t.minibatch = batch;
        }
        if let Some(strategy) = self.strategy {
            t.strategy = strategy;
        }
        if let Some(optimizer) = self.optimizer {
            t.optimizer = optimizer;
        }
        if self.no_clip {
            t.clip_norm = None;
        }
        if self.decoder_self_feed {
            t.decoder_self_feed = true;
        }
        if let Some(context) = self.context {
            t.context = context;
            cfg.model.context = context;
            cfg.eval.context = context;
        }
        if let Some(horizon) = self.horizon {
            t.horizon = horizon;
            cfg.model.horizon = horizon;
            cfg.eval.horizon = horizon;
        }
        if let Some(k) = &self.kernels {
            cfg.model.kernels = k.clone();
        }
        if let Some(c) = &self.channels {
            cfg.model.channels = c.clone();
        }
        if let Some(h) = &self.hidden_units {
            cfg.model.hidden_units = h.clone();
        }
        Ok(cfg)
    }
}

/// Adopts the dataset's generator settings and frame size.
fn fit_to_data(cfg: &mut ExperimentConfig, data: &Dataset) -> Result<()> {
    let (h, w) = data
        .frame_shape()
        .ok_or_else(|| Error::Config("training dataset is empty".into()))?;
    if h != w {
        return Err(Error::DimensionMismatch(format!("frames must be square, got {h}x{w}")));
    }
    match &data.meta {
        Some(meta) => cfg.generator = meta.generator.clone(),
        None => {
            cfg.generator.n_sequences = data.len();
            cfg.generator.n_frames = data.sequences[0].n_frames();
        }
    }
    cfg.generator.resolution = h;
    let needed = cfg.train.context + cfg.train.horizon;
    if let Some(seq) = data.sequences.iter().find(|s| s.n_frames() < needed) {
        return Err(Error::SequenceTooShort {
            len: seq.n_frames(),
            needed,
        });
    }
    if (h, w) != (cfg.model.height, cfg.model.width) {
        if cfg.model.architecture == Architecture::Lstm {
            if let Some(last) = cfg.model.hidden_units.last_mut() {
                *last = h * w;
            }
        }
        cfg.model.height = h;
        cfg.model.width = w;
        eprintln!("note: model sized for the dataset's {h}x{w} frames");
    }
    cfg.validate()
}

/// Generates and writes the three splits into `out`.
pub fn write_splits(generator: &GeneratorConfig, splits: &SplitSizes, seed: u64, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for (split, n) in [
        (Split::Train, splits.train),
        (Split::Valid, splits.valid),
        (Split::Test, splits.test),
    ] {
        let gen = GeneratorConfig {
            n_sequences: n,
            ..generator.clone()
        };
        let data = generate_dataset(&gen, split, split.master_seed(seed))?;
        let path = out.join(format!("{}.bbv", split.name()));
        write_dataset(&data, &path)?;
        eprintln!("wrote {} ({n} sequences)", path.display());
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::profile(args.profile.unwrap_or(Profile::Full), Architecture::Convlstm, 0),
    };
    let (mut generator, mut splits) = (base.generator, base.splits);
    let seed = args.seed.unwrap_or(base.seed);
    if let Some(n) = args.seqs {
        splits = SplitSizes {
            train: n,
            valid: (n / 5).max(1),
            test: (n / 5).max(1),
        };
    }
    if let Some(n) = args.valid_seqs {
        splits.valid = n;
    }
    if let Some(n) = args.test_seqs {
        splits.test = n;
    }
    if [splits.train, splits.valid, splits.test].contains(&0) {
        return Err(Error::Config("every split needs at least one sequence".into()));
    }
    if let Some(f) = args.frames {
        generator.n_frames = f;
    }
    if let Some(s) = args.size {
        generator.resolution = s;
    }
    if let Some(b) = args.balls {
        generator.world.n_balls = b;
    }
    if let Some(r) = args.radius {
        generator.world.radius = r;
    }
    if let Some(v) = args.speed {
        generator.world.speed = v;
    }
    generator.legacy_upsample |= args.legacy_upsample;
    generator.world.seed = seed;
    if generator.n_frames < 1 || generator.resolution < 1 {
        return Err(Error::Config("frames and size must be at least 1".into()));
    }
    if generator.legacy_upsample && !generator.resolution.is_multiple_of(2) {
        return Err(Error::Config("--legacy-upsample needs an even --size".into()));
    }
    write_splits(&generator, &splits, seed, &args.out)
}

/// Trains per `cfg` and writes config.json, loss.csv and checkpoint.json/.bin into `out`.
///
/// On divergence the last finite parameters are still saved before the error is returned.
pub fn train_run(cfg: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<Model<f32>> {
    std::fs::create_dir_all(out)?;
    cfg.save(&out.join("config.json"))?;
    let model = Model::<f32>::init(cfg.model.clone(), cfg.seed)?;
    let epochs = cfg.train.epochs;
    eprintln!(
        "training {} ({} parameters) on {} sequences for {epochs} epochs, {} regimen",
        cfg.model.architecture.name(),
        model.param_count(),
        data.len(),
        cfg.train.mode
    );
    let outcome = train(model, data, &cfg.train, |epoch, loss| {
        eprintln!("epoch {}/{epochs}: loss {loss:.4}", epoch + 1);
    })?;
    write_loss_log(&outcome.log, &out.join("loss.csv"))?;
    let metadata = json!({
        "config": cfg,
        "seed": cfg.seed,
        "steps": outcome.steps,
        "diverged_at": outcome.diverged_at,
    });
    save_checkpoint(&outcome.model, &out.join("checkpoint.json"), metadata)?;
    if let Some(step) = outcome.diverged_at {
        eprintln!("kept the parameters from before step {step}");
        return Err(Error::Diverged { step });
    }
    Ok(outcome.model)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = args.model.resolve(Architecture::Convlstm)?;
    let data = load_split(&args.data, Split::Train)?;
    fit_to_data(&mut cfg, &data)?;
    cfg.out_dir = args.out.clone();
    train_run(&cfg, &data, &args.out)?;
    println!("wrote {}", args.out.join("checkpoint.json").display());
    Ok(())
}

fn print_summary(name: &str, report: &EvalReport) {
    println!(
        "{name}: {} sequences, context {}, horizon {}",
        report.n_sequences, report.context, report.horizon
    );
    for i in 0..report.horizon {
        println!(
            "  frame {:>2}  mse {:>9.3} ± {:<7.3}  centroid distance {:>8.2} ± {:.2}",
            i + 1,
            report.mse_mean[i],
            report.mse_se[i],
            report.cd_mean[i],
            report.cd_se[i]
        );
    }
    if report.horizon > 1 {
        println!(
            "  mean over horizon: mse {:.3}, centroid distance {:.2}",
            report.horizon_mean_mse(),
            report.horizon_mean_cd()
        );
    }
    if report.cd_not_available {
        println!("  centroid distance not meaningful: predictions are mostly noise");
    }
}

/// Evaluates and writes `<name>.csv` and `<name>.json` into `out`.
pub fn evaluate_run(
    forecaster: &dyn Forecaster,
    data: &Dataset,
    opts: &EvalOptions,
    out: &Path,
    name: &str,
    provenance: Value,
) -> Result<EvalReport> {
    let report = evaluate(forecaster, data, opts)?;
    std::fs::create_dir_all(out)?;
    report.write_csv(&out.join(format!("{name}.csv")))?;
    let doc = json!({
        "provenance": provenance,
        "options": opts,
        "dataset": data.meta,
        "report": report,
    });
    write_json(&out.join(format!("{name}.json")), &doc)?;
    print_summary(name, &report);
    Ok(report)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let data = load_split(&args.data, Split::Test)?;
    let mut opts = EvalOptions {
        context: args.context,
        horizon: args.horizon,
        matching: args.matching.into(),
        ..Default::default()
    };
    if let Some(t) = args.threshold {
        opts.detection.threshold = t;
    }
    match (&args.ckpt, args.baseline) {
        (Some(ckpt), _) => {
            let (model, manifest) = load_checkpoint::<f32>(&checkpoint_path(ckpt)?)?;
            check_frames(&data, model.spec.height, model.spec.width)?;
            let provenance = json!({ "spec": manifest.spec, "training": manifest.metadata });
            evaluate_run(&model, &data, &opts, &args.out, "report", provenance)?;
        }
        (None, Some(baseline)) => {
            let (forecaster, name): (&dyn Forecaster, &str) = match baseline {
                Baseline::Empty => (&EmptyFrames, "empty"),
                Baseline::Copy => (&CopyLast, "copy-last"),
            };
            evaluate_run(forecaster, &data, &opts, &args.out, "report", json!({ "baseline": name }))?;
        }
        (None, None) => return Err(Error::Config("pass --ckpt or --baseline".into())),
    }
    Ok(())
}

/// Writes `mse.svg` and `cd.svg` with one series per report.
pub fn write_charts(series: &[(String, EvalReport)], out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mse: Vec<(&str, &[f64], &[f64])> = series
        .iter()
        .map(|(l, r)| (l.as_str(), r.mse_mean.as_slice(), r.mse_se.as_slice()))
        .collect();
    let cd: Vec<(&str, &[f64], &[f64])> = series
        .iter()
        .map(|(l, r)| (l.as_str(), r.cd_mean.as_slice(), r.cd_se.as_slice()))
        .collect();
    std::fs::write(out.join("mse.svg"), svg_chart("Scaled MSE per predicted frame", "scaled MSE", &mse))?;
    std::fs::write(out.join("cd.svg"), svg_chart("Centroid distance per predicted frame", "pixels", &cd))?;
    Ok(())
}

fn default_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    match path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
        Some(dir) if stem == "report" => dir.to_string(),
        _ => stem.to_string(),
    }
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    if args.label.len() > args.csv.len() {
        return Err(Error::Config("more --label values than --csv files".into()));
    }
    let mut series = Vec::with_capacity(args.csv.len());
    for (i, path) in args.csv.iter().enumerate() {
        if !path.is_file() {
            return Err(not_found("report", path, "run `bounce evaluate` first"));
        }
        let report = EvalReport::from_csv(&std::fs::read_to_string(path)?)?;
        let label = args.label.get(i).cloned().unwrap_or_else(|| default_label(path));
        series.push((label, report));
    }
    write_charts(&series, &args.out)?;
    for (label, r) in &series {
        println!(
            "{label}: mean mse {:.3}, mean centroid distance {:.2}, centroid distance slope {:.3} per frame",
            r.horizon_mean_mse(),
            r.horizon_mean_cd(),
            slope(&r.cd_mean)
        );
    }
    println!("wrote {} and {}", args.out.join("mse.svg").display(), args.out.join("cd.svg").display());
    Ok(())
}

fn cmd_gridsearch(args: &GridsearchArgs) -> Result<()> {
    let mut cfg = args.model.resolve(Architecture::Convlstm)?;
    require_dir(&args.data, "train.bbv and valid.bbv")?;
    let train_data = load_split(&args.data, Split::Train)?;
    let valid = load_split(&args.data, Split::Valid)?;
    fit_to_data(&mut cfg, &train_data)?;
    check_frames(&valid, cfg.model.height, cfg.model.width)?;
    eprintln!("training {} models along {:?}", args.values.len(), args.axis);
    let results = grid_search(&cfg.model, &cfg.train, args.axis, &args.values, &train_data, &valid)?;
    std::fs::create_dir_all(&args.out)?;
    let mut csv = String::from("rank,value,score,steps\n");
    for (rank, r) in results.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", rank + 1, r.value, r.score, r.outcome.steps));
        println!("{:>2}. {:?} = {:<10} validation mse {:.4}", rank + 1, args.axis, r.value, r.score);
    }
    std::fs::write(args.out.join("gridsearch.csv"), csv)?;
    let runs: Vec<Value> = results
        .iter()
        .map(|r| json!({ "value": r.value, "score": r.score, "spec": r.spec, "train": r.config }))
        .collect();
    write_json(
        &args.out.join("gridsearch.json"),
        &json!({ "axis": args.axis, "config": cfg, "seed": cfg.seed, "runs": runs }),
    )
}

fn cmd_inspect_hidden(args: &InspectArgs) -> Result<()> {
    let (model, _) = load_checkpoint::<f32>(&checkpoint_path(&args.ckpt)?)?;
    let data = load_split(&args.data, Split::Test)?;
    check_frames(&data, model.spec.height, model.spec.width)?;
    let seq = data.sequences.get(args.sequence).ok_or_else(|| {
        Error::Config(format!(
            "sequence {} out of range; the dataset has {}",
            args.sequence,
            data.len()
        ))
    })?;
    let context = args.context.unwrap_or(model.spec.context);
    let frames = window::<f32>(seq, 0, context)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let n = dump_hidden_states(&model, &frames, args.layer, &args.out)?;
    println!("wrote {n} channels of layer {} to {}", args.layer, args.out.display());
    Ok(())
}

/// Pools the per-sequence scores of several models into one report.
fn pool(reports: &[EvalReport]) -> EvalReport {
    let first = &reports[0];
    let per_sequence_mse: Vec<Vec<f64>> = reports.iter().flat_map(|r| r.per_sequence_mse.clone()).collect();
    let per_sequence_cd: Vec<Vec<f64>> = reports.iter().flat_map(|r| r.per_sequence_cd.clone()).collect();
    let column = |rows: &[Vec<f64>], i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    let (mut mse_mean, mut mse_se, mut cd_mean, mut cd_se) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..first.horizon {
        let (m, s) = mean_se(&column(&per_sequence_mse, i));
        mse_mean.push(m);
        mse_se.push(s);
        let (m, s) = mean_se(&column(&per_sequence_cd, i));
        cd_mean.push(m);
        cd_se.push(s);
    }
    EvalReport {
        context: first.context,
        horizon: first.horizon,
        n_sequences: per_sequence_mse.len(),
        mse_mean,
        mse_se,
        cd_mean,
        cd_se,
        per_sequence_mse,
        per_sequence_cd,
        cd_not_available: reports.iter().any(|r| r.cd_not_available),
    }
}

fn paired_csv(forced: &EvalReport, curriculum: &EvalReport, n_models: usize) -> String {
    let mut out = String::from(
        "frame_index,forced_mse_mean,forced_mse_se,curriculum_mse_mean,curriculum_mse_se,\
         forced_cd_mean,forced_cd_se,curriculum_cd_mean,curriculum_cd_se,n_models\n",
    );
    for i in 0..forced.horizon {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{n_models}\n",
            i + 1,
            forced.mse_mean[i],
            forced.mse_se[i],
            curriculum.mse_mean[i],
            curriculum.mse_se[i],
            forced.cd_mean[i],
            forced.cd_se[i],
            curriculum.cd_mean[i],
            curriculum.cd_se[i],
        ));
    }
    out
}

fn cmd_compare_curriculum(args: &CompareArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let mut cfg = args.model.resolve(Architecture::Seq2seq)?;
    require_dir(&args.data, "train.bbv and test.bbv")?;
    let train_data = load_split(&args.data, Split::Train)?;
    let test = load_split(&args.data, Split::Test)?;
    fit_to_data(&mut cfg, &train_data)?;
    check_frames(&test, cfg.model.height, cfg.model.width)?;
    cfg.out_dir = args.out.clone();

    let mut pooled = Vec::new();
    for mode in [Mode::Forced, Mode::Curriculum] {
        let mut reports = Vec::with_capacity(args.n);
        for i in 0..args.n {
            let mut run = cfg.clone();
            run.train.mode = mode;
            run.set_seed(cfg.seed.wrapping_add(i as u64));
            let dir = args.out.join(format!("{}-{i}", mode.name()));
            let model = train_run(&run, &train_data, &dir)?;
            let provenance = json!({ "config": run, "seed": run.seed });
            reports.push(evaluate_run(&model, &test, &run.eval, &dir, "report", provenance)?);
        }
        pooled.push((mode.name().to_string(), pool(&reports)));
    }
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("paired.csv"), paired_csv(&pooled[0].1, &pooled[1].1, args.n))?;
    let summary: Vec<Value> = pooled
        .iter()
        .map(|(name, r)| json!({ "regimen": name, "mse_mean": r.mse_mean, "mse_se": r.mse_se, "cd_mean": r.cd_mean, "cd_se": r.cd_se }))
        .collect();
    write_json(
        &args.out.join("paired.json"),
        &json!({ "config": cfg, "seed": cfg.seed, "n_models": args.n, "regimens": summary }),
    )?;
    write_charts(&pooled, &args.out)?;
    for (name, r) in &pooled {
        println!(
            "{name}: mean mse {:.3}, mean centroid distance {:.2} over {} models",
            r.horizon_mean_mse(),
            r.horizon_mean_cd(),
            args.n
        );
    }
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let mut cfg = args.model.resolve(Architecture::Convlstm)?;
    cfg.out_dir = args.out.clone();
    cfg.validate()?;
    std::fs::create_dir_all(&args.out)?;
    cfg.save(&args.out.join("config.json"))?;

    let data_dir = args.out.join("data");
    write_splits(&cfg.generator, &cfg.splits, cfg.seed, &data_dir)?;
    let train_data = load_split(&data_dir, Split::Train)?;
    let test = load_split(&data_dir, Split::Test)?;

    let model = train_run(&cfg, &train_data, &args.out.join("train"))?;
    let eval_dir = args.out.join("eval");
    let provenance = json!({ "config": cfg, "seed": cfg.seed });
    let report = evaluate_run(&model, &test, &cfg.eval, &eval_dir, "report", provenance)?;
    let baseline = evaluate_run(&EmptyFrames, &test, &cfg.eval, &eval_dir, "baseline", json!({ "baseline": "empty" }))?;
    let series = [
        (cfg.model.architecture.name().to_string(), report),
        ("empty frame".to_string(), baseline),
    ];
    write_charts(&series, &args.out.join("report"))?;
    println!("pipeline artifacts in {}", args.out.display());
    Ok(())
}
