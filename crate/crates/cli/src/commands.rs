use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use intrarc::forest::{evaluate, split_holdout, train as fit_forest, FEATURE_NAMES};
use intrarc::rate_control::{BitsPredictor, EncoderOracle, LogEncoder};
use intrarc::schema::{self, format_sig};
use intrarc::sim::{generate_dataset, synthetic_sequence};
use intrarc::video::{RawYuvReader, Y4mReader};
use intrarc::{
    bd_rate, build_first_pass, build_noise_first_pass, extract_sequence, run_second_pass, sim_psnr, AnalyzerConfig,
    ChromaFormat, ForestHyperparams, ForestModel, PlanarFrame, RcConfig, RdCurve, SimEncoder, SimParams, VideoGeometry,
};

use crate::args::EncoderSpec;
use crate::exit::UsageError;
use crate::manifest::RunManifest;
use crate::{AnalyzeArgs, BdrateArgs, FirstPass, GenDataArgs, GenFeaturesArgs, PredictArgs, RcArgs, TrainArgs};

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn is_y4m(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 9];
    let mut f = open(path)?;
    let n = f.read(&mut magic).with_context(|| format!("reading {}", path.display()))?;
    Ok(n == magic.len() && &magic == b"YUV4MPEG2")
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let cfg = AnalyzerConfig { block_size_luma: a.block_size, block_size_chroma: a.chroma_block_size };
    cfg.validate()?;

    let frames: Box<dyn Iterator<Item = intrarc::Result<PlanarFrame>>>;
    let geometry;
    let format;
    if let Some(res) = a.raw_geometry {
        let chroma: ChromaFormat = a.chroma.parse()?;
        geometry = VideoGeometry::new(res.width, res.height, a.bit_depth, chroma, a.fps.num, a.fps.den)?;
        let len = std::fs::metadata(&a.input).with_context(|| format!("reading {}", a.input.display()))?.len();
        let reader = RawYuvReader::new(open(&a.input)?, geometry, len)?;
        frames = Box::new(reader);
        format = "raw";
    } else if is_y4m(&a.input)? {
        let reader = Y4mReader::new(open(&a.input)?)?;
        geometry = *reader.geometry();
        frames = Box::new(reader);
        format = "y4m";
    } else {
        return Err(UsageError(format!(
            "{} has no Y4M header; headerless input needs --raw-geometry WIDTHxHEIGHT",
            a.input.display()
        ))
        .into());
    }

    let start = Instant::now();
    let features = extract_sequence(frames, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    let mut out = create(&a.out)?;
    schema::write_features(&mut out, &features)?;
    finish(out, &a.out)?;

    let mut manifest =
        RunManifest::new("analyze", json!({ "input_format": format, "geometry": geometry, "analyzer": cfg }))
            .input("video", &a.input)
            .output("features", &a.out);
    manifest.results = json!({
        "frames": features.len(),
        "analysis_seconds": seconds,
        "throughput_fps": features.len() as f64 / seconds.max(1e-9),
    });
    manifest.write_beside(&a.out)?;
    eprintln!("analyzed {} frames ({format}) -> {}", features.len(), a.out.display());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let hp = ForestHyperparams {
        n_estimators: a.trees,
        max_depth: a.max_depth,
        min_samples_leaf: a.min_samples_leaf,
        min_samples_split: a.min_samples_split,
        seed: a.seed,
        max_features: a.max_features,
    };
    hp.validate()?;
    let samples = schema::read_training(open(&a.data)?)?;
    let (fit, holdout) = match a.holdout {
        Some(fraction) => {
            let (fit, test) = split_holdout(&samples, fraction, a.seed)?;
            (fit, Some(test))
        }
        None => (samples.clone(), None),
    };
    let model = fit_forest(&fit, &hp)?;
    model.save(&a.out).with_context(|| format!("saving {}", a.out.display()))?;

    let training = evaluate(&model, &fit)?;
    let held = holdout.as_ref().map(|t| evaluate(&model, t)).transpose()?;
    let importance = model.importance();
    let weights: serde_json::Map<_, _> =
        FEATURE_NAMES.iter().zip(importance.weights).map(|(n, w)| (n.to_string(), json!(w))).collect();

    let mut manifest = RunManifest::new("train", json!({ "hyperparams": hp, "holdout_fraction": a.holdout }))
        .input("data", &a.data)
        .output("model", &a.out)
        .seed("forest", a.seed);
    manifest.results = json!({
        "samples": samples.len(),
        "training_samples": fit.len(),
        "holdout_samples": holdout.as_ref().map(Vec::len),
        "training": training,
        "holdout": held,
        "importance": weights,
        "no_splits": importance.no_splits,
        "model_bytes": std::fs::metadata(&a.out)?.len(),
    });
    manifest.write_beside(&a.out)?;
    match held {
        Some(s) => eprintln!("trained on {} rows; holdout R2 {:.4}, MAE {:.1}", fit.len(), s.r2, s.mae),
        None => eprintln!("trained on {} rows; training R2 {:.4}", fit.len(), training.r2),
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = ForestModel::load(&a.model)?;
    let features = schema::read_features(open(&a.features)?)?;
    let mut out = create(&a.out)?;
    writeln!(out, "frame_index,q,b_hat")?;
    for f in &features {
        let b = model.predict_bits(f, a.qp)?;
        writeln!(out, "{},{},{}", f.frame_index, a.qp, format_sig(b, 9))?;
    }
    finish(out, &a.out)?;
    RunManifest::new("predict", json!({ "qp": a.qp }))
        .input("model", &a.model)
        .input("features", &a.features)
        .output("predictions", &a.out)
        .write_beside(&a.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RcReport {
    first_pass: &'static str,
    encoder: String,
    frames: usize,
    target_bitrate: f64,
    fps: f64,
    base_budget: f64,
    total_bits: f64,
    achieved_bitrate: f64,
    /// Fraction of the budget.
    bitrate_deviation: f64,
    bitrate_deviation_percent: f64,
    mean_qp: f64,
    qp_stddev: f64,
    /// Mean simulated PSNR_YUV; only for the simulated encoder.
    mean_psnr_yuv: Option<f64>,
}

pub fn rc(a: RcArgs) -> Result<()> {
    let features = schema::read_features(open(&a.features)?)?;
    if features.is_empty() {
        bail!(intrarc::Error::NoFrames);
    }
    if features.iter().enumerate().any(|(i, f)| f.frame_index != i) {
        bail!(intrarc::Error::InvalidInput("frame indices must run 0, 1, 2, ... in order".into()));
    }
    let geometry = VideoGeometry::yuv420_8bit(a.resolution.width, a.resolution.height, a.fps.num, a.fps.den)?;
    let cfg = RcConfig {
        c_low: a.c_low,
        deficit_gain: a.deficit_gain,
        first_pass_qp: a.first_pass_qp,
        qp_min: a.qp_min,
        qp_max: a.qp_max,
        ..RcConfig::new(a.bitrate, geometry)
    };
    cfg.validate()?;

    let (records, first_pass) = match (a.first_pass, &a.model) {
        (FirstPass::Model, Some(path)) => (build_first_pass(&features, &ForestModel::load(path)?, &cfg)?, "model"),
        (FirstPass::Model, None) => {
            return Err(UsageError("--model is required unless --first-pass noise is given".into()).into())
        }
        (FirstPass::Noise, None) => (build_noise_first_pass(features.len(), &cfg, a.seed)?, "noise"),
        (FirstPass::Noise, Some(_)) => {
            return Err(UsageError("--model cannot be combined with --first-pass noise".into()).into())
        }
    };

    let sim = SimParams { noise_sigma: a.sim_noise, seed: a.sim_seed, ..Default::default() };
    let mut encoder: Box<dyn EncoderOracle> = match &a.encoder {
        EncoderSpec::Sim => Box::new(SimEncoder::new(features.clone(), geometry.pixels(), sim)?),
        EncoderSpec::Log(path) => {
            let log = LogEncoder::new(schema::read_encoder_log(open(path)?)?)?;
            if log.frame_count() != features.len() {
                bail!(intrarc::Error::InvalidInput(format!(
                    "frame-count mismatch: encoder log covers {} frames, features have {}",
                    log.frame_count(),
                    features.len()
                )));
            }
            Box::new(log)
        }
    };

    let run = match run_second_pass(&records, encoder.as_mut(), &cfg) {
        Ok(run) => run,
        Err(intrarc::Error::Encoder { frame_index, message, partial_trace }) => {
            let mut out = create(&a.trace)?;
            schema::write_trace(&mut out, &partial_trace)?;
            finish(out, &a.trace)?;
            bail!(intrarc::Error::Encoder { frame_index, message, partial_trace: Vec::new() });
        }
        Err(e) => return Err(e.into()),
    };

    let mut out = create(&a.trace)?;
    schema::write_trace(&mut out, &run.decisions)?;
    finish(out, &a.trace)?;

    let mean_psnr_yuv = match a.encoder {
        EncoderSpec::Sim => {
            let total: f64 = run.decisions.iter().map(|d| sim_psnr(d.q_prime_p, &sim)).sum::<intrarc::Result<f64>>()?;
            Some(total / run.decisions.len() as f64)
        }
        EncoderSpec::Log(_) => None,
    };
    let report = RcReport {
        first_pass,
        encoder: a.encoder.to_string(),
        frames: run.decisions.len(),
        target_bitrate: cfg.target_bitrate,
        fps: cfg.fps(),
        base_budget: cfg.base_budget(),
        total_bits: run.summary.total_bits,
        achieved_bitrate: run.achieved_bitrate(),
        bitrate_deviation: run.summary.bitrate_deviation,
        bitrate_deviation_percent: 100.0 * run.summary.bitrate_deviation,
        mean_qp: run.summary.mean_qp,
        qp_stddev: run.qp_stddev(),
        mean_psnr_yuv,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &a.report {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{text}");

    let mut manifest = RunManifest::new(
        "rc",
        json!({ "rc": cfg, "c_high": cfg.c_high(), "first_pass": first_pass, "encoder": a.encoder.to_string(), "sim": sim }),
    )
    .input("features", &a.features)
    .output("trace", &a.trace)
    .seed("sim_encoder", a.sim_seed);
    if let Some(m) = &a.model {
        manifest = manifest.input("model", m);
    }
    if let EncoderSpec::Log(p) = &a.encoder {
        manifest = manifest.input("encoder_log", p);
    }
    if first_pass == "noise" {
        manifest = manifest.seed("noise_first_pass", a.seed);
    }
    if let Some(r) = &a.report {
        manifest = manifest.output("report", r);
    }
    manifest.results = serde_json::to_value(&report)?;
    manifest.write_beside(&a.trace)?;
    Ok(())
}

pub fn bdrate(a: BdrateArgs) -> Result<()> {
    let anchor = RdCurve::new(schema::read_rd(open(&a.anchor)?)?).context("anchor curve")?;
    let test = RdCurve::new(schema::read_rd(open(&a.test)?)?).context("test curve")?;
    let report = bd_rate(&anchor, &test)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
        let mut manifest = RunManifest::new("bdrate", json!({ "method": report.method }))
            .input("anchor", &a.anchor)
            .input("test", &a.test)
            .output("report", out);
        manifest.results = serde_json::to_value(&report)?;
        manifest.write_beside(out)?;
    }
    Ok(())
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let params = SimParams { noise_sigma: a.noise, seed: a.seed, ..Default::default() };
    let pixels = a.resolution.width * a.resolution.height;
    let samples = generate_dataset(a.n, pixels, &params, a.seed)?;
    let mut out = create(&a.out)?;
    schema::write_training(&mut out, &samples)?;
    finish(out, &a.out)?;
    RunManifest::new("gen-data", json!({ "n": a.n, "resolution": a.resolution, "sim": params }))
        .output("data", &a.out)
        .seed("dataset", a.seed)
        .write_beside(&a.out)?;
    Ok(())
}

pub fn gen_features(a: GenFeaturesArgs) -> Result<()> {
    if a.frames == 0 {
        bail!(intrarc::Error::NoFrames);
    }
    let features = synthetic_sequence(a.frames, a.seed);
    let mut out = create(&a.out)?;
    schema::write_features(&mut out, &features)?;
    finish(out, &a.out)?;
    RunManifest::new("gen-features", json!({ "frames": a.frames }))
        .output("features", &a.out)
        .seed("sequence", a.seed)
        .write_beside(&a.out)?;
    Ok(())
}
