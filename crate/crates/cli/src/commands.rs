use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use deepcam::classical::{
    demosaic_bilinear, run_classical_pipeline, ClassicalConfig, Demosaic, Estimator, ExposureMode,
    WhiteBalance,
};
use deepcam::cnn::{
    history_csv, infer as cnn_infer, load_checkpoint, save_checkpoint, train_from_manifest,
    ModelCheckpoint, NetConfig, Network, TrainConfig, TrainOptions,
};
use deepcam::eval::{evaluate_set, frame_name, quantize16, Method, MethodKind};
use deepcam::image::srgb_gamma;
use deepcam::io::{read_ppm, read_raw, write_ppm};
use deepcam::rawsim::{build_dataset, DatasetConfig, Manifest, Split};
use deepcam::synth::write_scene_corpus;
use deepcam::{par, ColorState, Image};

use crate::{EvalArgs, GenScenesArgs, InferArgs, PipelineArgs, ReportArgs, SimulateArgs, TrainArgs};

pub enum CliError {
    /// Bad arguments, unreadable inputs or invalid configuration.
    Usage(String),
    Failed(String),
    /// Training hit a non-finite loss.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<deepcam::Error> for CliError {
    fn from(e: deepcam::Error) -> Self {
        use deepcam::Error as E;
        match e {
            E::Io { .. }
            | E::Json(_)
            | E::InvalidParameter(_)
            | E::BadMagic
            | E::VersionMismatch { .. }
            | E::Truncated(_)
            | E::Malformed(_) => CliError::Usage(e.to_string()),
            E::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

type CmdResult = Result<u8, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || usage(format!("expected WIDTHxHEIGHT, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w = w.trim().parse().map_err(|_| bad())?;
    let h = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    Ok(s.parse()?)
}

fn check_jobs(jobs: usize) -> Result<usize, CliError> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    Ok(jobs)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn gen_scenes(a: GenScenesArgs) -> CmdResult {
    let (w, h) = parse_size(&a.size)?;
    let paths = write_scene_corpus(&a.out, a.count, w, h, a.common.seed)?;
    println!("{} scenes in {}", paths.len(), a.out.display());
    Ok(0)
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let jobs = check_jobs(a.common.jobs)?;
    let mut cfg = match &a.config {
        Some(p) => toml::from_str::<DatasetConfig>(&read_text(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => DatasetConfig::default(),
    };
    if let Some(v) = a.snr {
        cfg.snr_db = v;
    }
    if let Some(v) = a.exposures {
        cfg.exposures = v;
    }
    if let Some(v) = a.crops {
        cfg.crops = v;
    }
    if let Some(s) = &a.crop_size {
        (cfg.crop_w, cfg.crop_h) = parse_size(s)?;
    }
    if let Some(c) = &a.cfa {
        cfg.cfa = c.parse()?;
    }
    cfg.seed = a.common.seed;
    if !a.src.is_dir() {
        return Err(usage(format!("{} is not a directory", a.src.display())));
    }
    let built = par::with_threads(jobs, || build_dataset(&a.src, &a.out, &cfg))?;
    for (p, why) in &built.skipped {
        eprintln!("skipped {}: {why}", p.display());
    }
    println!("{} frames", built.manifest.frames.len());
    println!("{}", built.manifest_path.display());
    Ok(if built.skipped.is_empty() { 0 } else { 1 })
}

fn white_balance_flag(s: &str) -> WhiteBalance {
    match s {
        "oracle" => WhiteBalance::Oracle,
        "none" => WhiteBalance::None,
        "grayworld" => WhiteBalance::Estimate(Estimator::GrayWorld),
        "shades-of-gray" => WhiteBalance::Estimate(Estimator::ShadesOfGray { p: 6.0 }),
        "whitepatch" => WhiteBalance::Estimate(Estimator::WhitePatch),
        _ => WhiteBalance::Estimate(Estimator::GrayEdge { p: 1.0, sigma: 1.0 }),
    }
}

pub fn pipeline(a: PipelineArgs) -> CmdResult {
    let jobs = check_jobs(a.common.jobs)?;
    let split = parse_split(&a.split)?;
    let mut cfg = match &a.config {
        Some(p) => ClassicalConfig::from_toml(&read_text(p)?)?,
        None => ClassicalConfig::default(),
    };
    if let Some(d) = &a.demosaic {
        cfg.demosaic = if d == "bilinear" { Demosaic::Bilinear } else { Demosaic::Malvar };
    }
    if let Some(w) = &a.wb {
        cfg.white_balance = white_balance_flag(w);
    }
    if let Some(e) = &a.exposure {
        cfg.exposure = if e == "oracle" { ExposureMode::Oracle } else { ExposureMode::Auto };
    }
    let manifest = Manifest::load(&a.manifest)?;
    let frames: Vec<_> = manifest.split(split).cloned().collect();
    if frames.is_empty() {
        return Err(usage(format!("split {} is empty", a.split)));
    }
    create_dir(&a.out)?;
    let results = par::with_threads(jobs, || {
        par::map_slice(&frames, |f| -> Result<(), String> {
            let name = frame_name(&f.raw_path);
            let raw = read_raw(&manifest.resolve(&f.raw_path)).map_err(|e| e.to_string())?;
            let out = run_classical_pipeline(&raw, &cfg).map_err(|e| e.to_string())?;
            write_ppm(&a.out.join(format!("{name}.ppm")), &out.image, 16).map_err(|e| e.to_string())?;
            let sidecar = serde_json::json!({
                "frame": f.raw_path,
                "config": cfg,
                "illuminant": out.illuminant.map(|i| i.rgb()),
                "stages": out.provenance,
            });
            let text = serde_json::to_string_pretty(&sidecar).map_err(|e| e.to_string())?;
            fs::write(a.out.join(format!("{name}.json")), text).map_err(|e| e.to_string())
        })
    });
    let mut failed = 0;
    for (f, r) in frames.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("{}: {e}", f.raw_path);
            failed += 1;
        }
    }
    println!("{} of {} frames written to {}", frames.len() - failed, frames.len(), a.out.display());
    Ok(if failed > 0 { 1 } else { 0 })
}

/// Where the state is written when training aborts on a non-finite loss.
pub fn diagnostic_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".diag");
    PathBuf::from(s)
}

pub fn train(a: TrainArgs) -> CmdResult {
    let jobs = check_jobs(a.common.jobs)?;
    let mut net_cfg = match &a.net_config {
        Some(p) => serde_json::from_str::<NetConfig>(&read_text(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => NetConfig::default(),
    };
    net_cfg.base_width = a.width;
    net_cfg.validate()?;
    let tcfg = TrainConfig {
        lr0: a.lr,
        batch: a.batch,
        max_epochs: a.epochs,
        seed: a.common.seed,
        ..TrainConfig::default()
    };
    tcfg.validate()?;
    let init = match &a.resume {
        Some(p) => load_checkpoint(p)?,
        None => ModelCheckpoint::fresh(Network::new(net_cfg, a.common.seed)?, a.lr),
    };
    let diag = diagnostic_path(&a.out);
    let opts = TrainOptions { diagnostic_path: Some(diag.clone()), ..TrainOptions::default() };
    let outcome = match par::with_threads(jobs, || train_from_manifest(&a.manifest, init, &tcfg, &opts)) {
        Ok(o) => o,
        Err(e @ deepcam::Error::NonFiniteLoss { .. }) => {
            println!("diagnostic checkpoint: {}", diag.display());
            return Err(CliError::Numeric(format!("{e}; diagnostic checkpoint at {}", diag.display())));
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(&a.out, &outcome.best)?;
    let history = a.history.unwrap_or_else(|| a.out.with_extension("csv"));
    write_file(&history, history_csv(&outcome.history))?;
    println!(
        "best validation loss {:.6} at epoch {}",
        outcome.best.best_val, outcome.best.epoch
    );
    println!("{}", a.out.display());
    println!("{}", history.display());
    Ok(0)
}

pub fn infer(a: InferArgs) -> CmdResult {
    let jobs = check_jobs(a.common.jobs)?;
    let net = load_checkpoint(&a.checkpoint)?.net;
    match (&a.manifest, &a.raw) {
        (None, Some(raw)) => {
            let raw = read_raw(raw)?;
            let img = quantize16(&cnn_infer(&net, &raw)?);
            if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            write_ppm(&a.out, &img, 16)?;
            println!("{}", a.out.display());
            Ok(0)
        }
        (Some(m), None) => {
            let manifest = Manifest::load(m)?;
            let split = parse_split(&a.split)?;
            let frames: Vec<_> = manifest.split(split).cloned().collect();
            if frames.is_empty() {
                return Err(usage(format!("split {} is empty", a.split)));
            }
            create_dir(&a.out)?;
            let results = par::with_threads(jobs, || {
                par::map_slice(&frames, |f| -> deepcam::Result<()> {
                    let raw = read_raw(&manifest.resolve(&f.raw_path))?;
                    let img = quantize16(&cnn_infer(&net, &raw)?);
                    write_ppm(&a.out.join(format!("{}.ppm", frame_name(&f.raw_path))), &img, 16)
                })
            });
            let mut failed = 0;
            for (f, r) in frames.iter().zip(results) {
                if let Err(e) = r {
                    eprintln!("{}: {e}", f.raw_path);
                    failed += 1;
                }
            }
            println!("{} of {} frames written to {}", frames.len() - failed, frames.len(), a.out.display());
            Ok(if failed > 0 { 1 } else { 0 })
        }
        _ => Err(usage("give exactly one of --manifest or --raw")),
    }
}

/// Parse `[name=]kind:arg`. Unnamed methods are called by their kind,
/// numbered from the second occurrence on.
pub fn parse_methods(specs: &[String]) -> Result<Vec<Method>, CliError> {
    let mut out: Vec<Method> = Vec::new();
    for spec in specs {
        let (name, rest) = match spec.split_once('=') {
            Some((n, r)) if !n.contains(':') => (Some(n.to_string()), r),
            _ => (None, spec.as_str()),
        };
        let (kind, arg) = rest
            .split_once(':')
            .ok_or_else(|| usage(format!("method {spec:?} is not kind:arg")))?;
        let mk = match kind {
            "cnn" => MethodKind::Cnn(Box::new(load_checkpoint(Path::new(arg))?.net)),
            "classical" => MethodKind::Classical(match arg {
                "oracle" => ClassicalConfig::oracle(Demosaic::Malvar),
                "oracle-bilinear" => ClassicalConfig::oracle(Demosaic::Bilinear),
                "baseline" => ClassicalConfig::bilinear_wiener_grayworld(),
                path => ClassicalConfig::from_toml(&read_text(Path::new(path))?)?,
            }),
            "images" => {
                if !Path::new(arg).is_dir() {
                    return Err(usage(format!("{arg} is not a directory")));
                }
                MethodKind::Images(PathBuf::from(arg))
            }
            _ => return Err(usage(format!("unknown method kind {kind:?}"))),
        };
        let name = name.unwrap_or_else(|| {
            let seen = out.iter().filter(|m| m.name == kind || m.name.starts_with(&format!("{kind}#"))).count();
            if seen == 0 { kind.to_string() } else { format!("{kind}#{}", seen + 1) }
        });
        if out.iter().any(|m| m.name == name) {
            return Err(usage(format!("duplicate method name {name:?}")));
        }
        out.push(Method { name, kind: mk });
    }
    Ok(out)
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let jobs = check_jobs(a.common.jobs)?;
    let split = parse_split(&a.split)?;
    let methods = parse_methods(&a.methods)?;
    create_dir(&a.out)?;
    let outputs = a.out.join("outputs");
    let report = par::with_threads(jobs, || evaluate_set(&a.manifest, split, &methods, Some(&outputs)))?;
    write_file(&a.out.join("report.csv"), report.csv())?;
    let summary = serde_json::to_string_pretty(&report.summary_json()).map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&a.out.join("summary.json"), &summary)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("{:<16} {:>9} {:>9} {:>9} {:>9} {:>8}", "method", "mean_ang", "med_ang", "psnr", "mean_snr", "failures");
    for s in &report.summary {
        println!(
            "{:<16} {:>9} {:>9} {:>9} {:>9} {:>8}",
            s.method,
            fmt(s.mean_ang),
            fmt(s.median_ang),
            fmt(s.psnr),
            fmt(s.mean_snr),
            s.failures
        );
    }
    let failures: usize = report.summary.iter().map(|s| s.failures).sum();
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} on {}: {}", r.method, r.frame, r.error.as_deref().unwrap_or(""));
    }
    Ok(if failures > 0 { 1 } else { 0 })
}

/// Panels side by side with a white gutter.
fn hstack(panels: &[Image], gutter: usize) -> Image {
    let h = panels.iter().map(Image::height).max().unwrap_or(0);
    let w = panels.iter().map(Image::width).sum::<usize>() + gutter * panels.len().saturating_sub(1);
    let mut out = Image::filled(w, h, [1.0; 3], ColorState::GammaSRGB);
    let mut x0 = 0;
    for p in panels {
        for y in 0..p.height() {
            for x in 0..p.width() {
                out.set_pixel(x0 + x, y, p.pixel(x, y));
            }
        }
        x0 += p.width() + gutter;
    }
    out
}

/// Method names in report order, read from the header rows of report.csv.
fn report_methods(csv: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for line in csv.lines().skip(1) {
        let m = line.split(',').next().unwrap_or("").to_string();
        if names.contains(&m) {
            break;
        }
        names.push(m);
    }
    names
}

pub fn report(a: ReportArgs) -> CmdResult {
    let csv = read_text(&a.eval.join("report.csv"))?;
    let methods = report_methods(&csv);
    if methods.is_empty() {
        return Err(usage(format!("{} has no rows", a.eval.join("report.csv").display())));
    }
    let manifest = Manifest::load(&a.manifest)?;
    let split = parse_split(&a.split)?;
    create_dir(&a.out)?;
    let mut written = 0;
    let mut missing = 0;
    for f in manifest.split(split).take(a.limit.unwrap_or(usize::MAX)) {
        let name = frame_name(&f.raw_path);
        let raw = read_raw(&manifest.resolve(&f.raw_path))?;
        // Bilinear demosaic shown as if already in display space.
        let preview = srgb_gamma(&demosaic_bilinear(&raw)?.with_state(ColorState::LinearSRGB))?;
        let mut panels = vec![preview];
        for m in &methods {
            match read_ppm(&a.eval.join("outputs").join(m).join(format!("{name}.ppm")), ColorState::GammaSRGB) {
                Ok(img) => panels.push(img),
                Err(_) => {
                    missing += 1;
                    panels.push(Image::filled(raw.width(), raw.height(), [0.0; 3], ColorState::GammaSRGB));
                }
            }
        }
        panels.push(read_ppm(&manifest.resolve(&f.gt_path), ColorState::GammaSRGB)?);
        write_ppm(&a.out.join(format!("{name}.ppm")), &hstack(&panels, 4), 8)?;
        written += 1;
    }
    println!("{written} strips (raw | {} | ground truth) in {}", methods.join(" | "), a.out.display());
    Ok(if missing > 0 { 1 } else { 0 })
}
