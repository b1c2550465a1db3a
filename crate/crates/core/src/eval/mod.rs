//! Scoring of reconstructions: illuminant angular error, PSNR and SNR,
//! per frame and aggregated per method.

mod metrics;

pub use metrics::{
    angular_error, image_snr, implied_illuminant, implied_illuminant_from_raw, mean_snr, psnr,
};

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::classical::{run_classical_pipeline, ClassicalConfig};
use crate::cnn::{infer, Network};
use crate::color::{ColorState, Illuminant};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::ppm::quantize;
use crate::io::{read_ppm, read_raw, write_ppm};
use crate::par;
use crate::rawsim::{Manifest, RawFrame, Split};

/// Round every sample to the 16-bit grid used for stored outputs, so a
/// score computed in memory equals one computed from the written file.
pub fn quantize16(img: &Image) -> Image {
    let data = img
        .data()
        .iter()
        .map(|&v| (quantize(v, 65535) as f64 / 65535.0) as f32)
        .collect();
    Image::new(img.width(), img.height(), data, img.state()).expect("same size")
}

#[derive(Debug, Clone)]
pub enum MethodKind {
    Cnn(Box<Network<f32>>),
    Classical(ClassicalConfig),
    /// Previously written outputs, `<dir>/<frame>.ppm`.
    Images(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Method {
    pub name: String,
    pub kind: MethodKind,
}

impl Method {
    pub fn cnn(name: impl Into<String>, net: Network<f32>) -> Self {
        Method { name: name.into(), kind: MethodKind::Cnn(Box::new(net)) }
    }

    pub fn classical(name: impl Into<String>, cfg: ClassicalConfig) -> Self {
        Method { name: name.into(), kind: MethodKind::Classical(cfg) }
    }

    pub fn images(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Method { name: name.into(), kind: MethodKind::Images(dir.into()) }
    }

    /// Whether the method reads ground-truth exposure and illuminant.
    pub fn uses_oracle(&self) -> bool {
        matches!(&self.kind, MethodKind::Classical(c) if c.is_oracle())
    }

    /// Quantized output image and the illuminant the method applied, or the
    /// one implied by its output.
    pub fn reconstruct(&self, frame: &EvalFrame) -> Result<(Image, Illuminant)> {
        let (img, applied) = match &self.kind {
            MethodKind::Cnn(net) => (quantize16(&infer(net, &frame.raw)?), None),
            MethodKind::Classical(cfg) => {
                let out = run_classical_pipeline(&frame.raw, cfg)?;
                (quantize16(&out.image), out.illuminant)
            }
            MethodKind::Images(dir) => (
                read_ppm(&dir.join(format!("{}.ppm", frame.name)), ColorState::GammaSRGB)?,
                None,
            ),
        };
        let ill = match applied {
            Some(i) => i,
            None => implied_illuminant_from_raw(&frame.raw, &img)?,
        };
        Ok((img, ill))
    }
}

/// One test frame: a name for reports and file outputs, the mosaic and
/// its ground truth.
#[derive(Debug, Clone)]
pub struct EvalFrame {
    pub name: String,
    pub raw: RawFrame,
    pub gt: Image,
}

/// Frame name used in reports: the file stem of the raw path.
pub fn frame_name(raw_path: &str) -> String {
    Path::new(raw_path)
        .file_stem()
        .map_or_else(|| raw_path.to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn load_frames(manifest: &Manifest, split: Split) -> Result<Vec<EvalFrame>> {
    manifest
        .split(split)
        .map(|f| {
            Ok(EvalFrame {
                name: frame_name(&f.raw_path),
                raw: read_raw(&manifest.resolve(&f.raw_path))?,
                gt: read_ppm(&manifest.resolve(&f.gt_path), ColorState::GammaSRGB)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub method: String,
    pub frame: String,
    pub angular: Option<f64>,
    pub psnr: Option<f64>,
    pub snr: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub oracle: bool,
    pub frames: usize,
    pub failures: usize,
    pub mean_ang: Option<f64>,
    pub median_ang: Option<f64>,
    pub psnr: Option<f64>,
    pub mean_snr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Frame-major, methods in request order within each frame.
    pub rows: Vec<FrameRow>,
    /// In request order.
    pub summary: Vec<MethodSummary>,
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

fn db_json(v: Option<f64>) -> Value {
    match v {
        Some(v) if v == f64::INFINITY => json!("inf"),
        Some(v) if v.is_finite() => json!(v),
        _ => Value::Null,
    }
}

impl Report {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == name)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("method,frame,angular_deg,psnr_db,snr_db,error\n");
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                r.frame,
                r.angular.map_or(String::new(), |a| format!("{a}")),
                fmt_db(r.psnr),
                fmt_db(r.snr),
                err
            ));
        }
        s
    }

    /// `{method: {mean_ang, median_ang, psnr, mean_snr, failures, ...}}`,
    /// with infinite decibel values written as `"inf"`.
    pub fn summary_json(&self) -> Value {
        let mut m = Map::new();
        for s in &self.summary {
            m.insert(
                s.method.clone(),
                json!({
                    "mean_ang": s.mean_ang,
                    "median_ang": s.median_ang,
                    "psnr": db_json(s.psnr),
                    "mean_snr": db_json(s.mean_snr),
                    "failures": s.failures,
                    "frames": s.frames,
                    "oracle": s.oracle,
                }),
            );
        }
        Value::Object(m)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[k] } else { 0.5 * (s[k - 1] + s[k]) })
}

fn score(method: &Method, frame: &EvalFrame, save: Option<&Path>) -> FrameRow {
    let run = || -> Result<(f64, f64, f64)> {
        let (img, ill) = method.reconstruct(frame)?;
        if let Some(dir) = save {
            let d = dir.join(&method.name);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            write_ppm(&d.join(format!("{}.ppm", frame.name)), &img, 16)?;
        }
        let ang = angular_error(&ill, &frame.raw.meta.device_illuminant()?);
        Ok((ang, psnr(&img, &frame.gt)?, image_snr(&img, &frame.gt)?))
    };
    let mut row = FrameRow {
        method: method.name.clone(),
        frame: frame.name.clone(),
        angular: None,
        psnr: None,
        snr: None,
        error: None,
    };
    match run() {
        Ok((a, p, s)) => {
            row.angular = Some(a);
            row.psnr = Some(p);
            row.snr = Some(s);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Score every method on every frame. A method that fails on a frame is
/// recorded as a failure and left out of that method's means. Frames are
/// processed in parallel; the report order does not depend on scheduling.
/// When `save` is given each output is also written to
/// `<save>/<method>/<frame>.ppm` (16-bit).
pub fn evaluate_frames(frames: &[EvalFrame], methods: &[Method], save: Option<&Path>) -> Result<Report> {
    let mut names = std::collections::HashSet::new();
    for m in methods {
        if !names.insert(&m.name) {
            return Err(Error::InvalidParameter(format!("duplicate method name {:?}", m.name)));
        }
    }
    let per_frame = par::map_slice(frames, |f| {
        methods.iter().map(|m| score(m, f, save)).collect::<Vec<_>>()
    });
    let rows: Vec<FrameRow> = per_frame.into_iter().flatten().collect();
    let summary = methods
        .iter()
        .map(|m| {
            let mine: Vec<&FrameRow> = rows.iter().filter(|r| r.method == m.name).collect();
            let ok: Vec<&FrameRow> = mine.iter().copied().filter(|r| r.error.is_none()).collect();
            let angs: Vec<f64> = ok.iter().filter_map(|r| r.angular).collect();
            let ps: Vec<f64> = ok.iter().filter_map(|r| r.psnr).collect();
            let ss: Vec<f64> = ok.iter().filter_map(|r| r.snr).collect();
            MethodSummary {
                method: m.name.clone(),
                oracle: m.uses_oracle(),
                frames: mine.len(),
                failures: mine.len() - ok.len(),
                mean_ang: mean(&angs),
                median_ang: median(&angs),
                psnr: mean(&ps),
                mean_snr: mean(&ss),
            }
        })
        .collect();
    Ok(Report { rows, summary })
}

/// Load one split of a manifest and score it.
pub fn evaluate_set(manifest_path: &Path, split: Split, methods: &[Method], save: Option<&Path>) -> Result<Report> {
    let m = Manifest::load(manifest_path)?;
    let frames = load_frames(&m, split)?;
    if frames.is_empty() {
        return Err(Error::Degenerate(format!("split {split:?} has no frames")));
    }
    evaluate_frames(&frames, methods, save)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::CfaPattern;
    use crate::classical::Demosaic;
    use crate::cnn::NetConfig;
    use crate::rawsim::{simulate_raw, SimMeta};

    fn frames(n: usize, size: usize) -> Vec<EvalFrame> {
        (0..n)
            .map(|i| {
                let clean = crate::synth::smooth_scene(size, size, i as u64);
                let (raw, gt) = simulate_raw(&clean, &SimMeta::default(), &CfaPattern::bayer_rggb()).unwrap();
                EvalFrame { name: format!("f{i}"), raw, gt }
            })
            .collect()
    }

    #[test]
    fn quantize16_is_idempotent_and_close() {
        let img = crate::synth::smooth_scene(8, 8, 3);
        let q = quantize16(&img);
        assert_eq!(q, quantize16(&q));
        for (a, b) in img.data().iter().zip(q.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn oracle_method_has_zero_angle_and_rows_keep_order() {
        let fs = frames(3, 16);
        let methods = [
            Method::classical("oracle", ClassicalConfig::oracle(Demosaic::Malvar)),
            Method::classical("gw", ClassicalConfig::bilinear_wiener_grayworld()),
        ];
        let r = evaluate_frames(&fs, &methods, None).unwrap();
        assert_eq!(r.rows.len(), 6);
        let order: Vec<(&str, &str)> = r.rows.iter().map(|r| (r.frame.as_str(), r.method.as_str())).collect();
        assert_eq!(
            order,
            [("f0", "oracle"), ("f0", "gw"), ("f1", "oracle"), ("f1", "gw"), ("f2", "oracle"), ("f2", "gw")]
        );
        let o = r.method("oracle").unwrap();
        assert!(o.oracle && !r.method("gw").unwrap().oracle);
        assert!(o.mean_ang.unwrap() < 1e-6);
        assert_eq!(o.failures, 0);
        let j = r.summary_json();
        assert!(j["gw"]["psnr"].is_number());
        assert_eq!(r.csv().lines().count(), 7);
    }

    #[test]
    fn failures_are_counted_and_excluded() {
        let mut fs = frames(2, 16);
        fs.extend(frames(1, 18).into_iter().map(|mut f| {
            f.name = "odd".into();
            f
        }));
        let net = Network::new(NetConfig::with_width(2), 1).unwrap();
        let r = evaluate_frames(&fs, &[Method::cnn("cnn", net)], None).unwrap();
        let s = r.method("cnn").unwrap();
        assert_eq!((s.frames, s.failures), (3, 1));
        let ok: Vec<f64> = r.rows.iter().filter_map(|r| r.psnr).collect();
        assert_eq!(ok.len(), 2);
        assert!((s.psnr.unwrap() - (ok[0] + ok[1]) / 2.0).abs() < 1e-12);
        assert!(r.rows[2].error.is_some());
    }

    #[test]
    fn perfect_output_reports_inf() {
        let fs = frames(1, 8);
        let dir = tempfile::tempdir().unwrap();
        write_ppm(&dir.path().join("f0.ppm"), &fs[0].gt, 16).unwrap();
        let mut exact = fs.clone();
        exact[0].gt = read_ppm(&dir.path().join("f0.ppm"), ColorState::GammaSRGB).unwrap();
        let r = evaluate_frames(&exact, &[Method::images("gt", dir.path())], None).unwrap();
        assert_eq!(r.rows[0].psnr, Some(f64::INFINITY));
        assert_eq!(r.summary_json()["gt"]["psnr"], json!("inf"));
        assert!(r.csv().contains(",inf,inf,"));
    }

    #[test]
    fn saved_outputs_score_identically() {
        let fs = frames(2, 16);
        let net = Network::new(NetConfig::with_width(2), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = evaluate_frames(&fs, &[Method::cnn("cnn", net)], Some(dir.path())).unwrap();
        let b = evaluate_frames(&fs, &[Method::images("cnn", dir.path().join("cnn"))], None).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn duplicate_names_rejected() {
        let m = Method::classical("a", ClassicalConfig::default());
        assert!(evaluate_frames(&frames(1, 8), &[m.clone(), m], None).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
