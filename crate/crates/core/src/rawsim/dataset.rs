//! Batch generation of raw/ground-truth pairs from a directory of sRGB images.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{simulate_raw, FpnParams, SimMeta};
use crate::cfa::{CfaKind, CfaPattern};
use crate::color::{ColorState, Illuminant, Matrix3};
use crate::error::{Error, Result};
use crate::image::{crop_for_cfa, Image};
use crate::io::{read_ppm, write_ppm, write_raw};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidParameter(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub snr_db: Vec<f64>,
    pub exposures: Vec<f64>,
    pub crops: usize,
    pub crop_w: usize,
    pub crop_h: usize,
    pub cfa: CfaKind,
    /// Fixed scene illuminant; drawn per source image when absent.
    pub illuminant: Option<[f64; 3]>,
    pub fpn: Option<FpnParams>,
    pub fpn_before_exposure: bool,
    pub defect_fraction: f64,
    pub device_matrix: Matrix3,
    /// Relative sizes of the train, validation and test splits.
    pub split_ratios: [u32; 3],
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            snr_db: vec![25.0, 30.0],
            exposures: vec![0.5, 1.0, 2.0],
            crops: 4,
            crop_w: 240,
            crop_h: 220,
            cfa: CfaKind::BayerRGGB,
            illuminant: None,
            fpn: Some(FpnParams::default()),
            fpn_before_exposure: false,
            defect_fraction: 1e-4,
            device_matrix: Matrix3::default_device(),
            split_ratios: [15, 1, 1],
            seed: 0,
        }
    }
}

/// One raw/ground-truth pair. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub raw_path: String,
    pub gt_path: String,
    pub split: Split,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub frames: Vec<FrameRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let frames = serde_json::from_str(&text)?;
        Ok(Manifest {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            frames,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.frames)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &FrameRecord> {
        self.frames.iter().filter(move |f| f.split == split)
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// FNV-1a over `key`, mixed with the command seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Split sizes for `n` frames under `ratios`; validation and test are
/// rounded, training takes the remainder.
pub fn split_counts(n: usize, ratios: [u32; 3]) -> [usize; 3] {
    let total: u64 = ratios.iter().map(|&r| r as u64).sum();
    if total == 0 {
        return [n, 0, 0];
    }
    let part = |r: u32| ((n as u64 * r as u64) as f64 / total as f64).round() as usize;
    let val = part(ratios[1]).min(n);
    let test = part(ratios[2]).min(n - val);
    [n - val - test, val, test]
}

pub struct BuiltDataset {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    /// Source files that could not be used, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

struct Generated {
    raw_path: String,
    gt_path: String,
    seed: u64,
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("ppm" | "pnm")
    )
}

fn validate(cfg: &DatasetConfig) -> Result<CfaPattern> {
    let cfa = CfaPattern::from(cfg.cfa);
    if cfg.snr_db.is_empty() || cfg.exposures.is_empty() || cfg.crops == 0 {
        return Err(Error::InvalidParameter(
            "need at least one SNR level, exposure and crop".into(),
        ));
    }
    if cfg.crop_w % cfa.tile_w() != 0 || cfg.crop_h % cfa.tile_h() != 0 || cfg.crop_w == 0 {
        return Err(Error::InvalidParameter(format!(
            "crop {}x{} is not a multiple of the {} tile",
            cfg.crop_w, cfg.crop_h, cfg.cfa
        )));
    }
    if let Some(f) = &cfg.fpn {
        f.validate()?;
    }
    cfg.device_matrix.inverse()?;
    Ok(cfa)
}

/// Simulate every source image under every (SNR, exposure) pair and `crops`
/// random tile-aligned crops, write the frames and the manifest.
pub fn build_dataset(src_dir: &Path, out_dir: &Path, cfg: &DatasetConfig) -> Result<BuiltDataset> {
    let cfa = validate(cfg)?;
    let mut sources: Vec<PathBuf> = fs::read_dir(src_dir)
        .map_err(|e| Error::io(src_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    sources.sort();

    let frames_dir = out_dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    let results = par::map_slice(&sources, |src| process_source(src, &frames_dir, cfg, &cfa));

    let mut generated = Vec::new();
    let mut skipped = Vec::new();
    for (src, r) in sources.iter().zip(results) {
        match r {
            Ok(g) => generated.extend(g),
            Err(e) => {
                log::warn!("skipping {}: {e}", src.display());
                skipped.push((src.clone(), e.to_string()));
            }
        }
    }
    if generated.is_empty() {
        return Err(Error::Degenerate(format!(
            "no usable source images in {}",
            src_dir.display()
        )));
    }

    let splits = assign_splits(generated.len(), cfg.split_ratios, cfg.seed);
    let frames = generated
        .into_iter()
        .zip(splits)
        .map(|(g, split)| FrameRecord {
            raw_path: g.raw_path,
            gt_path: g.gt_path,
            split,
            seed: g.seed,
        })
        .collect();
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        frames,
    };
    let manifest_path = out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    Ok(BuiltDataset {
        manifest,
        manifest_path,
        skipped,
    })
}

fn assign_splits(n: usize, ratios: [u32; 3], seed: u64) -> Vec<Split> {
    let [train, val, _] = split_counts(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, "split")));
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

fn process_source(
    src: &Path,
    frames_dir: &Path,
    cfg: &DatasetConfig,
    cfa: &CfaPattern,
) -> Result<Vec<Generated>> {
    let img: Image = read_ppm(src, ColorState::GammaSRGB)?;
    let stem = src
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("frame")
        .to_string();
    if img.width() < cfg.crop_w || img.height() < cfg.crop_h {
        return Err(Error::InvalidParameter(format!(
            "{}x{} is smaller than the {}x{} crop",
            img.width(),
            img.height(),
            cfg.crop_w,
            cfg.crop_h
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("source:{stem}")));
    let illuminant = match cfg.illuminant {
        Some(rgb) => Illuminant::new(rgb)?,
        None => Illuminant::new([rng.random_range(0.6..1.4), 1.0, rng.random_range(0.6..1.4)])?,
    };
    let (tw, th) = (cfa.tile_w(), cfa.tile_h());
    let max_x = (img.width() - cfg.crop_w) / tw;
    let max_y = (img.height() - cfg.crop_h) / th;

    let dir_name = frames_dir
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("frames");
    let mut out = Vec::new();
    for k in 0..cfg.crops {
        let x0 = rng.random_range(0..=max_x) * tw;
        let y0 = rng.random_range(0..=max_y) * th;
        let patch = crop_for_cfa(&img, x0, y0, cfg.crop_w, cfg.crop_h, cfa)?;
        let gt_name = format!("{stem}_c{k}_gt.ppm");
        let mut wrote_gt = false;
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            for (ei, &gain) in cfg.exposures.iter().enumerate() {
                let key = format!("{stem}/c{k}/s{si}/e{ei}");
                let seed = derive_seed(cfg.seed, &key);
                let meta = SimMeta {
                    illuminant,
                    exposure_gain: gain,
                    shot_snr_db: Some(snr),
                    fpn: cfg.fpn,
                    fpn_before_exposure: cfg.fpn_before_exposure,
                    noise_seed: seed,
                    defect_seed: (cfg.defect_fraction > 0.0).then(|| seed.rotate_left(17)),
                    defect_fraction: cfg.defect_fraction,
                    device_matrix: cfg.device_matrix,
                    defect_sites: Vec::new(),
                };
                let (raw, truth) = simulate_raw(&patch, &meta, cfa)?;
                if !wrote_gt {
                    write_ppm(&frames_dir.join(&gt_name), &truth, 16)?;
                    wrote_gt = true;
                }
                let raw_name = format!("{stem}_c{k}_s{si}_e{ei}.raw16");
                write_raw(&frames_dir.join(&raw_name), &raw)?;
                out.push(Generated {
                    raw_path: format!("{dir_name}/{raw_name}"),
                    gt_path: format!("{dir_name}/{gt_name}"),
                    seed,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::encode_ppm;

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_counts(1700, [15, 1, 1]), [1500, 100, 100]);
        assert_eq!(split_counts(272_000, [15, 1, 1]), [240_000, 16_000, 16_000]);
        assert_eq!(split_counts(0, [15, 1, 1]), [0, 0, 0]);
        let s = assign_splits(1700, [15, 1, 1], 3);
        assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), 1500);
        assert_eq!(s.iter().filter(|&&x| x == Split::Test).count(), 100);
        assert_eq!(s, assign_splits(1700, [15, 1, 1], 3));
    }

    #[test]
    fn derived_seeds_differ_per_key() {
        assert_ne!(derive_seed(7, "a/c0"), derive_seed(7, "a/c1"));
        assert_eq!(derive_seed(7, "x"), derive_seed(7, "x"));
    }

    #[test]
    fn one_source_gives_twenty_four_frames() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let img = Image::from_fn(40, 36, ColorState::GammaSRGB, |x, y| {
            [x as f32 / 40.0, y as f32 / 36.0, 0.5]
        });
        fs::write(src.path().join("scene.ppm"), encode_ppm(&img, 8)).unwrap();
        fs::write(src.path().join("broken.ppm"), b"P6 garbage").unwrap();
        let cfg = DatasetConfig {
            crop_w: 16,
            crop_h: 16,
            seed: 7,
            ..DatasetConfig::default()
        };
        let built = build_dataset(src.path(), out.path(), &cfg).unwrap();
        assert_eq!(built.manifest.frames.len(), 24);
        assert_eq!(built.skipped.len(), 1);
        let first = fs::read(&built.manifest_path).unwrap();

        let out2 = tempfile::tempdir().unwrap();
        let again = build_dataset(src.path(), out2.path(), &cfg).unwrap();
        assert_eq!(fs::read(&again.manifest_path).unwrap(), first);
        let loaded = Manifest::load(&built.manifest_path).unwrap();
        assert_eq!(loaded.frames, built.manifest.frames);
        for f in &loaded.frames {
            assert!(loaded.resolve(&f.raw_path).exists());
            assert!(loaded.resolve(&f.gt_path).exists());
        }
    }

    #[test]
    fn empty_source_dir_is_an_error() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(matches!(
            build_dataset(src.path(), out.path(), &DatasetConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn xtrans_crop_must_be_tile_multiple() {
        let cfg = DatasetConfig {
            cfa: CfaKind::XTrans,
            ..DatasetConfig::default()
        };
        assert!(validate(&cfg).is_err());
    }
}
