use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{composite_loss, save_checkpoint, ModelCheckpoint, Network, TrainConfig};
use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{read_ppm, read_raw};
use crate::nn::{adam_step, AdamState, BnMode, Tape, Tensor};
use crate::rawsim::{Manifest, RawFrame, Split};

/// Halve-on-plateau learning-rate rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    lr_min: f64,
    factor: f64,
    patience: usize,
    min_delta: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(cfg: &TrainConfig) -> Self {
        PlateauScheduler {
            lr: cfg.lr0,
            lr_min: cfg.lr_min,
            factor: cfg.plateau_factor,
            patience: cfg.plateau_patience,
            min_delta: cfg.plateau_min_delta,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Record one epoch's validation loss; returns whether it improved.
    /// After `patience` consecutive non-improving epochs the rate is
    /// multiplied by `factor` (never below `lr_min`) and the count restarts.
    pub fn observe(&mut self, val: f64) -> bool {
        if val < self.best - self.min_delta {
            self.best = val;
            self.wait = 0;
            return true;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.lr = (self.lr * self.factor).max(self.lr_min);
            self.wait = 0;
        }
        false
    }
}

/// One input mosaic with its gamma-encoded target.
#[derive(Debug, Clone)]
pub struct TrainPair {
    /// `(1, 1, H, W)` mosaic.
    pub input: Tensor<f32>,
    /// `(1, 3, H, W)` target.
    pub target: Tensor<f32>,
}

impl TrainPair {
    pub fn new(raw: &RawFrame, target: &Image) -> Result<Self> {
        if (raw.width(), raw.height()) != (target.width(), target.height()) {
            return Err(Error::shape(format!(
                "raw {}x{} vs target {}x{}",
                raw.width(),
                raw.height(),
                target.width(),
                target.height()
            )));
        }
        Ok(TrainPair {
            input: raw_tensor(raw),
            target: image_tensor(target),
        })
    }
}

/// The mosaic as a `(1, 1, H, W)` tensor, clipped to `[0, 1]`.
pub fn raw_tensor(raw: &RawFrame) -> Tensor<f32> {
    let data = raw.mosaic().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor::new([1, 1, raw.height(), raw.width()], data).expect("mosaic size")
}

/// A planar image as a `(1, 3, H, W)` tensor.
pub fn image_tensor(img: &Image) -> Tensor<f32> {
    Tensor::new([1, 3, img.height(), img.width()], img.data().to_vec()).expect("image size")
}

/// Load every (raw, ground truth) pair of one split.
pub fn load_pairs(manifest: &Manifest, split: Split) -> Result<Vec<TrainPair>> {
    manifest
        .split(split)
        .map(|f| {
            let raw = read_raw(&manifest.resolve(&f.raw_path))?;
            let gt = read_ppm(&manifest.resolve(&f.gt_path), ColorState::GammaSRGB)?;
            TrainPair::new(&raw, &gt)
        })
        .collect()
}

fn stack(pairs: &[&TrainPair]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let [_, _, h, w] = pairs[0].input.shape();
    let mut xs = Vec::with_capacity(pairs.len() * h * w);
    let mut ys = Vec::with_capacity(pairs.len() * 3 * h * w);
    for p in pairs {
        if p.input.shape() != [1, 1, h, w] || p.target.shape() != [1, 3, h, w] {
            return Err(Error::shape(format!(
                "batch items must share one size; got {:?} with {h}x{w}",
                p.input.shape()
            )));
        }
        xs.extend_from_slice(p.input.data());
        ys.extend_from_slice(p.target.data());
    }
    let n = pairs.len();
    Ok((Tensor::new([n, 1, h, w], xs)?, Tensor::new([n, 3, h, w], ys)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate in effect during the epoch.
    pub lr: f64,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,lr\n");
    for r in history {
        s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
    }
    s
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where to write the state at a non-finite loss before aborting.
    pub diagnostic_path: Option<PathBuf>,
    /// Stop once this many optimizer steps have run.
    pub max_steps: Option<usize>,
    /// Stop as soon as a training batch loss falls below this value.
    pub stop_below: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// State at the epoch with the lowest validation loss.
    pub best: ModelCheckpoint,
    /// State after the last epoch.
    pub last: ModelCheckpoint,
    pub history: Vec<EpochRecord>,
    /// Loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

/// Mean loss over `pairs` with batch-norm in Eval mode.
pub fn evaluate_loss(net: &Network<f32>, pairs: &[TrainPair], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut net = net.clone();
    for chunk in pairs.chunks(batch.max(1)) {
        let refs: Vec<&TrainPair> = chunk.iter().collect();
        let (x, y) = stack(&refs)?;
        let mut tape = Tape::new();
        let (out, _) = net.forward(&mut tape, x, BnMode::Eval, false)?;
        let l = composite_loss(&mut tape, out, &y, net.config())?;
        total += tape.value(l).data()[0] as f64 * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count.max(1) as f64)
}

/// Run the epoch loop: seeded shuffle, minibatch Adam on the composite loss,
/// validation after every epoch, plateau learning-rate decay.
pub fn train(
    init: ModelCheckpoint,
    train_set: &[TrainPair],
    val_set: &[TrainPair],
    tcfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Degenerate(
            "training needs nonempty train and validation splits".into(),
        ));
    }
    let ModelCheckpoint {
        mut net,
        mut adam,
        epoch: start_epoch,
        ..
    } = init;
    if adam.m.len() != net.params.len() {
        adam = AdamState::new(&net.params);
    }
    let mut sched = PlateauScheduler::new(tcfg);
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut step_losses = Vec::new();
    let mut best: Option<ModelCheckpoint> = None;
    let mut steps = 0usize;

    'epochs: for e in 1..=tcfg.max_epochs {
        let epoch = start_epoch as usize + e;
        let lr = sched.lr();
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        let mut stop = false;
        for chunk in order.chunks(tcfg.batch) {
            let refs: Vec<&TrainPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (x, y) = stack(&refs)?;
            let mut tape = Tape::new();
            let (out, p) = net.forward(&mut tape, x, BnMode::Train, true)?;
            let l = composite_loss(&mut tape, out, &y, net.config())?;
            let loss = tape.value(l).data()[0] as f64;
            if !loss.is_finite() {
                if let Some(path) = &opts.diagnostic_path {
                    let diag = ModelCheckpoint {
                        net: net.clone(),
                        adam: adam.clone(),
                        epoch: epoch as u64,
                        best_val: sched.best(),
                        lr,
                    };
                    save_checkpoint(path, &diag)?;
                }
                return Err(Error::NonFiniteLoss { epoch, step: steps });
            }
            tape.backward(l)?;
            let grads: Vec<Tensor<f32>> = p
                .iter()
                .map(|&v| {
                    tape.take_grad(v)
                        .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
                })
                .collect();
            adam_step(&mut net.params, &grads, &mut adam, lr)?;
            steps += 1;
            step_losses.push(loss);
            sum += loss * chunk.len() as f64;
            n += chunk.len();
            if opts.stop_below.is_some_and(|t| loss < t)
                || opts.max_steps.is_some_and(|m| steps >= m)
            {
                stop = true;
                break;
            }
        }
        let val = evaluate_loss(&net, val_set, tcfg.batch)?;
        if !val.is_finite() {
            if let Some(path) = &opts.diagnostic_path {
                let diag = ModelCheckpoint {
                    net: net.clone(),
                    adam: adam.clone(),
                    epoch: epoch as u64,
                    best_val: sched.best(),
                    lr,
                };
                save_checkpoint(path, &diag)?;
            }
            return Err(Error::NonFiniteLoss { epoch, step: steps });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: sum / n.max(1) as f64,
            val_loss: val,
            lr,
        });
        log::info!("epoch {epoch}: train {:.6} val {val:.6} lr {lr}", sum / n.max(1) as f64);
        if sched.observe(val) {
            best = Some(ModelCheckpoint {
                net: net.clone(),
                adam: adam.clone(),
                epoch: epoch as u64,
                best_val: val,
                lr: sched.lr(),
            });
        }
        if stop {
            break 'epochs;
        }
    }
    let last = ModelCheckpoint {
        net,
        adam,
        epoch: history.last().map_or(start_epoch, |r| r.epoch as u64),
        best_val: sched.best(),
        lr: sched.lr(),
    };
    Ok(TrainOutcome {
        best: best.unwrap_or_else(|| last.clone()),
        last,
        history,
        step_losses,
    })
}

/// Load the train and validation splits of a manifest and train.
pub fn train_from_manifest(
    manifest_path: &Path,
    init: ModelCheckpoint,
    tcfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let m = Manifest::load(manifest_path)?;
    let tr = load_pairs(&m, Split::Train)?;
    let va = load_pairs(&m, Split::Val)?;
    train(init, &tr, &va, tcfg, opts)
}
