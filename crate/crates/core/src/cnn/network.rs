//! Fully convolutional encoder-decoder with three short connections.
//!
//! Main path: c1 c2 | pool | c3 c4 | pool | c5 c6, then three fusion
//! stages that each concatenate a short connection, reduce the depth with a
//! 1x1 convolution and refine with a 3x3 unit, upsampling between stages.
//! The output unit maps to RGB through a sigmoid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NetConfig;
use crate::error::{Error, Result};
use crate::nn::{
    activation, concat_channels, conv2d, pool2, upsample2, Activation, BatchNormState, BnMode,
    PoolKind, Scalar, Tape, Tensor, Var,
};

/// What follows a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Post {
    BnLeaky,
    BnTanh,
    /// Plain linear map.
    None,
    Sigmoid,
}

impl Post {
    fn has_bn(self) -> bool {
        matches!(self, Post::BnLeaky | Post::BnTanh)
    }
}

/// One convolution unit in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: &'static str,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub post: Post,
}

/// A short connection from an encoder tap into a decoder stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkipSpec {
    pub name: &'static str,
    /// Encoder unit whose output is tapped.
    pub tap: &'static str,
    pub avg_pool: bool,
    /// Unit applied to the (pooled) tap.
    pub conv: &'static str,
    /// 1x1 unit reducing the concatenation back to the base width.
    pub fuse: &'static str,
    /// 3x3 unit after the fusion.
    pub refine: &'static str,
}

/// Fusion stages, deepest first; stages after the first upsample the main
/// path before concatenating.
pub const SKIPS: [SkipSpec; 3] = [
    SkipSpec { name: "s3", tap: "c4", avg_pool: true, conv: "s3", fuse: "f3", refine: "d0" },
    SkipSpec { name: "s2", tap: "c2", avg_pool: true, conv: "s2", fuse: "f2", refine: "d1" },
    SkipSpec { name: "s1", tap: "c1", avg_pool: false, conv: "s1", fuse: "f1", refine: "d2" },
];

pub fn layer_specs(cfg: &NetConfig) -> Vec<LayerSpec> {
    let w = cfg.base_width;
    let unit = |name, in_ch, out_ch, kernel, post| LayerSpec { name, in_ch, out_ch, kernel, post };
    vec![
        unit("c1", cfg.input_channels, w, 3, Post::BnLeaky),
        unit("c2", w, w, 3, Post::BnLeaky),
        unit("c3", w, w, 3, Post::BnLeaky),
        unit("c4", w, w, 3, Post::BnLeaky),
        unit("c5", w, w, 3, Post::BnLeaky),
        unit("c6", w, w, 3, Post::BnLeaky),
        unit("s3", w, w, 3, Post::BnTanh),
        unit("f3", 2 * w, w, 1, Post::None),
        unit("d0", w, w, 3, Post::BnLeaky),
        unit("s2", w, w, 3, Post::BnTanh),
        unit("f2", 2 * w, w, 1, Post::None),
        unit("d1", w, w, 3, Post::BnLeaky),
        unit("s1", w, w, 3, Post::BnTanh),
        unit("f1", 2 * w, w, 1, Post::None),
        unit("d2", w, w, 3, Post::BnLeaky),
        unit("out", w, cfg.output_channels, 3, Post::Sigmoid),
    ]
}

/// Closed-form parameter count of the architecture.
pub fn param_count(cfg: &NetConfig) -> usize {
    layer_specs(cfg)
        .iter()
        .map(|l| {
            let conv = l.out_ch * l.in_ch * l.kernel * l.kernel + l.out_ch;
            conv + if l.post.has_bn() { 2 * l.out_ch } else { 0 }
        })
        .sum()
}

/// Where each unit's tensors live in the flat parameter list.
#[derive(Debug, Clone, Copy)]
struct Slots {
    weight: usize,
    bias: usize,
    /// Index of gamma (beta follows) and of the running statistics.
    bn: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    cfg: NetConfig,
    specs: Vec<LayerSpec>,
    slots: Vec<Slots>,
    /// Learnable tensors: per unit weight, bias, then gamma and beta when
    /// the unit has batch normalization.
    pub params: Vec<Tensor<T>>,
    pub bn: Vec<BatchNormState<T>>,
}

impl<T: Scalar> Network<T> {
    /// Build with weights and biases drawn from `U(-init_scale, init_scale)`;
    /// batch-norm scales start at 1 and shifts at 0.
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let specs = layer_specs(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut bn = Vec::new();
        let mut slots = Vec::new();
        for l in &specs {
            let weight = params.len();
            params.push(Tensor::uniform(
                [l.out_ch, l.in_ch, l.kernel, l.kernel],
                cfg.init_scale,
                &mut rng,
            ));
            params.push(Tensor::uniform([1, l.out_ch, 1, 1], cfg.init_scale, &mut rng));
            let bn_slot = l.post.has_bn().then(|| {
                let g = params.len();
                params.push(Tensor::full([1, l.out_ch, 1, 1], T::one()));
                params.push(Tensor::zeros([1, l.out_ch, 1, 1]));
                bn.push(BatchNormState::new(l.out_ch, cfg.bn_momentum, cfg.bn_eps));
                (g, bn.len() - 1)
            });
            slots.push(Slots {
                weight,
                bias: weight + 1,
                bn: bn_slot,
            });
        }
        Ok(Network {
            cfg,
            specs,
            slots,
            params,
            bn,
        })
    }

    /// Reassemble a network from stored tensors, checking every shape.
    pub fn from_parts(
        cfg: NetConfig,
        params: Vec<Tensor<T>>,
        bn: Vec<BatchNormState<T>>,
    ) -> Result<Self> {
        let mut net = Network::new(cfg, 0)?;
        if params.len() != net.params.len() || bn.len() != net.bn.len() {
            return Err(Error::Malformed(format!(
                "expected {} parameter tensors and {} batch-norm layers, got {} and {}",
                net.params.len(),
                net.bn.len(),
                params.len(),
                bn.len()
            )));
        }
        for (i, (a, b)) in net.params.iter().zip(&params).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::Malformed(format!(
                    "parameter {i}: expected shape {:?}, got {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        for (a, b) in net.bn.iter().zip(&bn) {
            if a.channels() != b.channels() || b.running_var.len() != b.channels() {
                return Err(Error::Malformed("batch-norm statistics size".into()));
            }
        }
        net.params = params;
        net.bn = bn;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn skips(&self) -> &'static [SkipSpec] {
        &SKIPS
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.numel()).sum()
    }

    fn index_of(&self, name: &str) -> usize {
        self.specs
            .iter()
            .position(|l| l.name == name)
            .expect("unit names are fixed")
    }

    /// Record every parameter on `tape`: as leaves when gradients are
    /// wanted, otherwise as constants.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.leaf(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect()
    }

    fn unit(
        &mut self,
        tape: &mut Tape<T>,
        p: &[Var],
        name: &str,
        x: Var,
        mode: BnMode,
    ) -> Result<Var> {
        let i = self.index_of(name);
        let (s, post) = (self.slots[i], self.specs[i].post);
        let mut y = conv2d(tape, x, p[s.weight], p[s.bias])?;
        if let Some((g, b)) = s.bn {
            y = self.bn[b].forward(tape, y, p[g], p[g + 1], mode)?;
        }
        Ok(match post {
            Post::BnLeaky => activation(tape, y, Activation::LeakyRelu(self.cfg.leaky_alpha)),
            Post::BnTanh => activation(tape, y, Activation::Tanh),
            Post::Sigmoid => activation(tape, y, Activation::Sigmoid),
            Post::None => y,
        })
    }

    /// Forward pass with parameters already bound to `p` (see [`bind`](Self::bind)).
    /// Input height and width must be multiples of 4.
    pub fn forward_bound(
        &mut self,
        tape: &mut Tape<T>,
        x: Var,
        p: &[Var],
        mode: BnMode,
    ) -> Result<Var> {
        let [_, c, h, w] = tape.value(x).shape();
        if c != self.cfg.input_channels {
            return Err(Error::shape(format!(
                "network expects {} input channels, got {c}",
                self.cfg.input_channels
            )));
        }
        if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!(
                "network input must be a positive multiple of 4 in both dims, got {h}x{w}"
            )));
        }
        let t1 = self.unit(tape, p, "c1", x, mode)?;
        let t2 = self.unit(tape, p, "c2", t1, mode)?;
        let y = pool2(tape, t2, PoolKind::Max)?;
        let t3 = self.unit(tape, p, "c3", y, mode)?;
        let t4 = self.unit(tape, p, "c4", t3, mode)?;
        let y = pool2(tape, t4, PoolKind::Max)?;
        let t5 = self.unit(tape, p, "c5", y, mode)?;
        let mut main = self.unit(tape, p, "c6", t5, mode)?;
        let taps = [("c1", t1), ("c2", t2), ("c4", t4)];

        for (stage, skip) in SKIPS.iter().enumerate() {
            if stage > 0 {
                main = upsample2(tape, main);
            }
            let mut s = taps.iter().find(|t| t.0 == skip.tap).expect("tap exists").1;
            if skip.avg_pool {
                s = pool2(tape, s, PoolKind::Avg)?;
            }
            let s = self.unit(tape, p, skip.conv, s, mode)?;
            let cat = concat_channels(tape, main, s)?;
            let fused = self.unit(tape, p, skip.fuse, cat, mode)?;
            main = self.unit(tape, p, skip.refine, fused, mode)?;
        }
        self.unit(tape, p, "out", main, mode)
    }

    /// Convenience forward: binds parameters and the input, returns the
    /// output variable and the parameter bindings.
    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        input: Tensor<T>,
        mode: BnMode,
        trainable: bool,
    ) -> Result<(Var, Vec<Var>)> {
        let p = self.bind(tape, trainable);
        let x = tape.constant(input);
        let y = self.forward_bound(tape, x, &p, mode)?;
        Ok((y, p))
    }

    /// Eval-mode output for `input`, without recording gradients.
    pub fn predict(&self, input: Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let mut net = self.clone();
        let (y, _) = net.forward(&mut tape, input, BnMode::Eval, false)?;
        Ok(tape.value(y).clone())
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            cfg: self.cfg.clone(),
            specs: self.specs.clone(),
            slots: self.slots.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            bn: self
                .bn
                .iter()
                .map(|b| BatchNormState {
                    running_mean: b.running_mean.iter().map(|v| U::lit(v.as_f64())).collect(),
                    running_var: b.running_var.iter().map(|v| U::lit(v.as_f64())).collect(),
                    momentum: b.momentum,
                    eps: b.eps,
                    updates: b.updates,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_closed_form() {
        // 11 hidden 3x3 units: 64*64*9 + 64 = 36,928 each; first unit 1*64*9 + 64;
        // output unit 64*3*9 + 3; three 1x1 fusions 128*64 + 64; 12 BN pairs.
        let expect = 11 * 36_928 + 640 + 1_731 + 3 * 8_256 + 12 * 128;
        assert_eq!(expect, 434_883);
        assert_eq!(param_count(&NetConfig::default()), expect);
        let net = Network::<f32>::new(NetConfig::default(), 0).unwrap();
        assert_eq!(net.param_count(), expect);
        let reported = 438_000.0;
        assert!((expect as f64 - reported).abs() / reported < 0.01);
    }

    #[test]
    fn skip_structure() {
        let net = Network::<f32>::new(NetConfig::with_width(4), 0).unwrap();
        let skips = net.skips();
        assert_eq!(skips.len(), 3);
        assert_eq!(skips.iter().filter(|s| s.avg_pool).count(), 2);
        for s in skips {
            let l = net.specs().iter().find(|l| l.name == s.conv).unwrap();
            assert_eq!(l.post, Post::BnTanh);
            assert_eq!(l.kernel, 3);
            let f = net.specs().iter().find(|l| l.name == s.fuse).unwrap();
            assert_eq!((f.kernel, f.in_ch, f.out_ch, f.post), (1, 8, 4, Post::None));
        }
        let bn_units = net.specs().iter().filter(|l| l.post.has_bn()).count();
        assert_eq!(bn_units, 12);
        assert_eq!(net.bn.len(), 12);
    }

    #[test]
    fn forward_shape_and_range() {
        let net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
        let x = Tensor::from_fn([1, 1, 64, 64], |i| ((i * 37) % 101) as f32 / 101.0);
        let y = net.predict(x).unwrap();
        assert_eq!(y.shape(), [1, 3, 64, 64]);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn seeded_builds_are_identical() {
        let a = Network::<f32>::new(NetConfig::with_width(8), 42).unwrap();
        let b = Network::<f32>::new(NetConfig::with_width(8), 42).unwrap();
        let c = Network::<f32>::new(NetConfig::with_width(8), 43).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
        for p in &a.params {
            assert!(p.data().iter().all(|v| v.abs() <= 0.05 || *v == 1.0));
        }
    }

    #[test]
    fn input_dims_must_be_multiples_of_four() {
        let net = Network::<f32>::new(NetConfig::with_width(4), 0).unwrap();
        assert!(net.predict(Tensor::zeros([1, 1, 6, 8])).is_err());
        assert!(net.predict(Tensor::zeros([1, 2, 8, 8])).is_err());
        assert!(net.predict(Tensor::zeros([1, 1, 8, 12])).is_ok());
    }
}
