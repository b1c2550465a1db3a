use super::NetConfig;
use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::nn::{Op, Scalar, Tape, Tensor, Var};

/// Difference-of-Gaussians edge weights: per channel `|G(s1) * t - G(s2) * t|`,
/// then min-max normalized over each image. A flat image gives all zeros.
pub fn dog_weight_map<T: Scalar>(t: &Tensor<T>, s1: f64, s2: f64) -> Tensor<T> {
    let [n, c, h, w] = t.shape();
    let hw = h * w;
    let mut out = Vec::with_capacity(t.numel());
    for b in 0..n {
        let mut img = Vec::with_capacity(c * hw);
        for ch in 0..c {
            let start = (b * c + ch) * hw;
            let plane: Vec<f64> = t.data()[start..start + hw].iter().map(|v| v.as_f64()).collect();
            let g1 = gaussian_blur(&plane, w, h, s1);
            let g2 = gaussian_blur(&plane, w, h, s2);
            img.extend(g1.iter().zip(&g2).map(|(a, b)| (a - b).abs()));
        }
        let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range > 1e-12 {
            out.extend(img.iter().map(|v| T::lit((v - lo) / range)));
        } else {
            out.extend(std::iter::repeat_n(T::zero(), img.len()));
        }
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

struct CompositeLoss<T> {
    /// d loss / d pred, precomputed in the forward pass.
    dpred: Tensor<T>,
}

impl<T: Scalar> Op<T> for CompositeLoss<T> {
    fn name(&self) -> &'static str {
        "composite_loss"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let s = g.data()[0];
        vec![Some(self.dpred.map(|v| v * s))]
    }
}

/// `alpha * mean((p - t)^2) + (1 - alpha) * mean(W * |p - t|)` where `W` is
/// the DOG map of the target (or of the prediction when configured), held
/// constant. The subgradient of `|.|` at zero is zero.
pub fn composite_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Var,
    target: &Tensor<T>,
    cfg: &NetConfig,
) -> Result<Var> {
    let p = tape.value(pred);
    if p.shape() != target.shape() {
        return Err(Error::shape(format!(
            "loss: prediction {:?} vs target {:?}",
            p.shape(),
            target.shape()
        )));
    }
    let (s1, s2) = cfg.dog_sigmas;
    let weights = if cfg.dog_on_prediction {
        dog_weight_map(p, s1, s2)
    } else {
        dog_weight_map(target, s1, s2)
    };
    let alpha = cfg.alpha_loss;
    let n = p.numel() as f64;
    let (mut sq, mut l1) = (0.0f64, 0.0f64);
    let mut dpred = Vec::with_capacity(p.numel());
    for ((&pv, &tv), &wv) in p.data().iter().zip(target.data()).zip(weights.data()) {
        let d = pv.as_f64() - tv.as_f64();
        let wv = wv.as_f64();
        sq += d * d;
        l1 += wv * d.abs();
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        dpred.push(T::lit((2.0 * alpha * d + (1.0 - alpha) * wv * sign) / n));
    }
    let loss = alpha * sq / n + (1.0 - alpha) * l1 / n;
    let dpred = Tensor::new(p.shape(), dpred)?;
    Ok(tape.push(
        Box::new(CompositeLoss { dpred }),
        &[pred],
        Tensor::scalar(T::lit(loss)),
    ))
}
