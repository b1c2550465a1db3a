use serde::{Deserialize, Serialize};

use super::{Op, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnMode {
    Train,
    Eval,
}

/// Running statistics and hyperparameters of one batch-normalization layer.
/// The learnable `gamma` and `beta` live with the other network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Weight of the old running value in each update.
    pub momentum: f64,
    pub eps: f64,
    /// Train-mode updates applied so far.
    pub updates: u64,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        BatchNormState {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum,
            eps,
            updates: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Normalize `x` per channel and scale/shift by `gamma`/`beta`.
    /// Train mode uses batch statistics and updates the running ones.
    ///
    /// The running statistics are a debiased exponential average: after `t`
    /// updates they equal `sum_i (1 - m) m^(t - i) b_i / (1 - m^t)`, so the
    /// initial values carry no weight once a batch has been seen.
    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode,
    ) -> Result<Var> {
        match mode {
            BnMode::Train => {
                let (y, mean, var) = batch_norm_train(tape, x, gamma, beta, self.eps)?;
                let m = tape.value(x);
                let count = (m.batch() * m.height() * m.width()) as f64;
                let unbiased = count / (count - 1.0);
                self.updates += 1;
                let w = debiased_weight(self.momentum, self.updates);
                for c in 0..self.channels() {
                    let rm = self.running_mean[c].as_f64();
                    let rv = self.running_var[c].as_f64();
                    self.running_mean[c] = T::lit(rm + w * (mean[c] - rm));
                    self.running_var[c] = T::lit(rv + w * (var[c] * unbiased - rv));
                }
                Ok(y)
            }
            BnMode::Eval => batch_norm_eval(
                tape,
                x,
                gamma,
                beta,
                &self.running_mean,
                &self.running_var,
                self.eps,
            ),
        }
    }
}

/// Weight of the newest batch in the `t`-th debiased update,
/// `(1 - m) / (1 - m^t)`; 1 for the first update.
fn debiased_weight(momentum: f64, t: u64) -> f64 {
    let decay = momentum.powf(t as f64);
    if decay >= 1.0 {
        1.0
    } else {
        (1.0 - momentum) / (1.0 - decay)
    }
}

struct BnTrain<T> {
    xhat: Vec<T>,
    inv_std: Vec<f64>,
}

fn check_affine<T: Scalar>(tape: &Tape<T>, x: Var, gamma: Var, beta: Var) -> Result<usize> {
    let c = tape.value(x).channels();
    if tape.value(gamma).numel() != c || tape.value(beta).numel() != c {
        return Err(Error::shape(format!(
            "batch norm over {c} channels needs {c} gamma and beta values"
        )));
    }
    Ok(c)
}

/// Per-channel sums of `g` and `g * xhat` over batch and space.
fn channel_sums<T: Scalar>(g: &[T], xhat: &[T], shape: [usize; 4]) -> (Vec<f64>, Vec<f64>) {
    let [n, c, h, w] = shape;
    let hw = h * w;
    let mut sg = vec![0.0; c];
    let mut sgx = vec![0.0; c];
    for b in 0..n {
        for ch in 0..c {
            let r = (b * c + ch) * hw..(b * c + ch + 1) * hw;
            for (&gv, &xv) in g[r.clone()].iter().zip(&xhat[r]) {
                sg[ch] += gv.as_f64();
                sgx[ch] += (gv * xv).as_f64();
            }
        }
    }
    (sg, sgx)
}

impl<T: Scalar> Op<T> for BnTrain<T> {
    fn name(&self) -> &'static str {
        "batch_norm_train"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let shape = inputs[0].shape();
        let [n, c, h, w] = shape;
        let hw = h * w;
        let m = (n * hw) as f64;
        let gamma = inputs[1].data();
        let gd = g.data();
        let (sg, sgx) = channel_sums(gd, &self.xhat, shape);

        // dx = gamma * inv_std / M * (M g - sum(g) - xhat * sum(g xhat))
        let dx = needs[0].then(|| {
            let mut dx = Tensor::zeros(shape);
            let d = dx.data_mut();
            for b in 0..n {
                for ch in 0..c {
                    let k = gamma[ch].as_f64() * self.inv_std[ch] / m;
                    let r = (b * c + ch) * hw..(b * c + ch + 1) * hw;
                    for i in r {
                        let v = m * gd[i].as_f64() - sg[ch] - self.xhat[i].as_f64() * sgx[ch];
                        d[i] = T::lit(k * v);
                    }
                }
            }
            dx
        });
        let dgamma = needs[1].then(|| Tensor::vector(sgx.iter().map(|&v| T::lit(v)).collect()));
        let dbeta = needs[2].then(|| Tensor::vector(sg.iter().map(|&v| T::lit(v)).collect()));
        vec![dx, dgamma, dbeta]
    }
}

/// Batch normalization with batch statistics. Returns the output with the
/// per-channel batch mean and biased variance.
pub fn batch_norm_train<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    gamma: Var,
    beta: Var,
    eps: f64,
) -> Result<(Var, Vec<f64>, Vec<f64>)> {
    let c = check_affine(tape, x, gamma, beta)?;
    let xv = tape.value(x);
    let [n, _, h, w] = xv.shape();
    let hw = h * w;
    let count = n * hw;
    if count < 2 {
        return Err(Error::shape(format!(
            "batch norm in training mode needs at least 2 values per channel, got {count}"
        )));
    }
    let xd = xv.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for b in 0..n {
        for ch in 0..c {
            mean[ch] += xd[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                .iter()
                .map(|v| v.as_f64())
                .sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    for b in 0..n {
        for ch in 0..c {
            var[ch] += xd[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                .iter()
                .map(|v| (v.as_f64() - mean[ch]).powi(2))
                .sum::<f64>();
        }
    }
    for v in &mut var {
        *v /= count as f64;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let (gd, bd) = (tape.value(gamma).data(), tape.value(beta).data());
    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = Tensor::zeros(xv.shape());
    let od = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            let (mu, is) = (mean[ch], inv_std[ch]);
            let (ga, be) = (gd[ch].as_f64(), bd[ch].as_f64());
            for i in (b * c + ch) * hw..(b * c + ch + 1) * hw {
                let xh = (xd[i].as_f64() - mu) * is;
                xhat[i] = T::lit(xh);
                od[i] = T::lit(ga * xh + be);
            }
        }
    }
    let y = tape.push(Box::new(BnTrain { xhat, inv_std }), &[x, gamma, beta], out);
    Ok((y, mean, var))
}

struct BnEval<T> {
    xhat: Vec<T>,
    inv_std: Vec<f64>,
}

impl<T: Scalar> Op<T> for BnEval<T> {
    fn name(&self) -> &'static str {
        "batch_norm_eval"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let shape = inputs[0].shape();
        let [_, c, h, w] = shape;
        let hw = h * w;
        let gamma = inputs[1].data();
        let gd = g.data();
        let dx = needs[0].then(|| {
            Tensor::from_fn(shape, |i| {
                let ch = (i / hw) % c;
                T::lit(gd[i].as_f64() * gamma[ch].as_f64() * self.inv_std[ch])
            })
        });
        let (sg, sgx) = channel_sums(gd, &self.xhat, shape);
        let dgamma = needs[1].then(|| Tensor::vector(sgx.iter().map(|&v| T::lit(v)).collect()));
        let dbeta = needs[2].then(|| Tensor::vector(sg.iter().map(|&v| T::lit(v)).collect()));
        vec![dx, dgamma, dbeta]
    }
}

/// Batch normalization with fixed running statistics.
pub fn batch_norm_eval<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    gamma: Var,
    beta: Var,
    running_mean: &[T],
    running_var: &[T],
    eps: f64,
) -> Result<Var> {
    let c = check_affine(tape, x, gamma, beta)?;
    if running_mean.len() != c || running_var.len() != c {
        return Err(Error::shape(format!(
            "batch norm running statistics cover {} channels, input has {c}",
            running_mean.len()
        )));
    }
    let xv = tape.value(x);
    let hw = xv.height() * xv.width();
    let inv_std: Vec<f64> = running_var
        .iter()
        .map(|v| 1.0 / (v.as_f64() + eps).sqrt())
        .collect();
    let (gd, bd) = (tape.value(gamma).data(), tape.value(beta).data());
    let xd = xv.data();
    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = Tensor::zeros(xv.shape());
    for (i, (o, xh)) in out.data_mut().iter_mut().zip(&mut xhat).enumerate() {
        let ch = (i / hw) % c;
        let v = (xd[i].as_f64() - running_mean[ch].as_f64()) * inv_std[ch];
        *xh = T::lit(v);
        *o = T::lit(gd[ch].as_f64() * v + bd[ch].as_f64());
    }
    Ok(tape.push(Box::new(BnEval { xhat, inv_std }), &[x, gamma, beta], out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(x: Tensor<f64>) -> (Tape<f64>, Var, Var, Var) {
        let c = x.channels();
        let mut t = Tape::new();
        let xv = t.constant(x);
        let g = t.constant(Tensor::vector(vec![1.0; c]));
        let b = t.constant(Tensor::vector(vec![0.0; c]));
        (t, xv, g, b)
    }

    #[test]
    fn standardized_input_passes_through() {
        // Values +-1 with equal counts: zero mean, unit biased variance.
        let x = Tensor::from_fn([2, 1, 2, 2], |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        let (mut t, xv, g, b) = setup(x.clone());
        let (y, mean, var) = batch_norm_train(&mut t, xv, g, b, 1e-3).unwrap();
        assert_eq!(mean, vec![0.0]);
        assert_eq!(var, vec![1.0]);
        let scale = 1.0 / (1.0f64 + 1e-3).sqrt();
        for (a, e) in t.value(y).data().iter().zip(x.data()) {
            assert!((a - e * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let x = Tensor::full([3, 2, 2, 2], 4.2);
        let mut t = Tape::new();
        let xv = t.constant(x);
        let g = t.constant(Tensor::vector(vec![2.0, 3.0]));
        let b = t.constant(Tensor::vector(vec![0.25, -0.5]));
        let (y, _, _) = batch_norm_train(&mut t, xv, g, b, 1e-3).unwrap();
        let out = t.value(y);
        for ch in 0..2 {
            let want: f64 = [0.25, -0.5][ch];
            assert!((out.at(1, ch, 1, 1) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_population_is_an_error() {
        let (mut t, xv, g, b) = setup(Tensor::full([1, 1, 1, 1], 0.3));
        assert!(batch_norm_train(&mut t, xv, g, b, 1e-3).is_err());
        let mut st = BatchNormState::<f64>::new(1, 0.99, 1e-3);
        assert!(st.forward(&mut t, xv, g, b, BnMode::Train).is_err());
        assert!(st.forward(&mut t, xv, g, b, BnMode::Eval).is_ok());
    }

    #[test]
    fn running_statistics_follow_momentum() {
        // Channel values {1, 3}: mean 2, biased variance 1, unbiased 2.
        let x = Tensor::from_fn([1, 1, 1, 2], |i| [1.0, 3.0][i]);
        let (mut t, xv, g, b) = setup(x);
        let mut st = BatchNormState::<f64>::new(1, 0.99, 1e-3);
        st.forward(&mut t, xv, g, b, BnMode::Train).unwrap();
        // The first update replaces the initial values.
        assert_eq!(st.running_mean[0], 2.0);
        assert_eq!(st.running_var[0], 2.0);

        // Second batch {5, 7}: mean 6, unbiased variance 2. Raw averages
        // are 0.99*0.01*2 + 0.01*6 and 0.99*0.01*2 + 0.01*2, over 1 - 0.99^2.
        let x = Tensor::from_fn([1, 1, 1, 2], |i| [5.0, 7.0][i]);
        let (mut t, xv, g, b) = setup(x);
        st.forward(&mut t, xv, g, b, BnMode::Train).unwrap();
        let z = 1.0 - 0.99f64 * 0.99;
        assert!((st.running_mean[0] - (0.0198 + 0.06) / z).abs() < 1e-12);
        assert!((st.running_var[0] - (0.0198 + 0.02) / z).abs() < 1e-12);
        assert_eq!(st.updates, 2);
    }

    #[test]
    fn debiased_average_matches_direct_sum() {
        let m = 0.9;
        let batches = [0.3, -1.2, 2.5, 0.7, 0.1];
        let mut r = 1.0;
        for (k, &b) in batches.iter().enumerate() {
            r += debiased_weight(m, k as u64 + 1) * (b - r);
            let t = k as i32 + 1;
            let num: f64 = (0..=k).map(|i| (1.0 - m) * m.powi(t - 1 - i as i32) * batches[i]).sum();
            assert!((r - num / (1.0 - m.powi(t))).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_mode_uses_running_statistics() {
        let x = Tensor::from_fn([1, 1, 1, 2], |i| [1.0, 3.0][i]);
        let (mut t, xv, g, b) = setup(x);
        let mut st = BatchNormState::<f64>::new(1, 0.99, 0.0);
        st.running_mean = vec![1.0];
        st.running_var = vec![4.0];
        let y = st.forward(&mut t, xv, g, b, BnMode::Eval).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 1.0]);
        assert_eq!(st.running_mean, vec![1.0]);
    }
}
