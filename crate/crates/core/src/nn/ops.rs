//! Differentiable layer operations recorded on a [`Tape`].

use serde::{Deserialize, Serialize};

use super::{matmul, Op, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::par;

// ---------------------------------------------------------------- conv2d

/// Unfold a `(c, h, w)` image into `(c * k * k, h * w)` patch columns with
/// zero padding `k / 2`.
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let r = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - r;
                let dx = kx as isize - r;
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    dst[..x0.min(w)].fill(T::zero());
                    if x1 > x0 {
                        let s0 = (x0 as isize + dx) as usize;
                        dst[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                    }
                    dst[x1.max(x0)..].fill(T::zero());
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch columns back into the image.
fn col2im_add<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, x: &mut [T]) {
    let r = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - r;
                let dx = kx as isize - r;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    for xx in x0..x1 {
                        let d = &mut dst[(xx as isize + dx) as usize];
                        *d = *d + src[xx];
                    }
                }
            }
        }
    }
}

struct Conv2d {
    k: usize,
}

impl Conv2d {
    fn dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> (usize, usize, usize, usize, usize, usize) {
        let [n, ic, h, wd] = x.shape();
        (n, ic, h, wd, w.shape()[0], w.shape()[2])
    }
}

impl<T: Scalar> Op<T> for Conv2d {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (n, ic, h, wd, oc, k) = Self::dims(x, w);
        debug_assert_eq!(k, self.k);
        let hw = h * wd;
        let ickk = ic * k * k;
        let gd = g.data();

        let dx = needs[0].then(|| {
            let mut dx = Tensor::zeros(x.shape());
            par::for_each_chunk_mut(dx.data_mut(), ic * hw, |b, dxb| {
                let gb = &gd[b * oc * hw..(b + 1) * oc * hw];
                if k == 1 {
                    matmul(ic, oc, hw, w.data(), true, gb, false, dxb, false);
                } else {
                    let mut dcol = vec![T::zero(); ickk * hw];
                    matmul(ickk, oc, hw, w.data(), true, gb, false, &mut dcol, false);
                    col2im_add(&dcol, ic, h, wd, k, dxb);
                }
            });
            dx
        });

        let dw = needs[1].then(|| {
            let partials = par::map_range(0..n, |b| {
                let gb = &gd[b * oc * hw..(b + 1) * oc * hw];
                let xb = &x.data()[b * ic * hw..(b + 1) * ic * hw];
                let mut p = vec![T::zero(); oc * ickk];
                if k == 1 {
                    matmul(oc, hw, ickk, gb, false, xb, true, &mut p, false);
                } else {
                    let mut col = vec![T::zero(); ickk * hw];
                    im2col(xb, ic, h, wd, k, &mut col);
                    matmul(oc, hw, ickk, gb, false, &col, true, &mut p, false);
                }
                p
            });
            let mut dw = Tensor::zeros(w.shape());
            for p in partials {
                for (a, b) in dw.data_mut().iter_mut().zip(p) {
                    *a = *a + b;
                }
            }
            dw
        });

        let db = needs[2].then(|| {
            let mut db = vec![T::zero(); oc];
            for b in 0..n {
                for (o, acc) in db.iter_mut().enumerate() {
                    let s: T = gd[(b * oc + o) * hw..(b * oc + o + 1) * hw].iter().copied().sum();
                    *acc = *acc + s;
                }
            }
            Tensor::vector(db)
        });
        vec![dx, dw, db]
    }
}

/// Stride-1 cross-correlation with zero "same" padding.
///
/// `w` is `(out, in, k, k)` with `k` in {1, 3}; `b` holds `out` biases.
pub fn conv2d<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let (xv, wv, bv) = (tape.value(x), tape.value(w), tape.value(b));
    let [n, ic, h, wd] = xv.shape();
    let [oc, wic, kh, kw] = wv.shape();
    if kh != kw || !(kh == 1 || kh == 3) {
        return Err(Error::shape(format!("conv kernel must be 1x1 or 3x3, got {kh}x{kw}")));
    }
    if wic != ic {
        return Err(Error::shape(format!(
            "conv expects {wic} input channels, got {ic}"
        )));
    }
    if bv.numel() != oc {
        return Err(Error::shape(format!("conv bias needs {oc} values, got {}", bv.numel())));
    }
    let k = kh;
    let hw = h * wd;
    let ickk = ic * k * k;
    let (xd, wdat, bd) = (xv.data(), wv.data(), bv.data());
    let mut out = Tensor::zeros([n, oc, h, wd]);
    par::for_each_chunk_mut(out.data_mut(), oc * hw, |bi, o| {
        let xb = &xd[bi * ic * hw..(bi + 1) * ic * hw];
        if k == 1 {
            matmul(oc, ic, hw, wdat, false, xb, false, o, false);
        } else {
            let mut col = vec![T::zero(); ickk * hw];
            im2col(xb, ic, h, wd, k, &mut col);
            matmul(oc, ickk, hw, wdat, false, &col, false, o, false);
        }
        for (row, &bias) in o.chunks_mut(hw).zip(bd) {
            for v in row {
                *v = *v + bias;
            }
        }
    });
    Ok(tape.push(Box::new(Conv2d { k }), &[x, w, b], out))
}

// ---------------------------------------------------------------- pooling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    Max,
    Avg,
}

struct Pool2 {
    kind: PoolKind,
    /// For max pooling: flat input index of each output's winner.
    argmax: Vec<u32>,
}

impl<T: Scalar> Op<T> for Pool2 {
    fn name(&self) -> &'static str {
        match self.kind {
            PoolKind::Max => "max_pool2",
            PoolKind::Avg => "avg_pool2",
        }
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let x = inputs[0];
        let mut dx = Tensor::zeros(x.shape());
        match self.kind {
            PoolKind::Max => {
                let d = dx.data_mut();
                for (&i, &gv) in self.argmax.iter().zip(g.data()) {
                    d[i as usize] = d[i as usize] + gv;
                }
            }
            PoolKind::Avg => {
                let [_, _, h, w] = x.shape();
                let (oh, ow) = (h / 2, w / 2);
                let q = T::lit(0.25);
                let d = dx.data_mut();
                for (p, &gv) in g.data().iter().enumerate() {
                    let plane = p / (oh * ow);
                    let (oy, ox) = ((p % (oh * ow)) / ow, p % ow);
                    let base = plane * h * w + 2 * oy * w + 2 * ox;
                    for off in [0, 1, w, w + 1] {
                        d[base + off] = gv * q;
                    }
                }
            }
        }
        vec![Some(dx)]
    }
}

/// 2x2 pooling with stride 2. Max ties go to the first position in scan order.
pub fn pool2<T: Scalar>(tape: &mut Tape<T>, x: Var, kind: PoolKind) -> Result<Var> {
    let xv = tape.value(x);
    let [n, c, h, w] = xv.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("pool2 needs even dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut argmax = Vec::new();
    let xd = xv.data();
    match kind {
        PoolKind::Max => {
            argmax.reserve(n * c * oh * ow);
            let o = out.data_mut();
            for plane in 0..n * c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let base = plane * h * w + 2 * oy * w + 2 * ox;
                        let mut best = base;
                        for off in [1, w, w + 1] {
                            if xd[base + off] > xd[best] {
                                best = base + off;
                            }
                        }
                        o[(plane * oh + oy) * ow + ox] = xd[best];
                        argmax.push(best as u32);
                    }
                }
            }
        }
        PoolKind::Avg => {
            let q = T::lit(0.25);
            let o = out.data_mut();
            for plane in 0..n * c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let base = plane * h * w + 2 * oy * w + 2 * ox;
                        let s = xd[base] + xd[base + 1] + xd[base + w] + xd[base + w + 1];
                        o[(plane * oh + oy) * ow + ox] = s * q;
                    }
                }
            }
        }
    }
    Ok(tape.push(Box::new(Pool2 { kind, argmax }), &[x], out))
}

// ---------------------------------------------------------------- upsample

struct Upsample2;

impl<T: Scalar> Op<T> for Upsample2 {
    fn name(&self) -> &'static str {
        "upsample2"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let [n, c, h, w] = inputs[0].shape();
        let gd = g.data();
        let ow = 2 * w;
        let dx = Tensor::from_fn([n, c, h, w], |i| {
            let plane = i / (h * w);
            let (y, x) = ((i % (h * w)) / w, i % w);
            let base = plane * 4 * h * w + 2 * y * ow + 2 * x;
            gd[base] + gd[base + 1] + gd[base + ow] + gd[base + ow + 1]
        });
        vec![Some(dx)]
    }
}

/// Nearest-neighbor x2 upsampling in height and width.
pub fn upsample2<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let xv = tape.value(x);
    let [n, c, h, w] = xv.shape();
    let xd = xv.data();
    let (oh, ow) = (2 * h, 2 * w);
    let out = Tensor::from_fn([n, c, oh, ow], |i| {
        let plane = i / (oh * ow);
        let (y, x) = ((i % (oh * ow)) / ow, i % ow);
        xd[plane * h * w + (y / 2) * w + x / 2]
    });
    tape.push(Box::new(Upsample2), &[x], out)
}

// ---------------------------------------------------------------- activations

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::LeakyRelu(a) => {
                if v >= T::zero() {
                    v
                } else {
                    T::lit(a) * v
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    #[inline]
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::LeakyRelu(a) => {
                if x >= T::zero() {
                    T::one()
                } else {
                    T::lit(a)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

struct ActOp(Activation);

impl<T: Scalar> Op<T> for ActOp {
    fn name(&self) -> &'static str {
        match self.0 {
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        g: &Tensor<T>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let (x, y, gd) = (inputs[0].data(), output.data(), g.data());
        let dx = Tensor::from_fn(g.shape(), |i| gd[i] * self.0.derivative(x[i], y[i]));
        vec![Some(dx)]
    }
}

pub fn activation<T: Scalar>(tape: &mut Tape<T>, x: Var, kind: Activation) -> Var {
    let out = tape.value(x).map(|v| kind.apply(v));
    tape.push(Box::new(ActOp(kind)), &[x], out)
}

// ---------------------------------------------------------------- concat

struct Concat {
    ca: usize,
    cb: usize,
}

impl<T: Scalar> Op<T> for Concat {
    fn name(&self) -> &'static str {
        "concat_channels"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let ga = needs[0].then(|| g.channel_slice(0, self.ca).expect("concat slice"));
        let gb = needs[1].then(|| g.channel_slice(self.ca, self.cb).expect("concat slice"));
        vec![ga, gb]
    }
}

/// Stack `a` and `b` along the channel axis.
pub fn concat_channels<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let (av, bv) = (tape.value(a), tape.value(b));
    let [n, ca, h, w] = av.shape();
    let [nb, cb, hb, wb] = bv.shape();
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::shape(format!(
            "concat needs matching batch and spatial dims, got {:?} and {:?}",
            av.shape(),
            bv.shape()
        )));
    }
    let hw = h * w;
    let mut data = Vec::with_capacity(n * (ca + cb) * hw);
    for i in 0..n {
        data.extend_from_slice(&av.data()[i * ca * hw..(i + 1) * ca * hw]);
        data.extend_from_slice(&bv.data()[i * cb * hw..(i + 1) * cb * hw]);
    }
    let out = Tensor::new([n, ca + cb, h, w], data)?;
    Ok(tape.push(Box::new(Concat { ca, cb }), &[a, b], out))
}

// ---------------------------------------------------------------- reductions

struct WeightedSum<T> {
    weights: Option<Tensor<T>>,
}

impl<T: Scalar> Op<T> for WeightedSum<T> {
    fn name(&self) -> &'static str {
        "weighted_sum"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &Tensor<T>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let s = g.data()[0];
        let dx = match &self.weights {
            Some(w) => w.map(|v| v * s),
            None => Tensor::full(inputs[0].shape(), s),
        };
        vec![Some(dx)]
    }
}

/// Sum of all elements, as a scalar tensor.
pub fn sum<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let s = tape.value(x).sum();
    tape.push(Box::new(WeightedSum { weights: None }), &[x], Tensor::scalar(s))
}

/// `sum(x * w)` for a constant `w` of the same shape.
pub fn weighted_sum<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Tensor<T>) -> Result<Var> {
    let xv = tape.value(x);
    if xv.shape() != w.shape() {
        return Err(Error::shape(format!(
            "weighted_sum shapes {:?} and {:?}",
            xv.shape(),
            w.shape()
        )));
    }
    let s = xv.data().iter().zip(w.data()).map(|(&a, &b)| a * b).sum();
    Ok(tape.push(
        Box::new(WeightedSum { weights: Some(w) }),
        &[x],
        Tensor::scalar(s),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run<T: Scalar>(x: Tensor<T>, f: impl FnOnce(&mut Tape<T>, Var) -> Var) -> Tensor<T> {
        let mut t = Tape::new();
        let v = t.constant(x);
        let y = f(&mut t, v);
        t.value(y).clone()
    }

    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
        let [n, ic, h, wd] = x.shape();
        let [oc, _, k, _] = w.shape();
        let r = (k / 2) as isize;
        let mut out = Tensor::zeros([n, oc, h, wd]);
        let od = out.data_mut();
        for bi in 0..n {
            for o in 0..oc {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut acc = b[o];
                        for c in 0..ic {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let sy = y as isize + ky as isize - r;
                                    let sx = xx as isize + kx as isize - r;
                                    if sy >= 0 && sx >= 0 && sy < h as isize && sx < wd as isize {
                                        acc += w.at(o, c, ky, kx) * x.at(bi, c, sy as usize, sx as usize);
                                    }
                                }
                            }
                        }
                        od[((bi * oc + o) * h + y) * wd + xx] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_1x1_conv() {
        let x = Tensor::<f64>::from_fn([2, 3, 4, 5], |i| (i as f64 * 0.3).sin());
        let w = Tensor::from_fn([3, 3, 1, 1], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let mut t = Tape::new();
        let (xv, wv, bv) = (t.constant(x.clone()), t.constant(w), t.constant(Tensor::vector(vec![0.0; 3])));
        let y = conv2d(&mut t, xv, wv, bv).unwrap();
        assert_eq!(t.value(y), &x);
    }

    #[test]
    fn ones_kernel_on_constant_input() {
        let c = 0.7;
        let mut t = Tape::<f64>::new();
        let x = t.constant(Tensor::full([1, 1, 5, 6], c));
        let w = t.constant(Tensor::full([1, 1, 3, 3], 1.0));
        let b = t.constant(Tensor::vector(vec![0.0]));
        let y = conv2d(&mut t, x, w, b).unwrap();
        let out = t.value(y);
        assert!((out.at(0, 0, 2, 2) - 9.0 * c).abs() < 1e-12);
        assert!((out.at(0, 0, 0, 0) - 4.0 * c).abs() < 1e-12);
        assert!((out.at(0, 0, 4, 5) - 4.0 * c).abs() < 1e-12);
        assert!((out.at(0, 0, 0, 3) - 6.0 * c).abs() < 1e-12);
    }

    #[test]
    fn conv_matches_direct_loops() {
        let x = Tensor::<f64>::from_fn([2, 3, 5, 7], |i| ((i * 31) % 17) as f64 / 17.0 - 0.4);
        for k in [1, 3] {
            let w = Tensor::from_fn([4, 3, k, k], |i| ((i * 13) % 11) as f64 / 11.0 - 0.5);
            let b = vec![0.1, -0.2, 0.3, 0.0];
            let want = naive_conv(&x, &w, &b);
            let mut t = Tape::new();
            let (xv, wv, bv) = (t.constant(x.clone()), t.constant(w), t.constant(Tensor::vector(b)));
            let y = conv2d(&mut t, xv, wv, bv).unwrap();
            for (a, e) in t.value(y).data().iter().zip(want.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let mut t = Tape::<f32>::new();
        let x = t.constant(Tensor::zeros([1, 2, 4, 4]));
        let w = t.constant(Tensor::zeros([3, 1, 3, 3]));
        let b = t.constant(Tensor::zeros([1, 3, 1, 1]));
        assert!(conv2d(&mut t, x, w, b).is_err());
        let w5 = t.constant(Tensor::zeros([3, 2, 5, 5]));
        assert!(conv2d(&mut t, x, w5, b).is_err());
    }

    #[test]
    fn pooling_of_a_known_window() {
        let x = Tensor::<f64>::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(run(x.clone(), |t, v| pool2(t, v, PoolKind::Max).unwrap()).data(), &[4.0]);
        assert_eq!(run(x, |t, v| pool2(t, v, PoolKind::Avg).unwrap()).data(), &[2.5]);
        let c = Tensor::<f64>::full([2, 3, 4, 6], 0.3);
        for k in [PoolKind::Max, PoolKind::Avg] {
            let y = run(c.clone(), |t, v| pool2(t, v, k).unwrap());
            assert_eq!(y.shape(), [2, 3, 2, 3]);
            assert!(y.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        }
        let mut t = Tape::<f64>::new();
        let odd = t.constant(Tensor::zeros([1, 1, 3, 4]));
        assert!(pool2(&mut t, odd, PoolKind::Max).is_err());
    }

    #[test]
    fn max_pool_ties_route_to_first_index() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::full([1, 1, 2, 2], 1.0));
        let p = pool2(&mut t, x, PoolKind::Max).unwrap();
        let s = sum(&mut t, p);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn upsample_replicates_and_avg_pool_inverts() {
        let y = run(Tensor::<f64>::full([1, 1, 1, 1], 0.6), |t, v| upsample2(t, v));
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.6));
        let x = Tensor::<f64>::from_fn([2, 2, 3, 4], |i| i as f64 * 0.1);
        let back = run(x.clone(), |t, v| {
            let u = upsample2(t, v);
            pool2(t, u, PoolKind::Avg).unwrap()
        });
        for (a, b) in back.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn activation_values() {
        let x = Tensor::<f64>::new([1, 1, 1, 3], vec![-1.0, 3.0, 0.0]).unwrap();
        let l = run(x.clone(), |t, v| activation(t, v, Activation::LeakyRelu(0.2)));
        assert_eq!(l.data(), &[-0.2, 3.0, 0.0]);
        let s = run(x.clone(), |t, v| activation(t, v, Activation::Sigmoid));
        assert_eq!(s.data()[2], 0.5);
        let th = run(x, |t, v| activation(t, v, Activation::Tanh));
        assert_eq!(th.data()[2], 0.0);
    }

    #[test]
    fn concat_then_slice_recovers_inputs() {
        let a = Tensor::<f32>::from_fn([2, 64, 2, 2], |i| i as f32);
        let b = Tensor::<f32>::from_fn([2, 64, 2, 2], |i| -(i as f32));
        let mut t = Tape::new();
        let (av, bv) = (t.constant(a.clone()), t.constant(b.clone()));
        let c = concat_channels(&mut t, av, bv).unwrap();
        let cv = t.value(c);
        assert_eq!(cv.shape(), [2, 128, 2, 2]);
        assert_eq!(cv.channel_slice(0, 64).unwrap(), a);
        assert_eq!(cv.channel_slice(64, 64).unwrap(), b);
        let z = t.constant(Tensor::zeros([2, 1, 4, 2]));
        assert!(concat_channels(&mut t, av, z).is_err());
    }
}
