//! Hot kernels on the default rayon pool against a single worker.
//! Build with `--no-default-features` for the plain sequential loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deepcam::cfa::CfaPattern;
use deepcam::classical::{demosaic_malvar, wiener_denoise};
use deepcam::cnn::{composite_loss, NetConfig, Network};
use deepcam::nn::{conv2d, sum, BnMode, Tape, Tensor};
use deepcam::par;
use deepcam::rawsim::{simulate_raw, SimMeta};
use deepcam::synth::smooth_scene;

fn modes() -> [(&'static str, usize); 2] {
    [("default_pool", 0), ("one_thread", 1)]
}

/// Run `f` on the global pool (`threads == 0`) or a pool of `threads`.
fn run<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        f()
    } else {
        par::with_threads(threads, f)
    }
}

fn conv(c: &mut Criterion) {
    let x = Tensor::<f32>::from_fn([8, 16, 64, 64], |i| (i % 17) as f32 / 17.0);
    let w = Tensor::<f32>::from_fn([16, 16, 3, 3], |i| ((i % 7) as f32 - 3.0) / 50.0);
    let b = Tensor::<f32>::zeros([1, 16, 1, 1]);
    let mut g = c.benchmark_group("conv3x3_fwd_bwd_8x16x64x64");
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                run(threads, || {
                    let mut t = Tape::new();
                    let (xv, wv, bv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(b.clone()));
                    let y = conv2d(&mut t, xv, wv, bv).unwrap();
                    let l = sum(&mut t, y);
                    t.backward(l).unwrap();
                    t.take_grad(wv)
                })
            })
        });
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
    let x = Tensor::<f32>::from_fn([4, 1, 64, 64], |i| (i % 13) as f32 / 13.0);
    let y = Tensor::<f32>::from_fn([4, 3, 64, 64], |i| (i % 11) as f32 / 11.0);
    let mut g = c.benchmark_group("desk_network_loss_backward_4x64x64");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                run(threads, || {
                    let mut n = net.clone();
                    let mut t = Tape::new();
                    let (out, _) = n.forward(&mut t, x.clone(), BnMode::Train, true).unwrap();
                    let l = composite_loss(&mut t, out, &y, n.config()).unwrap();
                    t.backward(l).unwrap();
                })
            })
        });
    }
    g.finish();
}

fn classical(c: &mut Criterion) {
    let scene = smooth_scene(256, 256, 1);
    let (raw, _) = simulate_raw(&scene, &SimMeta::default(), &CfaPattern::bayer_rggb()).unwrap();
    let mut g = c.benchmark_group("wiener_malvar_256");
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                run(threads, || {
                    let d = wiener_denoise(&raw, 5, None).unwrap();
                    demosaic_malvar(&d).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, conv, train_step, classical);
criterion_main!(benches);
