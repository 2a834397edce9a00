use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stvq_core::eval::svr::{train, SvrParams};
use stvq_core::metrics::{ms_ssim_plane, ssim_plane};
use stvq_core::synth::{synthetic_clip, SceneParams};
use stvq_core::video::{resize_lanczos, temporal_downsample, temporal_upsample_lfi, ResampleSpec};

fn scene(w: usize, h: usize, frames: usize) -> stvq_core::video::Clip {
    let p = SceneParams {
        motion: (2.0, 1.0),
        ..SceneParams::default()
    };
    synthetic_clip(w, h, frames, 60.0, &p).unwrap()
}

fn resample(c: &mut Criterion) {
    let clip = scene(960, 540, 2);
    let down = ResampleSpec::new(320, 180);
    let up = ResampleSpec::new(1920, 1080);
    c.bench_function("lanczos 540p -> 180p, 2 frames", |b| b.iter(|| resize_lanczos(black_box(&clip), &down).unwrap()));
    c.bench_function("lanczos 540p -> 1080p, 2 frames", |b| b.iter(|| resize_lanczos(black_box(&clip), &up).unwrap()));
}

fn temporal(c: &mut Criterion) {
    let half = temporal_downsample(&scene(480, 270, 16)).unwrap();
    c.bench_function("lfi 30 -> 60 fps, 270p x 8", |b| b.iter(|| temporal_upsample_lfi(black_box(&half), 60.0).unwrap()));
}

fn quality(c: &mut Criterion) {
    let a = scene(512, 288, 2);
    let b = scene(512, 288, 2);
    let (ra, rb) = (&a.frames[0].planes[0], &b.frames[1].planes[0]);
    c.bench_function("ssim 512x288", |bn| bn.iter(|| ssim_plane(black_box(ra), black_box(rb), 8).unwrap()));
    c.bench_function("ms-ssim 512x288", |bn| bn.iter(|| ms_ssim_plane(black_box(ra), black_box(rb), 8).unwrap()));
}

fn svr(c: &mut Criterion) {
    // 300 rows of a smooth 4-feature target
    let x: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let t = i as f64 / 300.0;
            vec![(t * 7.0).sin(), (t * 3.0).cos(), t, (t * 11.0).sin() * 0.5]
        })
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 40.0 + 20.0 * r[0] - 10.0 * r[1] * r[2] + 5.0 * r[3]).collect();
    let params = SvrParams {
        c: 8.0,
        gamma: 0.5,
        epsilon: 0.1,
    };
    c.bench_function("svr train 300x4", |b| b.iter(|| train(black_box(&x), black_box(&y), params, None)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = resample, temporal, quality, svr
}
criterion_main!(benches);
