//! Hot kernels on desk-scale inputs: voxelization, OBIS, sparse and dense convolution, the radar
//! forward model, image metrics, sparsification and one training step.

use std::hint::black_box;
use std::rc::Rc;

use criterion::{criterion_group, criterion_main, Criterion};
use radsynth_core::config::PipelineConfig;
use radsynth_core::gan::{Sample, Trainer};
use radsynth_core::grid::{percentile_sparsify, voxelize, BevMap};
use radsynth_core::metrics::{ssim, SsimParams};
use radsynth_core::nn::{Geom, Graph, SparseLayout};
use radsynth_core::obis::obis_augment;
use radsynth_core::pipeline::{model_input, normalized_radar};
use radsynth_core::toyworld::{radar_truth, simulate_frame, ToyFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk_frame(cfg: &PipelineConfig) -> ToyFrame {
    simulate_frame(&cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, 1).unwrap()
}

fn preprocessing(c: &mut Criterion) {
    let cfg = PipelineConfig::from_json_str("{}").unwrap();
    let frame = desk_frame(&cfg);
    let boxes = frame.scene.boxes.clone();
    c.bench_function("voxelize_desk_frame", |b| {
        b.iter(|| voxelize(black_box(&frame.lidar), &cfg.roi, cfg.resolutions.r_in).unwrap())
    });
    c.bench_function("obis_augment_desk_frame", |b| {
        b.iter(|| obis_augment(black_box(&frame.lidar), &boxes, &cfg.obis).unwrap())
    });
    c.bench_function("radar_truth_desk_frame", |b| {
        b.iter(|| {
            radar_truth(
                black_box(&frame.scene),
                &cfg.toyworld.radar,
                &cfg.roi,
                cfg.resolutions.r_out,
                0,
            )
            .unwrap()
        })
    });
    c.bench_function("percentile_sparsify_desk_radar", |b| {
        b.iter(|| percentile_sparsify(black_box(&frame.radar), 7.0).unwrap())
    });
}

fn random_layout(rng: &mut ChaCha8Rng, d: [usize; 3], density: f64) -> SparseLayout {
    let mut coords = Vec::new();
    for x in 0..d[0] as u32 {
        for y in 0..d[1] as u32 {
            for z in 0..d[2] as u32 {
                if rng.random_bool(density) {
                    coords.push([x, y, z]);
                }
            }
        }
    }
    SparseLayout::new(d, coords).unwrap()
}

fn convolution(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = [96, 96, 32];
    let (cin, cout) = (8, 8);
    let layout = Rc::new(random_layout(&mut rng, d, 0.02));
    let feats: Vec<f32> = (0..layout.len() * cin).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f32> = (0..27 * cin * cout).map(|_| rng.random_range(-0.1..0.1)).collect();
    let dd = [24, 24, 8];
    let dense: Vec<f32> = (0..dd[0] * dd[1] * dd[2] * cin)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    c.bench_function("submanifold_conv_fwd_bwd_2pct_96x96x32", |b| {
        b.iter(|| {
            let mut g = Graph::<f32>::new();
            let x = g.constant(Geom::Sparse(layout.clone()), cin, feats.clone()).unwrap();
            let wv = g.constant(Geom::Dense([w.len(), 1, 1]), 1, w.clone()).unwrap();
            let y = g.submanifold_conv3d(x, wv, None, 3).unwrap();
            let s = g.sum(y);
            g.backward(s).unwrap();
            black_box(g.scalar(s))
        })
    });
    c.bench_function("sparse_conv_stride2_fwd_2pct_96x96x32", |b| {
        b.iter(|| {
            let mut g = Graph::<f32>::new();
            let x = g.constant(Geom::Sparse(layout.clone()), cin, feats.clone()).unwrap();
            let wv = g.constant(Geom::Dense([w.len(), 1, 1]), 1, w.clone()).unwrap();
            let y = g.sparse_conv3d(x, wv, None, 3, 2).unwrap();
            black_box(g.geom(y).sites())
        })
    });
    c.bench_function("dense_conv_fwd_bwd_24x24x8", |b| {
        b.iter(|| {
            let mut g = Graph::<f32>::new();
            let x = g.constant(Geom::Dense(dd), cin, dense.clone()).unwrap();
            let wv = g.constant(Geom::Dense([w.len(), 1, 1]), 1, w.clone()).unwrap();
            let y = g.conv3d(x, wv, None, 3, 1, 1).unwrap();
            let s = g.sum(y);
            g.backward(s).unwrap();
            black_box(g.scalar(s))
        })
    });
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 128;
    let a = BevMap::new(n, n, (0..n * n).map(|_| rng.random()).collect()).unwrap();
    let b2 = BevMap::new(n, n, (0..n * n).map(|_| rng.random()).collect()).unwrap();
    let p = SsimParams::default();
    c.bench_function("ssim_128x128", |b| b.iter(|| ssim(black_box(&a), &b2, &p).unwrap()));
}

fn training(c: &mut Criterion) {
    let cfg = PipelineConfig::from_json_str("{}").unwrap();
    let frame = desk_frame(&cfg);
    let svg = model_input(&frame.lidar, &frame.scene.boxes, &cfg).unwrap();
    let sample = Sample::new("bench", &svg, &normalized_radar(&frame.radar).unwrap()).unwrap();
    let mut trainer = Trainer::new(
        &cfg.generator,
        &cfg.discriminator,
        &cfg.loss_weights,
        &cfg.optimizer,
        sample.input.channels,
        sample.condition_channels,
        0,
    )
    .unwrap();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("gan_step_desk", |b| {
        b.iter(|| trainer.step(black_box(&sample)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, preprocessing, convolution, metrics, training);
criterion_main!(benches);
