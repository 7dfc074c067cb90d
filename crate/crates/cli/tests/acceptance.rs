//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any criterion fails.
//!
//! Criteria 4 to 6 train nine desk-scale models and dominate the run time (roughly a quarter
//! hour on one core).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::rc::Rc;
use std::time::Instant;

use radsynth_core::config::PipelineConfig;
use radsynth_core::formats::{
    decode_lpc, decode_rdt, encode_lpc, encode_rdt, read_boxes, read_manifest, write_boxes, write_manifest,
};
use radsynth_core::gan::{model_gradcheck, Generator, Trainer};
use radsynth_core::grid::{percentile_sparsify, BevMap, DenseGrid3D, ScaleDomain};
use radsynth_core::gtaug::{augment_frames, build_bank, read_bank, write_bank, GtAugConfig};
use radsynth_core::metrics::{
    average_precision, bev_iou, center_shift_study, psnr, ssim, DetectionRecord, IouMode, SsimParams,
};
use radsynth_core::nn::{op_gradcheck_suite, Geom, Graph, ParamStore, SparseLayout};
use radsynth_core::pipeline::{held_out_report, load_frames, train_on, PairedDataset};
use radsynth_core::toyworld::{generate_dataset, MANIFEST_FILE};
use radsynth_core::{Box3D, ObjectClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADCHECK_SEEDS: u64 = 20;
const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_BUDGET_S: f64 = 120.0;
const CONV_INSTANCES: usize = 100;
const CONV_TOL: f64 = 1e-6;
const OVERFIT_STEPS: usize = 500;
const OVERFIT_RATIO: f64 = 0.10;
const BASELINE_MARGIN_DB: f64 = 2.0;
const ABLATION_SEEDS: [u64; 3] = [0, 1, 2];
const DATASET_SEED: u64 = 7;
const MC_SAMPLES: usize = 1_000_000;
const MC_TOL: f64 = 0.01;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let data_dir = tmp.path().join("toy");
    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    let mut record = |id, name, outcome: Outcome| {
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {id} {name}: {detail}");
        results.push((id, name, outcome));
    };

    record("C1", "gradient checks", c1_gradcheck());
    record("C2", "sparse conv equivalence", c2_sparse_equivalence());
    let dataset = prepare_dataset(&data_dir);
    record("C3", "L1 overfit", c3_overfit(&data_dir, &dataset));
    let ablation = run_ablation(&data_dir, &dataset);
    record("C4", "model beats blur baseline", c4_baseline(&ablation));
    record("C5", "OBIS ablation", c5_obis(&ablation));
    record("C6", "dense vs sparse decoder", c6_decoder(&ablation));
    record("C7", "metric oracles", c7_metrics());
    record("C8", "percentile sparsification", c8_sparsify());
    record("C9", "center-shift study", c9_center_shift());
    record(
        "C10",
        "GT-Aug and format round-trips",
        c10_gtaug_formats(&data_dir, tmp.path()),
    );
    record("C11", "CLI reproducibility", c11_cli(tmp.path()));

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn desk(overlay: &str) -> PipelineConfig {
    PipelineConfig::from_json_str(overlay).expect("valid overlay")
}

fn prepare_dataset(dir: &Path) -> Result<(), String> {
    let cfg = desk("{}");
    generate_dataset(dir, &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, DATASET_SEED)
        .map(|_| ())
        .map_err(|e| format!("dataset generation failed: {e}"))
}

// ---------------------------------------------------------------- C1

fn c1_gradcheck() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut worst_what, mut checked, mut skipped) = (0.0f64, String::new(), 0usize, 0usize);
    for seed in 0..GRADCHECK_SEEDS {
        let mut reports: Vec<(String, _)> = op_gradcheck_suite(seed)
            .map_err(|e| format!("op suite seed {seed}: {e}"))?
            .into_iter()
            .map(|c| (c.op.to_string(), c.report))
            .collect();
        let model = model_gradcheck(seed).map_err(|e| format!("model check seed {seed}: {e}"))?;
        reports.push(("model".into(), model));
        for (op, r) in reports {
            if r.checked == 0 {
                return Err(format!("{op} seed {seed}: no coordinate checked"));
            }
            checked += r.checked;
            skipped += r.skipped;
            if r.max_rel_err > worst || r.max_rel_err.is_nan() {
                worst = r.max_rel_err;
                worst_what = format!("{op} seed {seed}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < GRADCHECK_TOL && secs < GRADCHECK_BUDGET_S,
        format!(
            "{GRADCHECK_SEEDS} seeds, {checked} coordinates ({skipped} kink-skipped), max rel err {worst:.2e} ({worst_what}), {secs:.1} s"
        ),
    )
}

// ---------------------------------------------------------------- C2

fn c2_sparse_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for inst in 0..CONV_INSTANCES {
        let d = [0; 3].map(|_| rng.random_range(1..9usize));
        let density = rng.random_range(0.05..0.5);
        let (cin, cout) = (rng.random_range(1..4usize), rng.random_range(1..4usize));
        let stride = 1 + inst % 2;
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
        let layout = Rc::new(SparseLayout::new(d, coords.clone()).map_err(|e| e.to_string())?);
        let feats: Vec<f64> = (0..coords.len() * cin).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..27 * cin * cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut dense_in = vec![0.0; d[0] * d[1] * d[2] * cin];
        for (i, c) in coords.iter().enumerate() {
            let o = (c[0] as usize * d[1] + c[1] as usize) * d[2] + c[2] as usize;
            dense_in[o * cin..(o + 1) * cin].copy_from_slice(&feats[i * cin..(i + 1) * cin]);
        }

        let mut g = Graph::<f64>::new();
        let run = |g: &mut Graph<f64>| -> radsynth_core::Result<_> {
            let xs = g.constant(Geom::Sparse(layout.clone()), cin, feats.clone())?;
            let xd = g.constant(Geom::Dense(d), cin, dense_in.clone())?;
            let wv = g.constant(Geom::Dense([w.len(), 1, 1]), 1, w.clone())?;
            let bv = g.constant(Geom::Dense([cout, 1, 1]), 1, b.clone())?;
            let ys = g.sparse_conv3d(xs, wv, Some(bv), 3, stride)?;
            let yd = g.conv3d(xd, wv, Some(bv), 3, stride, 1)?;
            let ym = g.submanifold_conv3d(xs, wv, Some(bv), 3)?;
            let yf = g.conv3d(xd, wv, Some(bv), 3, 1, 1)?;
            Ok((ys, yd, ym, yf))
        };
        let (ys, yd, ym, yf) = run(&mut g).map_err(|e| format!("instance {inst}: {e}"))?;
        let (Geom::Sparse(out), Geom::Dense(od)) = (g.geom(ys).clone(), g.geom(yd).clone()) else {
            return Err(format!("instance {inst}: unexpected output geometry"));
        };
        if out.dims() != od {
            return Err(format!("instance {inst}: dims {:?} vs {od:?}", out.dims()));
        }
        let dense = g.value(yd);
        let mut active = HashSet::new();
        for i in 0..out.len() {
            let o = out.linear(i);
            active.insert(o);
            for co in 0..cout {
                worst = worst.max((g.value(ys)[i * cout + co] - dense[o * cout + co]).abs());
            }
        }
        // outside the active set the dense result must reduce to the bias
        for o in (0..od[0] * od[1] * od[2]).filter(|o| !active.contains(o)) {
            for co in 0..cout {
                worst = worst.max((dense[o * cout + co] - b[co]).abs());
            }
        }
        let Geom::Sparse(sub) = g.geom(ym).clone() else {
            return Err(format!("instance {inst}: submanifold output is not sparse"));
        };
        if sub.coords() != layout.coords() {
            return Err(format!("instance {inst}: submanifold changed the active set"));
        }
        for i in 0..sub.len() {
            let o = sub.linear(i);
            for co in 0..cout {
                worst = worst.max((g.value(ym)[i * cout + co] - g.value(yf)[o * cout + co]).abs());
            }
        }
    }
    check(
        worst <= CONV_TOL,
        format!("{CONV_INSTANCES} instances, max abs diff {worst:.2e}, submanifold active sets preserved"),
    )
}

// ---------------------------------------------------------------- C3

fn c3_overfit(dir: &Path, dataset: &Result<(), String>) -> Outcome {
    dataset.clone()?;
    let cfg = desk(r#"{"loss_weights": {"lambda_gan": 0, "lambda_fm": 0}}"#);
    let data = PairedDataset::load(&dir.join(MANIFEST_FILE), &cfg).map_err(|e| e.to_string())?;
    let s = &data.train[0];
    let mut tr = Trainer::new(
        &cfg.generator,
        &cfg.discriminator,
        &cfg.loss_weights,
        &cfg.optimizer,
        s.input.channels,
        s.condition_channels,
        0,
    )
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let first = tr.step(s).map_err(|e| e.to_string())?.l1;
    let mut last = first;
    for _ in 1..OVERFIT_STEPS {
        last = tr.step(s).map_err(|e| e.to_string())?.l1;
    }
    let ratio = last / first;
    check(
        ratio <= OVERFIT_RATIO,
        format!(
            "grid {:?}, L1 {first:.4} -> {last:.4} after {OVERFIT_STEPS} steps, ratio {ratio:.4}, {:.0} s",
            s.target_dims,
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- C4 to C6

struct Ablation {
    default: Vec<(f64, f64)>,
    obis_off: Vec<f64>,
    sparse: Vec<f64>,
}

fn run_variant(dir: &Path, overlay: &str) -> Result<Vec<(f64, f64)>, String> {
    let cfg = desk(overlay);
    let data = PairedDataset::load(&dir.join(MANIFEST_FILE), &cfg).map_err(|e| e.to_string())?;
    ABLATION_SEEDS
        .iter()
        .map(|&seed| {
            let (trainer, _) = train_on(&cfg, &data, seed, |_, _| Ok(())).map_err(|e| e.to_string())?;
            let r = held_out_report(&trainer, &data, &cfg).map_err(|e| e.to_string())?;
            Ok((r.model_psnr, r.baseline_psnr))
        })
        .collect()
}

fn run_ablation(dir: &Path, dataset: &Result<(), String>) -> Result<Ablation, String> {
    dataset.clone()?;
    let start = Instant::now();
    let default = run_variant(dir, "{}")?;
    let obis_off = run_variant(dir, r#"{"obis": {"enabled": false}}"#)?;
    let sparse = run_variant(dir, r#"{"generator": {"decoder": "sparse"}}"#)?;
    println!(
        "       ablation: 9 training runs in {:.0} s",
        start.elapsed().as_secs_f64()
    );
    Ok(Ablation {
        default,
        obis_off: obis_off.into_iter().map(|r| r.0).collect(),
        sparse: sparse.into_iter().map(|r| r.0).collect(),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn c4_baseline(a: &Result<Ablation, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let (model, base) = a.default[0];
    check(
        model >= base + BASELINE_MARGIN_DB,
        format!(
            "seed 0 held-out PSNR {model:.2} dB vs blur baseline {base:.2} dB (margin {:.2} dB)",
            model - base
        ),
    )
}

fn c5_obis(a: &Result<Ablation, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let on: Vec<f64> = a.default.iter().map(|r| r.0).collect();
    let (m_on, m_off) = (mean(&on), mean(&a.obis_off));
    check(
        m_on >= m_off,
        format!(
            "mean PSNR with OBIS {m_on:.2} dB [{}] vs without {m_off:.2} dB [{}]",
            fmt_list(&on),
            fmt_list(&a.obis_off)
        ),
    )
}

fn c6_decoder(a: &Result<Ablation, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let dense: Vec<f64> = a.default.iter().map(|r| r.0).collect();
    let (m_dense, m_sparse) = (mean(&dense), mean(&a.sparse));
    check(
        m_dense >= m_sparse,
        format!(
            "mean PSNR dense decoder {m_dense:.2} dB [{}] vs sparse {m_sparse:.2} dB [{}]",
            fmt_list(&dense),
            fmt_list(&a.sparse)
        ),
    )
}

// ---------------------------------------------------------------- C7

fn map(rows: usize, cols: usize, f: impl Fn(usize) -> f64) -> BevMap {
    BevMap::new(rows, cols, (0..rows * cols).map(f).collect()).unwrap()
}

fn psnr_cases() -> Result<usize, String> {
    let cases: Vec<(BevMap, BevMap, f64)> = vec![
        (map(4, 5, |_| 0.0), map(4, 5, |_| 0.1), 20.0),
        (
            map(10, 10, |_| 0.0),
            map(10, 10, |i| if i == 37 { 1.0 } else { 0.0 }),
            20.0,
        ),
        (map(3, 3, |_| 0.25), map(3, 3, |_| 0.75), 10.0 * 4f64.log10()),
        (
            map(2, 2, |i| i as f64 / 4.0),
            map(2, 2, |i| i as f64 / 4.0),
            f64::INFINITY,
        ),
    ];
    for (i, (a, b, want)) in cases.iter().enumerate() {
        let got = psnr(a, b, 1.0).map_err(|e| e.to_string())?;
        let ok = if want.is_infinite() {
            got == *want
        } else {
            (got - want).abs() <= 1e-9
        };
        if !ok {
            return Err(format!("PSNR case {i}: got {got}, want {want}"));
        }
    }
    Ok(cases.len())
}

/// Direct evaluation over every fully-contained window with the 2D Gaussian weights.
fn ssim_oracle(a: &BevMap, b: &BevMap, p: &SsimParams) -> f64 {
    let w = p.window;
    let half = (w as f64 - 1.0) / 2.0;
    let mut weights = vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            let (di, dj) = (i as f64 - half, j as f64 - half);
            weights[i * w + j] = (-(di * di + dj * dj) / (2.0 * p.sigma * p.sigma)).exp();
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((p.k1 * p.max_val).powi(2), (p.k2 * p.max_val).powi(2));
    let mut acc = 0.0;
    let mut n = 0usize;
    for r in 0..=a.rows - w {
        for c in 0..=a.cols - w {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..w {
                for j in 0..w {
                    let k = (r + i) * a.cols + c + j;
                    ma += weights[i * w + j] * a.data[k];
                    mb += weights[i * w + j] * b.data[k];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..w {
                for j in 0..w {
                    let k = (r + i) * a.cols + c + j;
                    let (da, db) = (a.data[k] - ma, b.data[k] - mb);
                    va += weights[i * w + j] * da * da;
                    vb += weights[i * w + j] * db * db;
                    cov += weights[i * w + j] * da * db;
                }
            }
            acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            n += 1;
        }
    }
    acc / n as f64
}

fn ssim_cases() -> Result<(usize, f64), String> {
    let p = SsimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..10 {
        let (rows, cols) = (rng.random_range(11..24), rng.random_range(11..24));
        let a = BevMap::new(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect()).unwrap();
        let b = BevMap::new(
            rows,
            cols,
            a.data
                .iter()
                .map(|v| (v + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0))
                .collect(),
        )
        .unwrap();
        let got = ssim(&a, &b, &p).map_err(|e| e.to_string())?;
        worst = worst.max((got - ssim_oracle(&a, &b, &p)).abs());
        count += 1;
    }
    if worst > 1e-6 {
        return Err(format!("SSIM deviates from the direct oracle by {worst:.2e}"));
    }
    let c1 = (p.k1 * p.max_val).powi(2);
    for (va, vb) in [(0.2, 0.7), (0.0, 0.5), (0.9, 0.9), (0.0, 0.0)] {
        let got = ssim(&map(16, 16, |_| va), &map(16, 16, |_| vb), &p).map_err(|e| e.to_string())?;
        let want = (2.0 * va * vb + c1) / (va * va + vb * vb + c1);
        if (got - want).abs() > 1e-9 {
            return Err(format!("constant-image SSIM ({va}, {vb}): got {got}, want {want}"));
        }
        count += 1;
    }
    Ok((count, worst))
}

fn random_box(rng: &mut ChaCha8Rng, near: Option<[f64; 2]>) -> Box3D {
    let c = match near {
        Some(n) => [n[0] + rng.random_range(-3.0..3.0), n[1] + rng.random_range(-3.0..3.0)],
        None => [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
    };
    Box3D::new(
        [c[0], c[1], 0.0],
        [rng.random_range(0.5..5.0), rng.random_range(0.5..3.0), 1.5],
        rng.random_range(-3.1..3.1),
        ObjectClass::Sedan,
    )
    .unwrap()
}

fn inside_footprint(b: &Box3D, p: [f64; 2]) -> bool {
    let (dx, dy) = (p[0] - b.center[0], p[1] - b.center[1]);
    let (s, c) = b.yaw.sin_cos();
    let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
    lx.abs() <= b.dims[0] / 2.0 && ly.abs() <= b.dims[1] / 2.0
}

/// Monte-Carlo BEV IoU: uniform samples over the footprint of `a`, counting those inside `b`.
fn iou_monte_carlo(a: &Box3D, b: &Box3D, rng: &mut ChaCha8Rng) -> f64 {
    let (s, c) = a.yaw.sin_cos();
    let mut hits = 0usize;
    for _ in 0..MC_SAMPLES {
        let lx = rng.random_range(-0.5..0.5) * a.dims[0];
        let ly = rng.random_range(-0.5..0.5) * a.dims[1];
        let p = [a.center[0] + c * lx - s * ly, a.center[1] + s * lx + c * ly];
        if inside_footprint(b, p) {
            hits += 1;
        }
    }
    let (area_a, area_b) = (a.dims[0] * a.dims[1], b.dims[0] * b.dims[1]);
    let inter = area_a * hits as f64 / MC_SAMPLES as f64;
    inter / (area_a + area_b - inter)
}

fn iou_cases() -> Result<(usize, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_box(&mut rng, None);
        let b = random_box(&mut rng, Some([a.center[0], a.center[1]]));
        worst = worst.max((bev_iou(&a, &b) - iou_monte_carlo(&a, &b, &mut rng)).abs());
    }
    if worst > MC_TOL {
        return Err(format!("rotated IoU deviates from Monte Carlo by {worst:.4}"));
    }
    Ok((200, worst))
}

fn det(frame: &str, b: Box3D, score: f64) -> DetectionRecord {
    DetectionRecord {
        frame: frame.into(),
        bbox: b,
        score,
    }
}

/// Ground truth, detections, expected `(recall, precision)` table, expected AP.
type ApCase = (BTreeMap<String, Vec<Box3D>>, Vec<DetectionRecord>, Vec<(f64, f64)>, f64);

fn ap_cases() -> Result<usize, String> {
    let at = |x: f64, y: f64| Box3D::new([x, y, 0.0], [4.0, 2.0, 1.5], 0.0, ObjectClass::Sedan).unwrap();
    let far = at(100.0, 100.0);
    let gts = |items: &[(&str, Box3D)]| {
        let mut m: BTreeMap<String, Vec<Box3D>> = BTreeMap::new();
        for (f, b) in items {
            m.entry(f.to_string()).or_default().push(*b);
        }
        m
    };
    let cases: Vec<ApCase> = vec![
        (
            gts(&[("a", at(0.0, 0.0))]),
            vec![det("a", at(0.0, 0.0), 0.9)],
            vec![(1.0, 1.0)],
            1.0,
        ),
        (
            gts(&[("a", at(0.0, 0.0)), ("a", at(10.0, 0.0))]),
            vec![
                det("a", at(0.0, 0.0), 0.9),
                det("a", far, 0.8),
                det("a", at(10.0, 0.0), 0.7),
            ],
            vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)],
            (20.0 + 20.0 * (2.0 / 3.0)) / 40.0,
        ),
        (
            gts(&[("a", at(0.0, 0.0)), ("a", at(10.0, 0.0))]),
            vec![det("a", far, 0.9), det("a", at(10.0, 0.0), 0.8)],
            vec![(0.0, 0.0), (0.5, 0.5)],
            0.25,
        ),
        (
            gts(&[("a", at(0.0, 0.0))]),
            vec![det("a", at(0.0, 0.0), 0.9), det("a", at(0.1, 0.0), 0.8)],
            vec![(1.0, 1.0), (1.0, 0.5)],
            1.0,
        ),
        (
            gts(&[
                ("a", at(0.0, 0.0)),
                ("a", at(10.0, 0.0)),
                ("b", at(0.0, 0.0)),
                ("b", at(0.0, 10.0)),
            ]),
            vec![
                det("a", at(0.0, 0.0), 0.95),
                det("b", far, 0.9),
                det("b", at(0.0, 10.0), 0.85),
                det("a", at(10.0, 0.0), 0.6),
            ],
            vec![(0.25, 1.0), (0.25, 0.5), (0.5, 2.0 / 3.0), (0.75, 0.75)],
            (10.0 + 10.0 * 0.75 + 10.0 * 0.75) / 40.0,
        ),
    ];
    for (i, (gt, dets, table, want)) in cases.iter().enumerate() {
        let r = average_precision(dets, gt, 0.5, IouMode::Bev).map_err(|e| e.to_string())?;
        if &r.curve != table {
            return Err(format!("AP case {i}: curve {:?}, want {table:?}", r.curve));
        }
        if (r.ap - want).abs() > 1e-12 {
            return Err(format!("AP case {i}: got {}, want {want}", r.ap));
        }
    }
    Ok(cases.len())
}

fn c7_metrics() -> Outcome {
    let np = psnr_cases()?;
    let (ns, ssim_err) = ssim_cases()?;
    let (ni, iou_err) = iou_cases()?;
    let na = ap_cases()?;
    Ok(format!(
        "{np} PSNR cases exact, {ns} SSIM cases (oracle diff {ssim_err:.1e}), {ni} IoU pairs (MC diff {iou_err:.4}), {na} AP tables exact"
    ))
}

// ---------------------------------------------------------------- C8

fn c8_sparsify() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let dims = [0; 3].map(|_| rng.random_range(1..12usize));
        let mut g = DenseGrid3D::zeros([0.0; 3], 0.4, dims, ScaleDomain::RawPower);
        let tied = trial % 2 == 0;
        for v in g.values.iter_mut() {
            *v = if tied {
                rng.random_range(0..4) as f64 * 1e10
            } else {
                rng.random_range(0.0..1e13)
            };
        }
        let n = g.len();
        let want = (7 * n).div_ceil(100);
        let pc = percentile_sparsify(&g, 7.0).map_err(|e| e.to_string())?;
        if pc.len() != want {
            return Err(format!("trial {trial}: {} points for N={n}, want {want}", pc.len()));
        }
        let mut selected = BTreeSet::new();
        for p in pc.positions() {
            let c = [0, 1, 2].map(|a| ((p[a] - g.origin[a]) / g.resolution - 0.5).round() as usize);
            selected.insert(g.index(c[0], c[1], c[2]));
        }
        if selected.len() != want {
            return Err(format!("trial {trial}: duplicate cells selected"));
        }
        let min_sel = selected.iter().map(|&i| g.values[i]).fold(f64::INFINITY, f64::min);
        let max_un = (0..n)
            .filter(|i| !selected.contains(i))
            .map(|i| g.values[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if min_sel < max_un {
            return Err(format!(
                "trial {trial}: selected min {min_sel} < unselected max {max_un}"
            ));
        }
    }
    Ok("100 grids: count = ceil(0.07 N), every kept cell >= every dropped cell".into())
}

// ---------------------------------------------------------------- C9

fn c9_center_shift() -> Outcome {
    let res = [0.05, 0.1, 0.2, 0.4];
    let rows = center_shift_study(1000, &res, 0).map_err(|e| e.to_string())?;
    let shifts: Vec<f64> = rows.iter().map(|r| r.mean_shift).collect();
    let monotone = shifts.windows(2).all(|w| w[1] > w[0]);
    let ratio = shifts[3] / shifts[0];
    check(
        monotone && ratio >= 4.0,
        format!(
            "mean shift [m] at {res:?}: [{}], ratio 0.4/0.05 = {ratio:.2}",
            shifts.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- C10

fn roundtrip<T>(
    bytes: &[u8],
    decode: impl Fn(&[u8]) -> radsynth_core::Result<T>,
    encode: impl Fn(&T) -> Vec<u8>,
) -> bool {
    decode(bytes).map(|v| encode(&v) == bytes).unwrap_or(false)
}

fn file_roundtrip<T>(
    src: &Path,
    dst: &Path,
    read: impl Fn(&Path) -> radsynth_core::Result<T>,
    write: impl Fn(&Path, &T) -> radsynth_core::Result<()>,
) -> bool {
    let ok = read(src).and_then(|v| write(dst, &v)).is_ok();
    ok && std::fs::read(src).ok() == std::fs::read(dst).ok()
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap().map(Result::unwrap) {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn c10_gtaug_formats(data_dir: &Path, tmp: &Path) -> Outcome {
    let cfg = desk("{}");
    let manifest = data_dir.join(MANIFEST_FILE);
    let frames = load_frames(&manifest).map_err(|e| e.to_string())?;
    let named: Vec<_> = frames
        .iter()
        .map(|f| (f.id.clone(), f.lidar.clone(), f.boxes.clone()))
        .collect();
    let bank = build_bank(&named, 5);
    let pairs: Vec<_> = frames.iter().map(|f| (f.lidar.clone(), f.boxes.clone())).collect();
    let aug_cfg = GtAugConfig {
        n_insert: 4,
        ..cfg.gtaug.clone()
    };
    let first = augment_frames(&pairs, &bank, &cfg.roi, &aug_cfg, 11).map_err(|e| e.to_string())?;
    let second = augment_frames(&pairs, &bank, &cfg.roi, &aug_cfg, 11).map_err(|e| e.to_string())?;
    let mut inserted = 0;
    for (i, ((pa, ba, ra), (pb, bb, _))) in first.iter().zip(&second).enumerate() {
        if encode_lpc(pa) != encode_lpc(pb) || ba != bb {
            return Err(format!("frame {i}: augmentation not deterministic"));
        }
        inserted += ra.inserted;
        for (j, x) in ba.iter().enumerate() {
            for y in &ba[j + 1..] {
                let iou = bev_iou(x, y);
                if iou != 0.0 {
                    return Err(format!("frame {i}: boxes overlap with BEV IoU {iou}"));
                }
            }
        }
    }
    if inserted == 0 {
        return Err("no object was inserted".into());
    }

    let rt = tmp.join("roundtrip");
    let mut checked = Vec::new();
    let entries = read_manifest(&manifest).map_err(|e| e.to_string())?;
    let e0 = &entries[0];
    let lpc = std::fs::read(data_dir.join(&e0.lidar)).map_err(|e| e.to_string())?;
    checked.push(("LPC1", roundtrip(&lpc, |b| decode_lpc(b, Path::new("x")), encode_lpc)));
    let rdt = std::fs::read(data_dir.join(e0.radar.as_ref().unwrap())).map_err(|e| e.to_string())?;
    checked.push((
        "RDT1 raw",
        roundtrip(&rdt, |b| decode_rdt(b, Path::new("x")), encode_rdt),
    ));
    let norm = radsynth_core::pipeline::normalized_radar(&decode_rdt(&rdt, Path::new("x")).unwrap()).unwrap();
    let norm_bytes = encode_rdt(&norm);
    checked.push((
        "RDT1 log",
        roundtrip(&norm_bytes, |b| decode_rdt(b, Path::new("x")), encode_rdt),
    ));
    let boxes_src = data_dir.join(e0.boxes.as_ref().unwrap());
    checked.push((
        "boxes JSONL",
        file_roundtrip(&boxes_src, &rt.join("b.jsonl"), read_boxes, |p, v| write_boxes(p, v)),
    ));
    checked.push((
        "manifest JSONL",
        file_roundtrip(&manifest, &rt.join("m.jsonl"), read_manifest, |p, v| {
            write_manifest(p, v)
        }),
    ));
    let generator = Generator::<f32>::new(&cfg.generator, 7, 0).map_err(|e| e.to_string())?;
    let ckp = generator.store.encode();
    checked.push((
        "CKP1",
        roundtrip(
            &ckp,
            |b| ParamStore::<f32>::decode(b, Path::new("x")),
            ParamStore::encode,
        ),
    ));
    let (bank_a, bank_b) = (rt.join("bank_a"), rt.join("bank_b"));
    let bank_ok = write_bank(&bank_a, &bank)
        .and_then(|_| read_bank(&bank_a))
        .and_then(|b| write_bank(&bank_b, &b))
        .is_ok();
    checked.push(("object bank", bank_ok && dir_bytes(&bank_a) == dir_bytes(&bank_b)));

    let failed: Vec<_> = checked.iter().filter(|c| !c.1).map(|c| c.0).collect();
    check(
        failed.is_empty(),
        format!(
            "{} frames, {inserted} objects inserted, pairwise BEV IoU 0, bitwise deterministic; round-trips {}",
            frames.len(),
            if failed.is_empty() {
                format!("byte-identical for {} formats", checked.len())
            } else {
                format!("differ for {failed:?}")
            }
        ),
    )
}

// ---------------------------------------------------------------- C11

fn cli(root: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_radsynth"))
        .current_dir(root)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`{}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn cli_pipeline(root: &Path) -> Result<Vec<Vec<u8>>, String> {
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    std::fs::write(
        root.join("cfg.json"),
        r#"{"epochs": 2, "toyworld": {"num_scenes": 6, "n_train": 3, "n_val": 1}}"#,
    )
    .map_err(|e| e.to_string())?;
    let c = ["--config", "cfg.json", "--seed", "3"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["gen-scenes", "--out", "data"],
        vec![
            "obis",
            "--input",
            "data/scene_0000.lpc",
            "--boxes",
            "data/scene_0000.boxes.jsonl",
            "--out",
            "obis.lpc",
        ],
        vec!["train", "--manifest", "data/manifest.jsonl", "--out", "train"],
        vec![
            "synth",
            "--checkpoint",
            "train/generator.ckp",
            "--input",
            "data/scene_0003.lpc",
            "--boxes",
            "data/scene_0003.boxes.jsonl",
            "--out",
            "synth.rdt",
        ],
        vec![
            "metrics",
            "image",
            "--pred",
            "synth.rdt",
            "--target",
            "data/scene_0003.rdt",
        ],
    ];
    steps
        .iter()
        .map(|s| {
            let args: Vec<&str> = c.iter().copied().chain(s.iter().copied()).collect();
            cli(root, &args)
        })
        .collect()
}

fn c11_cli(tmp: &Path) -> Outcome {
    let (a, b) = (tmp.join("cli_a"), tmp.join("cli_b"));
    let logs_a = cli_pipeline(&a)?;
    let logs_b = cli_pipeline(&b)?;
    if logs_a != logs_b {
        return Err("stdout run logs differ between runs".into());
    }
    let (files_a, files_b) = (dir_bytes(&a), dir_bytes(&b));
    if files_a != files_b {
        let differ: Vec<_> = files_a
            .keys()
            .chain(files_b.keys())
            .filter(|k| files_a.get(*k) != files_b.get(*k))
            .collect();
        return Err(format!("artifacts differ: {differ:?}"));
    }
    Ok(format!(
        "gen-scenes, obis, train, synth, metrics run twice: {} logs and {} files byte-identical",
        logs_a.len(),
        files_a.len()
    ))
}
