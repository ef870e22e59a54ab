//! End-to-end acceptance checks.
//!
//! Every test writes exactly one `PASS`/`FAIL` line straight to stderr, which
//! the test harness does not capture, and then asserts on the same verdict.
//! Tolerances and budgets are the constants below.

use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use andt::data::{synth_moving_dot, window_clips, LabelSeries, SynthConfig, VideoSequence};
use andt::evaluation::{
    build_report, compute_threshold, delta_s, pca_project, roc_auc, score_video, threshold_metrics, EvalOptions,
    ScoreSeries,
};
use andt::model::{
    param_count, param_shapes, predict_batch, tubelet_tokenize, tubelet_untokenize, ModelConfig, TubeletGrid,
};
use andt::numerics::suite::OPERATORS;
use andt::training::{
    load_checkpoint, save_checkpoint, Checkpoint, Trainer, TrainConfig, TrainMode,
};
use andt::Tensor;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADCHECK_BUDGET: Duration = Duration::from_secs(120);
const OVERFIT_LOSS: f64 = 1e-3;
const OVERFIT_STEPS: usize = 500;
const OVERFIT_BUDGET: Duration = Duration::from_secs(300);
const BENCH_MIN_AUC: f64 = 0.90;
const BENCH_BUDGET: Duration = Duration::from_secs(900);
const AUC_INSTANCES: usize = 1000;
const THRESHOLD_123: f64 = 2.8165;
const THRESHOLD_TOL: f64 = 1e-4;
const DELTA_S_TOL: f64 = 1e-12;
const PERSIST_INPUTS: usize = 100;
const PCA_ORTHO_TOL: f64 = 1e-9;
const PCA_RATIO_TOL: f64 = 1e-12;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id} {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

/// `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)` by counting every positive/negative pair.
fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1;
            } else if si == sj {
                ties += 1;
            }
        }
    }
    (2 * wins + ties) as f64 / (2 * pairs) as f64
}

#[test]
fn criterion_1_gradient_suite() {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_andt"))
        .args(["gradcheck", "--tiny-config", "--seed", "0"])
        .output()
        .expect("run andt gradcheck");
    let elapsed = started.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = stdout.lines().collect();
    let listed = |name: &str| {
        rows.iter()
            .filter(|l| l.split_whitespace().next() == Some(name) && l.trim_end().ends_with("ok"))
            .count()
            == 1
    };
    let missing: Vec<&str> = OPERATORS.iter().copied().chain(["full_model"]).filter(|n| !listed(n)).collect();
    let pass = out.status.code() == Some(0) && missing.is_empty() && elapsed < GRADCHECK_BUDGET;
    verdict(
        1,
        "gradient suite",
        pass,
        &format!(
            "exit {:?}, {} operators + full model, not ok: {missing:?}, {:.1}s < {}s",
            out.status.code(),
            OPERATORS.len(),
            elapsed.as_secs_f64(),
            GRADCHECK_BUDGET.as_secs()
        ),
    );
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

#[test]
fn criterion_2_tokenization_algebra() {
    let (t, c, h, w) = (6, 3, 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clip = Tensor::uniform(vec![t, c, h, w], -1.0, 1.0, &mut rng).unwrap();
    let (mut grids, mut failures) = (0, Vec::new());
    for &tt in &divisors(t) {
        for &ph in &divisors(h) {
            for &pw in &divisors(w) {
                grids += 1;
                let grid = TubeletGrid::new([t, c, h, w], [tt, ph, pw]).unwrap();
                let n = (t / tt) * (h / ph) * (w / pw);
                let d = tt * ph * pw * c;
                let tokens = tubelet_tokenize(&clip, &grid).unwrap();
                let mut ok = grid.tokens() == n && grid.token_dim() == d && tokens.shape() == [n, d];
                // independent placement oracle: token (it, ih, iw), entry (dt, dy, dx, ch)
                if ok {
                    let (nh, nw) = (h / ph, w / pw);
                    'tokens: for k in 0..n {
                        let (it, ih, iw) = (k / (nh * nw), (k / nw) % nh, k % nw);
                        for j in 0..d {
                            let ch = j % c;
                            let dx = (j / c) % pw;
                            let dy = (j / (c * pw)) % ph;
                            let dt = j / (c * pw * ph);
                            let want = clip.get(&[it * tt + dt, ch, ih * ph + dy, iw * pw + dx]).unwrap();
                            if tokens.get(&[k, j]).unwrap().to_bits() != want.to_bits() {
                                ok = false;
                                break 'tokens;
                            }
                        }
                    }
                }
                let back = tubelet_untokenize(&tokens, &grid).unwrap();
                ok &= back.shape() == clip.shape()
                    && back.data().iter().zip(clip.data()).all(|(a, b)| a.to_bits() == b.to_bits());
                if !ok {
                    failures.push((tt, ph, pw));
                }
            }
        }
    }
    verdict(
        2,
        "tokenization algebra",
        failures.is_empty() && grids == 4 * 6 * 6,
        &format!("{grids} divisor grids of 6x3x32x32, bit-exact failures {failures:?}"),
    );
}

#[test]
fn criterion_3_architecture_conformance() {
    let cfg = ModelConfig::default();
    let shapes = param_shapes(&cfg).unwrap();
    let checks = [
        ("patch 16x16", cfg.patch_h == 16 && cfg.patch_w == 16),
        ("layers 2", cfg.layers == 2 && shapes.layers.len() == 2),
        ("heads 6", cfg.heads == 6),
        ("mlp 4096", cfg.mlp_size == 4096 && shapes.layers[0].fc1_w == [cfg.embed_dim, 4096]),
        ("frames 6", cfg.frames == 6),
        ("base 8x8x512", cfg.decoder_base == 8 && cfg.decoder_channels[0] == 512),
        ("5 stages", cfg.decoder_stages() == 5 && shapes.stages.len() == 5),
        ("output 256x256x3", cfg.output_shape() == [3, 256, 256]),
        ("expansion to 8x8x512", shapes.expand2_w[1] == 8 * 8 * 512),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        3,
        "architecture conformance",
        failed.is_empty() && cfg.validate().is_ok(),
        &format!("default config, {} parameters, failed {failed:?}", param_count(&cfg).unwrap()),
    );
}

fn overfit_trace() -> Vec<f64> {
    let (video, _) = synth_moving_dot(&SynthConfig {
        size: 8,
        radius: 2.0,
        velocity: (1.0, 1.0),
        frames: 8,
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let windows = window_clips(&video, 2, 1).unwrap();
    let batch = &windows[..4];
    let inputs: Vec<&Tensor> = batch.iter().map(|w| &w.clip).collect();
    let targets: Vec<&Tensor> = batch.iter().map(|w| &w.target).collect();
    let train = TrainConfig { learning_rate: 1e-2, batch_size: 4, ..TrainConfig::default() };
    let mut trainer = Trainer::new(ModelConfig::tiny(), train).unwrap();
    let mut trace = Vec::new();
    for _ in 0..OVERFIT_STEPS {
        let loss = trainer.step(&inputs, &targets).unwrap();
        trace.push(loss);
        if loss < OVERFIT_LOSS {
            break;
        }
    }
    trace
}

#[test]
fn criterion_4_overfit_sanity() {
    let started = Instant::now();
    let first = overfit_trace();
    let second = overfit_trace();
    let elapsed = started.elapsed();
    let last = *first.last().unwrap();
    let same = first.len() == second.len() && first.iter().zip(&second).all(|(a, b)| a.to_bits() == b.to_bits());
    verdict(
        4,
        "overfit sanity",
        last < OVERFIT_LOSS && same && elapsed < OVERFIT_BUDGET,
        &format!(
            "loss {last:.3e} < {OVERFIT_LOSS:e} after {} of {OVERFIT_STEPS} steps, reruns identical {same}, {:.1}s",
            first.len(),
            elapsed.as_secs_f64()
        ),
    );
}

struct BenchData {
    train: VideoSequence,
    test: Vec<(VideoSequence, LabelSeries)>,
}

/// Normal motion for training; test videos reverse the motion in one span.
fn bench_data() -> &'static BenchData {
    static DATA: OnceLock<BenchData> = OnceLock::new();
    DATA.get_or_init(|| {
        let base = SynthConfig { size: 64, radius: 8.0, frames: 128, seed: 3, ..SynthConfig::default() };
        let start = Some(base.resolved_start());
        let (train, _) = synth_moving_dot(&SynthConfig { start, ..base.clone() }).unwrap();
        let test = [(0, 60..100), (1, 30..50)]
            .into_iter()
            .map(|(i, span)| {
                synth_moving_dot(&SynthConfig {
                    id: format!("test_{i:03}"),
                    start,
                    frames: 160,
                    anomaly_spans: vec![span],
                    ..base.clone()
                })
                .unwrap()
            })
            .collect();
        BenchData { train, test }
    })
}

struct BenchOutcome {
    auc: f64,
    oracle_auc: f64,
    delta_s: f64,
    elapsed: Duration,
}

fn run_bench(mode: TrainMode) -> BenchOutcome {
    let data = bench_data();
    let started = Instant::now();
    let mut model = ModelConfig::desk();
    model.output_frames = mode.output_frames(model.frames);
    let train = TrainConfig { mode, learning_rate: 3e-3, batch_size: 8, epochs: 100, ..TrainConfig::default() };
    let mut trainer = Trainer::new(model.clone(), train).unwrap();
    trainer.fit(std::slice::from_ref(&data.train)).unwrap();

    let score = |v: &VideoSequence, l: Option<&LabelSeries>| -> ScoreSeries {
        score_video(&trainer.params, &model, mode, v, l, 16).unwrap().series
    };
    let train_scores = vec![score(&data.train, None)];
    let test_scores: Vec<ScoreSeries> = data.test.iter().map(|(v, l)| score(v, Some(l))).collect();
    let (report, _) = build_report(&test_scores, &train_scores, mode, EvalOptions::default(), "").unwrap();

    let (mut pooled, mut labels) = (Vec::new(), Vec::new());
    for s in &test_scores {
        let (sc, lb) = s.scored();
        pooled.extend(sc);
        labels.extend(lb);
    }
    BenchOutcome {
        auc: report.auc.unwrap(),
        oracle_auc: pair_count_auc(&pooled, &labels),
        delta_s: report.delta_s.unwrap(),
        elapsed: started.elapsed(),
    }
}

fn prediction_bench() -> &'static BenchOutcome {
    static OUT: OnceLock<BenchOutcome> = OnceLock::new();
    OUT.get_or_init(|| run_bench(TrainMode::Prediction1))
}

fn reconstruction_bench() -> &'static BenchOutcome {
    static OUT: OnceLock<BenchOutcome> = OnceLock::new();
    OUT.get_or_init(|| run_bench(TrainMode::Reconstruction1))
}

#[test]
fn criterion_5_synthetic_anomaly_detection() {
    let p = prediction_bench();
    let pass = p.auc >= BENCH_MIN_AUC
        && p.delta_s > 0.0
        && p.auc.to_bits() == p.oracle_auc.to_bits()
        && p.elapsed < BENCH_BUDGET;
    verdict(
        5,
        "synthetic anomaly detection",
        pass,
        &format!(
            "prediction-1 auc {:.4} >= {BENCH_MIN_AUC}, pair-count oracle {:.4}, ds {:.3e} > 0, {:.0}s < {}s",
            p.auc,
            p.oracle_auc,
            p.delta_s,
            p.elapsed.as_secs_f64(),
            BENCH_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_6_prediction_beats_reconstruction() {
    let p = prediction_bench();
    let r = reconstruction_bench();
    verdict(
        6,
        "prediction vs reconstruction",
        p.auc >= r.auc && p.delta_s >= r.delta_s,
        &format!(
            "auc {:.4} vs {:.4}, ds {:.3e} vs {:.3e}, equal 100-epoch budgets",
            p.auc, r.auc, p.delta_s, r.delta_s
        ),
    );
}

#[test]
fn criterion_7_metric_engine() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut auc_mismatch = 0;
    let mut count_mismatch = 0;
    let mut worst_ds = 0.0f64;
    for i in 0..AUC_INSTANCES {
        let n = rng.random_range(2..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse grids on every other instance to force ties
        let scores: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| rng.random_range(0..5) as f64 * 0.25).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        if roc_auc(&scores, &labels).unwrap().auc.to_bits() != pair_count_auc(&scores, &labels).to_bits() {
            auc_mismatch += 1;
        }
        let thr = rng.random_range(-0.1..1.1);
        let c = threshold_metrics(&scores, &labels, thr).unwrap().counts;
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if c.total() != n || c.tp + c.fn_ != pos || c.fp + c.tn != n - pos {
            count_mismatch += 1;
        }
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-10.0..10.0));
        let mapped: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let err = (delta_s(&mapped, &labels).unwrap() - a * delta_s(&scores, &labels).unwrap()).abs();
        worst_ds = worst_ds.max(err);
    }
    let thr = compute_threshold(&[1.0, 2.0, 3.0]).unwrap();
    let pass = auc_mismatch == 0
        && count_mismatch == 0
        && (thr - THRESHOLD_123).abs() <= THRESHOLD_TOL
        && worst_ds <= DELTA_S_TOL;
    verdict(
        7,
        "metric engine",
        pass,
        &format!(
            "{AUC_INSTANCES} instances: auc mismatches {auc_mismatch}, count mismatches {count_mismatch}; \
             threshold([1,2,3]) {thr:.6}; worst ds affine error {worst_ds:.1e} <= {DELTA_S_TOL:e}"
        ),
    );
}

#[test]
fn criterion_8_persistence() {
    let mut model = ModelConfig::tiny();
    model.seed = 8;
    let (video, _) = synth_moving_dot(&SynthConfig {
        size: 8,
        radius: 2.0,
        velocity: (1.0, 1.0),
        frames: 12,
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut trainer = Trainer::new(model.clone(), TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap();
    trainer.fit(&[video]).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.andt");
    save_checkpoint(&Checkpoint::from_trainer(&trainer, serde_json::Value::Null), &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut differing = 0;
    for _ in 0..PERSIST_INPUTS {
        let clip = Tensor::uniform(vec![model.frames, model.channels, model.height, model.width], 0.0, 1.0, &mut rng)
            .unwrap();
        let (a, fa) = predict_batch(&[&clip], &trainer.params, &model).unwrap();
        let (b, fb) = predict_batch(&[&clip], &loaded.params, &loaded.model).unwrap();
        let same = |x: &Tensor, y: &Tensor| {
            x.shape() == y.shape() && x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits())
        };
        if !(same(&a, &b) && same(&fa, &fb)) {
            differing += 1;
        }
    }
    verdict(
        8,
        "persistence",
        differing == 0,
        &format!("{PERSIST_INPUTS} random inputs after save/load, {differing} not bit-identical"),
    );
}

#[test]
fn criterion_9_pca() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, k) = (40, 6);
    let data = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let full = pca_project(&data, k).unwrap();
    let gram = full.components.transpose() * &full.components;
    let ortho_err = (gram - DMatrix::<f64>::identity(k, k)).abs().max();

    let dir: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rank1 = DMatrix::from_fn(n, k, |i, j| (i as f64 - 7.5) * dir[j] + 0.25);
    let ratio = pca_project(&rank1, 3).unwrap().explained_ratio[0];

    verdict(
        9,
        "pca",
        ortho_err <= PCA_ORTHO_TOL && (ratio - 1.0).abs() <= PCA_RATIO_TOL,
        &format!(
            "orthonormality error {ortho_err:.1e} <= {PCA_ORTHO_TOL:e}, rank-1 first ratio {ratio:.15} (tol {PCA_RATIO_TOL:e})"
        ),
    );
}
