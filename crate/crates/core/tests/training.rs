use andt::data::{synth_moving_dot, SynthConfig, VideoSequence};
use andt::model::{init_params, predict_batch, ModelConfig};
use andt::training::{
    adam_update, decode_checkpoint, encode_checkpoint, fit, load_checkpoint, save_checkpoint, AdamConfig, Checkpoint,
    OptimizerState, Precision, TrainConfig, TrainMode, Trainer,
};
use andt::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_video(frames: usize, seed: u64) -> VideoSequence {
    let cfg = SynthConfig { size: 8, radius: 2.0, velocity: (1.0, 1.0), frames, seed, ..SynthConfig::default() };
    synth_moving_dot(&cfg).unwrap().0
}

fn tiny_for(mode: TrainMode) -> ModelConfig {
    let mut m = ModelConfig::tiny();
    m.output_frames = mode.output_frames(m.frames);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adam_step_is_bounded_by_lr(lr in 0.0f64..1e-3, seed in any::<u64>()) {
        let cfg = ModelConfig::tiny();
        let params = init_params(&cfg, 1).unwrap().weights;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grads = params.map(|_, t| Tensor::randn(t.shape().to_vec(), &mut rng).unwrap());
        let mut state = OptimizerState::zeros_like(&params);
        let mut updated = params.clone();
        adam_update(&mut updated, &grads, &mut state, &AdamConfig { lr, ..AdamConfig::default() }).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in updated.values().into_iter().zip(params.values()) {
            worst = worst.max(a.max_abs_diff(b).unwrap());
        }
        prop_assert!(worst <= lr * (1.0 + 1e-9));
        if lr == 0.0 {
            prop_assert_eq!(&updated, &params);
        }
    }
}

#[test]
fn adam_zero_lr_is_identity() {
    let params = init_params(&ModelConfig::tiny(), 2).unwrap().weights;
    let grads = params.map(|_, t| t.map(|v| v + 1.0));
    let mut state = OptimizerState::zeros_like(&params);
    let mut updated = params.clone();
    adam_update(&mut updated, &grads, &mut state, &AdamConfig { lr: 0.0, ..AdamConfig::default() }).unwrap();
    assert_eq!(updated, params);
    assert_eq!(state.step, 1);
}

#[test]
fn single_batch_loss_is_essentially_non_increasing() {
    // six frames and T=2 give exactly four windows, i.e. one batch
    let video = tiny_video(6, 4);
    let train = TrainConfig { learning_rate: 3e-3, batch_size: 4, epochs: 60, ..TrainConfig::default() };
    let trainer = fit(&[video], &ModelConfig::tiny(), &train).unwrap();
    let losses = &trainer.history.epoch_loss;
    assert_eq!(losses.len(), 60);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "loss rose from {} to {}", w[0], w[1]);
    }
    assert!(losses[59] < losses[0] * 0.5);
}

#[test]
fn all_modes_train_on_the_same_architecture() {
    let video = tiny_video(10, 5);
    let mut shapes = Vec::new();
    for mode in TrainMode::ALL {
        let model = tiny_for(mode);
        let train = TrainConfig { mode, epochs: 2, ..TrainConfig::default() };
        let trainer = fit(std::slice::from_ref(&video), &model, &train).unwrap();
        assert!(trainer.history.epoch_loss.iter().all(|l| l.is_finite()));
        let names: Vec<(String, Vec<usize>)> = trainer
            .params
            .weights
            .entries()
            .into_iter()
            .filter(|(n, _)| !n.starts_with("head"))
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        shapes.push(names);
    }
    assert!(shapes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn fit_is_deterministic() {
    let video = tiny_video(12, 6);
    let train = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let a = fit(std::slice::from_ref(&video), &ModelConfig::tiny(), &train).unwrap();
    let b = fit(std::slice::from_ref(&video), &ModelConfig::tiny(), &train).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.history.epoch_loss, b.history.epoch_loss);
}

#[test]
fn checkpoint_round_trip_preserves_forward_and_resumes_exactly() {
    let video = tiny_video(12, 7);
    let model = ModelConfig::tiny();
    let two = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let mut first = Trainer::new(model.clone(), two.clone()).unwrap();
    first.fit(std::slice::from_ref(&video)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.andt");
    let ckpt = Checkpoint::from_trainer(&first, serde_json::json!({"note": "round trip"}));
    save_checkpoint(&ckpt, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(encode_checkpoint(&loaded).unwrap(), std::fs::read(&path).unwrap());
    assert_eq!(loaded.metadata["note"], "round trip");

    let clip = video.clip(3, model.frames).unwrap();
    let before = predict_batch(&[&clip], &first.params, &model).unwrap();
    let after = predict_batch(&[&clip], &loaded.params, &loaded.model).unwrap();
    assert_eq!(before, after);

    let mut resumed = loaded.into_trainer();
    resumed.fit(std::slice::from_ref(&video)).unwrap();
    let four = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let straight = fit(std::slice::from_ref(&video), &model, &four).unwrap();
    assert_eq!(resumed.params, straight.params);
    assert_eq!(resumed.optimizer.step, straight.optimizer.step);
    assert_eq!(resumed.history.epoch_loss, straight.history.epoch_loss);
}

#[test]
fn f32_checkpoints_are_smaller_and_still_exact() {
    let video = tiny_video(10, 8);
    let model = ModelConfig::tiny();
    let mk = |precision| {
        let train = TrainConfig { epochs: 1, precision, ..TrainConfig::default() };
        let t = fit(std::slice::from_ref(&video), &model, &train).unwrap();
        (t.params.clone(), encode_checkpoint(&Checkpoint::from_trainer(&t, serde_json::Value::Null)).unwrap())
    };
    let (_, wide) = mk(Precision::F64);
    let (params, narrow) = mk(Precision::F32);
    assert!(narrow.len() < wide.len());
    assert_eq!(decode_checkpoint(&narrow).unwrap().params, params);
}
