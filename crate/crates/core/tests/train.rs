use rallycast::court::{CourtSpec, Rally, ShotTypeVocab};
use rallycast::dataset::{synthesize_dataset, SynthConfig};
use rallycast::model::{EmbeddingMode, Model, ModelConfig};
use rallycast::train::{evaluate_loss, train, TrainConfig};
use rallycast::Error;

fn corpus(n: usize, seed: u64) -> Vec<Rally> {
    synthesize_dataset(&SynthConfig {
        n_rallies: n,
        mean_length: 6.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn fresh(rallies: &[Rally], seed: u64) -> Model {
    Model::initialize(
        ModelConfig::new(10, 0),
        ShotTypeVocab::default(),
        rallies,
        CourtSpec::default(),
        seed,
    )
    .unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        learning_rate: 3e-3,
        eval_every: 2,
        eval_samples: 3,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_runs() {
    let data = corpus(12, 1);
    let (train_set, val) = data.split_at(9);
    let m = fresh(&data, 2);
    let (a, ra) = train(&m, train_set, val, &quick(4), |_| {}).unwrap();
    let (b, rb) = train(&m, train_set, val, &quick(4), |_| {}).unwrap();
    assert_eq!(ra.epochs, rb.epochs);
    assert_eq!(ra.to_csv(), rb.to_csv());
    assert_eq!(a, b);
    assert_eq!(ra.epochs.len(), 4);
    assert!(ra.epochs.iter().all(|e| e.total_loss.is_finite()));
    let other = TrainConfig {
        seed: 6,
        ..quick(4)
    };
    assert_ne!(
        train(&m, train_set, val, &other, |_| {}).unwrap().1.epochs,
        ra.epochs
    );
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = corpus(8, 3);
    let m = fresh(&data, 4);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..quick(3)
    };
    let (out, _) = train(&m, &data, &[], &cfg, |_| {}).unwrap();
    assert_eq!(out.params, m.params);
}

#[test]
fn tiny_step_does_not_increase_batch_loss() {
    for seed in 0..3 {
        let data = corpus(6, 10 + seed);
        let mut m = fresh(&data, seed);
        m.config.dropout_rate = 0.0;
        let before = evaluate_loss(&m, &data).unwrap().total;
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: data.len(),
            learning_rate: 1e-6,
            ..quick(1)
        };
        let (out, _) = train(&m, &data, &[], &cfg, |_| {}).unwrap();
        let after = evaluate_loss(&out, &data).unwrap().total;
        assert!(after <= before + 1e-6, "{before} -> {after}");
    }
}

#[test]
fn best_validation_epoch_is_returned() {
    let data = corpus(14, 7);
    let (train_set, val) = data.split_at(10);
    let m = fresh(&data, 8);
    let mut seen = Vec::new();
    let (out, rep) = train(&m, train_set, val, &quick(6), |e| seen.push(e.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
    let scored: Vec<(usize, f64)> = rep
        .epochs
        .iter()
        .filter_map(|e| e.val_score.map(|s| (e.epoch, s)))
        .collect();
    assert_eq!(
        scored.iter().map(|s| s.0).collect::<Vec<_>>(),
        vec![2, 4, 6]
    );
    let best = scored
        .iter()
        .fold(scored[0], |b, &s| if s.1 < b.1 { s } else { b });
    assert_eq!(rep.best_epoch, best.0);
    // retraining for exactly best_epoch epochs reproduces the returned parameters
    let (again, _) = train(&m, train_set, val, &quick(best.0), |_| {}).unwrap();
    assert_eq!(again.params, out.params);
}

#[test]
fn report_csv_layout() {
    let data = corpus(6, 9);
    let m = fresh(&data, 1);
    let (_, rep) = train(&m, &data[..4], &data[4..], &quick(3), |_| {}).unwrap();
    let csv = rep.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,shot_loss,area_loss,total_loss,val_score");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,") && lines[1].ends_with(','));
    assert_eq!(lines[2].split(',').count(), 5);
    assert!(!lines[2].ends_with(','));
}

#[test]
fn rejects_bad_inputs() {
    let data = corpus(4, 2);
    let m = fresh(&data, 1);
    let mut short = data.clone();
    short[1].strokes.truncate(4);
    assert!(matches!(
        train(&m, &short, &[], &quick(1), |_| {}),
        Err(Error::Input(_))
    ));
    assert!(matches!(
        train(&m, &[], &[], &quick(1), |_| {}),
        Err(Error::Input(_))
    ));
    for cfg in [
        TrainConfig {
            epochs: 0,
            ..quick(1)
        },
        TrainConfig {
            batch_size: 0,
            ..quick(1)
        },
        TrainConfig {
            learning_rate: -1.0,
            ..quick(1)
        },
        TrainConfig {
            learning_rate: f64::NAN,
            ..quick(1)
        },
        TrainConfig {
            eval_samples: 0,
            ..quick(1)
        },
    ] {
        assert!(matches!(
            train(&m, &data, &[], &cfg, |_| {}),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn overflow_aborts_with_batch_ids() {
    let data = corpus(5, 4);
    let mut m = fresh(&data, 1);
    m.params
        .input_w
        .data_mut()
        .iter_mut()
        .for_each(|w| *w = 1e300);
    let cfg = TrainConfig {
        batch_size: 8,
        ..quick(1)
    };
    match train(&m, &data, &[], &cfg, |_| {}) {
        Err(Error::Diverged {
            epoch, rally_ids, ..
        }) => {
            assert_eq!(epoch, 1);
            let mut ids = rally_ids.clone();
            ids.sort();
            let mut want: Vec<String> = data.iter().map(|r| r.rally_id.clone()).collect();
            want.sort();
            assert_eq!(ids, want);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn default_config_stays_finite_across_seeds() {
    for seed in 0..10 {
        let data = corpus(16, 100 + seed);
        let m = fresh(&data, seed);
        let cfg = TrainConfig {
            epochs: 5,
            eval_samples: 2,
            seed,
            ..Default::default()
        };
        let (out, rep) = train(&m, &data[..12], &data[12..], &cfg, |_| {}).unwrap();
        assert!(out.params.is_finite());
        assert!(rep.epochs.iter().all(|e| e.total_loss.is_finite()));
    }
}

#[test]
fn baseline_mode_trains_too() {
    let data = corpus(8, 5);
    let mut c = ModelConfig::new(10, 0);
    c.embedding_mode = EmbeddingMode::Baseline;
    let m = Model::initialize(c, ShotTypeVocab::default(), &data, CourtSpec::default(), 3).unwrap();
    let (_, rep) = train(&m, &data, &[], &quick(3), |_| {}).unwrap();
    assert!(rep.epochs[2].total_loss < rep.epochs[0].total_loss);
}
