//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! visible in `cargo test` output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rallycast::analysis::{shot_distribution, zone_histogram, Grouping};
use rallycast::court::{
    normalize_coord, CourtSpec, Point, Rally, ShotTypeVocab, Side, Stroke, TAU,
};
use rallycast::dataset::{filter_training, parse_dataset, quantize6, FilterPolicy};
use rallycast::model::{
    positional_encoding, EmbeddingMode, Model, ModelConfig, ModelParams, PlayerIndex,
};
use rallycast::numerics::check;
use rallycast::rng::SeedStream;
use rallycast::sampler::{
    eval_best_of_k, generate_sets, generate_suffix, predictions_to_csv, read_predictions,
    sample_set_loss, score_min6, score_sets, GeneratedStroke, RallyPrediction, SampleSet,
};
use rallycast::train::{evaluate_loss, train, TrainConfig};
use rand::seq::SliceRandom;
use rand::Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rallycast"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn run(cmd: &mut Command) -> Result<Output, String> {
    let out = ok(cmd.output())?;
    ensure(out.status.success(), || {
        format!("{:?} failed: {}", cmd, String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out)
}

// ---------------------------------------------------------------- fixtures

fn stroke(k: usize, shot_type: usize, landing: Point) -> Stroke {
    Stroke {
        round_index: k,
        player: Side::for_round(k),
        shot_type,
        landing,
        player_location: Point::new(3.0, 3.5),
    }
}

fn rally_of(id: &str, types: &[usize], landings: &[Point]) -> Rally {
    Rally {
        rally_id: id.into(),
        match_id: "m1".into(),
        player_a: "alice".into(),
        player_b: "bob".into(),
        strokes: types
            .iter()
            .zip(landings)
            .enumerate()
            .map(|(i, (&t, &p))| stroke(i + 1, t, p))
            .collect(),
    }
}

fn random_rally(id: &str, len: usize, rng: &mut impl Rng) -> Rally {
    let types: Vec<usize> = (0..len)
        .map(|k| {
            if k == 0 {
                rng.random_range(0..2)
            } else {
                rng.random_range(2..10)
            }
        })
        .collect();
    let pts: Vec<Point> = (0..len)
        .map(|_| {
            Point::new(
                quantize6(rng.random::<f64>() * 6.1),
                quantize6(6.7 + rng.random::<f64>() * 6.7),
            )
        })
        .collect();
    rally_of(id, &types, &pts)
}

fn random_sets(truths: &[Rally], rng: &mut impl Rng) -> Vec<SampleSet> {
    (0..6)
        .map(|_| {
            truths
                .iter()
                .filter(|r| r.len() > TAU)
                .map(|r| RallyPrediction {
                    rally_id: r.rally_id.clone(),
                    strokes: (TAU + 1..=r.len())
                        .map(|k| {
                            let raw: Vec<f64> =
                                (0..10).map(|_| rng.random::<f64>().powi(4)).collect();
                            let s: f64 = raw.iter().sum();
                            GeneratedStroke {
                                round_index: k,
                                shot_type: 2,
                                landing: Point::new(
                                    quantize6(rng.random::<f64>() * 7.0),
                                    quantize6(rng.random::<f64>() * 14.0),
                                ),
                                type_probs: raw.iter().map(|p| quantize6(p / s)).collect(),
                            }
                        })
                        .collect(),
                })
                .collect()
        })
        .collect()
}

/// Loss of sample `sample` computed straight from prediction-file text and
/// dataset-file text.
fn brute_force_loss(pred_csv: &str, sample: usize, truth_csv: &str) -> f64 {
    let truth: Vec<Vec<&str>> = truth_csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let names: Vec<&str> = pred_csv
        .lines()
        .next()
        .unwrap()
        .split(',')
        .skip(5)
        .collect();
    let (mut sum, mut n) = (0.0, 0usize);
    for line in pred_csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] != sample.to_string() {
            continue;
        }
        let t = truth
            .iter()
            .find(|t| t[1] == f[0] && t[2] == f[2])
            .expect("truth row");
        let col = names
            .iter()
            .position(|c| *c == format!("prob_{}", t[4].replace(' ', "_")))
            .unwrap();
        let p: f64 = f[5 + col].parse().unwrap();
        let dx = (t[5].parse::<f64>().unwrap() - f[3].parse::<f64>().unwrap()).abs();
        let dy = (t[6].parse::<f64>().unwrap() - f[4].parse::<f64>().unwrap()).abs();
        sum += -p.max(1e-12).ln() + dx + dy;
        n += 1;
    }
    sum / n as f64
}

// -------------------------------------------------------------- criteria

fn scorer_oracle() -> Verdict {
    let vocab = ShotTypeVocab::default();
    let mut worst: f64 = 0.0;
    let mut fixtures_checked = 0;
    let mut seed = 0;
    while fixtures_checked < 50 {
        let mut rng = SeedStream::new(seed).child(1).rng();
        seed += 1;
        let truths: Vec<Rally> = (0..rng.random_range(1..6))
            .map(|i| {
                let len = rng.random_range(TAU + 1..14);
                random_rally(&format!("r{i}"), len, &mut rng)
            })
            .collect();
        let sets = random_sets(&truths, &mut rng);
        let pred_csv = predictions_to_csv(&sets, &vocab);
        let truth_csv = rallycast::dataset::dataset_to_csv(&truths, &vocab);
        for (j, set) in sets.iter().enumerate() {
            let ours = ok(sample_set_loss(set, &truths, TAU))?.loss;
            worst = worst.max((ours - brute_force_loss(&pred_csv, j + 1, &truth_csv)).abs());
        }
        fixtures_checked += 1;
    }
    ensure(worst <= 1e-12, || {
        format!("max deviation {worst:e} > 1e-12")
    })?;

    let dir = fixtures().join("hand_case");
    let truth = ok(parse_dataset(&dir.join("truth.csv"), &vocab))?.rallies;
    let sets = ok(read_predictions(&dir.join("predictions.csv"), &vocab))?;
    let score = ok(score_sets(&sets, &truth, TAU))?.score;
    ensure((score - 1.539721).abs() <= 1e-6, || {
        format!("hand case gave {score:.9}")
    })?;
    Ok(format!(
        "50 fixtures, max deviation {worst:.1e}; hand case {score:.6}"
    ))
}

fn min_of_six() -> Verdict {
    let mut rng = SeedStream::new(6).rng();
    for i in 0..1000 {
        let mut v: Vec<f64> = (0..6).map(|_| rng.random_range(-50.0..50.0)).collect();
        if i % 10 == 0 {
            v[rng.random_range(0..6)] = v[0];
        }
        let exact = v.iter().copied().fold(f64::INFINITY, f64::min);
        let s = ok(score_min6(&v))?;
        ensure(s == exact, || format!("sextuple {i}: {s} != {exact}"))?;
        v.shuffle(&mut rng);
        ensure(ok(score_min6(&v))? == s, || {
            format!("sextuple {i}: not permutation invariant")
        })?;
    }
    Ok("1000 sextuples exact and permutation invariant".into())
}

fn tiny_vocab() -> ShotTypeVocab {
    use rallycast::court::ShotType;
    ShotTypeVocab::new(
        ["serve", "net", "smash", "drive"]
            .iter()
            .enumerate()
            .map(|(id, n)| ShotType {
                id,
                name: n.to_string(),
                is_serve: id == 0,
            })
            .collect(),
    )
    .unwrap()
}

fn model_with(mut config: ModelConfig, vocab: ShotTypeVocab, seed: u64) -> Model {
    config.vocab_size = vocab.len();
    config.n_players = 2;
    let params = ModelParams::init(&config, seed);
    let players = PlayerIndex::new(vec!["alice".into(), "bob".into()]);
    Model::new(config, params, vocab, players, CourtSpec::default()).unwrap()
}

fn tiny_model(mode: EmbeddingMode) -> Model {
    let config = ModelConfig {
        embed_dim: 4,
        n_heads: 2,
        n_layers: 1,
        ffn_dim: 8,
        dropout_rate: 0.2,
        vocab_size: 4,
        n_players: 2,
        embedding_mode: mode,
        tau: TAU,
    };
    model_with(config, tiny_vocab(), 21)
}

fn summed_loss(
    model: &Model,
    rally: &Rally,
) -> Result<(rallycast::model::Pass, rallycast::numerics::Var), String> {
    let (mut pass, heads) = ok(model.teacher_forced_pass(rally, Some(SeedStream::new(77).rng())))?;
    let targets = &rally.strokes[TAU..];
    let types: Vec<usize> = targets.iter().map(|s| s.shot_type).collect();
    let pts = targets
        .iter()
        .map(|s| normalize_coord(s.landing, &model.court))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let (shot, area, _) = ok(pass.loss_terms(&heads, &types, &pts))?;
    let total = ok(pass.tape.add(shot, area))?;
    Ok((pass, total))
}

fn full_model_error(mode: EmbeddingMode) -> Result<f64, String> {
    let model = tiny_model(mode);
    // six strokes: five network inputs, two predicted steps
    let r = rally_of(
        "g",
        &[0, 1, 2, 3, 1, 2],
        &[
            Point::new(3.2, 9.1),
            Point::new(1.1, 11.9),
            Point::new(4.8, 7.3),
            Point::new(2.2, 12.6),
            Point::new(5.5, 8.8),
            Point::new(0.7, 10.4),
        ],
    );
    let (pass, loss) = summed_loss(&model, &r)?;
    let grads = ok(pass.tape.backward(loss))?;
    let analytic = pass.w.map(|_, v| grads.wrt(*v));
    let names: Vec<String> = model.params.entries().into_iter().map(|(n, _)| n).collect();
    let mut worst: f64 = 0.0;
    for (i, name) in names.iter().enumerate() {
        let base = model.params.entries()[i].1.clone();
        let numeric = check::central_difference(&base, 1e-5, |probe| {
            let mut m = model.clone();
            let mut k = 0;
            m.params.for_each_mut(|_, a| {
                if k == i {
                    *a = probe.clone();
                }
                k += 1;
            });
            let (p, l) = summed_loss(&m, &r).expect("loss");
            p.tape.value(l).data()[0]
        });
        let got = analytic.entries()[i].1;
        if name.ends_with(".bk") {
            let max = got
                .data()
                .iter()
                .chain(numeric.data())
                .fold(0.0f64, |m, g| m.max(g.abs()));
            ensure(max < 1e-9, || {
                format!("{mode} {name}: key bias gradient {max:e}")
            })?;
            continue;
        }
        worst = worst.max(check::max_relative_error(got, &numeric));
    }
    Ok(worst)
}

fn gradient_integrity() -> Verdict {
    let modified = full_model_error(EmbeddingMode::Modified)?;
    let baseline = full_model_error(EmbeddingMode::Baseline)?;
    ensure(modified < 1e-5 && baseline < 1e-5, || {
        format!("full model rel err modified {modified:e}, baseline {baseline:e}")
    })?;
    let ops = ok(check::check_primitives(3, 11))?;
    let (op, err) = ops.iter().fold(
        ("", 0.0f64),
        |acc, &(n, e)| if e > acc.1 { (n, e) } else { acc },
    );
    ensure(err < 1e-6, || format!("primitive {op}: rel err {err:e}"))?;
    Ok(format!(
        "full model {:.1e}/{:.1e} (modified/baseline); {} primitives, worst {op} {err:.1e}",
        modified,
        baseline,
        ops.len()
    ))
}

fn mode_contract() -> Verdict {
    let r = rally_of(
        "e",
        &[0, 2, 3, 4, 5, 6, 7],
        &(0..7)
            .map(|i| Point::new(1.0 + 0.6 * i as f64, 7.0 + 0.8 * i as f64))
            .collect::<Vec<_>>(),
    );
    let mut report = Vec::new();
    for mode in [EmbeddingMode::Modified, EmbeddingMode::Baseline] {
        let mut c = ModelConfig::new(10, 2);
        c.embedding_mode = mode;
        let mut m = model_with(c, ShotTypeVocab::default(), 2);
        let (_, before) = ok(m.embeddings(&r, &r.strokes))?;
        for v in m.params.player_emb.data_mut() {
            *v += 0.5;
        }
        let (_, after) = ok(m.embeddings(&r, &r.strokes))?;
        let insensitive = before == after;

        let d = m.config.embed_dim;
        m.params.area_w = rallycast::numerics::Array::zeros(&[2, d]);
        m.params.area_b = rallycast::numerics::Array::filled(&[1, d], -1.0);
        m.params.loc_w = rallycast::numerics::Array::zeros(&[2, d]);
        m.params.loc_b = rallycast::numerics::Array::zeros(&[1, d]);
        m.params.player_emb = rallycast::numerics::Array::zeros(m.params.player_emb.shape());
        let (_, a) = ok(m.embeddings(&r, &r.strokes))?;
        let pe = positional_encoding(r.len(), d);
        let keeps_negative = a
            .data()
            .iter()
            .zip(pe.data())
            .all(|(x, p)| (x - p + 1.0).abs() < 1e-12);

        let expected = mode == EmbeddingMode::Modified;
        ensure(
            insensitive == expected && keeps_negative == expected,
            || {
                format!(
                    "{mode}: player-insensitive {insensitive}, keeps negatives {keeps_negative}"
                )
            },
        )?;
        report.push(format!(
            "{mode}: insensitive={insensitive} negatives={keeps_negative}"
        ));
    }
    Ok(report.join("; "))
}

fn overfit() -> Verdict {
    let vocab = ShotTypeVocab::default();
    let court = CourtSpec::default();
    let rallies = ok(parse_dataset(&fixtures().join("corpus32.csv"), &vocab))?.rallies;
    let kept = filter_training(&rallies, &FilterPolicy::default()).kept;
    ensure(kept.len() == 32, || {
        format!("{} of 32 rallies usable", kept.len())
    })?;

    let config = ModelConfig::new(vocab.len(), 0);
    let model = ok(Model::initialize(config, vocab, &kept, court, 1))?;
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 16,
        learning_rate: 5e-3,
        seed: 1,
        ..TrainConfig::default()
    };
    ensure(
        model.config.embed_dim == 16 && model.config.dropout_rate == 0.2,
        || "unexpected defaults".into(),
    )?;

    let before = ok(score_sets(
        &ok(generate_sets(&model, &kept, 6, 1))?,
        &kept,
        TAU,
    ))?
    .score;
    let pool = ok(rayon::ThreadPoolBuilder::new().num_threads(1).build())?;
    let (trained, report) = ok(pool.install(|| train(&model, &kept, &[], &cfg, |_| {})))?;
    let after = ok(score_sets(
        &ok(generate_sets(&trained, &kept, 6, 1))?,
        &kept,
        TAU,
    ))?
    .score;
    let shot = ok(evaluate_loss(&trained, &kept))?.shot;
    let first = report
        .epochs
        .first()
        .map(|e| e.total_loss)
        .unwrap_or(f64::NAN);
    let last = report
        .epochs
        .last()
        .map(|e| e.total_loss)
        .unwrap_or(f64::NAN);
    let drop = 1.0 - after / before;

    ensure(shot < 0.1, || format!("train shot loss {shot:.4} >= 0.1"))?;
    ensure(drop >= 0.6, || {
        format!(
            "score {before:.4} -> {after:.4} is only {:.1}% lower",
            100.0 * drop
        )
    })?;
    ensure(last <= 0.5 * first, || {
        format!("total loss {first:.4} -> {last:.4}")
    })?;
    Ok(format!(
        "shot loss {shot:.4}; best-of-6 score {before:.4} -> {after:.4} ({:.1}% lower); total {first:.3} -> {last:.3}; {:.1} s training",
        100.0 * drop,
        report.wall_clock_s
    ))
}

fn serve_mask() -> Verdict {
    let mut count = 0;
    let mut seed = 0;
    while count < 10_000 {
        let mut c = ModelConfig::new(10, 2);
        c.embedding_mode = EmbeddingMode::Modified;
        let mut m = model_with(c, ShotTypeVocab::default(), seed);
        // bias the head toward serves so the mask has something to remove
        for s in m.vocab.serve_ids() {
            m.params.type_head_b.data_mut()[s] = 3.0;
        }
        let mut rng = SeedStream::new(seed).child(5).rng();
        let r = random_rally("s", TAU + 1, &mut rng);
        let g = ok(generate_suffix(&m, &r, &r.strokes[..TAU], 25, &mut rng))?;
        if let Some(bad) = g
            .iter()
            .find(|s| s.round_index < 2 || m.vocab.is_serve(s.shot_type))
        {
            return Err(format!(
                "round {} sampled {}",
                bad.round_index,
                m.vocab.name(bad.shot_type)
            ));
        }
        count += g.len();
        seed += 1;
    }
    Ok(format!("{count} strokes, no serves"))
}

fn best_of_k() -> Verdict {
    let mut c = ModelConfig::new(10, 2);
    c.embedding_mode = EmbeddingMode::Modified;
    let m = model_with(c, ShotTypeVocab::default(), 4);
    let vocab = ShotTypeVocab::default();
    let truths = ok(parse_dataset(&fixtures().join("corpus32.csv"), &vocab))?.rallies;
    let scored: Vec<Rally> = truths.into_iter().filter(|r| r.len() > TAU).collect();
    let k1 = ok(eval_best_of_k(&m, &scored, 1, 17))?;
    let k10 = ok(eval_best_of_k(&m, &scored, 10, 17))?;
    let k100 = ok(eval_best_of_k(&m, &scored, 100, 17))?;
    for ((a, b), c) in k1.rallies.iter().zip(&k10.rallies).zip(&k100.rallies) {
        ensure(c.best_sum <= b.best_sum && b.best_sum <= a.best_sum, || {
            format!(
                "rally {}: {} / {} / {}",
                a.rally_id, a.best_sum, b.best_sum, c.best_sum
            )
        })?;
    }
    Ok(format!(
        "{} rallies; score k=1 {:.4}, k=10 {:.4}, k=100 {:.4}",
        k1.rallies.len(),
        k1.score,
        k10.score,
        k100.score
    ))
}

fn determinism() -> Verdict {
    let tmp = ok(tempfile::tempdir())?;
    let corpus = fixtures().join("corpus32.csv");
    let mut outputs = Vec::new();
    for run_id in ["a", "b"] {
        let dir = tmp.path().join(run_id);
        ok(fs::create_dir_all(&dir))?;
        let synth = dir.join("synth.csv");
        run(bin()
            .args(["synth", "--n", "24", "--seed", "5", "--out"])
            .arg(&synth))?;
        let model_dir = dir.join("model");
        run(bin()
            .args([
                "train",
                "--epochs",
                "4",
                "--eval-every",
                "2",
                "--eval-samples",
                "3",
                "--seed",
                "2",
                "--data",
            ])
            .arg(&corpus)
            .arg("--out")
            .arg(&model_dir))?;
        let pred = dir.join("pred.csv");
        run(bin()
            .args(["predict", "--seed", "3", "--checkpoint"])
            .arg(model_dir.join("model.ckpt"))
            .arg("--data")
            .arg(&corpus)
            .arg("--out")
            .arg(&pred))?;
        let score_out = run(bin()
            .arg("score")
            .arg("--predictions")
            .arg(&pred)
            .arg("--data")
            .arg(&corpus))?;
        let files = [
            synth.clone(),
            model_dir.join("model.ckpt"),
            model_dir.join("train_report.csv"),
            pred.clone(),
            dir.join("pred.csv.score.csv"),
        ];
        let mut bytes = files
            .iter()
            .map(fs::read)
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        bytes.push(score_out.stdout);
        outputs.push(bytes);
    }
    let labels = [
        "synth",
        "checkpoint",
        "train report",
        "predictions",
        "score file",
        "score stdout",
    ];
    for (i, label) in labels.iter().enumerate() {
        ensure(outputs[0][i] == outputs[1][i], || {
            format!("{label} differs between runs")
        })?;
    }
    Ok("synth, train, predict and score outputs byte-identical across two runs".into())
}

fn analysis_partitions() -> Verdict {
    let vocab = ShotTypeVocab::default();
    let court = CourtSpec::default();
    let rallies = ok(parse_dataset(&fixtures().join("corpus32.csv"), &vocab))?.rallies;
    let mut worst: f64 = 0.0;
    for g in Grouping::ALL {
        let t = ok(shot_distribution(&rallies, &vocab, &court, g))?;
        let mut keys: Vec<&str> = t.rows.iter().map(|r| r.key.as_str()).collect();
        keys.dedup();
        for key in keys {
            let s: f64 = t.group(key).iter().map(|r| r.fraction).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    ensure(worst <= 1e-9, || {
        format!("group fractions off by {worst:e}")
    })?;

    let mut rng = SeedStream::new(99).rng();
    let half = court.net_y();
    let pts: Vec<Point> = (0..100_000)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * court.width_m,
                half + rng.random::<f64>() * half,
            )
        })
        .collect();
    let f = ok(zone_histogram(pts, &court))?.fractions();
    let dev = f
        .iter()
        .take(9)
        .fold(0.0f64, |m, x| m.max((x - 1.0 / 9.0).abs()));
    ensure(dev <= 0.02, || {
        format!("zone fraction deviates {dev:.4} from 1/9")
    })?;
    Ok(format!(
        "fraction sums within {worst:.1e}; zone deviation {dev:.4}"
    ))
}

fn trend_table_ok(path: &Path, vocab: &ShotTypeVocab) -> Result<usize, String> {
    let text = ok(fs::read_to_string(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    ensure(
        header.len() == 2 + vocab.len() && header[..2] == ["ball_round", "strokes"],
        || format!("{}: bad header", path.display()),
    )?;
    let mut prev = TAU;
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        ensure(f.len() == header.len(), || {
            format!("{}: ragged row '{line}'", path.display())
        })?;
        let round: usize = ok(f[0].parse())?;
        let n: usize = ok(f[1].parse())?;
        let probs = f[2..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let sum: f64 = probs.iter().sum();
        ensure(
            round > prev
                && n > 0
                && (sum - 1.0).abs() < 1e-4
                && probs.iter().all(|p| (0.0..=1.0).contains(p)),
            || format!("{}: bad row '{line}'", path.display()),
        )?;
        prev = round;
        rows += 1;
    }
    ensure(rows > 0, || format!("{}: no rows", path.display()))?;
    Ok(rows)
}

fn compare_harness() -> Verdict {
    let tmp = ok(tempfile::tempdir())?;
    run(bin()
        .args([
            "compare",
            "--epochs",
            "10",
            "--eval-every",
            "5",
            "--eval-samples",
            "6",
            "--seed",
            "1",
            "--data",
        ])
        .arg(fixtures().join("corpus32.csv"))
        .arg("--out")
        .arg(tmp.path()))?;
    let vocab = ShotTypeVocab::default();
    let mut rows = Vec::new();
    for mode in ["baseline", "modified"] {
        rows.push(trend_table_ok(
            &tmp.path().join(mode).join("analysis_trend_ball_round.csv"),
            &vocab,
        )?);
    }
    let combined = ok(fs::read_to_string(
        tmp.path().join("analysis_trend_ball_round_by_mode.csv"),
    ))?;
    ensure(combined.lines().count() == 1 + rows[0] + rows[1], || {
        "combined table row count".into()
    })?;
    Ok(format!(
        "trend tables with {} (baseline) and {} (modified) rounds",
        rows[0], rows[1]
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("scorer oracle", Duration::from_secs(10), scorer_oracle),
        ("min-of-6", Duration::from_secs(1), min_of_six),
        (
            "gradient integrity",
            Duration::from_secs(120),
            gradient_integrity,
        ),
        (
            "embedding mode contract",
            Duration::from_secs(10),
            mode_contract,
        ),
        ("overfit experiment", Duration::from_secs(300), overfit),
        ("serve mask", Duration::from_secs(30), serve_mask),
        ("best-of-k monotonicity", Duration::MAX, best_of_k),
        ("determinism", Duration::MAX, determinism),
        ("analysis partitions", Duration::MAX, analysis_partitions),
        (
            "baseline vs modified harness",
            Duration::MAX,
            compare_harness,
        ),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        let verdict = match verdict {
            Ok(detail) if took > limit => {
                Err(format!("{detail}; took {took:.1?}, limit {limit:.0?}"))
            }
            v => v,
        };
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.2} s]", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.2} s]", took.as_secs_f64());
            }
        }
    }
    println!("{} of 10 acceptance criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
