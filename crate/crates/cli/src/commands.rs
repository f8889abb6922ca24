use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rallycast::analysis::{
    landing_zone_distribution, predicted_type_vote, round_trend, shot_distribution,
    table_file_name, type_probability_summary, type_summary_csv, Grouping,
};
use rallycast::court::{validate_rally, Rally, ShotTypeVocab, TAU};
use rallycast::dataset::{
    filter_training, parse_dataset, split, synthesize_dataset, write_dataset, write_rejects,
};
use rallycast::model::{read_checkpoint, write_checkpoint, EmbeddingMode, Model};
use rallycast::sampler::{
    generate_open_sets, generate_sets, read_predictions, score_sets, write_predictions, SampleSet,
};
use rallycast::train::{train, TrainReport};
use rallycast::{Error, Result};

use crate::config::RunConfig;
use crate::Command;

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<ExitCode> {
    match cmd {
        Command::Synth => synth(cfg),
        Command::Validate => validate(cfg),
        Command::Train => train_cmd(cfg),
        Command::Predict {
            checkpoint,
            open_ended,
        } => predict(cfg, &checkpoint, open_ended),
        Command::Score { predictions } => score(cfg, &predictions),
        Command::Analyze { kind, predictions } => analyze(cfg, &kind, predictions.as_deref()),
        Command::Compare => compare(cfg),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| {
        Error::Config(format!(
            "--{flag} (or '{flag}' in the config file) is required"
        ))
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Parses a dataset, writing malformed rows to the rejects file.
fn load(path: &Path, vocab: &ShotTypeVocab) -> Result<(Vec<Rally>, usize)> {
    let parsed = parse_dataset(path, vocab)?;
    let n_rejects = parsed.rejects.len();
    if n_rejects > 0 {
        let out = write_rejects(path, &parsed.rejects)?;
        eprintln!("{n_rejects} rows rejected; see {}", out.display());
    }
    Ok((parsed.rallies, n_rejects))
}

fn synth(cfg: &RunConfig) -> Result<ExitCode> {
    let out = required(&cfg.out, "out")?;
    let rallies = synthesize_dataset(&cfg.synth_config(cfg.vocab()?))?;
    write_dataset(out, &rallies, &cfg.vocab()?)?;
    let strokes: usize = rallies.iter().map(Rally::len).sum();
    println!(
        "wrote {} rallies ({strokes} strokes) to {}",
        rallies.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(cfg: &RunConfig) -> Result<ExitCode> {
    let data = required(&cfg.data, "data")?;
    let vocab = cfg.vocab()?;
    let (rallies, n_rejects) = load(data, &vocab)?;
    let mut n_violations = 0;
    for r in &rallies {
        for v in validate_rally(r, &vocab, cfg.strict_serve) {
            println!("rally {}: {v}", r.rally_id);
            n_violations += 1;
        }
    }
    println!(
        "{} rallies, {n_violations} violations, {n_rejects} rejected rows",
        rallies.len()
    );
    Ok(if n_violations == 0 && n_rejects == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Filtered training rallies and the validation rallies.
fn prepare(cfg: &RunConfig, vocab: &ShotTypeVocab) -> Result<(Vec<Rally>, Vec<Rally>, Vec<Rally>)> {
    let data = required(&cfg.data, "data")?;
    let (rallies, _) = load(data, vocab)?;
    let outcome = filter_training(&rallies, &cfg.filter);
    if !outcome.dropped.is_empty() {
        println!(
            "filter dropped {} of {} rallies",
            outcome.dropped.len(),
            rallies.len()
        );
    }
    let kept = outcome.kept;
    if kept.is_empty() {
        return Err(Error::Input("no rallies left after filtering".into()));
    }
    let (train_set, val_set) = if cfg.train_fraction >= 1.0 {
        (kept.clone(), Vec::new())
    } else {
        let s = split(&kept, cfg.train_fraction, cfg.seed, cfg.split_by_match)?;
        (s.train, s.validation)
    };
    println!(
        "{} training rallies, {} validation rallies",
        train_set.len(),
        val_set.len()
    );
    Ok((kept, train_set, val_set))
}

fn fit(
    cfg: &RunConfig,
    mode: EmbeddingMode,
    out_dir: &Path,
) -> Result<(Model, TrainReport, Vec<Rally>)> {
    let vocab = cfg.vocab()?;
    let (kept, train_set, val_set) = prepare(cfg, &vocab)?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.embedding_mode = mode;
    let model = Model::initialize(model_cfg, vocab, &kept, cfg.court, cfg.seed)?;
    let (trained, mut report) = train(&model, &train_set, &val_set, &cfg.train, |e| {
        let val = e
            .val_score
            .map(|v| format!(" val {v:.6}"))
            .unwrap_or_default();
        println!(
            "epoch {} shot {:.6} area {:.6} total {:.6}{val}",
            e.epoch, e.shot_loss, e.area_loss, e.total_loss
        );
    })?;
    make_dir(out_dir)?;
    let ckpt = out_dir.join("model.ckpt");
    write_checkpoint(&ckpt, &trained)?;
    write(&out_dir.join("train_report.csv"), &report.to_csv())?;
    write(&out_dir.join("run_config.txt"), &cfg.to_text())?;
    report.checkpoint = Some(ckpt.clone());
    println!(
        "best epoch {}; checkpoint {}",
        report.best_epoch,
        ckpt.display()
    );
    eprintln!("training took {:.1} s", report.wall_clock_s);
    let eval_set = if val_set.iter().any(|r| r.len() > TAU) {
        val_set
    } else {
        train_set
    };
    Ok((trained, report, eval_set))
}

fn train_cmd(cfg: &RunConfig) -> Result<ExitCode> {
    let out = required(&cfg.out, "out")?;
    fit(cfg, cfg.model.embedding_mode, out)?;
    Ok(ExitCode::SUCCESS)
}

fn predict(cfg: &RunConfig, checkpoint: &Path, open_ended: bool) -> Result<ExitCode> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let model = read_checkpoint(checkpoint)?;
    let (rallies, _) = load(data, &model.vocab)?;
    let sets = if open_ended {
        generate_open_sets(&model, &rallies, cfg.samples, cfg.horizon, cfg.seed)?
    } else {
        generate_sets(&model, &rallies, cfg.samples, cfg.seed)?
    };
    write_predictions(out, &sets, &model.vocab)?;
    let rows: usize = sets.iter().flatten().map(|p| p.strokes.len()).sum();
    println!(
        "wrote {rows} prediction rows ({} sample sets) to {}",
        sets.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn score(cfg: &RunConfig, predictions: &Path) -> Result<ExitCode> {
    let data = required(&cfg.data, "data")?;
    let vocab = cfg.vocab()?;
    let (truth, _) = load(data, &vocab)?;
    let sets = read_predictions(predictions, &vocab)?;
    let report = score_sets(&sets, &truth, TAU)?;
    for (i, l) in report.set_losses.iter().enumerate() {
        println!("l_{} {l:.6}", i + 1);
    }
    println!("Score {:.6}", report.score);
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| with_suffix(predictions, ".score.csv"));
    write(&out, &report.to_csv())?;
    write(&with_suffix(&out, ".rounds.csv"), &report.rounds_csv())?;
    Ok(ExitCode::SUCCESS)
}

fn need_predictions(p: Option<&Path>, kind: &str, vocab: &ShotTypeVocab) -> Result<Vec<SampleSet>> {
    let p = p.ok_or_else(|| Error::Config(format!("--kind {kind} needs --predictions")))?;
    read_predictions(p, vocab)
}

fn analyze(cfg: &RunConfig, kind: &str, predictions: Option<&Path>) -> Result<ExitCode> {
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let vocab = cfg.vocab()?;
    let groupings: &[Grouping] = match kind {
        "shots" => &Grouping::ALL,
        "shot-by-round" => &[Grouping::BallRound],
        "shot-by-player" => &[Grouping::Player],
        "shot-by-landing-zone" => &[Grouping::LandingZone],
        "shot-by-location-zone" => &[Grouping::PlayerLocationZone],
        _ => &[],
    };
    let mut tables: Vec<(String, String)> = Vec::new();
    if !groupings.is_empty() {
        let data = required(&cfg.data, "data")?;
        let (rallies, _) = load(data, &vocab)?;
        for &g in groupings {
            let t = shot_distribution(&rallies, &vocab, &cfg.court, g)?;
            tables.push((table_file_name("shots", &g.to_string()), t.to_csv()));
        }
    } else {
        match kind {
            "vote" => {
                let v = predicted_type_vote(&need_predictions(predictions, kind, &vocab)?, &vocab)?;
                tables.push((table_file_name("vote", "stroke"), v.strokes_csv()));
                tables.push((table_file_name("vote", "type"), v.distribution_csv()));
            }
            "zones" => {
                let h = landing_zone_distribution(
                    &need_predictions(predictions, kind, &vocab)?,
                    &cfg.court,
                )?;
                tables.push((table_file_name("zones", "landing_zone"), h.to_csv()));
            }
            "trend" => {
                let t = round_trend(&need_predictions(predictions, kind, &vocab)?, &vocab)?;
                tables.push((table_file_name("trend", "ball_round"), t.to_csv(&vocab)));
            }
            "probs" => {
                let s = type_probability_summary(
                    &need_predictions(predictions, kind, &vocab)?,
                    &vocab,
                )?;
                tables.push((
                    table_file_name("probs", "type"),
                    type_summary_csv(&s, &vocab),
                ));
            }
            _ => return Err(Error::Config(format!("unknown analysis kind '{kind}'"))),
        }
    }
    make_dir(&out_dir)?;
    for (name, text) in tables {
        let path = out_dir.join(name);
        write(&path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn compare(cfg: &RunConfig) -> Result<ExitCode> {
    let out = required(&cfg.out, "out")?;
    let vocab = cfg.vocab()?;
    let mut combined = String::new();
    for mode in [EmbeddingMode::Baseline, EmbeddingMode::Modified] {
        println!("== {mode} ==");
        let dir = out.join(mode.to_string());
        let (model, _, eval_set) = fit(cfg, mode, &dir)?;
        let sets = generate_sets(&model, &eval_set, cfg.samples, cfg.seed)?;
        write_predictions(&dir.join("predictions.csv"), &sets, &vocab)?;
        let trend = round_trend(&sets, &vocab)?;
        let table = trend.to_csv(&vocab);
        write(&dir.join(table_file_name("trend", "ball_round")), &table)?;
        let mut lines = table.lines();
        if combined.is_empty() {
            combined.push_str(&format!(
                "embedding_mode,{}\n",
                lines.next().unwrap_or_default()
            ));
        } else {
            lines.next();
        }
        for l in lines {
            combined.push_str(&format!("{mode},{l}\n"));
        }
    }
    let path = out.join(table_file_name("trend", "ball_round_by_mode"));
    write(&path, &combined)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
