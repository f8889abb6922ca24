//! Stochastic generation of rally suffixes and the competition metric.
//!
//! Per predicted stroke the loss is `-ln p(true type) + |x - x̂| + |y - ŷ|`
//! with coordinates in meters. A sample set's loss `l` averages that term
//! over every predicted stroke of every rally, and the reported score is the
//! minimum over six sample sets.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::court::{denormalize_coord, Point, Rally, ShotTypeVocab, Side, Stroke};
use crate::dataset::{fmt6, quantize6};
use crate::error::{Error, Result};
use crate::model::{AreaGaussian, Model, PROB_FLOOR};
use crate::rng::{Rng, SeedStream};

/// Horizon used when the true rally length is unknown.
pub const DEFAULT_OPEN_HORIZON: usize = 20;

/// Number of sample sets the score takes the minimum over.
pub const SCORE_SETS: usize = 6;

/// One generated stroke. Landing and probabilities are stored rounded to six
/// decimals, exactly as they appear in a prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStroke {
    pub round_index: usize,
    /// Sampled type. Prediction files do not carry it, so strokes read back
    /// from a file hold the argmax of `type_probs` instead.
    pub shot_type: usize,
    /// Meters, canonical frame.
    pub landing: Point,
    /// Serve-masked distribution the type was drawn from.
    pub type_probs: Vec<f64>,
}

impl GeneratedStroke {
    pub fn player(&self) -> Side {
        Side::for_round(self.round_index)
    }
}

/// Generated continuation of one rally.
#[derive(Debug, Clone, PartialEq)]
pub struct RallyPrediction {
    pub rally_id: String,
    pub strokes: Vec<GeneratedStroke>,
}

/// One generated continuation for each scored rally.
pub type SampleSet = Vec<RallyPrediction>;

/// Zeroes serve types and renormalizes. Falls back to uniform over the
/// non-serve types when they carry no mass at all.
pub fn mask_serves(probs: &[f64], vocab: &ShotTypeVocab) -> Vec<f64> {
    let mut out: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if vocab.is_serve(i) { 0.0 } else { p })
        .collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 && total.is_finite() {
        out.iter_mut().for_each(|p| *p /= total);
    } else {
        let open = out.len() - vocab.serve_ids().len();
        for (i, p) in out.iter_mut().enumerate() {
            *p = if vocab.is_serve(i) {
                0.0
            } else {
                1.0 / open as f64
            };
        }
    }
    out
}

/// Rounds a distribution to six decimals while keeping its sum at 1: the
/// largest entry absorbs the rounding of the others.
pub fn quantize_simplex(probs: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = probs.iter().map(|&p| quantize6(p)).collect();
    let top = argmax(&out);
    let rest: f64 = out
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, p)| p)
        .sum();
    out[top] = quantize6(1.0 - rest);
    out
}

/// Draws a normalized landing point from the bivariate Gaussian.
pub fn sample_area(area: &AreaGaussian, rng: &mut Rng) -> Point {
    let e1: f64 = StandardNormal.sample(rng);
    let e2: f64 = StandardNormal.sample(rng);
    let r = area.rho;
    Point::new(
        area.mu_x + area.sigma_x * e1,
        area.mu_y + area.sigma_y * (r * e1 + (1.0 - r * r).max(0.0).sqrt() * e2),
    )
}

fn quantize_point(p: Point) -> Point {
    Point::new(quantize6(p.x), quantize6(p.y))
}

/// Autoregressively extends `prefix` (exactly `tau` strokes of `rally`) by
/// `horizon` strokes. Each step reruns the model on the full history, draws
/// a non-serve type and a landing point, and places the next hitter where
/// the previous shot landed.
pub fn generate_suffix(
    model: &Model,
    rally: &Rally,
    prefix: &[Stroke],
    horizon: usize,
    rng: &mut Rng,
) -> Result<Vec<GeneratedStroke>> {
    let tau = model.config.tau;
    if prefix.len() != tau {
        return Err(Error::Input(format!(
            "prefix of rally {} has {} strokes; expected {tau}",
            rally.rally_id,
            prefix.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::Input("generation horizon must be at least 1".into()));
    }
    let court = &model.court;
    let mut history = prefix.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let step = model.predict_next(rally, &history)?;
        let probs = quantize_simplex(&mask_serves(&step.type_probs, &model.vocab));
        let dist = WeightedIndex::new(&probs)
            .map_err(|e| Error::Input(format!("cannot sample shot type: {e}")))?;
        let shot_type = dist.sample(rng);
        let landing = quantize_point(denormalize_coord(sample_area(&step.area, rng), court)?);
        let prev = history.last().expect("prefix is non-empty");
        let round_index = prev.round_index + 1;
        history.push(Stroke {
            round_index,
            player: Side::for_round(round_index),
            shot_type,
            landing,
            player_location: quantize_point(court.mirror(prev.landing)),
        });
        out.push(GeneratedStroke {
            round_index,
            shot_type,
            landing,
            type_probs: probs,
        });
    }
    Ok(out)
}

/// Seed stream of sample `sample` (0-based) for the `index`-th rally. Sample
/// streams are nested: the first `k` samples are the same for every `k`.
pub fn sample_stream(seed: u64, index: usize, sample: usize) -> SeedStream {
    SeedStream::new(seed).path(&[index as u64, sample as u64])
}

fn predictable(rallies: &[Rally], tau: usize) -> impl Iterator<Item = (usize, &Rally)> {
    rallies
        .iter()
        .enumerate()
        .filter(move |(_, r)| r.len() > tau)
}

/// Generates `samples` sample sets over every rally longer than `tau`, with
/// the true length as horizon. Rallies run in parallel; results keep rally
/// order.
pub fn generate_sets(
    model: &Model,
    rallies: &[Rally],
    samples: usize,
    seed: u64,
) -> Result<Vec<SampleSet>> {
    let tau = model.config.tau;
    let jobs: Vec<(usize, &Rally, usize)> = predictable(rallies, tau)
        .map(|(i, r)| (i, r, r.len() - tau))
        .collect();
    fan_out(model, &jobs, samples, seed)
}

/// Open-ended variant: every rally with at least `tau` strokes is extended
/// by `horizon` strokes from its first `tau`, whatever its true length.
pub fn generate_open_sets(
    model: &Model,
    rallies: &[Rally],
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<SampleSet>> {
    let tau = model.config.tau;
    let jobs: Vec<(usize, &Rally, usize)> = rallies
        .iter()
        .enumerate()
        .filter(|(_, r)| r.len() >= tau)
        .map(|(i, r)| (i, r, horizon))
        .collect();
    fan_out(model, &jobs, samples, seed)
}

fn fan_out(
    model: &Model,
    jobs: &[(usize, &Rally, usize)],
    samples: usize,
    seed: u64,
) -> Result<Vec<SampleSet>> {
    if samples == 0 {
        return Err(Error::Input("at least one sample set is needed".into()));
    }
    let tau = model.config.tau;
    let per_rally: Vec<Vec<RallyPrediction>> = jobs
        .par_iter()
        .map(|&(i, r, horizon)| {
            (0..samples)
                .map(|j| {
                    let mut rng = sample_stream(seed, i, j).rng();
                    let strokes = generate_suffix(model, r, &r.strokes[..tau], horizon, &mut rng)?;
                    Ok(RallyPrediction {
                        rally_id: r.rally_id.clone(),
                        strokes,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..samples)
        .map(|j| per_rally.iter().map(|preds| preds[j].clone()).collect())
        .collect())
}

/// Loss term of one predicted stroke against the truth.
pub fn stroke_loss(pred: &GeneratedStroke, truth: &Stroke) -> Result<f64> {
    let p = *pred.type_probs.get(truth.shot_type).ok_or_else(|| {
        Error::Input(format!(
            "round {}: no probability for type {}",
            pred.round_index, truth.shot_type
        ))
    })?;
    Ok(-p.max(PROB_FLOOR).ln()
        + (truth.landing.x - pred.landing.x).abs()
        + (truth.landing.y - pred.landing.y).abs())
}

/// Sum of stroke losses for one rally, checking that `pred` covers exactly
/// rounds `tau + 1..=len`.
fn rally_terms(pred: &[GeneratedStroke], truth: &Rally, tau: usize) -> Result<Vec<f64>> {
    let want = truth.len() - tau;
    if pred.len() != want {
        return Err(Error::Input(format!(
            "rally {}: {} predicted strokes, expected {want}",
            truth.rally_id,
            pred.len()
        )));
    }
    pred.iter()
        .zip(&truth.strokes[tau..])
        .map(|(p, t)| {
            if p.round_index != t.round_index {
                return Err(Error::Input(format!(
                    "rally {}: prediction for round {} where round {} was expected",
                    truth.rally_id, p.round_index, t.round_index
                )));
            }
            stroke_loss(p, t)
        })
        .collect()
}

/// Loss of one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetLoss {
    /// Mean stroke loss over all predicted strokes.
    pub loss: f64,
    pub n_strokes: usize,
    /// Summed stroke loss per scored rally, in ground-truth order.
    pub rally_sums: Vec<f64>,
    /// `round -> (summed loss, stroke count)`.
    pub rounds: BTreeMap<usize, (f64, usize)>,
}

/// Mean stroke loss of `set` over every rally of `truth` longer than `tau`.
pub fn sample_set_loss(set: &[RallyPrediction], truth: &[Rally], tau: usize) -> Result<SetLoss> {
    let mut by_id: HashMap<&str, &RallyPrediction> = HashMap::with_capacity(set.len());
    for p in set {
        if by_id.insert(&p.rally_id, p).is_some() {
            return Err(Error::Input(format!(
                "rally {} predicted twice in one set",
                p.rally_id
            )));
        }
    }
    let mut sum = 0.0;
    let mut n = 0;
    let mut rally_sums = Vec::new();
    let mut rounds: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in truth.iter().filter(|r| r.len() > tau) {
        let pred = by_id
            .remove(r.rally_id.as_str())
            .ok_or_else(|| Error::Input(format!("no prediction for rally {}", r.rally_id)))?;
        let terms = rally_terms(&pred.strokes, r, tau)?;
        let mut rally_sum = 0.0;
        for (t, s) in terms.iter().zip(&r.strokes[tau..]) {
            rally_sum += t;
            let e = rounds.entry(s.round_index).or_default();
            e.0 += t;
            e.1 += 1;
        }
        sum += rally_sum;
        n += terms.len();
        rally_sums.push(rally_sum);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::Input(format!(
            "prediction for unknown or unscored rally {extra}"
        )));
    }
    if n == 0 {
        return Err(Error::Input(format!(
            "no rally longer than {tau} strokes to score"
        )));
    }
    Ok(SetLoss {
        loss: sum / n as f64,
        n_strokes: n,
        rally_sums,
        rounds,
    })
}

/// Exact minimum of six finite losses.
pub fn score_min6(losses: &[f64]) -> Result<f64> {
    if losses.len() != SCORE_SETS {
        return Err(Error::Input(format!(
            "expected {SCORE_SETS} sample sets, found {}",
            losses.len()
        )));
    }
    if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::Input(format!("non-finite sample-set loss {bad}")));
    }
    Ok(losses.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundScore {
    pub round: usize,
    pub n_strokes: usize,
    /// Mean stroke loss at this round in the winning set.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// `l_1 .. l_6`
    pub set_losses: Vec<f64>,
    pub score: f64,
    /// 1-based id of the first set attaining the score.
    pub best_set: usize,
    pub rally_ids: Vec<String>,
    /// `[rally][set]` summed stroke loss.
    pub rally_sums: Vec<Vec<f64>>,
    pub rounds: Vec<RoundScore>,
}

/// Scores six sample sets against the ground truth.
pub fn score_sets(sets: &[SampleSet], truth: &[Rally], tau: usize) -> Result<ScoreReport> {
    if sets.len() != SCORE_SETS {
        return Err(Error::Input(format!(
            "expected {SCORE_SETS} sample sets, found {}",
            sets.len()
        )));
    }
    let losses: Vec<SetLoss> = sets
        .iter()
        .map(|s| sample_set_loss(s, truth, tau))
        .collect::<Result<_>>()?;
    let set_losses: Vec<f64> = losses.iter().map(|l| l.loss).collect();
    let score = score_min6(&set_losses)?;
    assert!(set_losses.iter().all(|&l| score <= l));
    let best = set_losses
        .iter()
        .position(|&l| l == score)
        .expect("minimum is attained");
    let rally_ids = truth
        .iter()
        .filter(|r| r.len() > tau)
        .map(|r| r.rally_id.clone())
        .collect();
    let rally_sums = (0..losses[0].rally_sums.len())
        .map(|i| losses.iter().map(|l| l.rally_sums[i]).collect())
        .collect();
    let rounds = losses[best]
        .rounds
        .iter()
        .map(|(&round, &(sum, n))| RoundScore {
            round,
            n_strokes: n,
            mean_loss: sum / n as f64,
        })
        .collect();
    Ok(ScoreReport {
        set_losses,
        score,
        best_set: best + 1,
        rally_ids,
        rally_sums,
        rounds,
    })
}

impl ScoreReport {
    /// `name,value` lines: `l_1 .. l_6`, `score`, `best_set`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value\n");
        for (i, l) in self.set_losses.iter().enumerate() {
            out.push_str(&format!("l_{},{}\n", i + 1, fmt6(*l)));
        }
        out.push_str(&format!(
            "score,{}\nbest_set,{}\n",
            fmt6(self.score),
            self.best_set
        ));
        out
    }

    /// `ball_round,strokes,mean_loss` for the winning set.
    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("ball_round,strokes,mean_loss\n");
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{}\n",
                r.round,
                r.n_strokes,
                fmt6(r.mean_loss)
            ));
        }
        out
    }
}

/// Best-of-k result for one rally.
#[derive(Debug, Clone, PartialEq)]
pub struct RallyBest {
    pub rally_id: String,
    pub n_strokes: usize,
    /// 0-based index of the first sample attaining the minimum.
    pub best_sample: usize,
    pub best_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestOfK {
    pub k: usize,
    pub rallies: Vec<RallyBest>,
    /// Summed best rally losses over the total predicted-stroke count.
    pub score: f64,
}

/// Draws `k` generations per rally and keeps the one closest to the truth.
/// Sample streams are nested in `k`, so a larger `k` never scores worse.
pub fn eval_best_of_k(model: &Model, rallies: &[Rally], k: usize, seed: u64) -> Result<BestOfK> {
    if k == 0 {
        return Err(Error::Input("best-of-k needs k >= 1".into()));
    }
    let tau = model.config.tau;
    let eligible: Vec<(usize, &Rally)> = predictable(rallies, tau).collect();
    if eligible.is_empty() {
        return Err(Error::Input(format!(
            "no rally longer than {tau} strokes to evaluate"
        )));
    }
    let best: Vec<RallyBest> = eligible
        .par_iter()
        .map(|&(i, r)| {
            let mut best = RallyBest {
                rally_id: r.rally_id.clone(),
                n_strokes: r.len() - tau,
                best_sample: 0,
                best_sum: f64::INFINITY,
            };
            for j in 0..k {
                let mut rng = sample_stream(seed, i, j).rng();
                let gen = generate_suffix(model, r, &r.strokes[..tau], r.len() - tau, &mut rng)?;
                let sum: f64 = rally_terms(&gen, r, tau)?.iter().sum();
                if sum < best.best_sum {
                    best.best_sum = sum;
                    best.best_sample = j;
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let n: usize = best.iter().map(|b| b.n_strokes).sum();
    let score = best.iter().map(|b| b.best_sum).sum::<f64>() / n as f64;
    Ok(BestOfK {
        k,
        rallies: best,
        score,
    })
}

/// Header of a prediction file for `vocab`.
pub fn predictions_header(vocab: &ShotTypeVocab) -> String {
    let mut h = String::from("rally_id,sample_id,ball_round,landing_x,landing_y");
    for e in vocab.entries() {
        h.push_str(&format!(",prob_{}", vocab.column_name(e.id)));
    }
    h
}

/// Prediction file text. Rows run rally by rally, then by sample, then by
/// round; sample ids are 1-based.
pub fn predictions_to_csv(sets: &[SampleSet], vocab: &ShotTypeVocab) -> String {
    let mut out = predictions_header(vocab);
    out.push('\n');
    let n_rallies = sets.first().map_or(0, Vec::len);
    for i in 0..n_rallies {
        for (j, set) in sets.iter().enumerate() {
            let rp = &set[i];
            for s in &rp.strokes {
                out.push_str(&format!(
                    "{},{},{},{},{}",
                    rp.rally_id,
                    j + 1,
                    s.round_index,
                    fmt6(s.landing.x),
                    fmt6(s.landing.y)
                ));
                for p in &s.type_probs {
                    out.push(',');
                    out.push_str(&fmt6(*p));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_predictions(path: &Path, sets: &[SampleSet], vocab: &ShotTypeVocab) -> Result<()> {
    fs::write(path, predictions_to_csv(sets, vocab)).map_err(|e| Error::io(path, e))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Reads a prediction file back into sample sets ordered by sample id.
pub fn read_predictions(path: &Path, vocab: &ShotTypeVocab) -> Result<Vec<SampleSet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    predictions_from_str(&text, vocab).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn predictions_from_str(
    text: &str,
    vocab: &ShotTypeVocab,
) -> std::result::Result<Vec<SampleSet>, String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != predictions_header(vocab) {
        return Err(format!(
            "header does not match the shot-type vocabulary; expected '{}'",
            predictions_header(vocab)
        ));
    }
    let v = vocab.len();
    let mut sets: BTreeMap<usize, (Vec<RallyPrediction>, HashMap<String, usize>)> = BTreeMap::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let num = |i: usize| -> std::result::Result<f64, String> {
            let v: f64 = rec[i]
                .trim()
                .parse()
                .map_err(|_| format!("line {line}: bad number '{}' in {}", &rec[i], header[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("line {line}: non-finite {}", header[i]))
            }
        };
        let int = |i: usize| -> std::result::Result<usize, String> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| format!("line {line}: bad integer '{}' in {}", &rec[i], header[i]))
        };
        let sample_id = int(1)?;
        if sample_id == 0 {
            return Err(format!("line {line}: sample_id starts at 1"));
        }
        let round_index = int(2)?;
        let landing = Point::new(num(3)?, num(4)?);
        let type_probs = (0..v)
            .map(|t| num(5 + t))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let stroke = GeneratedStroke {
            round_index,
            shot_type: argmax(&type_probs),
            landing,
            type_probs,
        };
        let (set, index) = sets.entry(sample_id).or_default();
        match index.get(&rec[0]) {
            Some(&at) => set[at].strokes.push(stroke),
            None => {
                index.insert(rec[0].to_string(), set.len());
                set.push(RallyPrediction {
                    rally_id: rec[0].to_string(),
                    strokes: vec![stroke],
                });
            }
        }
    }
    if let Some((pos, &id)) = sets.keys().enumerate().find(|(pos, &id)| id != pos + 1) {
        return Err(format!(
            "sample ids must run 1..n; found {id} in position {}",
            pos + 1
        ));
    }
    Ok(sets.into_values().map(|(set, _)| set).collect())
}
