//! Mini-batch training with Adam, gradient clipping and best-checkpoint
//! selection by validation score.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::court::{normalize_coord, Point, Rally};
use crate::dataset::fmt6;
use crate::error::{Error, Result};
use crate::model::{step_loss, Model, ModelParams, StepLoss};
use crate::numerics::{Array, NumericsError};
use crate::rng::SeedStream;
use crate::sampler::eval_best_of_k;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Validation cadence in epochs; 0 evaluates only after the last epoch.
    pub eval_every: usize,
    /// k of the best-of-k validation score.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: Some(5.0),
            eval_every: 10,
            eval_samples: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        // zero is accepted so a run can be checked to leave parameters untouched
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive".into());
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip_norm must be positive, got {c}"));
            }
        }
        if self.eval_samples == 0 {
            return bad("eval_samples must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Means over every predicted stroke of the epoch, in training mode.
    pub shot_loss: f64,
    pub area_loss: f64,
    pub total_loss: f64,
    pub val_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub wall_clock_s: f64,
    pub checkpoint: Option<std::path::PathBuf>,
}

impl TrainReport {
    /// `epoch,shot_loss,area_loss,total_loss,val_score`; epochs without a
    /// validation run leave the last field empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,shot_loss,area_loss,total_loss,val_score\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                fmt6(e.shot_loss),
                fmt6(e.area_loss),
                fmt6(e.total_loss),
                e.val_score.map(fmt6).unwrap_or_default()
            ));
        }
        out
    }
}

struct Adam {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let zeros = params.map(|_, a| Array::zeros(a.shape()));
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let mut m = self
            .m
            .entries()
            .into_iter()
            .map(|(_, a)| a.clone())
            .collect::<Vec<_>>();
        let mut v = self
            .v
            .entries()
            .into_iter()
            .map(|(_, a)| a.clone())
            .collect::<Vec<_>>();
        let g = grads.entries();
        let mut i = 0;
        params.for_each_mut(|_, p| {
            let (mi, vi, gi) = (m[i].data_mut(), v[i].data_mut(), g[i].1.data());
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * gi[j];
                vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * gi[j] * gi[j];
                let mhat = mi[j] / c1;
                let vhat = vi[j] / c2;
                *w -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
            i += 1;
        });
        let mut it = m.into_iter();
        self.m
            .for_each_mut(|_, a| *a = it.next().expect("same layout"));
        let mut it = v.into_iter();
        self.v
            .for_each_mut(|_, a| *a = it.next().expect("same layout"));
    }
}

fn targets(model: &Model, rally: &Rally) -> Result<(Vec<usize>, Vec<Point>)> {
    let ts = &rally.strokes[model.config.tau..];
    let pts = ts
        .iter()
        .map(|s| normalize_coord(s.landing, &model.court))
        .collect::<Result<_>>()?;
    Ok((ts.iter().map(|s| s.shot_type).collect(), pts))
}

/// Summed losses and gradients of one batch.
struct BatchResult {
    shot: f64,
    area: f64,
    steps: usize,
    grads: ModelParams,
}

/// Forward and backward over a batch on one tape. The objective is the mean
/// over every predicted stroke in the batch, which weights rallies by their
/// length exactly as padding with masked positions would.
fn batch_gradients(
    model: &Model,
    batch: &[&Rally],
    dropout: Option<crate::rng::Rng>,
) -> Result<BatchResult> {
    let mut pass = crate::model::Pass::new(&model.params, &model.config, dropout)?;
    let tau = model.config.tau;
    let mut shot_terms = Vec::with_capacity(batch.len());
    let mut area_terms = Vec::with_capacity(batch.len());
    let mut steps = 0;
    for r in batch {
        let n = r.len();
        let feats = model.features(r, &r.strokes[..n - 1])?;
        let rows = model.target_rows(r, tau + 1..=n);
        let heads = pass.run(&feats, tau - 1, &rows)?;
        let (types, pts) = targets(model, r)?;
        let (s, a, _) = pass.loss_terms(&heads, &types, &pts)?;
        shot_terms.push(s);
        area_terms.push(a);
        steps += n - tau;
    }
    let t = &mut pass.tape;
    let shot = t.concat(&shot_terms, 0)?;
    let shot = t.sum(shot)?;
    let area = t.concat(&area_terms, 0)?;
    let area = t.sum(area)?;
    let total = t.add(shot, area)?;
    let mean = t.scale(total, 1.0 / steps as f64)?;
    let g = t.backward(mean)?;
    Ok(BatchResult {
        shot: t.value(shot).data()[0],
        area: t.value(area).data()[0],
        steps,
        grads: pass.w.map(|_, v| g.wrt(*v)),
    })
}

fn clip(grads: &mut ModelParams, max_norm: f64) {
    let norm = grads
        .entries()
        .iter()
        .flat_map(|(_, a)| a.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grads.for_each_mut(|_, a| a.data_mut().iter_mut().for_each(|g| *g *= k));
    }
}

/// Eval-mode teacher-forced losses averaged over every predicted stroke.
pub fn evaluate_loss(model: &Model, rallies: &[Rally]) -> Result<StepLoss> {
    let tau = model.config.tau;
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for r in rallies.iter().filter(|r| r.len() > tau) {
        preds.extend(model.forward_teacher_forced(r, None)?);
        truth.extend_from_slice(&r.strokes[tau..]);
    }
    step_loss(&preds, &truth, &model.court)
}

fn diverged(epoch: usize, batch: &[&Rally], detail: String) -> Error {
    Error::Diverged {
        epoch,
        rally_ids: batch.iter().map(|r| r.rally_id.clone()).collect(),
        detail,
    }
}

/// Trains `model` in place of a copy and returns the parameters from the
/// epoch with the best validation score (the last epoch when `val_set` has
/// nothing to score). `on_epoch` sees each record as it is produced.
pub fn train(
    model: &Model,
    train_set: &[Rally],
    val_set: &[Rally],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    let tau = model.config.tau;
    if train_set.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if let Some(r) = train_set.iter().find(|r| r.len() <= tau) {
        return Err(Error::Input(format!(
            "training rally {} has {} strokes; at least {} needed",
            r.rally_id,
            r.len(),
            tau + 1
        )));
    }
    let can_validate = val_set.iter().any(|r| r.len() > tau);
    let started = Instant::now();
    let root = SeedStream::new(cfg.seed);
    let mut current = model.clone();
    let mut adam = Adam::new(&current.params);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut root.path(&[1, epoch as u64]).rng());
        let (mut shot, mut area, mut steps) = (0.0, 0.0, 0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Rally> = chunk.iter().map(|&i| &train_set[i]).collect();
            let dropout = root.path(&[2, epoch as u64, b as u64]).rng();
            let mut res = match batch_gradients(&current, &batch, Some(dropout)) {
                Ok(r) => r,
                Err(Error::Numeric(e @ NumericsError::NonFinite { .. })) => {
                    return Err(diverged(epoch, &batch, e.to_string()))
                }
                Err(e) => return Err(e),
            };
            if !(res.shot + res.area).is_finite() || !res.grads.is_finite() {
                return Err(diverged(
                    epoch,
                    &batch,
                    "non-finite loss or gradient".into(),
                ));
            }
            if let Some(c) = cfg.clip_norm {
                clip(&mut res.grads, c);
            }
            adam.step(&mut current.params, &res.grads, cfg);
            if !current.params.is_finite() {
                return Err(diverged(
                    epoch,
                    &batch,
                    "parameters became non-finite".into(),
                ));
            }
            shot += res.shot;
            area += res.area;
            steps += res.steps;
        }
        let n = steps as f64;
        let due = epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
        let val_score = if can_validate && due {
            let seed = root.path(&[3, epoch as u64]).raw();
            Some(eval_best_of_k(&current, val_set, cfg.eval_samples, seed)?.score)
        } else {
            None
        };
        if let Some(s) = val_score {
            if best.as_ref().is_none_or(|(b, _, _)| s < *b) {
                best = Some((s, epoch, current.params.clone()));
            }
        }
        let rec = EpochRecord {
            epoch,
            shot_loss: shot / n,
            area_loss: area / n,
            total_loss: (shot + area) / n,
            val_score,
        };
        log::info!(
            "epoch {epoch}: shot {:.6} area {:.6} total {:.6}{}",
            rec.shot_loss,
            rec.area_loss,
            rec.total_loss,
            val_score
                .map(|s| format!(" val {s:.6}"))
                .unwrap_or_default()
        );
        on_epoch(&rec);
        records.push(rec);
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            current.params = params;
            epoch
        }
        None => cfg.epochs,
    };
    Ok((
        current,
        TrainReport {
            epochs: records,
            best_epoch,
            wall_clock_s: started.elapsed().as_secs_f64(),
            checkpoint: None,
        },
    ))
}
