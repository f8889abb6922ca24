//! The forecasting network.
//!
//! Each stroke is embedded on two channels: a shot channel (type embedding
//! plus player-id embedding) and an area channel (projected landing point
//! plus projected hitter location). In `Baseline` mode the area channel
//! instead carries `relu(projected landing) + player-id embedding`, the
//! layout the modified embedding replaces.
//!
//! The channels are merged and run through causal self-attention twice with
//! shared weights: once over the whole rally (rally context) and once with
//! attention restricted to strokes of the same hitter (player context). A
//! sigmoid gate conditioned on both contexts and the position mixes them,
//! the next hitter's embedding is added, and two heads emit shot-type
//! probabilities and a bivariate Gaussian over the next landing point.

mod checkpoint;
mod params;

use std::fmt;
use std::str::FromStr;

use crate::court::{normalize_coord, CourtSpec, Point, Rally, ShotTypeVocab, Side, Stroke, TAU};
use crate::error::{Error, Result};
use crate::numerics::{Array, Tape, Var};
use crate::rng::Rng;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, read_checkpoint, write_checkpoint,
};
pub use params::{LayerWeights, ModelParams, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    Baseline,
    Modified,
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMode::Baseline => "baseline",
            EmbeddingMode::Modified => "modified",
        })
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "baseline" => Ok(EmbeddingMode::Baseline),
            "modified" => Ok(EmbeddingMode::Modified),
            other => Err(Error::Config(format!("unknown embedding mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub dropout_rate: f64,
    pub vocab_size: usize,
    /// Known players; the player table has one extra row for unknowns.
    pub n_players: usize,
    pub embedding_mode: EmbeddingMode,
    pub tau: usize,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, n_players: usize) -> Self {
        ModelConfig {
            embed_dim: 16,
            n_heads: 2,
            n_layers: 2,
            ffn_dim: 128,
            dropout_rate: 0.2,
            vocab_size,
            n_players,
            embedding_mode: EmbeddingMode::Modified,
            tau: TAU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads)
        {
            return bad(format!(
                "embed_dim {} must be a positive multiple of n_heads {}",
                self.embed_dim, self.n_heads
            ));
        }
        if self.n_layers == 0 || self.ffn_dim == 0 {
            return bad("n_layers and ffn_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2".into());
        }
        if self.tau == 0 {
            return bad("tau must be at least 1".into());
        }
        Ok(())
    }
}

/// Dataset-global player ids. Row 0 of the player table is reserved for
/// players not seen in training.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlayerIndex {
    names: Vec<String>,
}

impl PlayerIndex {
    pub fn new(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        PlayerIndex { names }
    }

    pub fn from_rallies(rallies: &[Rally]) -> Self {
        PlayerIndex::new(
            rallies
                .iter()
                .flat_map(|r| [r.player_a.clone(), r.player_b.clone()])
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Table row for `name`; 0 when unknown.
    pub fn row(&self, name: &str) -> usize {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .map_or(0, |i| i + 1)
    }
}

/// Bivariate Gaussian over the normalized landing point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaGaussian {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl AreaGaussian {
    /// From raw head outputs `(mu_x, mu_y, log sigma_x, log sigma_y, pre-tanh rho)`.
    pub fn from_raw(raw: &[f64]) -> Self {
        AreaGaussian {
            mu_x: raw[0],
            mu_y: raw[1],
            sigma_x: raw[2].exp(),
            sigma_y: raw[3].exp(),
            rho: raw[4].tanh(),
        }
    }

    /// Negative log-likelihood of a normalized point.
    pub fn nll(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.mu_x) / self.sigma_x;
        let dy = (y - self.mu_y) / self.sigma_y;
        let one_m_r2 = (1.0 - self.rho * self.rho).max(RHO_FLOOR);
        let z = dx * dx - 2.0 * self.rho * dx * dy + dy * dy;
        (2.0 * std::f64::consts::PI).ln()
            + self.sigma_x.ln()
            + self.sigma_y.ln()
            + 0.5 * one_m_r2.ln()
            + z / (2.0 * one_m_r2)
    }
}

/// Floor on `1 - rho^2` inside the Gaussian likelihood.
pub const RHO_FLOOR: f64 = 1e-9;
/// Floor on the true-type probability inside cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Model output for one future stroke.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStep {
    pub type_probs: Vec<f64>,
    pub area: AreaGaussian,
}

/// Per-stroke model input with coordinates already normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeFeatures {
    pub shot_type: usize,
    pub player_row: usize,
    pub side: Side,
    pub landing: Point,
    pub location: Point,
}

/// Sinusoidal position table, `n x d`.
pub fn positional_encoding(n: usize, d: usize) -> Array {
    let mut data = Vec::with_capacity(n * d);
    for pos in 0..n {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            data.push(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Array::new(&[n, d], data).expect("shape")
}

/// Tape-backed outputs of the two heads for a block of positions.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    /// `S x V` shot-type probabilities
    pub probs: Var,
    /// `S x 5` raw area outputs
    pub area_raw: Var,
}

/// One forward pass: a fresh tape with the parameters bound as leaves.
pub struct Pass {
    pub tape: Tape,
    pub w: Weights<Var>,
    config: ModelConfig,
    dropout: Option<Rng>,
}

const MASKED: f64 = -1e9;

impl Pass {
    /// `dropout` supplies the generator for training mode; `None` is eval mode.
    pub fn new(params: &ModelParams, config: &ModelConfig, dropout: Option<Rng>) -> Result<Pass> {
        let mut tape = Tape::new();
        let w = params.try_map(|_, a| tape.leaf(a.clone()))?;
        Ok(Pass {
            tape,
            w,
            config: config.clone(),
            dropout,
        })
    }

    pub fn training(&self) -> bool {
        self.dropout.is_some()
    }

    fn drop(&mut self, v: Var) -> Result<Var> {
        let rate = self.config.dropout_rate;
        Ok(match self.dropout.as_mut() {
            Some(rng) => self.tape.dropout(v, rate, true, rng)?,
            None => v,
        })
    }

    fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.tape.matmul(x, w)?;
        Ok(self.tape.add(xw, b)?)
    }

    fn points(&mut self, pts: impl Iterator<Item = Point>) -> Result<Var> {
        let data: Vec<f64> = pts.flat_map(|p| [p.x, p.y]).collect();
        let n = data.len() / 2;
        Ok(self
            .tape
            .leaf(Array::new(&[n, 2], data).map_err(Error::from)?)?)
    }

    /// Dual-channel stroke embeddings `(shot channel, area channel)`, each
    /// `n x d`, with the positional encoding already added.
    pub fn embed(&mut self, feats: &[StrokeFeatures]) -> Result<(Var, Var)> {
        if feats.is_empty() {
            return Err(Error::Input("cannot embed an empty stroke sequence".into()));
        }
        let v = self.config.vocab_size;
        if let Some(f) = feats.iter().find(|f| f.shot_type >= v) {
            return Err(Error::Input(format!(
                "shot type id {} outside vocabulary of {v}",
                f.shot_type
            )));
        }
        let n_rows = self.config.n_players + 1;
        if let Some(f) = feats.iter().find(|f| f.player_row >= n_rows) {
            return Err(Error::Input(format!("unknown player id {}", f.player_row)));
        }
        let types: Vec<usize> = feats.iter().map(|f| f.shot_type).collect();
        let rows: Vec<usize> = feats.iter().map(|f| f.player_row).collect();

        let shot = self.tape.embedding_lookup(self.w.type_emb, &types)?;
        let player = self.tape.embedding_lookup(self.w.player_emb, &rows)?;
        let shot = self.tape.add(shot, player)?;

        let landing = self.points(feats.iter().map(|f| f.landing))?;
        let area = self.affine(landing, self.w.area_w, self.w.area_b)?;
        let area = match self.config.embedding_mode {
            EmbeddingMode::Modified => {
                let loc = self.points(feats.iter().map(|f| f.location))?;
                let loc = self.affine(loc, self.w.loc_w, self.w.loc_b)?;
                self.tape.add(area, loc)?
            }
            EmbeddingMode::Baseline => {
                let area = self.tape.relu(area)?;
                self.tape.add(area, player)?
            }
        };

        let pe = self
            .tape
            .leaf(positional_encoding(feats.len(), self.config.embed_dim))?;
        let shot = self.tape.add(shot, pe)?;
        let area = self.tape.add(area, pe)?;
        Ok((shot, area))
    }

    /// Merges the two channels into one `n x d` stream.
    pub fn merge(&mut self, shot: Var, area: Var) -> Result<Var> {
        let both = self.tape.concat(&[shot, area], 1)?;
        let h = self.affine(both, self.w.input_w, self.w.input_b)?;
        self.drop(h)
    }

    fn attention(&mut self, layer: usize, x: Var, mask: &[bool]) -> Result<Var> {
        let lw = self.w.layers[layer].clone();
        let d = self.config.embed_dim;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let q = self.affine(x, lw.wq, lw.bq)?;
        let k = self.affine(x, lw.wk, lw.bk)?;
        let v = self.affine(x, lw.wv, lw.bv)?;
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice(q, 1, h * dh, dh)?;
            let kh = self.tape.slice(k, 1, h * dh, dh)?;
            let vh = self.tape.slice(v, 1, h * dh, dh)?;
            let kt = self.tape.transpose(kh)?;
            let scores = self.tape.matmul(qh, kt)?;
            let scores = self.tape.scale(scores, 1.0 / (dh as f64).sqrt())?;
            let scores = self.tape.masked_fill(scores, mask, MASKED)?;
            let att = self.tape.softmax(scores, 1)?;
            outs.push(self.tape.matmul(att, vh)?);
        }
        let cat = self.tape.concat(&outs, 1)?;
        self.affine(cat, lw.wo, lw.bo)
    }

    fn norm(&mut self, x: Var, g: Var, b: Var) -> Result<Var> {
        let n = self.tape.layer_norm(x)?;
        let n = self.tape.mul(n, g)?;
        Ok(self.tape.add(n, b)?)
    }

    fn encoder(&mut self, h: Var, mask: &[bool]) -> Result<Var> {
        let mut x = h;
        for layer in 0..self.config.n_layers {
            let lw = self.w.layers[layer].clone();
            let att = self.attention(layer, x, mask)?;
            let att = self.drop(att)?;
            let res = self.tape.add(x, att)?;
            let y = self.norm(res, lw.ln1_g, lw.ln1_b)?;
            let ff = self.affine(y, lw.ff_w1, lw.ff_b1)?;
            let ff = self.tape.relu(ff)?;
            let ff = self.affine(ff, lw.ff_w2, lw.ff_b2)?;
            let ff = self.drop(ff)?;
            let res = self.tape.add(y, ff)?;
            x = self.norm(res, lw.ln2_g, lw.ln2_b)?;
        }
        Ok(x)
    }

    /// `(rally context, player context)`, each `n x d`. Position `i` of the
    /// rally context sees strokes `0..=i`; the player context only sees the
    /// strokes among those hit by the same side as stroke `i`.
    pub fn encode(&mut self, h: Var, sides: &[Side]) -> Result<(Var, Var)> {
        let n = sides.len();
        let causal: Vec<bool> = (0..n * n).map(|ij| ij % n > ij / n).collect();
        let same_player: Vec<bool> = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                j > i || sides[i] != sides[j]
            })
            .collect();
        let rally = self.encoder(h, &causal)?;
        let player = self.encoder(h, &same_player)?;
        Ok((rally, player))
    }

    /// `g * rally + (1 - g) * player` with
    /// `g = sigmoid([rally | player | position] W_g + b_g)`; `offset` is the
    /// position index of the first row.
    pub fn fuse(&mut self, rally: Var, player: Var, offset: usize) -> Result<Var> {
        let n = self.tape.shape(rally)[0];
        let d = self.config.embed_dim;
        let pe_all = positional_encoding(offset + n, d);
        let pe = Array::new(&[n, d], pe_all.data()[offset * d..].to_vec()).map_err(Error::from)?;
        let pe = self.tape.leaf(pe)?;
        let gate_in = self.tape.concat(&[rally, player, pe], 1)?;
        let gate = self.affine(gate_in, self.w.gate_w, self.w.gate_b)?;
        let gate = self.tape.sigmoid(gate)?;
        let diff = self.tape.sub(rally, player)?;
        let mixed = self.tape.mul(gate, diff)?;
        Ok(self.tape.add(player, mixed)?)
    }

    /// Adds the embedding of the player who hits each predicted stroke.
    pub fn personalize(&mut self, fused: Var, target_rows: &[usize]) -> Result<Var> {
        let who = self.tape.embedding_lookup(self.w.player_emb, target_rows)?;
        Ok(self.tape.add(fused, who)?)
    }

    pub fn heads(&mut self, x: Var) -> Result<Heads> {
        let logits = self.affine(x, self.w.type_head_w, self.w.type_head_b)?;
        let probs = self.tape.softmax(logits, 1)?;
        let area_raw = self.affine(x, self.w.area_head_w, self.w.area_head_b)?;
        Ok(Heads { probs, area_raw })
    }

    /// Runs the network over `feats` and predicts strokes for the context
    /// positions `from..feats.len()`. Row `r` of the result predicts the
    /// stroke after position `from + r`, hit by `target_rows[r]`.
    pub fn run(
        &mut self,
        feats: &[StrokeFeatures],
        from: usize,
        target_rows: &[usize],
    ) -> Result<Heads> {
        let n = feats.len();
        if from >= n || target_rows.len() != n - from {
            return Err(Error::Input(format!(
                "predict from position {from} of {n} with {} targets",
                target_rows.len()
            )));
        }
        let (shot, area) = self.embed(feats)?;
        let h = self.merge(shot, area)?;
        let sides: Vec<Side> = feats.iter().map(|f| f.side).collect();
        let (rally, player) = self.encode(h, &sides)?;
        let (rally, player) = if from > 0 {
            (
                self.tape.slice(rally, 0, from, n - from)?,
                self.tape.slice(player, 0, from, n - from)?,
            )
        } else {
            (rally, player)
        };
        let fused = self.fuse(rally, player, from)?;
        let x = self.personalize(fused, target_rows)?;
        self.heads(x)
    }

    pub fn steps(&self, heads: &Heads) -> Vec<PredictionStep> {
        let probs = self.tape.value(heads.probs);
        let raw = self.tape.value(heads.area_raw);
        (0..probs.rows())
            .map(|r| PredictionStep {
                type_probs: probs.row(r).to_vec(),
                area: AreaGaussian::from_raw(raw.row(r)),
            })
            .collect()
    }

    /// Summed cross-entropy and summed Gaussian NLL against `targets`
    /// (normalized landing points and true types), as scalar tape nodes.
    /// The flag reports whether a true-type probability hit the floor.
    pub fn loss_terms(
        &mut self,
        heads: &Heads,
        types: &[usize],
        landing: &[Point],
    ) -> Result<(Var, Var, bool)> {
        let t = &mut self.tape;
        let picked = t.gather(heads.probs, types)?;
        let clamped = t.value(picked).data().iter().any(|&p| p < PROB_FLOOR);
        let picked = t.clamp_min(picked, PROB_FLOOR)?;
        let logp = t.log(picked)?;
        let total_logp = t.sum(logp)?;
        let shot = t.scale(total_logp, -1.0)?;

        let col = |t: &mut Tape, c: usize| t.slice(heads.area_raw, 1, c, 1);
        let (mx, my, lsx, lsy, rr) = (col(t, 0)?, col(t, 1)?, col(t, 2)?, col(t, 3)?, col(t, 4)?);
        let n = landing.len();
        let tx = t.leaf(
            Array::new(&[n, 1], landing.iter().map(|p| p.x).collect()).map_err(Error::from)?,
        )?;
        let ty = t.leaf(
            Array::new(&[n, 1], landing.iter().map(|p| p.y).collect()).map_err(Error::from)?,
        )?;
        let sx = t.exp(lsx)?;
        let sy = t.exp(lsy)?;
        let rho = t.tanh(rr)?;
        let ex = t.sub(tx, mx)?;
        let dx = t.div(ex, sx)?;
        let ey = t.sub(ty, my)?;
        let dy = t.div(ey, sy)?;
        let dx2 = t.mul(dx, dx)?;
        let dy2 = t.mul(dy, dy)?;
        let dxy = t.mul(dx, dy)?;
        let rdxy = t.mul(rho, dxy)?;
        let cross = t.scale(rdxy, -2.0)?;
        let z = t.add(dx2, dy2)?;
        let z = t.add(z, cross)?;
        let r2 = t.mul(rho, rho)?;
        let neg_r2 = t.scale(r2, -1.0)?;
        let one_m_r2 = t.add_scalar(neg_r2, 1.0)?;
        let one_m_r2 = t.clamp_min(one_m_r2, RHO_FLOOR)?;
        let two_q = t.scale(one_m_r2, 2.0)?;
        let quad = t.div(z, two_q)?;
        let log_q = t.log(one_m_r2)?;
        let half_log_q = t.scale(log_q, 0.5)?;
        let nll = t.add(lsx, lsy)?;
        let nll = t.add(nll, half_log_q)?;
        let nll = t.add(nll, quad)?;
        let nll = t.add_scalar(nll, (2.0 * std::f64::consts::PI).ln())?;
        let area = t.sum(nll)?;
        Ok((shot, area, clamped))
    }
}

/// A trained or freshly initialized network together with everything needed
/// to turn rallies into inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub vocab: ShotTypeVocab,
    pub players: PlayerIndex,
    pub court: CourtSpec,
}

impl Model {
    pub fn new(
        config: ModelConfig,
        params: ModelParams,
        vocab: ShotTypeVocab,
        players: PlayerIndex,
        court: CourtSpec,
    ) -> Result<Model> {
        config.validate()?;
        court.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "vocab_size {} does not match vocabulary of {}",
                config.vocab_size,
                vocab.len()
            )));
        }
        if config.n_players != players.len() {
            return Err(Error::Config(format!(
                "n_players {} does not match {} named players",
                config.n_players,
                players.len()
            )));
        }
        params.check_shapes(&config).map_err(Error::Config)?;
        Ok(Model {
            config,
            params,
            vocab,
            players,
            court,
        })
    }

    /// Fresh model sized for `vocab` and the players in `rallies`.
    pub fn initialize(
        mut config: ModelConfig,
        vocab: ShotTypeVocab,
        rallies: &[Rally],
        court: CourtSpec,
        seed: u64,
    ) -> Result<Model> {
        let players = PlayerIndex::from_rallies(rallies);
        config.vocab_size = vocab.len();
        config.n_players = players.len();
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Model::new(config, params, vocab, players, court)
    }

    pub fn features(&self, rally: &Rally, strokes: &[Stroke]) -> Result<Vec<StrokeFeatures>> {
        strokes
            .iter()
            .map(|s| {
                Ok(StrokeFeatures {
                    shot_type: s.shot_type,
                    player_row: self.players.row(rally.player_name(s.player)),
                    side: s.player,
                    landing: normalize_coord(s.landing, &self.court)?,
                    location: normalize_coord(s.player_location, &self.court)?,
                })
            })
            .collect()
    }

    pub(crate) fn target_rows(
        &self,
        rally: &Rally,
        rounds: impl Iterator<Item = usize>,
    ) -> Vec<usize> {
        rounds
            .map(|k| self.players.row(rally.player_name(Side::for_round(k))))
            .collect()
    }

    /// Builds the teacher-forced graph for a whole rally: one prediction per
    /// stroke after the first `tau`, each conditioned on the true history.
    pub fn teacher_forced_pass(
        &self,
        rally: &Rally,
        dropout: Option<Rng>,
    ) -> Result<(Pass, Heads)> {
        let tau = self.config.tau;
        let n = rally.len();
        if n < tau + 1 {
            return Err(Error::Input(format!(
                "rally {} has {n} strokes; at least {} needed",
                rally.rally_id,
                tau + 1
            )));
        }
        let feats = self.features(rally, &rally.strokes[..n - 1])?;
        let targets = self.target_rows(rally, tau + 1..=n);
        let mut pass = Pass::new(&self.params, &self.config, dropout)?;
        let heads = pass.run(&feats, tau - 1, &targets)?;
        Ok((pass, heads))
    }

    pub fn forward_teacher_forced(
        &self,
        rally: &Rally,
        dropout: Option<Rng>,
    ) -> Result<Vec<PredictionStep>> {
        let (pass, heads) = self.teacher_forced_pass(rally, dropout)?;
        Ok(pass.steps(&heads))
    }

    /// Prediction for the stroke following `strokes` (eval mode).
    pub fn predict_next(&self, rally: &Rally, strokes: &[Stroke]) -> Result<PredictionStep> {
        let feats = self.features(rally, strokes)?;
        let n = feats.len();
        let targets = self.target_rows(rally, std::iter::once(n + 1));
        let mut pass = Pass::new(&self.params, &self.config, None)?;
        let heads = pass.run(&feats, n - 1, &targets)?;
        Ok(pass.steps(&heads).remove(0))
    }

    /// Eval-mode embedding channels `(shot, area)` for `strokes`.
    pub fn embeddings(&self, rally: &Rally, strokes: &[Stroke]) -> Result<(Array, Array)> {
        let feats = self.features(rally, strokes)?;
        let mut pass = Pass::new(&self.params, &self.config, None)?;
        let (s, a) = pass.embed(&feats)?;
        Ok((pass.tape.value(s).clone(), pass.tape.value(a).clone()))
    }

    /// Eval-mode `(rally context, player context)` for `strokes`.
    pub fn contexts(&self, rally: &Rally, strokes: &[Stroke]) -> Result<(Array, Array)> {
        let feats = self.features(rally, strokes)?;
        let mut pass = Pass::new(&self.params, &self.config, None)?;
        let (s, a) = pass.embed(&feats)?;
        let h = pass.merge(s, a)?;
        let sides: Vec<Side> = feats.iter().map(|f| f.side).collect();
        let (r, p) = pass.encode(h, &sides)?;
        Ok((pass.tape.value(r).clone(), pass.tape.value(p).clone()))
    }
}

/// Mean cross-entropy and mean Gaussian NLL of `predictions` against
/// `targets` (landing in meters). Returns `(shot, area, total, clamped)`.
pub fn step_loss(
    predictions: &[PredictionStep],
    targets: &[Stroke],
    court: &CourtSpec,
) -> Result<StepLoss> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = predictions.len() as f64;
    let mut shot = 0.0;
    let mut area = 0.0;
    let mut clamped = false;
    for (p, t) in predictions.iter().zip(targets) {
        let prob = *p
            .type_probs
            .get(t.shot_type)
            .ok_or_else(|| Error::Input(format!("shot type {} outside prediction", t.shot_type)))?;
        if prob < PROB_FLOOR {
            clamped = true;
        }
        shot -= prob.max(PROB_FLOOR).ln();
        let target = normalize_coord(t.landing, court)?;
        area += p.area.nll(target.x, target.y);
    }
    if clamped {
        log::warn!("true-type probability below {PROB_FLOOR:e}; clamped in cross-entropy");
    }
    Ok(StepLoss {
        shot: shot / n,
        area: area / n,
        total: (shot + area) / n,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub shot: f64,
    pub area: f64,
    pub total: f64,
    pub clamped: bool,
}
