#![allow(dead_code)]

use rallycast::court::{CourtSpec, Point, Rally, ShotTypeVocab, Side, Stroke};
use rallycast::model::{EmbeddingMode, Model, ModelConfig, ModelParams, PlayerIndex};

pub fn rally(len: usize, seed: u64) -> Rally {
    let strokes = (1..=len)
        .map(|k| {
            let f = (k as f64 * 0.37 + seed as f64 * 0.11).sin();
            Stroke {
                round_index: k,
                player: Side::for_round(k),
                shot_type: if k == 1 {
                    0
                } else {
                    2 + (k + seed as usize) % 4
                },
                landing: Point::new(3.0 + 1.5 * f, 10.0 + 2.0 * (f * 1.7).cos()),
                player_location: Point::new(3.0 - f, 3.0 + f),
            }
        })
        .collect();
    Rally {
        rally_id: format!("r{seed}"),
        match_id: "m1".into(),
        player_a: "alice".into(),
        player_b: "bob".into(),
        strokes,
    }
}

pub fn tiny_config(mode: EmbeddingMode) -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        n_heads: 2,
        n_layers: 1,
        ffn_dim: 8,
        dropout_rate: 0.2,
        vocab_size: 4,
        n_players: 2,
        embedding_mode: mode,
        tau: 4,
    }
}

pub fn tiny_vocab() -> ShotTypeVocab {
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

/// Tiny rally whose shot types stay inside a 4-type vocabulary.
pub fn tiny_rally(len: usize, seed: u64) -> Rally {
    let mut r = rally(len, seed);
    for s in r.strokes.iter_mut().skip(1) {
        s.shot_type = 1 + s.shot_type % 3;
    }
    r
}

pub fn model_with(config: ModelConfig, vocab: ShotTypeVocab, seed: u64) -> Model {
    let players = PlayerIndex::new(vec!["alice".into(), "bob".into()]);
    let mut config = config;
    config.vocab_size = vocab.len();
    config.n_players = 2;
    let params = ModelParams::init(&config, seed);
    Model::new(config, params, vocab, players, CourtSpec::default()).unwrap()
}

pub fn default_model(mode: EmbeddingMode, seed: u64) -> Model {
    let mut c = ModelConfig::new(10, 2);
    c.embedding_mode = mode;
    model_with(c, ShotTypeVocab::default(), seed)
}
