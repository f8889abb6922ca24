//! Plain-text checkpoint container.
//!
//! ```text
//! rallycast-checkpoint 1
//! config <key> <value>          one line per ModelConfig field
//! court <key> <value>           width_m length_m mean_x mean_y std_x std_y
//! vocab <id> <is_serve 0|1> <name>
//! player <name>
//! array <name> <dim>...         followed by one line of space-separated values
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a checkpoint back reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use super::{EmbeddingMode, Model, ModelConfig, ModelParams, PlayerIndex};
use crate::court::{CourtSpec, Normalization, ShotType, ShotTypeVocab};
use crate::error::{Error, Result};
use crate::numerics::Array;

const MAGIC: &str = "rallycast-checkpoint 1";

pub fn checkpoint_to_string(model: &Model) -> String {
    let c = &model.config;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let mut kv = |section: &str, key: &str, value: String| {
        out.push_str(&format!("{section} {key} {value}\n"));
    };
    kv("config", "embed_dim", c.embed_dim.to_string());
    kv("config", "n_heads", c.n_heads.to_string());
    kv("config", "n_layers", c.n_layers.to_string());
    kv("config", "ffn_dim", c.ffn_dim.to_string());
    kv("config", "dropout_rate", format!("{:?}", c.dropout_rate));
    kv("config", "vocab_size", c.vocab_size.to_string());
    kv("config", "n_players", c.n_players.to_string());
    kv("config", "embedding_mode", c.embedding_mode.to_string());
    kv("config", "tau", c.tau.to_string());
    let court = &model.court;
    let n = &court.normalization;
    for (k, v) in [
        ("width_m", court.width_m),
        ("length_m", court.length_m),
        ("mean_x", n.mean_x),
        ("mean_y", n.mean_y),
        ("std_x", n.std_x),
        ("std_y", n.std_y),
    ] {
        kv("court", k, format!("{v:?}"));
    }
    for e in model.vocab.entries() {
        out.push_str(&format!(
            "vocab {} {} {}\n",
            e.id,
            u8::from(e.is_serve),
            e.name
        ));
    }
    for p in model.players.names() {
        out.push_str(&format!("player {p}\n"));
    }
    for (name, a) in model.params.entries() {
        let dims: Vec<String> = a.shape().iter().map(usize::to_string).collect();
        out.push_str(&format!("array {name} {}\n", dims.join(" ")));
        let vals: Vec<String> = a.data().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn write_checkpoint(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, checkpoint_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text).map_err(|e| match e {
        Error::Config(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("checkpoint: bad value '{s}' for {what}")))
}

pub fn checkpoint_from_str(text: &str) -> Result<Model> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Config("checkpoint: missing header line".into()));
    }
    let mut config = ModelConfig::new(0, 0);
    let mut court = CourtSpec::default();
    let mut vocab = Vec::new();
    let mut players = Vec::new();
    let mut arrays: Vec<(String, Array)> = Vec::new();
    let mut ended = false;

    while let Some(line) = lines.next() {
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        match tag {
            "config" => {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::Config(format!("checkpoint: bad line '{line}'")))?;
                match k {
                    "embed_dim" => config.embed_dim = num(v, k)?,
                    "n_heads" => config.n_heads = num(v, k)?,
                    "n_layers" => config.n_layers = num(v, k)?,
                    "ffn_dim" => config.ffn_dim = num(v, k)?,
                    "dropout_rate" => config.dropout_rate = num(v, k)?,
                    "vocab_size" => config.vocab_size = num(v, k)?,
                    "n_players" => config.n_players = num(v, k)?,
                    "embedding_mode" => config.embedding_mode = v.parse::<EmbeddingMode>()?,
                    "tau" => config.tau = num(v, k)?,
                    _ => {
                        return Err(Error::Config(format!(
                            "checkpoint: unknown config key '{k}'"
                        )))
                    }
                }
            }
            "court" => {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::Config(format!("checkpoint: bad line '{line}'")))?;
                let v: f64 = num(v, k)?;
                let n: &mut Normalization = &mut court.normalization;
                match k {
                    "width_m" => court.width_m = v,
                    "length_m" => court.length_m = v,
                    "mean_x" => n.mean_x = v,
                    "mean_y" => n.mean_y = v,
                    "std_x" => n.std_x = v,
                    "std_y" => n.std_y = v,
                    _ => {
                        return Err(Error::Config(format!(
                            "checkpoint: unknown court key '{k}'"
                        )))
                    }
                }
            }
            "vocab" => {
                let mut parts = rest.splitn(3, ' ');
                let id = num(parts.next().unwrap_or(""), "vocab id")?;
                let is_serve = parts.next() == Some("1");
                let name = parts
                    .next()
                    .ok_or_else(|| Error::Config(format!("checkpoint: bad line '{line}'")))?;
                vocab.push(ShotType {
                    id,
                    name: name.to_string(),
                    is_serve,
                });
            }
            "player" => players.push(rest.to_string()),
            "array" => {
                let mut parts = rest.split(' ');
                let name = parts.next().unwrap_or("").to_string();
                let shape = parts
                    .map(|d| num(d, "array dim"))
                    .collect::<Result<Vec<usize>>>()?;
                let values = lines
                    .next()
                    .ok_or_else(|| Error::Config(format!("checkpoint: no values for {name}")))?;
                let data = values
                    .split_ascii_whitespace()
                    .map(|v| num(v, &name))
                    .collect::<Result<Vec<f64>>>()?;
                let a = Array::new(&shape, data)
                    .map_err(|e| Error::Config(format!("checkpoint: {name}: {e}")))?;
                arrays.push((name, a));
            }
            "end" => {
                ended = true;
                break;
            }
            _ => {
                return Err(Error::Config(format!(
                    "checkpoint: unexpected line '{line}'"
                )))
            }
        }
    }
    if !ended {
        return Err(Error::Config(
            "checkpoint: truncated (no end marker)".into(),
        ));
    }

    config.validate()?;
    let mut params = ModelParams::zeros(&config);
    let expected: Vec<String> = params.entries().into_iter().map(|(n, _)| n).collect();
    let found: Vec<&String> = arrays.iter().map(|(n, _)| n).collect();
    if expected.len() != found.len() || expected.iter().zip(&found).any(|(a, b)| a != *b) {
        return Err(Error::Config(
            "checkpoint: array names do not match the configuration".into(),
        ));
    }
    let mut it = arrays.into_iter();
    params.for_each_mut(|_, slot| *slot = it.next().expect("counted").1);
    if !params.is_finite() {
        return Err(Error::Config("checkpoint: non-finite parameter".into()));
    }
    Model::new(
        config,
        params,
        ShotTypeVocab::new(vocab)?,
        PlayerIndex::new(players),
        court,
    )
}
