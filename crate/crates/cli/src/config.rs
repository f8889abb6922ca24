//! Run configuration: one flat `key = value` file merged with command-line
//! overrides.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; keys may appear once. Optional limits accept `none`.
//! Unknown keys are an error.

use std::fs;
use std::path::{Path, PathBuf};

use rallycast::court::{CourtSpec, ShotTypeVocab};
use rallycast::dataset::{FilterPolicy, SynthConfig};
use rallycast::model::ModelConfig;
use rallycast::sampler::{DEFAULT_OPEN_HORIZON, SCORE_SETS};
use rallycast::train::TrainConfig;
use rallycast::{Error, Result};

/// Every key the file format and the override flags accept.
pub const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "data",
    "vocab",
    "out",
    "n_rallies",
    "mean_length",
    "rallies_per_match",
    "n_players",
    "embed_dim",
    "n_heads",
    "n_layers",
    "ffn_dim",
    "dropout",
    "embedding_mode",
    "epochs",
    "batch_size",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_eps",
    "clip_norm",
    "eval_every",
    "eval_samples",
    "max_rally_length",
    "max_match_total_rounds",
    "min_rally_length",
    "train_fraction",
    "split_by_match",
    "strict_serve",
    "court_width",
    "court_length",
    "norm_mean_x",
    "norm_mean_y",
    "norm_std_x",
    "norm_std_y",
    "samples",
    "horizon",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub data: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub n_rallies: usize,
    pub mean_length: f64,
    pub rallies_per_match: usize,
    pub n_players: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub filter: FilterPolicy,
    /// 1.0 trains on everything and skips validation.
    pub train_fraction: f64,
    pub split_by_match: bool,
    pub strict_serve: bool,
    pub court: CourtSpec,
    pub samples: usize,
    pub horizon: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RunConfig {
            seed: 0,
            jobs: None,
            data: None,
            vocab: None,
            out: None,
            n_rallies: synth.n_rallies,
            mean_length: synth.mean_length,
            rallies_per_match: synth.rallies_per_match,
            n_players: synth.n_players,
            model: ModelConfig::new(0, 0),
            train: TrainConfig::default(),
            filter: FilterPolicy::default(),
            train_fraction: 0.8,
            split_by_match: false,
            strict_serve: true,
            court: CourtSpec::default(),
            samples: SCORE_SETS,
            horizon: DEFAULT_OPEN_HORIZON,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn parse_limit(key: &str, value: &str) -> Result<Option<usize>> {
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "bad value '{value}' for {key}; expected true or false"
        ))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => {
                self.seed = parse(key, v)?;
                self.train.seed = self.seed;
            }
            "jobs" => self.jobs = Some(parse(key, v)?),
            "data" => self.data = Some(PathBuf::from(v)),
            "vocab" => self.vocab = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "n_rallies" => self.n_rallies = parse(key, v)?,
            "mean_length" => self.mean_length = parse(key, v)?,
            "rallies_per_match" => self.rallies_per_match = parse(key, v)?,
            "n_players" => self.n_players = parse(key, v)?,
            "embed_dim" => self.model.embed_dim = parse(key, v)?,
            "n_heads" => self.model.n_heads = parse(key, v)?,
            "n_layers" => self.model.n_layers = parse(key, v)?,
            "ffn_dim" => self.model.ffn_dim = parse(key, v)?,
            "dropout" => self.model.dropout_rate = parse(key, v)?,
            "embedding_mode" => self.model.embedding_mode = v.parse()?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "beta1" => self.train.beta1 = parse(key, v)?,
            "beta2" => self.train.beta2 = parse(key, v)?,
            "adam_eps" => self.train.adam_eps = parse(key, v)?,
            "clip_norm" => {
                self.train.clip_norm = if v.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "eval_every" => self.train.eval_every = parse(key, v)?,
            "eval_samples" => self.train.eval_samples = parse(key, v)?,
            "max_rally_length" => self.filter.max_rally_length = parse_limit(key, v)?,
            "max_match_total_rounds" => self.filter.max_match_total_rounds = parse_limit(key, v)?,
            "min_rally_length" => self.filter.min_rally_length = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "split_by_match" => self.split_by_match = parse_bool(key, v)?,
            "strict_serve" => self.strict_serve = parse_bool(key, v)?,
            "court_width" => self.court.width_m = parse(key, v)?,
            "court_length" => self.court.length_m = parse(key, v)?,
            "norm_mean_x" => self.court.normalization.mean_x = parse(key, v)?,
            "norm_mean_y" => self.court.normalization.mean_y = parse(key, v)?,
            "norm_std_x" => self.court.normalization.std_x = parse(key, v)?,
            "norm_std_y" => self.court.normalization.std_y = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "horizon" => self.horizon = parse(key, v)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown configuration key '{key}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a config file on top of `self`.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            let k = k.trim();
            if seen.contains(&k) {
                return Err(Error::Config(format!(
                    "line {}: key '{k}' given twice",
                    i + 1
                )));
            }
            seen.push(k);
            self.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Checks every component's invariants. Vocabulary-dependent model
    /// fields are filled in later, so they are not checked here.
    pub fn validate(&self) -> Result<()> {
        let mut probe = self.model.clone();
        probe.vocab_size = probe.vocab_size.max(2);
        probe.validate()?;
        self.train.validate()?;
        self.filter.validate()?;
        self.court.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if self.samples == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "samples and horizon must be at least 1".into(),
            ));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn vocab(&self) -> Result<ShotTypeVocab> {
        match &self.vocab {
            Some(p) => ShotTypeVocab::from_csv_path(p),
            None => Ok(ShotTypeVocab::default()),
        }
    }

    pub fn synth_config(&self, vocab: ShotTypeVocab) -> SynthConfig {
        SynthConfig {
            n_rallies: self.n_rallies,
            mean_length: self.mean_length,
            rallies_per_match: self.rallies_per_match,
            vocab,
            court: self.court,
            player_styles: Vec::new(),
            n_players: self.n_players,
            seed: self.seed,
        }
    }

    /// Canonical `key = value` text for every setting.
    pub fn to_text(&self) -> String {
        let opt = |o: Option<usize>| o.map_or("none".to_string(), |v| v.to_string());
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let m = &self.model;
        let t = &self.train;
        let n = &self.court.normalization;
        let mut pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("n_rallies", self.n_rallies.to_string()),
            ("mean_length", format!("{:?}", self.mean_length)),
            ("rallies_per_match", self.rallies_per_match.to_string()),
            ("n_players", self.n_players.to_string()),
            ("embed_dim", m.embed_dim.to_string()),
            ("n_heads", m.n_heads.to_string()),
            ("n_layers", m.n_layers.to_string()),
            ("ffn_dim", m.ffn_dim.to_string()),
            ("dropout", format!("{:?}", m.dropout_rate)),
            ("embedding_mode", m.embedding_mode.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("learning_rate", format!("{:?}", t.learning_rate)),
            ("beta1", format!("{:?}", t.beta1)),
            ("beta2", format!("{:?}", t.beta2)),
            ("adam_eps", format!("{:?}", t.adam_eps)),
            (
                "clip_norm",
                t.clip_norm.map_or("none".into(), |c| format!("{c:?}")),
            ),
            ("eval_every", t.eval_every.to_string()),
            ("eval_samples", t.eval_samples.to_string()),
            ("max_rally_length", opt(self.filter.max_rally_length)),
            (
                "max_match_total_rounds",
                opt(self.filter.max_match_total_rounds),
            ),
            ("min_rally_length", self.filter.min_rally_length.to_string()),
            ("train_fraction", format!("{:?}", self.train_fraction)),
            ("split_by_match", self.split_by_match.to_string()),
            ("strict_serve", self.strict_serve.to_string()),
            ("court_width", format!("{:?}", self.court.width_m)),
            ("court_length", format!("{:?}", self.court.length_m)),
            ("norm_mean_x", format!("{:?}", n.mean_x)),
            ("norm_mean_y", format!("{:?}", n.mean_y)),
            ("norm_std_x", format!("{:?}", n.std_x)),
            ("norm_std_y", format!("{:?}", n.std_y)),
            ("samples", self.samples.to_string()),
            ("horizon", self.horizon.to_string()),
        ];
        for (k, v) in [
            ("data", &self.data),
            ("vocab", &self.vocab),
            ("out", &self.out),
        ] {
            if let Some(p) = path(v) {
                pairs.push((k, p));
            }
        }
        if let Some(j) = self.jobs {
            pairs.push(("jobs", j.to_string()));
        }
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# sweep\nepochs = 12\n\nembedding_mode = baseline\nmax_rally_length = none\n",
        )
        .unwrap();
        assert_eq!(c.train.epochs, 12);
        assert_eq!(c.filter.max_rally_length, None);
        c.set("epochs", "3").unwrap();
        assert_eq!(c.train.epochs, 3);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let mut c = RunConfig::default();
        assert!(c
            .apply_text("epochz = 3\n")
            .unwrap_err()
            .to_string()
            .contains("unknown configuration key"));
        assert!(c.apply_text("epochs = 3\nepochs = 4\n").is_err());
        assert!(c.apply_text("epochs 3\n").is_err());
        assert!(c.apply_text("epochs = three\n").is_err());
        assert!(c.apply_text("strict_serve = maybe\n").is_err());
    }

    #[test]
    fn invariants_are_checked() {
        for (k, v) in [
            ("epochs", "0"),
            ("batch_size", "0"),
            ("train_fraction", "0"),
            ("norm_std_x", "0"),
            ("court_width", "-1"),
            ("min_rally_length", "3"),
            ("embed_dim", "15"),
        ] {
            let mut c = RunConfig::default();
            c.set(k, v).unwrap();
            assert!(c.validate().is_err(), "{k} = {v}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("seed = 9\nclip_norm = none\ndata = x.csv\njobs = 2\nlearning_rate = 0.005\n")
            .unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        for k in KEYS {
            assert!(
                c.to_text().contains(&format!("{k} = ")) || ["vocab", "out"].contains(k),
                "{k}"
            );
        }
    }
}
