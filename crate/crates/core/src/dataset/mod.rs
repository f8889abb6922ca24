//! Rally CSV ingestion, training-set filtering, deterministic splits and the
//! synthetic corpus generator.
//!
//! Dataset files have the header
//! `match_id,rally_id,ball_round,player,type,landing_x,landing_y,player_location_x,player_location_y`
//! with one row per stroke. Player identities live in an optional sidecar
//! `<file>.players.csv` (`match_id,rally_id,player_a,player_b`); without it a
//! rally's players are named `<match_id>/A` and `<match_id>/B`.

mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::court::{Point, Rally, ShotTypeVocab, Side, Stroke, TAU};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub use synth::{synthesize_dataset, LandingKernel, PlayerStyle, SynthConfig};

pub const COLUMNS: [&str; 9] = [
    "match_id",
    "rally_id",
    "ball_round",
    "player",
    "type",
    "landing_x",
    "landing_y",
    "player_location_x",
    "player_location_y",
];

const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetMeta {
    pub n_matches: usize,
    pub n_rallies: usize,
    pub n_players: usize,
    pub strokes_per_player: BTreeMap<String, usize>,
    /// rally length -> number of rallies
    pub length_histogram: BTreeMap<usize, usize>,
}

impl DatasetMeta {
    pub fn from_rallies(rallies: &[Rally]) -> Self {
        let mut meta = DatasetMeta {
            n_rallies: rallies.len(),
            ..Default::default()
        };
        let matches: BTreeSet<&str> = rallies.iter().map(|r| r.match_id.as_str()).collect();
        meta.n_matches = matches.len();
        for r in rallies {
            *meta.length_histogram.entry(r.len()).or_default() += 1;
            for s in &r.strokes {
                *meta
                    .strokes_per_player
                    .entry(r.player_name(s.player).to_string())
                    .or_default() += 1;
            }
        }
        meta.n_players = meta.strokes_per_player.len();
        meta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: usize,
    pub fields: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ParsedDataset {
    pub rallies: Vec<Rally>,
    pub meta: DatasetMeta,
    pub rejects: Vec<RejectedRow>,
}

pub fn rejects_path(input: &Path) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(".rejects.csv");
    PathBuf::from(s)
}

pub fn players_path(input: &Path) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(".players.csv");
    PathBuf::from(s)
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

struct Row {
    line: usize,
    fields: Vec<String>,
    stroke: Stroke,
}

fn parse_row(
    fields: &[String],
    vocab: &ShotTypeVocab,
) -> std::result::Result<(String, String, Stroke), String> {
    if fields.len() != COLUMNS.len() {
        return Err(format!(
            "expected {} columns, found {}",
            COLUMNS.len(),
            fields.len()
        ));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        let v: f64 = fields[i]
            .trim()
            .parse()
            .map_err(|_| format!("{} is not a number: '{}'", COLUMNS[i], fields[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{} is not finite", COLUMNS[i]))
        }
    };
    let round_index: usize = fields[2]
        .trim()
        .parse()
        .ok()
        .filter(|&r| r >= 1)
        .ok_or_else(|| format!("bad ball_round '{}'", fields[2]))?;
    let player = Side::parse(&fields[3]).ok_or_else(|| format!("bad player '{}'", fields[3]))?;
    let shot_type = vocab
        .lookup(&fields[4])
        .ok_or_else(|| format!("unknown shot type '{}'", fields[4]))?;
    let stroke = Stroke {
        round_index,
        player,
        shot_type,
        landing: Point::new(num(5)?, num(6)?),
        player_location: Point::new(num(7)?, num(8)?),
    };
    let match_id = fields[0].trim().to_string();
    let rally_id = fields[1].trim().to_string();
    if match_id.is_empty() || rally_id.is_empty() {
        return Err("empty match_id or rally_id".into());
    }
    Ok((match_id, rally_id, stroke))
}

fn read_players(path: &Path) -> Result<HashMap<(String, String), (String, String)>> {
    let sidecar = players_path(path);
    let mut out = HashMap::new();
    if !sidecar.exists() {
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&sidecar)
        .map_err(|e| parse_err(&sidecar, e.to_string()))?;
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(&sidecar, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(
                &sidecar,
                "expected match_id,rally_id,player_a,player_b",
            ));
        }
        out.insert(
            (rec[0].to_string(), rec[1].to_string()),
            (rec[2].to_string(), rec[3].to_string()),
        );
    }
    Ok(out)
}

/// Parses a rally CSV. Malformed rows and rallies with broken round
/// numbering are collected in `rejects`; more than 10% malformed rows fails.
pub fn parse_dataset(path: &Path, vocab: &ShotTypeVocab) -> Result<ParsedDataset> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != COLUMNS {
        return Err(parse_err(
            path,
            format!("header must be '{}'", COLUMNS.join(",")),
        ));
    }

    let mut rejects = Vec::new();
    let mut n_rows = 0usize;
    let mut malformed_lines = Vec::new();
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<Row>> = HashMap::new();

    for (i, rec) in reader.records().enumerate() {
        n_rows += 1;
        let line = i + 2;
        let fields: Vec<String> = match rec {
            Ok(r) => r.iter().map(str::to_string).collect(),
            Err(e) => {
                malformed_lines.push(line);
                rejects.push(RejectedRow {
                    line,
                    fields: Vec::new(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&fields, vocab) {
            Ok((m, r, stroke)) => {
                let key = (m, r);
                let entry = groups.entry(key.clone()).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push(Row {
                    line,
                    fields,
                    stroke,
                });
            }
            Err(reason) => {
                malformed_lines.push(line);
                rejects.push(RejectedRow {
                    line,
                    fields,
                    reason,
                });
            }
        }
    }

    if n_rows > 0 && malformed_lines.len() as f64 > MAX_MALFORMED_FRACTION * n_rows as f64 {
        let shown: Vec<String> = malformed_lines
            .iter()
            .take(20)
            .map(usize::to_string)
            .collect();
        return Err(parse_err(
            path,
            format!(
                "{} of {} rows malformed (limit 10%); first offending lines: {}",
                malformed_lines.len(),
                n_rows,
                shown.join(", ")
            ),
        ));
    }

    let players = read_players(path)?;
    let mut rallies = Vec::new();
    for key in order {
        let mut rows = groups.remove(&key).expect("grouped");
        rows.sort_by_key(|r| r.stroke.round_index);
        let problem = rows.iter().enumerate().find_map(|(i, r)| {
            let expected = i + 1;
            match r.stroke.round_index.cmp(&expected) {
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Less => {
                    Some(format!("duplicate round {}", r.stroke.round_index))
                }
                std::cmp::Ordering::Greater => Some(format!("gap at {expected}")),
            }
        });
        if let Some(reason) = problem {
            for r in rows {
                rejects.push(RejectedRow {
                    line: r.line,
                    fields: r.fields,
                    reason: reason.clone(),
                });
            }
            continue;
        }
        let (player_a, player_b) = players
            .get(&key)
            .cloned()
            .unwrap_or_else(|| (format!("{}/A", key.0), format!("{}/B", key.0)));
        rallies.push(Rally {
            match_id: key.0,
            rally_id: key.1,
            player_a,
            player_b,
            strokes: rows.into_iter().map(|r| r.stroke).collect(),
        });
    }
    rejects.sort_by_key(|r| r.line);
    let meta = DatasetMeta::from_rallies(&rallies);
    Ok(ParsedDataset {
        rallies,
        meta,
        rejects,
    })
}

/// Writes `<input>.rejects.csv`: the original columns plus `reason`.
pub fn write_rejects(input: &Path, rejects: &[RejectedRow]) -> Result<PathBuf> {
    let out = rejects_path(input);
    let mut w = csv::Writer::from_path(&out).map_err(|e| Error::io(&out, e.into()))?;
    let mut header: Vec<&str> = COLUMNS.to_vec();
    header.push("reason");
    let io = |e: csv::Error| Error::io(&out, e.into());
    w.write_record(&header).map_err(io)?;
    for r in rejects {
        let mut rec: Vec<String> = r.fields.clone();
        rec.resize(COLUMNS.len(), String::new());
        rec.push(r.reason.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

/// Canonical float formatting used by every file this crate writes.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Rounds to the value that `fmt6` followed by a parse would give back.
pub fn quantize6(v: f64) -> f64 {
    fmt6(v).parse().expect("formatted float parses")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Canonical dataset text: rallies and strokes in order, floats with 6 decimals.
pub fn dataset_to_csv(rallies: &[Rally], vocab: &ShotTypeVocab) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rallies {
        for s in &r.strokes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_field(&r.match_id),
                csv_field(&r.rally_id),
                s.round_index,
                s.player,
                csv_field(vocab.name(s.shot_type)),
                fmt6(s.landing.x),
                fmt6(s.landing.y),
                fmt6(s.player_location.x),
                fmt6(s.player_location.y),
            ));
        }
    }
    out
}

pub fn players_to_csv(rallies: &[Rally]) -> String {
    let mut out = String::from("match_id,rally_id,player_a,player_b\n");
    for r in rallies {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&r.match_id),
            csv_field(&r.rally_id),
            csv_field(&r.player_a),
            csv_field(&r.player_b)
        ));
    }
    out
}

/// Writes the dataset CSV and its players sidecar.
pub fn write_dataset(path: &Path, rallies: &[Rally], vocab: &ShotTypeVocab) -> Result<()> {
    fs::write(path, dataset_to_csv(rallies, vocab)).map_err(|e| Error::io(path, e))?;
    let sidecar = players_path(path);
    fs::write(&sidecar, players_to_csv(rallies)).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterPolicy {
    pub max_rally_length: Option<usize>,
    pub max_match_total_rounds: Option<usize>,
    pub min_rally_length: usize,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            max_rally_length: Some(35),
            max_match_total_rounds: Some(300),
            min_rally_length: TAU + 1,
        }
    }
}

impl FilterPolicy {
    /// Only enforces the minimum length.
    pub fn permissive() -> Self {
        FilterPolicy {
            max_rally_length: None,
            max_match_total_rounds: None,
            min_rally_length: TAU + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_rally_length < TAU + 1 {
            return Err(Error::Config(format!(
                "min_rally_length must be at least {}, got {}",
                TAU + 1,
                self.min_rally_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    MatchTooLong { total_strokes: usize, limit: usize },
    RallyTooLong { length: usize, limit: usize },
    RallyTooShort { length: usize, limit: usize },
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::MatchTooLong {
                total_strokes,
                limit,
            } => {
                write!(f, "match has {total_strokes} strokes (limit {limit})")
            }
            DropReason::RallyTooLong { length, limit } => {
                write!(f, "rally length {length} > {limit}")
            }
            DropReason::RallyTooShort { length, limit } => {
                write!(f, "rally length {length} < {limit}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DroppedRally {
    pub match_id: String,
    pub rally_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: Vec<Rally>,
    pub dropped: Vec<DroppedRally>,
}

/// Drops whole matches whose summed stroke count exceeds the match limit,
/// then single rallies outside the length bounds.
pub fn filter_training(rallies: &[Rally], policy: &FilterPolicy) -> FilterOutcome {
    let mut totals: HashMap<&str, usize> = HashMap::new();
    for r in rallies {
        *totals.entry(r.match_id.as_str()).or_default() += r.len();
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in rallies {
        let total = totals[r.match_id.as_str()];
        let reason = match (policy.max_match_total_rounds, policy.max_rally_length) {
            (Some(limit), _) if total > limit => Some(DropReason::MatchTooLong {
                total_strokes: total,
                limit,
            }),
            (_, Some(limit)) if r.len() > limit => Some(DropReason::RallyTooLong {
                length: r.len(),
                limit,
            }),
            _ if r.len() < policy.min_rally_length => Some(DropReason::RallyTooShort {
                length: r.len(),
                limit: policy.min_rally_length,
            }),
            _ => None,
        };
        match reason {
            Some(reason) => dropped.push(DroppedRally {
                match_id: r.match_id.clone(),
                rally_id: r.rally_id.clone(),
                reason,
            }),
            None => kept.push(r.clone()),
        }
    }
    FilterOutcome { kept, dropped }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Rally>,
    pub validation: Vec<Rally>,
}

/// Seeded shuffle, then the first `ceil(fraction * n)` units go to training.
/// Units are rallies, or whole matches when `by_match` is set. Both sides
/// keep the input's relative order.
pub fn split(rallies: &[Rally], train_fraction: f64, seed: u64, by_match: bool) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if rallies.is_empty() {
        return Err(Error::Input("cannot split an empty dataset".into()));
    }
    // unit id per rally
    let unit_of: Vec<usize> = if by_match {
        let mut ids: Vec<&str> = Vec::new();
        rallies
            .iter()
            .map(|r| match ids.iter().position(|m| *m == r.match_id) {
                Some(i) => i,
                None => {
                    ids.push(&r.match_id);
                    ids.len() - 1
                }
            })
            .collect()
    } else {
        (0..rallies.len()).collect()
    };
    let n_units = unit_of.iter().max().map_or(0, |m| m + 1);
    let mut units: Vec<usize> = (0..n_units).collect();
    units.shuffle(&mut SeedStream::new(seed).child(0x5911).rng());
    let n_train = ((train_fraction * n_units as f64) - 1e-9).ceil().max(1.0) as usize;
    let n_train = n_train.min(n_units);
    if n_train == n_units {
        log::warn!(
            "split leaves the validation side empty ({n_units} units, fraction {train_fraction})"
        );
    }
    let in_train: BTreeSet<usize> = units[..n_train].iter().copied().collect();
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
    };
    for (r, unit) in rallies.iter().zip(&unit_of) {
        if in_train.contains(unit) {
            out.train.push(r.clone());
        } else {
            out.validation.push(r.clone());
        }
    }
    Ok(out)
}
