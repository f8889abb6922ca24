//! Rally domain types, shot-type vocabulary and court geometry.
//!
//! Coordinates use one canonical frame: origin at a corner of the court, `x`
//! across the 6.1 m width, `y` along the 13.4 m length. Every stroke is stored
//! as if the shuttle travels toward increasing `y`, so landings fall on the
//! far half (`y >= length / 2`) and the hitter stands on the near half.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Observed prefix length given to the model.
pub const TAU: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    /// Hitter of the 1-based `round`: A serves, then strict alternation.
    pub fn for_round(round: usize) -> Side {
        if round % 2 == 1 {
            Side::A
        } else {
            Side::B
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim() {
            "A" | "a" => Some(Side::A),
            "B" | "b" => Some(Side::B),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotType {
    pub id: usize,
    pub name: String,
    pub is_serve: bool,
}

/// Ordered shot-type vocabulary with ids `0..V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTypeVocab {
    entries: Vec<ShotType>,
}

const DEFAULT_TYPES: [(&str, bool); 10] = [
    ("short service", true),
    ("long service", true),
    ("net shot", false),
    ("smash", false),
    ("drive", false),
    ("defensive shot", false),
    ("clear", false),
    ("drop", false),
    ("lob", false),
    ("push", false),
];

impl Default for ShotTypeVocab {
    fn default() -> Self {
        let entries = DEFAULT_TYPES
            .iter()
            .enumerate()
            .map(|(id, (name, is_serve))| ShotType {
                id,
                name: name.to_string(),
                is_serve: *is_serve,
            })
            .collect();
        ShotTypeVocab { entries }
    }
}

impl ShotTypeVocab {
    pub fn new(entries: Vec<ShotType>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.id != i {
                return Err(Error::Config(format!(
                    "vocabulary ids must be 0..V without gaps; entry {i} has id {}",
                    e.id
                )));
            }
            let name = e.name.trim().to_lowercase();
            if name.is_empty() {
                return Err(Error::Config(format!(
                    "vocabulary entry {i} has an empty name"
                )));
            }
            if entries[..i]
                .iter()
                .any(|o| o.name.trim().to_lowercase() == name)
            {
                return Err(Error::Config(format!(
                    "duplicate shot type name '{}'",
                    e.name
                )));
            }
        }
        if !entries.iter().any(|e| !e.is_serve) {
            return Err(Error::Config(
                "vocabulary needs at least one non-serve type".into(),
            ));
        }
        Ok(ShotTypeVocab { entries })
    }

    /// Reads a `type_id,name,is_serve` CSV file.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| {
                Error::Config(format!("cannot read vocabulary {}: {e}", path.display()))
            })?;
        let mut entries = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let bad = || {
                Error::Config(format!(
                    "{}: malformed vocabulary row {}",
                    path.display(),
                    line + 2
                ))
            };
            if rec.len() != 3 {
                return Err(bad());
            }
            let id = rec[0].parse().map_err(|_| bad())?;
            let is_serve = match rec[2].to_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                _ => return Err(bad()),
            };
            entries.push(ShotType {
                id,
                name: rec[1].to_string(),
                is_serve,
            });
        }
        ShotTypeVocab::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("type_id,name,is_serve\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.id, e.name, e.is_serve));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ShotType] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&ShotType> {
        self.entries.get(id)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.entries[id].name
    }

    pub fn is_serve(&self, id: usize) -> bool {
        self.entries.get(id).is_some_and(|e| e.is_serve)
    }

    /// Case-insensitive name lookup.
    pub fn lookup(&self, name: &str) -> Option<usize> {
        let wanted = name.trim().to_lowercase();
        self.entries
            .iter()
            .find(|e| e.name.to_lowercase() == wanted)
            .map(|e| e.id)
    }

    /// Header-safe column suffix: lowercase with spaces replaced by `_`.
    pub fn column_name(&self, id: usize) -> String {
        self.entries[id]
            .name
            .trim()
            .to_lowercase()
            .replace(' ', "_")
    }

    pub fn serve_ids(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.is_serve)
            .map(|e| e.id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean_x: f64,
    pub mean_y: f64,
    pub std_x: f64,
    pub std_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourtSpec {
    pub width_m: f64,
    pub length_m: f64,
    pub normalization: Normalization,
}

impl Default for CourtSpec {
    fn default() -> Self {
        CourtSpec {
            width_m: 6.1,
            length_m: 13.4,
            normalization: Normalization {
                mean_x: 3.05,
                mean_y: 10.05,
                std_x: 1.5,
                std_y: 1.7,
            },
        }
    }
}

impl CourtSpec {
    pub fn validate(&self) -> Result<()> {
        let n = &self.normalization;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.width_m) || !positive(self.length_m) {
            return Err(Error::Config(format!(
                "court dimensions must be positive, got {} x {}",
                self.width_m, self.length_m
            )));
        }
        if !positive(n.std_x) || !positive(n.std_y) {
            return Err(Error::Config(format!(
                "normalization std must be positive, got ({}, {})",
                n.std_x, n.std_y
            )));
        }
        if !n.mean_x.is_finite() || !n.mean_y.is_finite() {
            return Err(Error::Config("normalization mean must be finite".into()));
        }
        Ok(())
    }

    pub fn net_y(&self) -> f64 {
        self.length_m / 2.0
    }

    /// Maps a point into the opposite player's frame (180 degree rotation).
    pub fn mirror(&self, p: Point) -> Point {
        Point::new(self.width_m - p.x, self.length_m - p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

pub fn normalize_coord(p: Point, court: &CourtSpec) -> Result<Point> {
    court.validate()?;
    let n = &court.normalization;
    Ok(Point::new(
        (p.x - n.mean_x) / n.std_x,
        (p.y - n.mean_y) / n.std_y,
    ))
}

pub fn denormalize_coord(p: Point, court: &CourtSpec) -> Result<Point> {
    court.validate()?;
    let n = &court.normalization;
    Ok(Point::new(
        p.x * n.std_x + n.mean_x,
        p.y * n.std_y + n.mean_y,
    ))
}

/// Landing zone 1..=10. Zones 1-9 are a 3x3 grid on the receiver's half,
/// zone 10 is everything outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(u8);

impl ZoneId {
    pub const OUT: ZoneId = ZoneId(10);

    pub fn new(value: u8) -> Option<ZoneId> {
        (1..=10).contains(&value).then_some(ZoneId(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ZoneId> {
        (1..=10).map(ZoneId)
    }
}

/// Cell index along one axis for a coordinate already known to lie in
/// `[0, extent]`. Points on an internal boundary go to the lower cell.
fn grid_cell(v: f64, extent: f64) -> usize {
    let scaled = v / (extent / 3.0);
    (scaled.ceil() as isize - 1).clamp(0, 2) as usize
}

/// Zone of a landing point on `receiver`'s half-court.
///
/// In the canonical frame player B's half is `y in [L/2, L]`. Columns run
/// left to right as seen by the receiver facing the net, rows from the net
/// back to the baseline, and `zone = 3 * row + col + 1`.
pub fn coord_to_zone(landing: Point, court: &CourtSpec, receiver: Side) -> Result<ZoneId> {
    if !landing.is_finite() {
        return Err(Error::Input(format!(
            "non-finite landing coordinate ({}, {})",
            landing.x, landing.y
        )));
    }
    // Work in A's half: net at y = L/2, baseline at y = 0, receiver's left at x = 0.
    let p = match receiver {
        Side::A => landing,
        Side::B => court.mirror(landing),
    };
    let half = court.net_y();
    if p.x < 0.0 || p.x > court.width_m || p.y < 0.0 || p.y > half {
        return Ok(ZoneId::OUT);
    }
    let col = grid_cell(p.x, court.width_m);
    let row = grid_cell(half - p.y, half);
    Ok(ZoneId((3 * row + col + 1) as u8))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub round_index: usize,
    pub player: Side,
    pub shot_type: usize,
    pub landing: Point,
    pub player_location: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rally {
    pub rally_id: String,
    pub match_id: String,
    pub player_a: String,
    pub player_b: String,
    pub strokes: Vec<Stroke>,
}

impl Rally {
    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn player_name(&self, side: Side) -> &str {
        match side {
            Side::A => &self.player_a,
            Side::B => &self.player_b,
        }
    }

    /// Number of strokes to forecast after the observed prefix.
    pub fn n_targets(&self) -> usize {
        self.strokes.len().saturating_sub(TAU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    EmptyRally,
    RoundIndex,
    Alternation,
    UnknownType,
    FirstNotServe,
    ServeAfterFirst,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 1-based stroke index; 0 for rally-level problems.
    pub stroke_index: usize,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stroke {}: {}", self.stroke_index, self.message)
    }
}

pub fn validate_rally(rally: &Rally, vocab: &ShotTypeVocab, strict_serve: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |stroke_index, rule, message: String| {
        out.push(Violation {
            stroke_index,
            rule,
            message,
        })
    };
    if rally.strokes.is_empty() {
        flag(0, Rule::EmptyRally, "rally has no strokes".into());
    }
    for (i, s) in rally.strokes.iter().enumerate() {
        let k = i + 1;
        if s.round_index != k {
            flag(
                k,
                Rule::RoundIndex,
                format!("round_index {} where {k} expected", s.round_index),
            );
        }
        let expected = Side::for_round(k);
        if s.player != expected {
            flag(
                k,
                Rule::Alternation,
                format!("hit by {} where {expected} expected", s.player),
            );
        }
        if !s.landing.is_finite() || !s.player_location.is_finite() {
            flag(k, Rule::NonFinite, "non-finite coordinate".into());
        }
        match vocab.get(s.shot_type) {
            None => flag(
                k,
                Rule::UnknownType,
                format!("unknown shot type id {}", s.shot_type),
            ),
            Some(t) if strict_serve && k == 1 && !t.is_serve => flag(
                k,
                Rule::FirstNotServe,
                format!("first stroke is '{}', not a serve", t.name),
            ),
            Some(t) if strict_serve && k > 1 && t.is_serve => flag(
                k,
                Rule::ServeAfterFirst,
                format!("serve type '{}' after round 1", t.name),
            ),
            Some(_) => {}
        }
    }
    out
}
