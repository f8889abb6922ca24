//! Descriptive tables over datasets and prediction files: shot-type
//! distributions, the six-sample type vote, landing-zone histograms and
//! per-round probability trends.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::court::{coord_to_zone, CourtSpec, Point, Rally, ShotTypeVocab, Side, ZoneId};
use crate::dataset::fmt6;
use crate::error::{Error, Result};
use crate::sampler::SampleSet;

/// Zone of a landing point. Landings are on the far half of the canonical
/// frame, which is player B's half.
pub fn landing_zone(p: Point, court: &CourtSpec) -> Result<ZoneId> {
    coord_to_zone(p, court, Side::B)
}

/// Zone of a hitter location, which sits on the near half (player A's).
pub fn location_zone(p: Point, court: &CourtSpec) -> Result<ZoneId> {
    coord_to_zone(p, court, Side::A)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    BallRound,
    Player,
    LandingZone,
    PlayerLocationZone,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [
        Grouping::BallRound,
        Grouping::Player,
        Grouping::LandingZone,
        Grouping::PlayerLocationZone,
    ];
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::BallRound => "ball_round",
            Grouping::Player => "player",
            Grouping::LandingZone => "landing_zone",
            Grouping::PlayerLocationZone => "player_location_zone",
        })
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Grouping::ALL
            .into_iter()
            .find(|g| g.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown grouping '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub key: String,
    pub type_id: usize,
    pub count: usize,
    /// Share of the key's strokes with this type.
    pub fraction: f64,
}

/// Shot-type counts per group. Every group lists every type, so fractions
/// within a group sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    pub grouping: Grouping,
    pub type_names: Vec<String>,
    pub rows: Vec<DistributionRow>,
}

impl DistributionTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},type,count,fraction\n", self.grouping);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.key,
                self.type_names[r.type_id],
                r.count,
                fmt6(r.fraction)
            ));
        }
        out
    }

    /// Rows of one key, in type order.
    pub fn group(&self, key: &str) -> Vec<&DistributionRow> {
        self.rows.iter().filter(|r| r.key == key).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Num(usize),
    Name(String),
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Num(n) => write!(f, "{n}"),
            Key::Name(s) => f.write_str(s),
        }
    }
}

fn table(
    grouping: Grouping,
    vocab: &ShotTypeVocab,
    groups: BTreeMap<Key, Vec<usize>>,
) -> DistributionTable {
    let mut rows = Vec::new();
    for (key, counts) in groups {
        let total: usize = counts.iter().sum();
        for (type_id, &count) in counts.iter().enumerate() {
            rows.push(DistributionRow {
                key: key.to_string(),
                type_id,
                count,
                fraction: count as f64 / total as f64,
            });
        }
    }
    DistributionTable {
        grouping,
        type_names: vocab.entries().iter().map(|e| e.name.clone()).collect(),
        rows,
    }
}

/// Empirical shot-type distribution of `rallies` grouped by `group_by`.
pub fn shot_distribution(
    rallies: &[Rally],
    vocab: &ShotTypeVocab,
    court: &CourtSpec,
    group_by: Grouping,
) -> Result<DistributionTable> {
    let v = vocab.len();
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for r in rallies {
        for s in &r.strokes {
            if s.shot_type >= v {
                return Err(Error::Input(format!(
                    "rally {} round {}: shot type {} outside the vocabulary",
                    r.rally_id, s.round_index, s.shot_type
                )));
            }
            let key = match group_by {
                Grouping::BallRound => Key::Num(s.round_index),
                Grouping::Player => Key::Name(r.player_name(s.player).to_string()),
                Grouping::LandingZone => Key::Num(landing_zone(s.landing, court)?.value() as usize),
                Grouping::PlayerLocationZone => {
                    Key::Num(location_zone(s.player_location, court)?.value() as usize)
                }
            };
            groups.entry(key).or_insert_with(|| vec![0; v])[s.shot_type] += 1;
        }
    }
    Ok(table(group_by, vocab, groups))
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

/// Checks that all sets cover the same rallies and rounds in the same order.
fn check_aligned(sets: &[SampleSet]) -> Result<()> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Input("no sample sets".into()))?;
    for (j, set) in sets.iter().enumerate().skip(1) {
        let same = set.len() == first.len()
            && set.iter().zip(first).all(|(a, b)| {
                a.rally_id == b.rally_id
                    && a.strokes.len() == b.strokes.len()
                    && a.strokes
                        .iter()
                        .zip(&b.strokes)
                        .all(|(x, y)| x.round_index == y.round_index)
            });
        if !same {
            return Err(Error::Input(format!(
                "sample set {} does not cover the same strokes as sample set 1",
                j + 1
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotedStroke {
    pub rally_id: String,
    pub round_index: usize,
    pub winner: usize,
    /// Argmax votes per type.
    pub votes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub strokes: Vec<VotedStroke>,
    pub type_names: Vec<String>,
    /// Winners per type over all strokes.
    pub counts: Vec<usize>,
}

impl VoteResult {
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.strokes.len() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// `rally_id,ball_round,winner,votes_<type>...`
    pub fn strokes_csv(&self) -> String {
        let mut out = String::from("rally_id,ball_round,winner");
        for n in &self.type_names {
            out.push_str(&format!(",votes_{}", n.to_lowercase().replace(' ', "_")));
        }
        out.push('\n');
        for s in &self.strokes {
            out.push_str(&format!(
                "{},{},{}",
                s.rally_id, s.round_index, self.type_names[s.winner]
            ));
            for v in &s.votes {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// `type,count,fraction`
    pub fn distribution_csv(&self) -> String {
        let mut out = String::from("type,count,fraction\n");
        for ((name, c), f) in self
            .type_names
            .iter()
            .zip(&self.counts)
            .zip(self.fractions())
        {
            out.push_str(&format!("{name},{c},{}\n", fmt6(f)));
        }
        out
    }
}

/// Final type per predicted stroke: each sample votes for its argmax type;
/// ties go to the larger summed probability across samples, then to the
/// lower type id.
pub fn predicted_type_vote(sets: &[SampleSet], vocab: &ShotTypeVocab) -> Result<VoteResult> {
    check_aligned(sets)?;
    let v = vocab.len();
    let mut strokes = Vec::new();
    let mut counts = vec![0; v];
    for (i, rp) in sets[0].iter().enumerate() {
        for (k, s) in rp.strokes.iter().enumerate() {
            let mut votes = vec![0usize; v];
            let mut mass = vec![0.0; v];
            for set in sets {
                let probs = &set[i].strokes[k].type_probs;
                if probs.len() != v {
                    return Err(Error::Input(format!(
                        "rally {} round {}: {} probabilities for {v} types",
                        rp.rally_id,
                        s.round_index,
                        probs.len()
                    )));
                }
                votes[argmax(probs)] += 1;
                for (m, p) in mass.iter_mut().zip(probs) {
                    *m += p;
                }
            }
            let winner = (0..v)
                .max_by(|&a, &b| {
                    votes[a]
                        .cmp(&votes[b])
                        .then(mass[a].total_cmp(&mass[b]))
                        .then(b.cmp(&a))
                })
                .expect("non-empty vocabulary");
            counts[winner] += 1;
            strokes.push(VotedStroke {
                rally_id: rp.rally_id.clone(),
                round_index: s.round_index,
                winner,
                votes,
            });
        }
    }
    if strokes.is_empty() {
        return Err(Error::Input("prediction file has no strokes".into()));
    }
    Ok(VoteResult {
        strokes,
        type_names: vocab.entries().iter().map(|e| e.name.clone()).collect(),
        counts,
    })
}

/// Counts per zone 1..=10.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneHistogram {
    pub counts: [usize; 10],
}

impl ZoneHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fractions(&self) -> [f64; 10] {
        let n = self.total() as f64;
        self.counts.map(|c| c as f64 / n)
    }

    /// `zone,count,fraction`, always ten rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zone,count,fraction\n");
        for (z, (c, f)) in self.counts.iter().zip(self.fractions()).enumerate() {
            out.push_str(&format!("{},{c},{}\n", z + 1, fmt6(f)));
        }
        out
    }
}

pub fn zone_histogram(
    points: impl IntoIterator<Item = Point>,
    court: &CourtSpec,
) -> Result<ZoneHistogram> {
    let mut counts = [0; 10];
    for p in points {
        counts[landing_zone(p, court)?.value() as usize - 1] += 1;
    }
    if counts.iter().sum::<usize>() == 0 {
        return Err(Error::Input("no landing points".into()));
    }
    Ok(ZoneHistogram { counts })
}

/// Landing zones of every predicted stroke of every sample.
pub fn landing_zone_distribution(sets: &[SampleSet], court: &CourtSpec) -> Result<ZoneHistogram> {
    zone_histogram(
        sets.iter()
            .flatten()
            .flat_map(|rp| rp.strokes.iter().map(|s| s.landing)),
        court,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub round: usize,
    /// Predicted strokes averaged, over all rallies and samples.
    pub n: usize,
    pub mean_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrend {
    pub type_names: Vec<String>,
    pub rows: Vec<TrendRow>,
}

impl RoundTrend {
    /// `ball_round,strokes,prob_<type>...`
    pub fn to_csv(&self, vocab: &ShotTypeVocab) -> String {
        let mut out = String::from("ball_round,strokes");
        for e in vocab.entries() {
            out.push_str(&format!(",prob_{}", vocab.column_name(e.id)));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.round, r.n));
            for p in &r.mean_probs {
                out.push(',');
                out.push_str(&fmt6(*p));
            }
            out.push('\n');
        }
        out
    }
}

/// Mean predicted probability of each type per ball round.
pub fn round_trend(sets: &[SampleSet], vocab: &ShotTypeVocab) -> Result<RoundTrend> {
    let v = vocab.len();
    let mut sums: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();
    for s in sets.iter().flatten().flat_map(|rp| &rp.strokes) {
        if s.type_probs.len() != v {
            return Err(Error::Input(format!(
                "round {}: {} probabilities for {v} types",
                s.round_index,
                s.type_probs.len()
            )));
        }
        let e = sums
            .entry(s.round_index)
            .or_insert_with(|| (0, vec![0.0; v]));
        e.0 += 1;
        for (a, p) in e.1.iter_mut().zip(&s.type_probs) {
            *a += p;
        }
    }
    if sums.is_empty() {
        return Err(Error::Input("prediction file has no strokes".into()));
    }
    Ok(RoundTrend {
        type_names: vocab.entries().iter().map(|e| e.name.clone()).collect(),
        rows: sums
            .into_iter()
            .map(|(round, (n, s))| TrendRow {
                round,
                n,
                mean_probs: s.into_iter().map(|x| x / n as f64).collect(),
            })
            .collect(),
    })
}

/// Mean predicted probability per type over every stroke and sample.
pub fn type_probability_summary(sets: &[SampleSet], vocab: &ShotTypeVocab) -> Result<Vec<f64>> {
    let trend = round_trend(sets, vocab)?;
    let mut sums = vec![0.0; vocab.len()];
    let mut n = 0;
    for s in sets.iter().flatten().flat_map(|rp| &rp.strokes) {
        for (a, p) in sums.iter_mut().zip(&s.type_probs) {
            *a += p;
        }
        n += 1;
    }
    debug_assert_eq!(n, trend.rows.iter().map(|r| r.n).sum::<usize>());
    Ok(sums.into_iter().map(|x| x / n as f64).collect())
}

/// `type,mean_prob`
pub fn type_summary_csv(summary: &[f64], vocab: &ShotTypeVocab) -> String {
    let mut out = String::from("type,mean_prob\n");
    for (e, p) in vocab.entries().iter().zip(summary) {
        out.push_str(&format!("{},{}\n", e.name, fmt6(*p)));
    }
    out
}

/// File name of an analysis table.
pub fn table_file_name(kind: &str, grouping: &str) -> String {
    format!("analysis_{kind}_{grouping}.csv")
}
