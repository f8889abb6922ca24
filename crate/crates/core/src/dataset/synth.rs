//! Synthetic rally corpora with planted structure: serves only at round 1,
//! strict A/B alternation, and per-player shot preferences and landing
//! kernels that make players distinguishable.

use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};

use super::quantize6;
use crate::court::{CourtSpec, Point, Rally, ShotTypeVocab, Side, Stroke, TAU};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStream};

/// 2-D Gaussian landing kernel in meters (canonical frame).
#[derive(Debug, Clone, PartialEq)]
pub struct LandingKernel {
    pub mean: Point,
    /// `[[var_x, cov_xy], [cov_xy, var_y]]`
    pub cov: [[f64; 2]; 2],
}

impl LandingKernel {
    /// Lower Cholesky factor, or an error when the covariance is not
    /// symmetric positive definite.
    fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        let [[a, b], [c, d]] = self.cov;
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite || (b - c).abs() > 1e-12 || a <= 0.0 || a * d - b * b <= 0.0 {
            return Err(Error::Config(format!(
                "degenerate landing covariance {:?}",
                self.cov
            )));
        }
        let l00 = a.sqrt();
        let l10 = b / l00;
        let l11 = (d - l10 * l10).sqrt();
        Ok([[l00, 0.0], [l10, l11]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerStyle {
    pub name: String,
    /// Unnormalized weights over the vocabulary for the opening stroke.
    /// Only serve types may carry weight.
    pub serve_pref: Vec<f64>,
    /// Unnormalized weights over the vocabulary for rounds >= 2.
    /// Serve types must have zero weight.
    pub shot_pref: Vec<f64>,
    /// One kernel per shot type.
    pub landing: Vec<LandingKernel>,
}

impl PlayerStyle {
    /// A random style: two or three favourite shots, the rest rare, and a
    /// player-specific landing target per shot type.
    pub fn random(name: &str, vocab: &ShotTypeVocab, court: &CourtSpec, seed: SeedStream) -> Self {
        let mut rng = seed.rng();
        let v = vocab.len();
        let mut serve_pref = vec![0.0; v];
        let mut shot_pref = vec![0.0; v];
        for e in vocab.entries() {
            if e.is_serve {
                serve_pref[e.id] = 0.2 + rng.random::<f64>();
            } else {
                shot_pref[e.id] = 0.05 + 0.1 * rng.random::<f64>();
            }
        }
        let open: Vec<usize> = vocab
            .entries()
            .iter()
            .filter(|e| !e.is_serve)
            .map(|e| e.id)
            .collect();
        let n_fav = 2 + rng.random_range(0..2);
        for _ in 0..n_fav {
            let pick = open[rng.random_range(0..open.len())];
            shot_pref[pick] += 1.0 + rng.random::<f64>();
        }
        let half = court.net_y();
        let landing = (0..v)
            .map(|_| {
                let mean = Point::new(
                    court.width_m * (0.15 + 0.7 * rng.random::<f64>()),
                    half + half * (0.1 + 0.8 * rng.random::<f64>()),
                );
                let sx: f64 = 0.25 + 0.2 * rng.random::<f64>();
                let sy: f64 = 0.3 + 0.25 * rng.random::<f64>();
                let rho = 0.4 * (rng.random::<f64>() - 0.5);
                LandingKernel {
                    mean,
                    cov: [[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]],
                }
            })
            .collect();
        PlayerStyle {
            name: name.to_string(),
            serve_pref,
            shot_pref,
            landing,
        }
    }

    fn validate(&self, vocab: &ShotTypeVocab) -> Result<()> {
        let v = vocab.len();
        if self.serve_pref.len() != v || self.shot_pref.len() != v || self.landing.len() != v {
            return Err(Error::Config(format!(
                "style '{}' must give {v} weights and kernels",
                self.name
            )));
        }
        let bad_weight = |w: &f64| !w.is_finite() || *w < 0.0;
        if self
            .serve_pref
            .iter()
            .chain(&self.shot_pref)
            .any(bad_weight)
        {
            return Err(Error::Config(format!(
                "style '{}' has a negative weight",
                self.name
            )));
        }
        for e in vocab.entries() {
            if e.is_serve && self.shot_pref[e.id] > 0.0 {
                return Err(Error::Config(format!(
                    "style '{}' gives serve type '{}' weight after round 1",
                    self.name, e.name
                )));
            }
            if !e.is_serve && self.serve_pref[e.id] > 0.0 {
                return Err(Error::Config(format!(
                    "style '{}' serves with non-serve type '{}'",
                    self.name, e.name
                )));
            }
        }
        if self.serve_pref.iter().sum::<f64>() <= 0.0 || self.shot_pref.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!(
                "style '{}' has no usable weights",
                self.name
            )));
        }
        for k in &self.landing {
            k.cholesky()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_rallies: usize,
    /// Mean rally length; lengths are `5 + Geometric`, so values below 5
    /// give all-5 rallies.
    pub mean_length: f64,
    pub rallies_per_match: usize,
    pub vocab: ShotTypeVocab,
    pub court: CourtSpec,
    /// Explicit styles; when empty, `n_players` random styles are drawn.
    pub player_styles: Vec<PlayerStyle>,
    pub n_players: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rallies: 100,
            mean_length: 8.0,
            rallies_per_match: 16,
            vocab: ShotTypeVocab::default(),
            court: CourtSpec::default(),
            player_styles: Vec::new(),
            n_players: 4,
            seed: 0,
        }
    }
}

fn pick(weights: &[f64], rng: &mut rng::Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return i;
            }
            u -= w;
        }
    }
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .expect("positive weight")
}

fn gauss(rng: &mut rng::Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Mild first-order dependence between consecutive shots, fixed per seed.
fn transition_table(v: usize, seed: SeedStream) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    (0..v)
        .map(|_| (0..v).map(|_| 0.3 + 1.4 * rng.random::<f64>()).collect())
        .collect()
}

pub fn synthesize_dataset(config: &SynthConfig) -> Result<Vec<Rally>> {
    let vocab = &config.vocab;
    let court = &config.court;
    court.validate()?;
    if !config.mean_length.is_finite() {
        return Err(Error::Config("mean_length must be finite".into()));
    }
    if config.rallies_per_match == 0 {
        return Err(Error::Config("rallies_per_match must be at least 1".into()));
    }
    let root = SeedStream::new(config.seed);
    let styles: Vec<PlayerStyle> = if config.player_styles.is_empty() {
        if config.n_players < 2 {
            return Err(Error::Config("need at least two players".into()));
        }
        (0..config.n_players)
            .map(|i| {
                PlayerStyle::random(
                    &format!("P{:02}", i + 1),
                    vocab,
                    court,
                    root.path(&[1, i as u64]),
                )
            })
            .collect()
    } else {
        if config.player_styles.len() < 2 {
            return Err(Error::Config("need at least two player styles".into()));
        }
        config.player_styles.clone()
    };
    for s in &styles {
        s.validate(vocab)?;
    }
    let factors: Vec<Vec<[[f64; 2]; 2]>> = styles
        .iter()
        .map(|s| {
            s.landing
                .iter()
                .map(|k| k.cholesky())
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let transitions = transition_table(vocab.len(), root.child(2));

    let pairs: Vec<(usize, usize)> = (0..styles.len())
        .flat_map(|i| (i + 1..styles.len()).map(move |j| (i, j)))
        .collect();
    let extra = config.mean_length - (TAU + 1) as f64;
    let geometric = if extra > 0.0 {
        Some(Geometric::new(1.0 / (extra + 1.0)).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let mut rallies = Vec::with_capacity(config.n_rallies);
    for idx in 0..config.n_rallies {
        let mut rng = root.path(&[3, idx as u64]).rng();
        let match_no = idx / config.rallies_per_match;
        let within = idx % config.rallies_per_match;
        let (p, q) = pairs[match_no % pairs.len()];
        let (server, receiver) = if within.is_multiple_of(2) {
            (p, q)
        } else {
            (q, p)
        };
        let len = (TAU + 1)
            + geometric
                .as_ref()
                .map_or(0, |g| g.sample(&mut rng) as usize);

        let mut strokes: Vec<Stroke> = Vec::with_capacity(len);
        for k in 1..=len {
            let side = Side::for_round(k);
            let who = if side == Side::A { server } else { receiver };
            let style = &styles[who];
            let shot_type = if k == 1 {
                pick(&style.serve_pref, &mut rng)
            } else {
                let prev = strokes[k - 2].shot_type;
                let w: Vec<f64> = style
                    .shot_pref
                    .iter()
                    .zip(&transitions[prev])
                    .map(|(a, b)| a * b)
                    .collect();
                pick(&w, &mut rng)
            };
            let kernel = &style.landing[shot_type];
            let l = factors[who][shot_type];
            let (z1, z2) = (gauss(&mut rng), gauss(&mut rng));
            let landing = Point::new(
                quantize6(kernel.mean.x + l[0][0] * z1),
                quantize6(kernel.mean.y + l[1][0] * z1 + l[1][1] * z2),
            );
            let stand = match strokes.last() {
                None => Point::new(
                    court.width_m / 2.0 + 0.3 * gauss(&mut rng),
                    court.net_y() - 2.5,
                ),
                Some(prev) => {
                    let m = court.mirror(prev.landing);
                    Point::new(m.x + 0.15 * gauss(&mut rng), m.y + 0.15 * gauss(&mut rng))
                }
            };
            strokes.push(Stroke {
                round_index: k,
                player: side,
                shot_type,
                landing,
                player_location: Point::new(quantize6(stand.x), quantize6(stand.y)),
            });
        }
        let match_id = format!("m{:02}", match_no + 1);
        rallies.push(Rally {
            rally_id: format!("{match_id}-r{:03}", within + 1),
            match_id,
            player_a: styles[server].name.clone(),
            player_b: styles[receiver].name.clone(),
            strokes,
        });
    }
    Ok(rallies)
}
