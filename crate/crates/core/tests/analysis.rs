mod common;

use common::*;
use rallycast::analysis::*;
use rallycast::court::{CourtSpec, Point, ShotTypeVocab};
use rallycast::dataset::{synthesize_dataset, PlayerStyle, SynthConfig};
use rallycast::model::EmbeddingMode;
use rallycast::rng::SeedStream;
use rallycast::sampler::{generate_sets, GeneratedStroke, RallyPrediction, SampleSet};
use rand::Rng;

fn synth(n: usize, seed: u64) -> Vec<rallycast::court::Rally> {
    synthesize_dataset(&SynthConfig {
        n_rallies: n,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn assert_partition(t: &DistributionTable) {
    let mut keys: Vec<&str> = t.rows.iter().map(|r| r.key.as_str()).collect();
    keys.dedup();
    for k in keys {
        let s: f64 = t.group(k).iter().map(|r| r.fraction).sum();
        assert!((s - 1.0).abs() <= 1e-9, "{} {k}: {s}", t.grouping);
    }
}

#[test]
fn every_grouping_partitions_the_strokes() {
    let data = synth(60, 3);
    let vocab = ShotTypeVocab::default();
    let court = CourtSpec::default();
    let n_strokes: usize = data.iter().map(|r| r.len()).sum();
    for g in Grouping::ALL {
        let t = shot_distribution(&data, &vocab, &court, g).unwrap();
        assert_partition(&t);
        assert_eq!(
            t.rows.iter().map(|r| r.count).sum::<usize>(),
            n_strokes,
            "{g}"
        );
        assert_eq!(t, shot_distribution(&data, &vocab, &court, g).unwrap());
        assert_eq!(
            t.to_csv().lines().next().unwrap(),
            format!("{g},type,count,fraction")
        );
    }
}

#[test]
fn serves_only_in_round_one() {
    let data = synth(80, 4);
    let vocab = ShotTypeVocab::default();
    let t = shot_distribution(&data, &vocab, &CourtSpec::default(), Grouping::BallRound).unwrap();
    for r in &t.rows {
        let serve = vocab.is_serve(r.type_id);
        if r.key == "1" {
            assert!(serve || r.count == 0);
        } else {
            assert!(!serve || r.count == 0, "serve mass at round {}", r.key);
        }
    }
}

#[test]
fn all_short_serves_give_unit_fraction() {
    let vocab = ShotTypeVocab::default();
    let mut data = synth(20, 5);
    let short = vocab.lookup("short service").unwrap();
    for r in &mut data {
        r.strokes[0].shot_type = short;
    }
    let t = shot_distribution(&data, &vocab, &CourtSpec::default(), Grouping::BallRound).unwrap();
    let row = t
        .group("1")
        .into_iter()
        .find(|r| r.type_id == short)
        .unwrap();
    assert_eq!(row.fraction, 1.0);
}

#[test]
fn disjoint_styles_differ_in_favourite_type() {
    let vocab = ShotTypeVocab::default();
    let court = CourtSpec::default();
    let mut a = PlayerStyle::random("ann", &vocab, &court, SeedStream::new(1));
    let mut b = PlayerStyle::random("ben", &vocab, &court, SeedStream::new(2));
    let smash = vocab.lookup("smash").unwrap();
    let net = vocab.lookup("net shot").unwrap();
    for (style, fav) in [(&mut a, smash), (&mut b, net)] {
        style.shot_pref = vec![0.0; vocab.len()];
        style.shot_pref[fav] = 1.0;
    }
    let data = synthesize_dataset(&SynthConfig {
        n_rallies: 40,
        player_styles: vec![a, b],
        seed: 6,
        ..Default::default()
    })
    .unwrap();
    let t = shot_distribution(&data, &vocab, &court, Grouping::Player).unwrap();
    let fav = |name: &str| {
        t.group(name)
            .into_iter()
            .max_by_key(|r| r.count)
            .map(|r| r.type_id)
            .unwrap()
    };
    assert_eq!(fav("ann"), smash);
    assert_eq!(fav("ben"), net);
}

fn stroke(round: usize, probs: Vec<f64>, x: f64, y: f64) -> GeneratedStroke {
    GeneratedStroke {
        round_index: round,
        shot_type: 0,
        landing: Point::new(x, y),
        type_probs: probs,
    }
}

fn sets_from(per_sample: Vec<Vec<f64>>) -> Vec<SampleSet> {
    per_sample
        .into_iter()
        .map(|p| {
            vec![RallyPrediction {
                rally_id: "r".into(),
                strokes: vec![stroke(5, p, 3.0, 10.0)],
            }]
        })
        .collect()
}

fn probs(pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; 10];
    let rest = 1.0 - pairs.iter().map(|p| p.1).sum::<f64>();
    for x in v.iter_mut() {
        *x = rest / (10 - pairs.len()) as f64;
    }
    for &(i, p) in pairs {
        v[i] = p;
    }
    v
}

#[test]
fn unanimous_vote() {
    let vocab = ShotTypeVocab::default();
    let p = probs(&[(4, 0.6)]);
    let v = predicted_type_vote(&sets_from(vec![p; 6]), &vocab).unwrap();
    assert_eq!(v.strokes[0].winner, 4);
    assert_eq!(v.strokes[0].votes[4], 6);
}

#[test]
fn tied_vote_goes_to_larger_summed_probability() {
    let vocab = ShotTypeVocab::default();
    let smash = vocab.lookup("smash").unwrap();
    let net = vocab.lookup("net shot").unwrap();
    // smash argmax in three samples, net shot in the other three; summed
    // probability 2.9 for smash vs 2.7 for net shot
    let mut samples = Vec::new();
    for _ in 0..3 {
        samples.push(probs(&[(smash, 0.6), (net, 0.35)]));
    }
    for _ in 0..3 {
        samples.push(probs(&[(net, 0.55), (smash, 0.366_666_666_666_666_7)]));
    }
    let sum = |t: usize| samples.iter().map(|p| p[t]).sum::<f64>();
    assert!((sum(smash) - 2.9).abs() < 1e-9 && (sum(net) - 2.7).abs() < 1e-9);
    let v = predicted_type_vote(&sets_from(samples.clone()), &vocab).unwrap();
    assert_eq!(v.strokes[0].winner, smash);
    // equal votes and equal mass fall back to the lower type id
    let mirrored: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            if i < 3 {
                probs(&[(smash, 0.5), (net, 0.3)])
            } else {
                probs(&[(net, 0.5), (smash, 0.3)])
            }
        })
        .collect();
    let v = predicted_type_vote(&sets_from(mirrored), &vocab).unwrap();
    assert_eq!(v.strokes[0].winner, net.min(smash));
}

#[test]
fn vote_aggregate_is_a_partition() {
    let m = default_model(EmbeddingMode::Modified, 1);
    let truths: Vec<_> = (0..6)
        .map(|i| rally(7 + i, i as u64))
        .map(|mut r| {
            r.rally_id = format!("{}", r.len());
            r
        })
        .collect();
    let sets = generate_sets(&m, &truths, 6, 2).unwrap();
    let v = predicted_type_vote(&sets, &m.vocab).unwrap();
    assert!((v.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(
        v.strokes.len(),
        truths.iter().map(|r| r.len() - 4).sum::<usize>()
    );
    let mut bad = sets.clone();
    bad[2][0].strokes.pop();
    assert!(predicted_type_vote(&bad, &m.vocab).is_err());
}

#[test]
fn zone_histogram_examples() {
    let court = CourtSpec::default();
    let center = Point::new(court.width_m / 2.0, court.length_m * 0.75);
    let h = zone_histogram(std::iter::repeat_n(center, 50), &court).unwrap();
    assert_eq!(h.fractions()[4], 1.0);
    let out = [
        Point::new(-1.0, 10.0),
        Point::new(3.0, 14.0),
        Point::new(3.0, 2.0),
        Point::new(7.0, 8.0),
    ];
    let h = zone_histogram(out, &court).unwrap();
    assert_eq!(h.fractions()[9], 1.0);
    assert_eq!(h.to_csv().lines().count(), 11);
    assert!(zone_histogram(std::iter::empty(), &court).is_err());
}

#[test]
fn uniform_points_fill_zones_evenly() {
    let court = CourtSpec::default();
    let mut rng = SeedStream::new(99).rng();
    let half = court.net_y();
    let pts: Vec<Point> = (0..100_000)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * court.width_m,
                half + rng.random::<f64>() * half,
            )
        })
        .collect();
    let f = zone_histogram(pts, &court).unwrap().fractions();
    for (z, frac) in f.iter().take(9).enumerate() {
        assert!((frac - 1.0 / 9.0).abs() <= 0.02, "zone {}: {frac}", z + 1);
    }
    assert_eq!(f[9], 0.0);
}

#[test]
fn trend_of_one_prediction_is_that_prediction() {
    let vocab = ShotTypeVocab::default();
    let p = probs(&[(3, 0.4), (7, 0.2)]);
    let t = round_trend(&sets_from(vec![p.clone()]), &vocab).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0].mean_probs, p);
    assert_eq!(
        type_probability_summary(&sets_from(vec![p.clone()]), &vocab).unwrap(),
        p
    );
}

#[test]
fn trend_rows_are_distributions_and_seed_noise_is_small() {
    let m = default_model(EmbeddingMode::Modified, 3);
    let truths: Vec<_> = (0..200)
        .map(|i| {
            let mut r = rally(7, i);
            r.rally_id = format!("r{i}");
            r
        })
        .collect();
    let a = round_trend(&generate_sets(&m, &truths, 6, 1).unwrap(), &m.vocab).unwrap();
    let b = round_trend(&generate_sets(&m, &truths, 6, 2).unwrap(), &m.vocab).unwrap();
    assert_eq!(
        a.rows.iter().map(|r| r.round).collect::<Vec<_>>(),
        vec![5, 6, 7]
    );
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert!(ra.n >= 1000);
        assert!((ra.mean_probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for (x, y) in ra.mean_probs.iter().zip(&rb.mean_probs) {
            assert!((x - y).abs() < 0.05);
        }
    }
    let csv = a.to_csv(&m.vocab);
    assert!(csv.starts_with("ball_round,strokes,prob_short_service,"));
}

#[test]
fn file_names_follow_the_pattern() {
    assert_eq!(
        table_file_name("shots", "ball_round"),
        "analysis_shots_ball_round.csv"
    );
    assert_eq!(
        "player_location_zone".parse::<Grouping>().unwrap(),
        Grouping::PlayerLocationZone
    );
    assert!("nope".parse::<Grouping>().is_err());
}
