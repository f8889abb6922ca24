//! Python bindings: datasets, models, sample sets and scoring.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rallycast::analysis::{shot_distribution as distribution, Grouping};
use rallycast::court::{coord_to_zone, CourtSpec, Point, ShotTypeVocab, Side, TAU};
use rallycast::dataset::{
    parse_dataset, synthesize_dataset, write_dataset as write_csv, SynthConfig,
};
use rallycast::model::{read_checkpoint, write_checkpoint, EmbeddingMode, ModelConfig};
use rallycast::sampler::{self, SampleSet};
use rallycast::train::{self, TrainConfig};
use rallycast::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_usage() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vocab_from(path: Option<PathBuf>) -> PyResult<ShotTypeVocab> {
    match path {
        Some(p) => ShotTypeVocab::from_csv_path(&p).map_err(py_err),
        None => Ok(ShotTypeVocab::default()),
    }
}

/// One rally: ordered strokes plus match and player identities.
#[pyclass(name = "Rally", module = "rallycast_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRally(rallycast::court::Rally);

#[pymethods]
impl PyRally {
    #[getter]
    fn rally_id(&self) -> &str {
        &self.0.rally_id
    }

    #[getter]
    fn match_id(&self) -> &str {
        &self.0.match_id
    }

    #[getter]
    fn players(&self) -> (String, String) {
        (self.0.player_a.clone(), self.0.player_b.clone())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `(round, side, type_id, (landing_x, landing_y), (location_x, location_y))` per stroke.
    #[allow(clippy::type_complexity)]
    fn strokes(&self) -> Vec<(usize, String, usize, (f64, f64), (f64, f64))> {
        self.0
            .strokes
            .iter()
            .map(|s| {
                (
                    s.round_index,
                    s.player.to_string(),
                    s.shot_type,
                    (s.landing.x, s.landing.y),
                    (s.player_location.x, s.player_location.y),
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Rally({}, {} strokes)", self.0.rally_id, self.0.len())
    }
}

fn unwrap_rallies(rallies: &[PyRef<'_, PyRally>]) -> Vec<rallycast::court::Rally> {
    rallies.iter().map(|r| r.0.clone()).collect()
}

fn wrap_rallies(rallies: Vec<rallycast::court::Rally>) -> Vec<PyRally> {
    rallies.into_iter().map(PyRally).collect()
}

/// Six (or more) generated sample sets over a list of rallies.
#[pyclass(name = "Predictions", module = "rallycast_py", frozen)]
struct PyPredictions {
    sets: Vec<SampleSet>,
    vocab: ShotTypeVocab,
}

#[pymethods]
impl PyPredictions {
    #[staticmethod]
    #[pyo3(signature = (path, vocab_path=None))]
    fn load(path: PathBuf, vocab_path: Option<PathBuf>) -> PyResult<Self> {
        let vocab = vocab_from(vocab_path)?;
        let sets = sampler::read_predictions(&path, &vocab).map_err(py_err)?;
        Ok(PyPredictions { sets, vocab })
    }

    fn __len__(&self) -> usize {
        self.sets.len()
    }

    fn to_csv(&self) -> String {
        sampler::predictions_to_csv(&self.sets, &self.vocab)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        sampler::write_predictions(&path, &self.sets, &self.vocab).map_err(py_err)
    }

    /// Loss of every set and the min-of-six score against `truth`.
    fn score<'py>(
        &self,
        py: Python<'py>,
        truth: Vec<PyRef<'py, PyRally>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report =
            sampler::score_sets(&self.sets, &unwrap_rallies(&truth), TAU).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("set_losses", report.set_losses)?;
        d.set_item("score", report.score)?;
        d.set_item("best_set", report.best_set)?;
        Ok(d)
    }
}

/// Trained or freshly initialized forecasting model.
#[pyclass(name = "Model", module = "rallycast_py", frozen)]
struct PyModel(rallycast::model::Model);

#[pymethods]
impl PyModel {
    /// Fresh model sized for the default vocabulary and the players of `rallies`.
    #[staticmethod]
    #[pyo3(signature = (rallies, seed=0, embedding_mode="modified", embed_dim=16, n_layers=2))]
    fn initialize(
        rallies: Vec<PyRef<'_, PyRally>>,
        seed: u64,
        embedding_mode: &str,
        embed_dim: usize,
        n_layers: usize,
    ) -> PyResult<Self> {
        let vocab = ShotTypeVocab::default();
        let mut config = ModelConfig::new(vocab.len(), 0);
        config.embedding_mode = embedding_mode.parse::<EmbeddingMode>().map_err(py_err)?;
        config.embed_dim = embed_dim;
        config.n_layers = n_layers;
        let model = rallycast::model::Model::initialize(
            config,
            vocab,
            &unwrap_rallies(&rallies),
            CourtSpec::default(),
            seed,
        )
        .map_err(py_err)?;
        Ok(PyModel(model))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        read_checkpoint(&path).map(PyModel).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_checkpoint(&path, &self.0).map_err(py_err)
    }

    #[getter]
    fn embedding_mode(&self) -> String {
        self.0.config.embedding_mode.to_string()
    }

    #[getter]
    fn n_parameters(&self) -> usize {
        self.0.params.n_values()
    }

    #[getter]
    fn type_names(&self) -> Vec<String> {
        self.0
            .vocab
            .entries()
            .iter()
            .map(|e| e.name.clone())
            .collect()
    }

    /// Distribution of the stroke that follows the first `n_strokes` of `rally`.
    fn predict_next<'py>(
        &self,
        py: Python<'py>,
        rally: PyRef<'py, PyRally>,
        n_strokes: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        if n_strokes == 0 || n_strokes > rally.0.len() {
            return Err(PyValueError::new_err(format!(
                "n_strokes must be in 1..={}, got {n_strokes}",
                rally.0.len()
            )));
        }
        let step = self
            .0
            .predict_next(&rally.0, &rally.0.strokes[..n_strokes])
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("type_probs", step.type_probs)?;
        d.set_item("mu", (step.area.mu_x, step.area.mu_y))?;
        d.set_item("sigma", (step.area.sigma_x, step.area.sigma_y))?;
        d.set_item("rho", step.area.rho)?;
        Ok(d)
    }

    /// Teacher-forced losses in evaluation mode.
    fn evaluate(&self, rallies: Vec<PyRef<'_, PyRally>>) -> PyResult<(f64, f64, f64)> {
        let l = train::evaluate_loss(&self.0, &unwrap_rallies(&rallies)).map_err(py_err)?;
        Ok((l.shot, l.area, l.total))
    }

    /// Returns the trained copy and one `(epoch, shot, area, total, val_score)` tuple per epoch.
    #[pyo3(signature = (rallies, validation=Vec::new(), epochs=300, learning_rate=1e-4, batch_size=16, eval_every=10, eval_samples=100, seed=0))]
    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    fn train(
        &self,
        py: Python<'_>,
        rallies: Vec<PyRef<'_, PyRally>>,
        validation: Vec<PyRef<'_, PyRally>>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        eval_every: usize,
        eval_samples: usize,
        seed: u64,
    ) -> PyResult<(PyModel, Vec<(usize, f64, f64, f64, Option<f64>)>)> {
        let cfg = TrainConfig {
            epochs,
            learning_rate,
            batch_size,
            eval_every,
            eval_samples,
            seed,
            ..TrainConfig::default()
        };
        let train_set = unwrap_rallies(&rallies);
        let val_set = unwrap_rallies(&validation);
        let model = &self.0;
        let (trained, report) = py
            .detach(|| train::train(model, &train_set, &val_set, &cfg, |_| {}))
            .map_err(py_err)?;
        let epochs = report
            .epochs
            .iter()
            .map(|e| (e.epoch, e.shot_loss, e.area_loss, e.total_loss, e.val_score))
            .collect();
        Ok((PyModel(trained), epochs))
    }

    /// Sample sets covering every rally longer than the observed prefix.
    #[pyo3(signature = (rallies, samples=6, seed=0))]
    fn generate(
        &self,
        py: Python<'_>,
        rallies: Vec<PyRef<'_, PyRally>>,
        samples: usize,
        seed: u64,
    ) -> PyResult<PyPredictions> {
        let rallies = unwrap_rallies(&rallies);
        let model = &self.0;
        let sets = py
            .detach(|| sampler::generate_sets(model, &rallies, samples, seed))
            .map_err(py_err)?;
        Ok(PyPredictions {
            sets,
            vocab: self.0.vocab.clone(),
        })
    }

    /// Best-of-k score: per rally the lowest-loss of `k` samples.
    #[pyo3(signature = (rallies, k, seed=0))]
    fn best_of_k(
        &self,
        py: Python<'_>,
        rallies: Vec<PyRef<'_, PyRally>>,
        k: usize,
        seed: u64,
    ) -> PyResult<f64> {
        let rallies = unwrap_rallies(&rallies);
        let model = &self.0;
        py.detach(|| sampler::eval_best_of_k(model, &rallies, k, seed))
            .map(|b| b.score)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let c = &self.0.config;
        format!(
            "Model(mode={}, d={}, layers={}, players={})",
            c.embedding_mode,
            c.embed_dim,
            c.n_layers,
            self.0.players.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (path, vocab_path=None))]
fn load_dataset(path: PathBuf, vocab_path: Option<PathBuf>) -> PyResult<Vec<PyRally>> {
    let vocab = vocab_from(vocab_path)?;
    let parsed = parse_dataset(&path, &vocab).map_err(py_err)?;
    Ok(wrap_rallies(parsed.rallies))
}

#[pyfunction]
fn write_dataset(path: PathBuf, rallies: Vec<PyRef<'_, PyRally>>) -> PyResult<()> {
    write_csv(&path, &unwrap_rallies(&rallies), &ShotTypeVocab::default()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (n_rallies, seed=0, mean_length=8.0, n_players=4))]
fn synthesize(
    n_rallies: usize,
    seed: u64,
    mean_length: f64,
    n_players: usize,
) -> PyResult<Vec<PyRally>> {
    let cfg = SynthConfig {
        n_rallies,
        seed,
        mean_length,
        n_players,
        ..SynthConfig::default()
    };
    synthesize_dataset(&cfg).map(wrap_rallies).map_err(py_err)
}

#[pyfunction]
fn score_min6(losses: Vec<f64>) -> PyResult<f64> {
    sampler::score_min6(&losses).map_err(py_err)
}

/// Zone 1-9 on the receiver's half court, 10 outside it.
#[pyfunction]
#[pyo3(signature = (x, y, receiver="B"))]
fn zone(x: f64, y: f64, receiver: &str) -> PyResult<u8> {
    let side = Side::parse(receiver)
        .ok_or_else(|| PyValueError::new_err(format!("receiver must be A or B, got {receiver}")))?;
    coord_to_zone(Point::new(x, y), &CourtSpec::default(), side)
        .map(|z| z.value())
        .map_err(py_err)
}

/// `(group, type_name, count, fraction)` rows of a shot-type distribution table.
#[pyfunction]
#[pyo3(signature = (rallies, group_by="ball_round"))]
fn shot_distribution(
    rallies: Vec<PyRef<'_, PyRally>>,
    group_by: &str,
) -> PyResult<Vec<(String, String, usize, f64)>> {
    let vocab = ShotTypeVocab::default();
    let g: Grouping = group_by.parse().map_err(py_err)?;
    let t = distribution(&unwrap_rallies(&rallies), &vocab, &CourtSpec::default(), g)
        .map_err(py_err)?;
    Ok(t.rows
        .into_iter()
        .map(|r| {
            (
                r.key,
                vocab.name(r.type_id).to_string(),
                r.count,
                r.fraction,
            )
        })
        .collect())
}

#[pymodule]
fn rallycast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TAU", TAU)?;
    m.add_class::<PyRally>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPredictions>()?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(score_min6, m)?)?;
    m.add_function(wrap_pyfunction!(zone, m)?)?;
    m.add_function(wrap_pyfunction!(shot_distribution, m)?)?;
    Ok(())
}
