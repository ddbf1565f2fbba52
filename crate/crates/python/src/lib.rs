//! Python bindings: telemetry datasets, the boosted-tree classifier and the
//! scenario-level experiments.

use std::collections::BTreeMap;

use condmon::experiment::{self, ExperimentError, Variant};
use condmon::gbdt::{self, GbdtParams};
use condmon::telemetry::{self, AnomalySpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Config(m) => PyValueError::new_err(m),
        ExperimentError::Runtime(m) => PyRuntimeError::new_err(m),
    }
}

/// Ordered telemetry records with anomaly labels.
#[pyclass(module = "pycondmon", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: telemetry::Dataset,
}

#[pymethods]
impl Dataset {
    /// `n` synthetic clean records drawn from the built-in feature statistics.
    #[staticmethod]
    fn synthetic(n: usize, seed: u64) -> PyResult<Self> {
        let inner = telemetry::generate_synthetic(&telemetry::reference_stats(), n, seed)
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: telemetry::load_csv(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        telemetry::write_csv_file(&self.inner, path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, anomalies={})",
            self.inner.len(),
            self.inner.anomaly_count()
        )
    }

    fn anomaly_count(&self) -> usize {
        self.inner.anomaly_count()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inner
            .records()
            .iter()
            .map(|r| r.features.to_vec())
            .collect()
    }

    fn labels(&self) -> Vec<u8> {
        self.inner
            .records()
            .iter()
            .map(|r| r.label.as_u8())
            .collect()
    }

    fn inject_sparse(&self, density: f64, seed: u64) -> PyResult<Self> {
        let spec = AnomalySpec::sparse(density, seed);
        Ok(Self {
            inner: telemetry::inject_sparse(&self.inner, &spec).map_err(value_err)?,
        })
    }

    #[pyo3(signature = (window_len, start, seed, feature_fraction = 0.5))]
    fn inject_collective(
        &self,
        window_len: usize,
        start: usize,
        seed: u64,
        feature_fraction: f64,
    ) -> PyResult<Self> {
        let mut spec = AnomalySpec::collective(window_len, seed);
        spec.pattern = telemetry::AnomalyPattern::Collective {
            window_len,
            feature_fraction,
        };
        Ok(Self {
            inner: telemetry::inject_collective(&self.inner, &spec, start).map_err(value_err)?,
        })
    }
}

/// Gradient-boosted tree binary classifier.
#[pyclass(module = "pycondmon", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: gbdt::GbdtModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (dataset, seed = 0, num_trees = None, max_depth = None, learning_rate = None, min_samples_leaf = None))]
    fn train(
        dataset: &Dataset,
        seed: u64,
        num_trees: Option<usize>,
        max_depth: Option<usize>,
        learning_rate: Option<f64>,
        min_samples_leaf: Option<usize>,
    ) -> PyResult<Self> {
        let d = GbdtParams::default();
        let params = GbdtParams {
            num_trees: num_trees.unwrap_or(d.num_trees),
            max_depth: max_depth.unwrap_or(d.max_depth),
            learning_rate: learning_rate.unwrap_or(d.learning_rate),
            min_samples_leaf: min_samples_leaf.unwrap_or(d.min_samples_leaf),
            ..d
        };
        let set = gbdt::TrainingSet::from_dataset(&dataset.inner);
        Ok(Self {
            inner: gbdt::train(&set, params, seed).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: gbdt::read_model(text).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        gbdt::write_model(&self.inner)
    }

    #[getter]
    fn num_trees(&self) -> usize {
        self.inner.trees.len()
    }

    fn predict_proba(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_proba(&row).map_err(value_err)
    }

    #[pyo3(signature = (dataset, threshold = 0.5))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let m = gbdt::evaluate(&self.inner, &dataset.inner, threshold).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("precision", m.precision)?;
        d.set_item("recall", m.recall)?;
        d.set_item("f1", m.f1)?;
        d.set_item("tp", m.confusion.tp)?;
        d.set_item("fp", m.confusion.fp)?;
        d.set_item("tn", m.confusion.tn)?;
        d.set_item("fn", m.confusion.fn_)?;
        Ok(d)
    }

    fn feature_importance(&self) -> BTreeMap<String, f64> {
        let imp = gbdt::feature_importance(&self.inner);
        self.inner.feature_names.iter().cloned().zip(imp).collect()
    }

    /// Exact Shapley attributions of `row` against `background`; returns
    /// `(values, base_value)`.
    fn shap(&self, row: Vec<f64>, background: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, f64)> {
        let s = gbdt::shap_values(&self.inner, &row, &background).map_err(value_err)?;
        Ok((s.values, s.base_value))
    }
}

/// Experiment configuration.
#[pyclass(module = "pycondmon")]
struct Scenario {
    inner: experiment::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: experiment::Scenario::default_scenario(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: experiment::Scenario::load(path.as_ref()).map_err(experiment_err)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    fn training_dataset(&self) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: experiment::training_dataset(&self.inner).map_err(experiment_err)?,
        })
    }

    fn test_dataset(&self) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: experiment::test_dataset(&self.inner).map_err(experiment_err)?,
        })
    }

    fn train(&self, dataset: &Dataset) -> PyResult<Model> {
        let inner = experiment::train_model(&self.inner, &dataset.inner, self.inner.params)
            .map_err(experiment_err)?;
        Ok(Model { inner })
    }

    /// One dict per (configuration, seed) plus a mean row per configuration
    /// with `seed` set to None.
    fn detection<'py>(
        &self,
        py: Python<'py>,
        model: &Model,
        test: &Dataset,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let rows = experiment::run_detection_experiment(&self.inner, &model.inner, &test.inner)
            .map_err(experiment_err)?;
        rows.iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("pattern", r.config.pattern())?;
                d.set_item("level", r.config.level())?;
                d.set_item("seed", r.seed)?;
                d.set_item("precision", r.precision)?;
                d.set_item("recall", r.recall)?;
                d.set_item("f1", r.f1)?;
                Ok(d)
            })
            .collect()
    }

    /// Summary of `runs` simulated single-handover migrations.
    #[pyo3(signature = (runs, with_mediator = true))]
    fn migrations<'py>(
        &self,
        py: Python<'py>,
        runs: usize,
        with_mediator: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        if runs == 0 {
            return Err(PyValueError::new_err("runs must be positive"));
        }
        let variant = if with_mediator {
            Variant::WithMediator
        } else {
            Variant::WithoutMediator
        };
        let exp = experiment::run_migration_experiment(&self.inner, runs, variant)
            .map_err(experiment_err)?;
        let s = experiment::summarize_migrations(variant, &exp.records).map_err(experiment_err)?;
        let d = PyDict::new(py);
        d.set_item("variant", variant.name())?;
        d.set_item("runs", s.runs)?;
        d.set_item("mean_s", s.mean_s)?;
        d.set_item("std_s", s.std_s)?;
        d.set_item("min_s", s.min_s)?;
        d.set_item("max_s", s.max_s)?;
        d.set_item("timeouts", s.timeouts)?;
        let totals: Vec<f64> = exp
            .records
            .iter()
            .map(|r| r.total().as_secs_f64())
            .collect();
        d.set_item("totals_s", totals)?;
        Ok(d)
    }
}

#[pyfunction]
fn feature_names() -> Vec<String> {
    telemetry::feature_names()
}

#[pymodule]
fn pycondmon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    Ok(())
}
