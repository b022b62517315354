//! Python bindings. Structured values cross the boundary as plain
//! dicts and lists (round-tripped through JSON).

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use synstarts_core::corpus::Corpus as CoreCorpus;
use synstarts_core::evaluation::{self, ActionLabel, EvaluationConfig, ParsedResponse, ScriptedResponder};
use synstarts_core::generation::{render_generation_prompt, GenerationPromptSpec};
use synstarts_core::sampling::{sample_replicates, SamplingConfig, TagDistribution};
use synstarts_core::schema::CandidateCase;
use synstarts_core::{stats, validation, TriageTag, Vitals};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn tag(raw: &str) -> PyResult<TriageTag> {
    raw.parse().map_err(err)
}

/// START tag for a vitals dict; raises ValueError when indeterminate.
#[pyfunction]
fn classify(vitals: &Bound<'_, PyAny>) -> PyResult<String> {
    let v: Vitals = serde_json::from_value(to_json(vitals)?).map_err(err)?;
    synstarts_core::classify(&v).map(|t| t.to_string()).map_err(err)
}

/// Three-stage validation report for a candidate dict
/// (`triage_tag`, `patient_description`, `vitals_info`).
#[pyfunction]
fn validate(py: Python<'_>, candidate: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let report = validation::validate_value(&to_json(candidate)?).map_err(err)?;
    to_py(py, &report)
}

/// Extract a candidate dict from raw model output.
#[pyfunction]
fn parse_candidate(py: Python<'_>, raw: &str) -> PyResult<Py<PyAny>> {
    let c: CandidateCase = synstarts_core::generation::parse_candidate_object(raw).map_err(err)?;
    to_py(py, &c)
}

#[pyfunction]
fn generation_prompt(tag_name: &str) -> PyResult<String> {
    render_generation_prompt(&GenerationPromptSpec::for_tag(tag(tag_name)?)).map_err(err)
}

#[pyfunction]
fn task_prompt(description: &str) -> PyResult<String> {
    if description.trim().is_empty() {
        return Err(err("description must not be empty"));
    }
    Ok(evaluation::render_task_prompt(description))
}

/// Parse an evaluated model's reply into `{"action", "tag", "reasoning"}`
/// or `{"failure", "detail"}`.
#[pyfunction]
fn parse_response(py: Python<'_>, raw: &str) -> PyResult<Py<PyAny>> {
    let value = match evaluation::parse_model_response(raw) {
        ParsedResponse::Answer { reasoning, action } => serde_json::json!({
            "action": action.as_str(), "tag": action.tag(), "reasoning": reasoning,
        }),
        ParsedResponse::Failure { kind, detail } => serde_json::json!({"failure": kind, "detail": detail}),
    };
    to_py(py, &value)
}

#[pyfunction]
fn normalize_action(raw: &str) -> Option<String> {
    ActionLabel::normalize(raw).map(|a| a.as_str().to_string())
}

/// `(r, p)`.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::pearson(&x, &y).map_err(err)?;
    Ok((r.statistic, r.p_value.unwrap_or(f64::NAN)))
}

#[pyfunction]
fn wilcoxon(py: Python<'_>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &stats::wilcoxon_signed_rank(&a, &b).map_err(err)?)
}

#[pyfunction]
fn linguistic_features(py: Python<'_>, texts: Vec<String>) -> PyResult<Py<PyAny>> {
    to_py(py, &stats::linguistic_features(&texts))
}

/// A loaded, validated corpus.
#[pyclass(frozen)]
struct Corpus {
    inner: CoreCorpus,
}

#[pymethods]
impl Corpus {
    /// Load from a corpus directory or a `corpus.jsonl` file.
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        let inner = if path.is_dir() { CoreCorpus::load_dir(&path) } else { CoreCorpus::load(&path) };
        Ok(Corpus { inner: inner.map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn tag_counts(&self) -> Vec<(String, usize)> {
        self.inner.tag_counts().into_iter().map(|(t, n)| (t.to_string(), n)).collect()
    }

    fn cases(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.cases)
    }

    /// Disjoint replicate manifests with exact per-tag `counts` (G, Y, R, B).
    #[pyo3(signature = (counts, replicates = 10, seed = 0))]
    fn sample(&self, py: Python<'_>, counts: [usize; 4], replicates: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let config = SamplingConfig { replicates, ..SamplingConfig::new(TagDistribution::from_array(counts), seed) };
        to_py(py, &sample_replicates(&self.inner, &config).map_err(err)?)
    }

    /// Score the scripted oracle or constant responder on one manifest;
    /// returns the run result dict.
    #[pyo3(signature = (manifest, responder = "oracle", constant = "MINOR"))]
    fn evaluate_scripted(
        &self,
        py: Python<'_>,
        manifest: &Bound<'_, PyAny>,
        responder: &str,
        constant: &str,
    ) -> PyResult<Py<PyAny>> {
        let m: synstarts_core::sampling::DatasetManifest = serde_json::from_value(to_json(manifest)?).map_err(err)?;
        let items = evaluation::items_for_manifest(&self.inner, &m).map_err(err)?;
        let backend = match responder {
            "oracle" => ScriptedResponder::oracle_for(&self.inner),
            "constant" => ScriptedResponder::Constant(
                ActionLabel::normalize(constant).ok_or_else(|| err(format!("unknown action {constant:?}")))?,
            ),
            other => return Err(err(format!("unknown responder {other:?}"))),
        };
        let config = EvaluationConfig { model_id: format!("scripted-{responder}"), ..Default::default() };
        let run = py.detach(|| evaluation::evaluate(&m.manifest_id(), &items, &backend, &config)).map_err(err)?;
        to_py(py, &run)
    }
}

#[pymodule]
fn synstarts(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TAGS", TriageTag::ALL.iter().map(|t| t.to_string()).collect::<Vec<_>>())?;
    m.add_class::<Corpus>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_candidate, m)?)?;
    m.add_function(wrap_pyfunction!(generation_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(task_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_action, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(linguistic_features, m)?)?;
    Ok(())
}
