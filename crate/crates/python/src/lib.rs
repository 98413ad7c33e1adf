//! Python bindings. Structured values cross the boundary as plain
//! dicts/lists (through JSON), so Python sees exactly the wire format.

use std::sync::Arc;

use bimodal_core::chartspec::synthesize_chart;
use bimodal_core::dataset::DatasetSource;
use bimodal_core::interaction::{complement_levels, ChartSelection};
use bimodal_core::llm::{Provider, DEFAULT_MAX_RETRIES};
use bimodal_core::narrative::{color_for, ground_check, packet_from_text, validate_tree, DEFAULT_TOLERANCE};
use bimodal_core::service::{
    build_provider, create_session, load_session, post_drop, replay as replay_script, save_session,
    session_from_json, session_to_json, PacketSpec, ProviderConfig, ReplayScript, ServiceError,
};
use bimodal_core::{Dataset, DragPacket, DropTarget, SemanticLevel};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(bimodal, BimodalError, PyException, "Raised with args (code, message).");

fn raise(code: &str, message: impl Into<String>) -> PyErr {
    BimodalError::new_err((code.to_string(), message.into()))
}

fn service_err(e: ServiceError) -> PyErr {
    raise(e.code(), e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| raise("malformed_json", e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Accepts any JSON-compatible Python value. A `str` is first tried as JSON
/// text, then as a plain string value (so `"tell_me_more"` works).
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    if obj.is_instance_of::<PyString>() {
        let text: String = obj.extract()?;
        return serde_json::from_str(&text)
            .or_else(|e| serde_json::from_value(serde_json::Value::String(text)).map_err(|_| e))
            .map_err(|e| raise("malformed_json", e.to_string()));
    }
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| raise("malformed_json", e.to_string()))
}

fn load_dataset(source: &str) -> PyResult<Dataset> {
    DatasetSource::from_json_file(source)
        .and_then(|s| s.load(None))
        .map_err(|e| service_err(e.into()))
}

fn make_provider(
    fixtures: Option<String>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
) -> PyResult<Arc<dyn Provider>> {
    let config = match (fixtures, endpoint) {
        (Some(dir), _) => ProviderConfig::Mock {
            fixtures_dir: dir.into(),
        },
        (None, Some(endpoint)) => ProviderConfig::Remote {
            endpoint,
            model: model.ok_or_else(|| raise("config_error", "model is required with endpoint"))?,
            api_key_env: api_key_env.ok_or_else(|| raise("config_error", "api_key_env is required with endpoint"))?,
            timeout_secs: 60,
            json_mode: true,
        },
        (None, None) => return Err(raise("config_error", "pass fixtures= or endpoint=")),
    };
    build_provider(&config).map_err(service_err)
}

/// A live exploration session bound to one provider.
#[pyclass(module = "bimodal")]
struct Session {
    inner: bimodal_core::Session,
    provider: Option<Arc<dyn Provider>>,
    max_retries: u32,
}

impl Session {
    fn provider(&self) -> PyResult<Arc<dyn Provider>> {
        self.provider
            .clone()
            .ok_or_else(|| raise("config_error", "session has no provider; call attach_provider first"))
    }
}

#[pymethods]
impl Session {
    /// Loads the dataset source, asks the provider for the opening narrative.
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (dataset, goal, *, fixtures=None, endpoint=None, model=None, api_key_env=None, max_retries=DEFAULT_MAX_RETRIES))]
    fn create(
        py: Python<'_>,
        dataset: &str,
        goal: &str,
        fixtures: Option<String>,
        endpoint: Option<String>,
        model: Option<String>,
        api_key_env: Option<String>,
        max_retries: u32,
    ) -> PyResult<Self> {
        let ds = load_dataset(dataset)?;
        let provider = make_provider(fixtures, endpoint, model, api_key_env)?;
        let goal = goal.to_string();
        let inner = py
            .detach(|| create_session(ds, &goal, &*provider, max_retries))
            .map_err(service_err)?;
        Ok(Self {
            inner,
            provider: Some(provider),
            max_retries,
        })
    }

    /// Loads a saved session. Attach a provider before generating text.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_session(path).map_err(service_err)?,
            provider: None,
            max_retries: DEFAULT_MAX_RETRIES,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: session_from_json(text).map_err(service_err)?,
            provider: None,
            max_retries: DEFAULT_MAX_RETRIES,
        })
    }

    #[pyo3(signature = (*, fixtures=None, endpoint=None, model=None, api_key_env=None, max_retries=DEFAULT_MAX_RETRIES))]
    fn attach_provider(
        &mut self,
        fixtures: Option<String>,
        endpoint: Option<String>,
        model: Option<String>,
        api_key_env: Option<String>,
        max_retries: u32,
    ) -> PyResult<()> {
        self.provider = Some(make_provider(fixtures, endpoint, model, api_key_env)?);
        self.max_retries = max_retries;
        Ok(())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_session(&self.inner, path).map_err(service_err)
    }

    fn to_json(&self) -> String {
        session_to_json(&self.inner)
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn goal(&self) -> &str {
        self.inner.goal()
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    #[getter]
    fn document(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.document())
    }

    #[getter]
    fn charts(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.charts())
    }

    /// Plain text of each paragraph, chart references as `[n]`.
    fn paragraphs(&self) -> Vec<String> {
        self.inner.document().paragraphs.iter().map(|p| p.plain_text()).collect()
    }

    /// Applies a drop. `packet` is a drag packet or a packet spec
    /// (`{"text": {...}}`, `{"chart": {...}}`, `{"packet": {...}}`); `target`
    /// is `"tell_me_more"`, `"show_me_more"` or `{"chart": id}`. Returns the
    /// state delta; on error the session is unchanged.
    fn drop(&mut self, py: Python<'_>, packet: &Bound<'_, PyAny>, target: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let spec: PacketSpec = match from_py::<DragPacket>(packet) {
            Ok(p) => PacketSpec::Packet(p),
            Err(_) => from_py(packet)?,
        };
        let target: DropTarget = from_py(target)?;
        let provider = self.provider()?;
        let retries = self.max_retries;
        let mut working = self.inner.clone();
        let delta = py
            .detach(|| {
                let packet = spec.resolve(&working)?;
                post_drop(&mut working, &packet, &target, &*provider, retries)
            })
            .map_err(service_err)?;
        self.inner = working;
        to_py(py, &delta)
    }

    fn packet_from_text(&self, py: Python<'_>, leaf_ids: Vec<String>) -> PyResult<Py<PyAny>> {
        let ids: Vec<&str> = leaf_ids.iter().map(String::as_str).collect();
        let key_field = &self.inner.dataset().key_field().name;
        let packet = packet_from_text(self.inner.document(), &ids, key_field).map_err(|e| service_err(e.into()))?;
        to_py(py, &packet)
    }

    #[pyo3(signature = (chart, *, keys=Vec::new(), fields=Vec::new()))]
    fn packet_from_chart(&self, py: Python<'_>, chart: String, keys: Vec<String>, fields: Vec<String>) -> PyResult<Py<PyAny>> {
        let spec = PacketSpec::Chart {
            chart,
            selection: ChartSelection { keys, fields },
        };
        to_py(py, &spec.resolve(&self.inner).map_err(service_err)?)
    }

    /// Invariant violations; empty when the session is consistent.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().err().unwrap_or_default()
    }

    #[pyo3(signature = (tolerance=DEFAULT_TOLERANCE))]
    fn ground_check(&self, py: Python<'_>, tolerance: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &ground_check(self.inner.document(), self.inner.dataset(), tolerance))
    }

    fn __repr__(&self) -> String {
        format!(
            "Session(id={:?}, paragraphs={}, charts={}, revision={})",
            self.inner.id(),
            self.inner.document().paragraphs.len(),
            self.inner.charts().len(),
            self.inner.revision()
        )
    }
}

/// Runs a replay script. Returns `(session, steps)`.
#[pyfunction]
#[pyo3(signature = (script, *, fixtures=None, endpoint=None, model=None, api_key_env=None, max_retries=DEFAULT_MAX_RETRIES))]
fn replay(
    py: Python<'_>,
    script: &str,
    fixtures: Option<String>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    max_retries: u32,
) -> PyResult<(Session, Py<PyAny>)> {
    let script = ReplayScript::from_file(script).map_err(service_err)?;
    let provider = make_provider(fixtures, endpoint, model, api_key_env)?;
    let log = py.detach(|| replay_script(&script, &*provider, max_retries)).map_err(|f| {
        let code = f.error.code();
        raise(code, f.to_string())
    })?;
    let steps = to_py(py, &log.steps)?;
    Ok((
        Session {
            inner: log.session,
            provider: Some(provider),
            max_retries,
        },
        steps,
    ))
}

/// Builds the chart a Show-Me-More drop of `packet` would create.
#[pyfunction]
#[pyo3(signature = (packet, dataset, chart_id="chart-1"))]
fn chart_for(py: Python<'_>, packet: &Bound<'_, PyAny>, dataset: &str, chart_id: &str) -> PyResult<Py<PyAny>> {
    let packet: DragPacket = from_py(packet)?;
    let ds = load_dataset(dataset)?;
    let out = synthesize_chart(&packet, &ds, chart_id).map_err(|e| raise("chart_error", e.to_string()))?;
    to_py(py, &out.spec)
}

/// Validates a narrative tree against a dataset; returns the normalized
/// document or raises with every error.
#[pyfunction]
fn validate_narrative(py: Python<'_>, tree: &Bound<'_, PyAny>, dataset: &str) -> PyResult<Py<PyAny>> {
    let raw: serde_json::Value = from_py(tree)?;
    let ds = load_dataset(dataset)?;
    let doc = validate_tree(&raw, &ds).map_err(|e| raise("llm_failure", e.to_string()))?;
    to_py(py, &doc)
}

fn level(n: u8) -> PyResult<SemanticLevel> {
    SemanticLevel::try_from(n).map_err(|e| raise("invalid_level", e))
}

#[pyfunction]
fn complement(layer: u8) -> PyResult<Vec<u32>> {
    let packet = DragPacket {
        source: bimodal_core::PacketSource::Text,
        fields: Vec::new(),
        values: Vec::new(),
        keys: Vec::new(),
        level: level(layer)?,
        text: String::new(),
    };
    Ok(complement_levels(&packet).into_iter().map(|l| u8::from(l) as u32).collect())
}

/// `(role, hex color)` of a level.
#[pyfunction]
fn level_info(layer: u8) -> PyResult<(String, String)> {
    let l = level(layer)?;
    Ok((l.role().to_string(), color_for(l).hex.to_string()))
}

#[pyfunction]
fn schema(py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
    let s = bimodal_core::schema::schema(name).ok_or_else(|| raise("unknown_schema", name.to_string()))?;
    to_py(py, &s)
}

#[pyfunction]
fn schema_names() -> Vec<&'static str> {
    bimodal_core::schema::SCHEMA_NAMES.to_vec()
}

#[pymodule]
fn bimodal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BimodalError", m.py().get_type::<BimodalError>())?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(chart_for, m)?)?;
    m.add_function(wrap_pyfunction!(validate_narrative, m)?)?;
    m.add_function(wrap_pyfunction!(complement, m)?)?;
    m.add_function(wrap_pyfunction!(level_info, m)?)?;
    m.add_function(wrap_pyfunction!(schema, m)?)?;
    m.add_function(wrap_pyfunction!(schema_names, m)?)?;
    Ok(())
}
