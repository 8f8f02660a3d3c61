//! Python bindings: corpora, embeddings, the joint tagger, span metrics and
//! the graph operator.

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString};
use serde_json::Value;

use nerfuse_core::cli::RunConfig;
use nerfuse_core::corpus::{self, corpus_stats, ConllMode, EntitySpan, EntityType, Scheme, TagSet};
use nerfuse_core::embedio::{self, validate_ctxe_against_corpus};
use nerfuse_core::fusion::{self, prepare_inputs, Mode};
use nerfuse_core::gcn::{self, SentenceGraph};
use nerfuse_core::metrics::{self, report_record};
use nerfuse_core::synth::{self, SynthConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: std::io::Error) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if obj.is_none() {
        Ok(Value::Null)
    } else if obj.is_instance_of::<PyBool>() {
        Ok(Value::Bool(obj.extract()?))
    } else if obj.is_instance_of::<PyInt>() {
        Ok(Value::from(obj.extract::<i64>()?))
    } else if obj.is_instance_of::<PyFloat>() {
        Ok(Value::from(obj.extract::<f64>()?))
    } else if obj.is_instance_of::<PyString>() {
        Ok(Value::String(obj.extract()?))
    } else {
        Err(PyValueError::new_err(format!("unsupported setting value {obj}")))
    }
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    match s {
        "iob1" => Ok(Scheme::Iob1),
        "iob2" => Ok(Scheme::Iob2),
        _ => Err(PyValueError::new_err(format!("unknown scheme {s:?}"))),
    }
}

/// A tagged CoNLL corpus, optionally with dependency arcs attached.
#[pyclass(module = "nerfuse")]
struct Corpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl Corpus {
    /// Parse CoNLL text. `deps` is CoNLL-U text with one tree per sentence.
    #[staticmethod]
    #[pyo3(signature = (text, scheme = "iob1", deps = None))]
    fn from_conll(text: &str, scheme: &str, deps: Option<&str>) -> PyResult<Self> {
        let mut inner = corpus::parse_conll(text, &TagSet::conll2003(parse_scheme(scheme)?)).map_err(value_err)?;
        if let Some(deps) = deps {
            inner = inner
                .with_deps(corpus::parse_conllu_deps(deps).map_err(value_err)?)
                .map_err(value_err)?;
        }
        Ok(Corpus { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, scheme = "iob1", deps_path = None))]
    fn read(path: &str, scheme: &str, deps_path: Option<&str>) -> PyResult<Self> {
        let tagset = TagSet::conll2003(parse_scheme(scheme)?);
        let mut inner =
            corpus::read_conll(File::open(path).map_err(io_err)?, &tagset, ConllMode::Tagged).map_err(value_err)?;
        if let Some(p) = deps_path {
            let arcs = corpus::read_conllu_deps(File::open(p).map_err(io_err)?).map_err(value_err)?;
            inner = inner.with_deps(arcs).map_err(value_err)?;
        }
        Ok(Corpus { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn has_deps(&self) -> bool {
        self.inner.has_deps()
    }

    /// Token surfaces, one list per sentence.
    fn surfaces(&self) -> Vec<Vec<String>> {
        self.inner
            .sentences()
            .iter()
            .map(|s| s.tokens.iter().map(|t| t.surface.clone()).collect())
            .collect()
    }

    fn gold_tags(&self) -> Vec<Vec<String>> {
        self.inner
            .sentences()
            .iter()
            .map(|s| s.tokens.iter().map(|t| t.gold_tag.to_string()).collect())
            .collect()
    }

    /// Gold entities as `(start, end, type)` with inclusive token ends.
    fn gold_spans(&self) -> Vec<Vec<(usize, usize, String)>> {
        self.inner
            .sentences()
            .iter()
            .map(|s| s.gold_spans().iter().map(span_tuple).collect())
            .collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(corpus_stats(&self.inner)).map_err(value_err)?)
    }
}

/// Static word vectors in GloVe text format.
#[pyclass(module = "nerfuse")]
struct WordVectors {
    inner: embedio::WordVectors,
}

#[pymethods]
impl WordVectors {
    #[staticmethod]
    #[pyo3(signature = (path, dim = None))]
    fn load(path: &str, dim: Option<usize>) -> PyResult<Self> {
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        Ok(WordVectors {
            inner: embedio::load_glove(reader, dim).map_err(value_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Stored vector, or None for an unknown surface.
    fn get(&self, surface: &str) -> Option<Vec<f32>> {
        self.inner.get(surface).map(<[f32]>::to_vec)
    }
}

/// Per-subword contextual vectors with first-subword masks (CTXE files).
#[pyclass(module = "nerfuse")]
struct ContextualFile {
    inner: embedio::ContextualFile,
}

#[pymethods]
impl ContextualFile {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let mut f = BufReader::new(File::open(path).map_err(io_err)?);
        Ok(ContextualFile {
            inner: embedio::read_ctxe(&mut f).map_err(value_err)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        let mut f = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        embedio::write_ctxe(&self.inner, &mut f).map_err(value_err)
    }

    #[getter]
    fn ctx_dim(&self) -> usize {
        self.inner.ctx_dim
    }

    fn __len__(&self) -> usize {
        self.inner.sentences.len()
    }

    fn masks(&self) -> Vec<Vec<u8>> {
        self.inner.sentences.iter().map(|s| s.mask.bits().to_vec()).collect()
    }

    /// Disagreements with `corpus` as messages; empty when consistent.
    fn validate(&self, corpus: PyRef<'_, Corpus>) -> Vec<String> {
        let report = validate_ctxe_against_corpus(&self.inner, &corpus.inner);
        report.violations.iter().map(ToString::to_string).collect()
    }
}

fn optional<'a, T, U>(o: &'a Option<PyRef<'_, T>>, f: impl Fn(&'a T) -> &'a U) -> Option<&'a U>
where
    T: pyo3::PyClass,
{
    o.as_ref().map(|r| f(r))
}

/// The fused tagger: GCN over dependency graphs plus contextual vectors,
/// then a linear softmax classifier.
#[pyclass(module = "nerfuse")]
struct JointModel {
    inner: fusion::JointModel,
}

#[pymethods]
impl JointModel {
    /// Train on `corpus`. Keyword settings use the configuration-file keys
    /// (mode, epochs, learning_rate, batch_size, dropout, seed, optimizer,
    /// gcn_tap, global_dim, gcn_hidden_dim, gcn_dropout). Returns the model
    /// and the per-epoch losses.
    #[staticmethod]
    #[pyo3(signature = (corpus, wv = None, ctx = None, **settings))]
    fn train(
        corpus: PyRef<'_, Corpus>,
        wv: Option<PyRef<'_, WordVectors>>,
        ctx: Option<PyRef<'_, ContextualFile>>,
        settings: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<(JointModel, Vec<f64>)> {
        let mut map = serde_json::Map::new();
        if let Some(d) = settings {
            for (k, v) in d.iter() {
                map.insert(k.extract::<String>()?, from_py(&v)?);
            }
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(map)).map_err(value_err)?;
        cfg.check().map_err(value_err)?;
        let outcome = fusion::train_joint(
            &corpus.inner,
            optional(&wv, |w| &w.inner),
            optional(&ctx, |c| &c.inner),
            &cfg.gcn_config(),
            &cfg.train_config(),
        )
        .map_err(value_err)?;
        Ok((JointModel { inner: outcome.model }, outcome.losses))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let mut f = BufReader::new(File::open(path).map_err(io_err)?);
        Ok(JointModel {
            inner: fusion::read_fuse(&mut f).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let mut f = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        fusion::write_fuse(&self.inner, &mut f).map_err(value_err)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode().as_str()
    }

    #[getter]
    fn global_dim(&self) -> usize {
        self.inner.global_dim()
    }

    #[getter]
    fn ctx_dim(&self) -> usize {
        self.inner.ctx_dim()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    /// Predicted tags, one list per sentence.
    #[pyo3(signature = (corpus, wv = None, ctx = None))]
    fn predict(
        &self,
        corpus: PyRef<'_, Corpus>,
        wv: Option<PyRef<'_, WordVectors>>,
        ctx: Option<PyRef<'_, ContextualFile>>,
    ) -> PyResult<Vec<Vec<String>>> {
        let inputs = prepare_inputs(
            &corpus.inner,
            optional(&wv, |w| &w.inner),
            optional(&ctx, |c| &c.inner),
            self.inner.mode(),
        )
        .map_err(value_err)?;
        inputs
            .iter()
            .map(|input| {
                let p = fusion::predict(&self.inner, input, corpus.inner.tagset()).map_err(value_err)?;
                Ok(p.tags.iter().map(ToString::to_string).collect())
            })
            .collect()
    }

    /// Relaxed span scores as a dict with `overall`, `per_type` and
    /// `counts`.
    #[pyo3(signature = (corpus, wv = None, ctx = None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        corpus: PyRef<'_, Corpus>,
        wv: Option<PyRef<'_, WordVectors>>,
        ctx: Option<PyRef<'_, ContextualFile>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let inputs = prepare_inputs(
            &corpus.inner,
            optional(&wv, |w| &w.inner),
            optional(&ctx, |c| &c.inner),
            self.inner.mode(),
        )
        .map_err(value_err)?;
        let report = fusion::evaluate(&self.inner, &inputs, corpus.inner.tagset()).map_err(value_err)?;
        to_py(py, &report_record(&report))
    }
}

fn span_tuple(s: &EntitySpan) -> (usize, usize, String) {
    (s.start, s.end, s.etype.as_str().to_string())
}

fn parse_type(s: &str) -> PyResult<EntityType> {
    EntityType::ALL
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| PyValueError::new_err(format!("unknown entity type {s:?}")))
}

type PySpans = Vec<Vec<(usize, usize, String)>>;

fn to_spans(spans: PySpans) -> PyResult<Vec<Vec<EntitySpan>>> {
    spans
        .into_iter()
        .map(|sent| {
            sent.into_iter()
                .map(|(start, end, t)| Ok(EntitySpan::new(start, end, parse_type(&t)?)))
                .collect()
        })
        .collect()
}

/// Micro P/R/F1 in percent where any same-type overlap counts as a match.
#[pyfunction]
fn relaxed_prf<'py>(py: Python<'py>, gold: PySpans, pred: PySpans) -> PyResult<Bound<'py, PyAny>> {
    let r = metrics::relaxed_prf(&to_spans(gold)?, &to_spans(pred)?).map_err(value_err)?;
    to_py(py, &report_record(&r))
}

/// Micro P/R/F1 in percent counting exact span matches only.
#[pyfunction]
fn strict_prf<'py>(py: Python<'py>, gold: PySpans, pred: PySpans) -> PyResult<Bound<'py, PyAny>> {
    let r = metrics::strict_prf(&to_spans(gold)?, &to_spans(pred)?).map_err(value_err)?;
    to_py(py, &report_record(&r))
}

/// Dense `D^-1/2 (A + I) D^-1/2` for an undirected graph on `n` nodes.
#[pyfunction]
fn normalized_adjacency(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Vec<Vec<f64>>> {
    let adj = gcn::normalize_adjacency(&SentenceGraph::new(n, edges).map_err(value_err)?);
    Ok(adj.to_dense().rows().into_iter().map(|r| r.to_vec()).collect())
}

/// A generated corpus where half the entities are only recognisable from
/// static vectors and half only from contextual ones. Returns
/// `(train, test, word_vectors, ctx_train, ctx_test)`.
#[pyfunction]
#[pyo3(signature = (seed = 0, train_sentences = 200, test_sentences = 100, glove_dim = 16, ctx_dim = 16))]
fn synth_corpus(
    seed: u64,
    train_sentences: usize,
    test_sentences: usize,
    glove_dim: usize,
    ctx_dim: usize,
) -> PyResult<(Corpus, Corpus, WordVectors, ContextualFile, ContextualFile)> {
    if glove_dim <= 4 || ctx_dim <= 5 {
        return Err(PyValueError::new_err(
            "glove_dim must exceed 4 and ctx_dim must exceed 5",
        ));
    }
    let d = synth::synth_corpus(&SynthConfig {
        train_sentences,
        test_sentences,
        glove_dim,
        ctx_dim,
        seed,
    });
    Ok((
        Corpus { inner: d.train },
        Corpus { inner: d.test },
        WordVectors { inner: d.wv },
        ContextualFile { inner: d.ctx_train },
        ContextualFile { inner: d.ctx_test },
    ))
}

#[pymodule]
pub fn nerfuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<WordVectors>()?;
    m.add_class::<ContextualFile>()?;
    m.add_class::<JointModel>()?;
    m.add_function(wrap_pyfunction!(relaxed_prf, m)?)?;
    m.add_function(wrap_pyfunction!(strict_prf, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_adjacency, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add("MODES", Mode::ALL.map(Mode::as_str).to_vec())?;
    Ok(())
}
