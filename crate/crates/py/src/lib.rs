//! Python bindings for the artaug toolkit.

use std::collections::BTreeMap;
use std::path::PathBuf;

use artaug::augment::{self, load_synthetic, GenerationRequest, SyntheticDataset};
use artaug::capmetrics::{self, CaptionPair, Metric};
use artaug::corpus::{self, CaptionMode, LoadOptions};
use artaug::embedstore;
use artaug::retrieval::{self, Direction, SimilarityMatrix};
use artaug::sampler::{MixedSampler, Origin, SamplerConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(artaug_py, ArtaugError, PyException);

type Scores = BTreeMap<String, f64>;

fn err(e: impl std::fmt::Display) -> PyErr {
    ArtaugError::new_err(e.to_string())
}

fn pair(candidate: &str, references: Vec<String>) -> CaptionPair {
    CaptionPair {
        item_id: "item".into(),
        candidate: candidate.to_string(),
        references,
    }
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    capmetrics::tokenize(text).0
}

/// BLEU-1..max_n of one candidate.
#[pyfunction]
#[pyo3(signature = (candidate, references, max_n = 4))]
fn bleu(candidate: &str, references: Vec<String>, max_n: usize) -> PyResult<Vec<f64>> {
    if max_n == 0 {
        return Err(PyValueError::new_err("max_n must be at least 1"));
    }
    Ok(capmetrics::bleu(&pair(candidate, references), max_n)
        .map_err(err)?
        .scores)
}

#[pyfunction]
fn rouge_l(candidate: &str, references: Vec<String>) -> PyResult<f64> {
    capmetrics::rouge_l(&pair(candidate, references)).map_err(err)
}

#[pyfunction]
fn meteor_lite(candidate: &str, references: Vec<String>) -> PyResult<f64> {
    capmetrics::meteor_lite(&pair(candidate, references)).map_err(err)
}

/// Per-item CIDEr for `(id, candidate, references)` triples.
#[pyfunction]
fn cider(items: Vec<(String, String, Vec<String>)>) -> PyResult<Vec<f64>> {
    let pairs: Vec<CaptionPair> = items
        .into_iter()
        .map(|(item_id, candidate, references)| CaptionPair {
            item_id,
            candidate,
            references,
        })
        .collect();
    Ok(capmetrics::cider(&pairs)
        .map_err(err)?
        .items
        .iter()
        .map(|i| i.score)
        .collect())
}

/// Scores `(id, candidate, references)` triples; returns `(per_item, corpus)`.
#[pyfunction]
#[pyo3(signature = (items, metrics = None))]
fn evaluate_captions(
    items: Vec<(String, String, Vec<String>)>,
    metrics: Option<Vec<String>>,
) -> PyResult<(Vec<(String, Scores)>, Scores)> {
    let pairs: Vec<CaptionPair> = items
        .into_iter()
        .map(|(item_id, candidate, references)| CaptionPair {
            item_id,
            candidate,
            references,
        })
        .collect();
    let metrics: Vec<Metric> = match metrics {
        Some(names) => names
            .iter()
            .map(|n| n.parse().map_err(PyValueError::new_err))
            .collect::<PyResult<_>>()?,
        None => Metric::ALL[..4].to_vec(),
    };
    let report = capmetrics::evaluate_captions(&pairs, &metrics, None).map_err(err)?;
    Ok((report.per_item.into_iter().collect(), report.corpus))
}

#[pyfunction]
fn bertscore(candidate: Vec<Vec<f32>>, reference: Vec<Vec<f32>>) -> PyResult<(f64, f64, f64)> {
    let s = capmetrics::bertscore(&candidate, &reference).map_err(err)?;
    Ok((s.precision, s.recall, s.f1))
}

#[pyfunction]
fn cosine(u: Vec<f32>, v: Vec<f32>) -> PyResult<f64> {
    embedstore::cosine(&u, &v).map_err(err)
}

#[pyfunction]
fn derive_seed(parent_id: &str, variation_index: usize, base_seed: u64) -> u64 {
    augment::derive_seed(parent_id, variation_index, base_seed)
}

/// PNG bytes from the deterministic mock generator.
#[pyfunction]
#[pyo3(signature = (prompt, seed, width = 64, height = 64))]
fn mock_generate<'py>(
    py: Python<'py>,
    prompt: &str,
    seed: u64,
    width: u32,
    height: u32,
) -> PyResult<Bound<'py, PyBytes>> {
    if width == 0 || height == 0 {
        return Err(PyValueError::new_err("width and height must be positive"));
    }
    let req = GenerationRequest {
        parent_id: "py".into(),
        variation_index: 0,
        prompt_text: prompt.to_string(),
        init_image_path: PathBuf::new(),
        seed,
        strength: 0.75,
        guidance_scale: 7.5,
        output_size: (width, height),
    };
    Ok(PyBytes::new(py, &augment::mock_generate(&req)))
}

fn matrix(values: Vec<Vec<f64>>) -> PyResult<SimilarityMatrix> {
    let ids = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect();
    let (r, c) = (values.len(), values.first().map_or(0, Vec::len));
    SimilarityMatrix::from_values(ids("i", r), ids("t", c), values).map_err(err)
}

fn direction(name: &str) -> PyResult<Direction> {
    name.parse().map_err(PyValueError::new_err)
}

/// Recall@k on a square similarity matrix with diagonal ground truth.
#[pyfunction]
#[pyo3(signature = (values, ks, direction = "im2t"))]
fn recall_at_k(values: Vec<Vec<f64>>, ks: Vec<usize>, direction: &str) -> PyResult<BTreeMap<usize, f64>> {
    let dir = self::direction(direction)?;
    Ok(retrieval::recall_at_k(&matrix(values)?, &ks, dir).map_err(err)?.recalls)
}

#[pyfunction]
#[pyo3(signature = (values, pool, trials, seed, ks, direction = "im2t"))]
fn pooled_recall(
    values: Vec<Vec<f64>>,
    pool: usize,
    trials: usize,
    seed: u64,
    ks: Vec<usize>,
    direction: &str,
) -> PyResult<BTreeMap<usize, f64>> {
    let dir = self::direction(direction)?;
    Ok(retrieval::pooled_recall(&matrix(values)?, pool, trials, seed, &ks, dir)
        .map_err(err)?
        .recalls)
}

/// A validated artwork manifest.
#[pyclass(frozen)]
struct Dataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (path, strict = true, per_sentence = false))]
    fn load(path: PathBuf, strict: bool, per_sentence: bool) -> PyResult<Self> {
        let opts = LoadOptions {
            strict,
            caption_mode: if per_sentence {
                CaptionMode::PerSentence
            } else {
                CaptionMode::Joined
            },
        };
        Ok(Self {
            inner: corpus::load_manifest_with(path, opts).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.records.iter().map(|r| r.id.clone()).collect()
    }

    /// `{"train": n, "val": n, "test": n}`
    fn split_counts(&self) -> BTreeMap<&'static str, usize> {
        let [train, val, test] = self.inner.split_counts();
        BTreeMap::from([("train", train), ("val", val), ("test", test)])
    }

    #[pyo3(signature = (id, joiner = " "))]
    fn prompt(&self, id: &str, joiner: &str) -> PyResult<String> {
        let record = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        Ok(corpus::build_prompt(record, joiner).map_err(err)?.text)
    }

    fn caption_set(&self, id: &str) -> PyResult<Vec<String>> {
        let record = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        Ok(self.inner.caption_set(record))
    }

    /// One epoch of mixed batches, as lists of dicts.
    #[pyo3(signature = (synthetic = None, alpha = 0.5, batch_size = 8, epoch_seed = 0, shuffle = true))]
    fn sample_epoch<'py>(
        &self,
        py: Python<'py>,
        synthetic: Option<PathBuf>,
        alpha: f64,
        batch_size: usize,
        epoch_seed: u64,
        shuffle: bool,
    ) -> PyResult<Vec<Vec<Bound<'py, PyDict>>>> {
        let synthetic = match synthetic {
            Some(p) => load_synthetic(p).map_err(err)?,
            None => SyntheticDataset::empty(),
        };
        let sampler = MixedSampler::new(&self.inner, &synthetic).map_err(err)?;
        let cfg = SamplerConfig {
            alpha,
            batch_size,
            epoch_seed,
            shuffle,
        };
        let mut out = Vec::new();
        for batch in sampler.epoch(&cfg).map_err(err)? {
            let mut items = Vec::with_capacity(batch.items.len());
            for item in batch.items {
                let d = PyDict::new(py);
                d.set_item("parent_id", item.parent_id)?;
                d.set_item(
                    "origin",
                    if item.origin == Origin::Real {
                        "real"
                    } else {
                        "synthetic"
                    },
                )?;
                d.set_item("variation_index", item.variation_index)?;
                d.set_item("image", item.image_ref)?;
                d.set_item("captions", item.caption_set)?;
                items.push(d);
            }
            out.push(items);
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Dataset({:?}, {} records)", self.inner.name, self.inner.len())
    }
}

/// Fixed-width float32 vectors keyed by id, stored in the EMB1 format.
#[pyclass]
struct EmbeddingTable {
    inner: embedstore::EmbeddingTable,
}

#[pymethods]
impl EmbeddingTable {
    #[new]
    fn new(dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: embedstore::EmbeddingTable::new(dim).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: embedstore::load_embeddings(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn insert(&mut self, id: String, vector: Vec<f32>) -> PyResult<()> {
        self.inner.insert(id, vector).map_err(err)
    }

    fn get(&self, id: &str) -> Option<Vec<f32>> {
        self.inner.get(id).map(<[f32]>::to_vec)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, id: &str) -> bool {
        self.inner.get(id).is_some()
    }
}

/// Runs the command line with `argv` (without the program name) and returns
/// its exit status.
#[pyfunction]
fn run_cli(argv: Vec<String>) -> i32 {
    artaug::cli::run(std::iter::once("artaug".to_string()).chain(argv))
}

#[pymodule]
fn artaug_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ArtaugError", m.py().get_type::<ArtaugError>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<EmbeddingTable>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(meteor_lite, m)?)?;
    m.add_function(wrap_pyfunction!(cider, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_captions, m)?)?;
    m.add_function(wrap_pyfunction!(bertscore, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(mock_generate, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(pooled_recall, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
