//! Embedding tables in the `EMB1` binary format and image/caption cosine
//! similarity statistics over an augmented dataset.
//!
//! `EMB1` layout, little-endian throughout:
//!
//! ```text
//! b"EMB1" | u32 dim | u32 count | count × ( u16 id_len | id utf-8 | dim × f32 )
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::SyntheticDataset;
use crate::corpus::Dataset;

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot access embedding file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an EMB1 file (bad magic)")]
    BadMagic,
    #[error("embedding {0:?} does not match the table dimension")]
    DimensionMismatch(String),
    #[error("corrupt row at byte offset {0}")]
    CorruptRow(usize),
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("embedding {0:?} has a non-finite component")]
    NonFinite(String),
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("cosine of an all-zero vector is undefined")]
    ZeroVector,
    #[error("no embedding for id {0:?}")]
    MissingEmbedding(String),
}

/// Id-keyed vectors of one shared dimension, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(Self {
            dim,
            entries: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<(), EmbedError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(EmbedError::DimensionMismatch(id));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(id));
        }
        if self.entries.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn require(&self, id: &str) -> Result<&[f32], EmbedError> {
        self.get(id).ok_or_else(|| EmbedError::MissingEmbedding(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (2 + 16 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (id, v) in &self.entries {
            let id_len = u16::try_from(id.len()).expect("embedding id longer than 65535 bytes");
            out.extend_from_slice(&id_len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(EmbedError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(EmbedError::CorruptRow(4));
        }
        let dim = read_u32(bytes, 4) as usize;
        let count = read_u32(bytes, 8) as usize;
        let mut table = EmbeddingTable::new(dim)?;
        if !tail_parses(bytes, HEADER_LEN, dim, count) {
            return Err(diagnose_framing(bytes, dim, count));
        }
        let mut offset = HEADER_LEN;
        for _ in 0..count {
            let (id, next) = read_row_header(bytes, offset).expect("framing checked");
            let end = next + 4 * dim;
            let vector = bytes[next..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            table.insert(id, vector)?;
            offset = end;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbedError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    EmbeddingTable::from_bytes(&bytes)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses `[u16 len][id]` at `offset`, returning the id and the offset of the
/// first vector byte.
fn read_row_header(bytes: &[u8], offset: usize) -> Option<(&str, usize)> {
    let len_bytes = bytes.get(offset..offset + 2)?;
    let id_len = u16::from_le_bytes([len_bytes[0], len_bytes[1]]) as usize;
    let id_bytes = bytes.get(offset + 2..offset + 2 + id_len)?;
    let id = std::str::from_utf8(id_bytes).ok()?;
    if id.is_empty() {
        return None;
    }
    Some((id, offset + 2 + id_len))
}

/// Whether exactly `rows` well-framed rows of width `dim` follow `offset`
/// and end at EOF.
fn tail_parses(bytes: &[u8], mut offset: usize, dim: usize, rows: usize) -> bool {
    for _ in 0..rows {
        match read_row_header(bytes, offset) {
            Some((_, next)) if next + 4 * dim <= bytes.len() => offset = next + 4 * dim,
            _ => return false,
        }
    }
    offset == bytes.len()
}

/// Explains why a file does not frame as `count` rows of width `dim`: the
/// first row that would frame the rest of the file under some other width is
/// a dimension mismatch, anything else is corruption at the first bad offset.
fn diagnose_framing(bytes: &[u8], dim: usize, count: usize) -> EmbedError {
    let mut offset = HEADER_LEN;
    for row in 0..count {
        let Some((id, next)) = read_row_header(bytes, offset) else {
            return EmbedError::CorruptRow(offset);
        };
        if let Some(width) = alternate_width(bytes, next, dim, count - row - 1) {
            log::debug!("row {id:?} at offset {offset} holds {width} floats, expected {dim}");
            return EmbedError::DimensionMismatch(id.to_string());
        }
        let end = next + 4 * dim;
        if end > bytes.len() {
            return EmbedError::CorruptRow(offset);
        }
        offset = end;
    }
    EmbedError::CorruptRow(offset)
}

fn alternate_width(bytes: &[u8], vector_start: usize, dim: usize, rows_after: usize) -> Option<usize> {
    let available = bytes.len().checked_sub(vector_start)? / 4;
    (1..=available.min(4 * dim + 64))
        .filter(|&w| w != dim)
        .find(|&w| tail_parses(bytes, vector_start + 4 * w, dim, rows_after))
}

/// Cosine similarity, clamped to `[-1, 1]`. Accumulates in f64.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::DimensionMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean, population standard deviation and count of a set of similarities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

impl PairStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                stddev: 0.0,
                count: 0,
            };
        }
        let n = values.len() as f64;
        let mut sum = CompensatedSum::default();
        values.iter().for_each(|&x| sum.add(x));
        let mean = sum.total() / n;
        let mut sq = CompensatedSum::default();
        values.iter().for_each(|&x| sq.add((x - mean) * (x - mean)));
        Self {
            mean,
            stddev: (sq.total() / n).sqrt(),
            count: values.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub real_vs_caption: PairStats,
    pub synthetic_vs_caption: PairStats,
    pub real_vs_variation: PairStats,
}

/// Id under which a variation's image embedding is stored.
pub fn variation_image_id(parent_id: &str, variation_index: usize) -> String {
    format!("{parent_id}_{variation_index}")
}

/// Cosine statistics for (a) each real image against its caption, (b) each
/// variation against its parent's caption and (c) each variation against its
/// parent image.
///
/// Real images and captions are both keyed by the artwork id (in `images`
/// and `texts` respectively); variations by [`variation_image_id`].
pub fn similarity_report(
    dataset: &Dataset,
    synthetic: &SyntheticDataset,
    images: &EmbeddingTable,
    texts: &EmbeddingTable,
) -> Result<SimilarityReport, EmbedError> {
    let mut real_caption = Vec::with_capacity(dataset.len());
    for record in &dataset.records {
        let image = images.require(&record.id)?;
        let caption = texts.require(&record.id)?;
        real_caption.push(cosine(image, caption)?);
    }

    let mut synth_caption = Vec::with_capacity(synthetic.variations.len());
    let mut real_variation = Vec::with_capacity(synthetic.variations.len());
    for v in &synthetic.variations {
        let variation = images.require(&variation_image_id(&v.parent_id, v.variation_index))?;
        let caption = texts.require(&v.parent_id)?;
        let parent = images.require(&v.parent_id)?;
        synth_caption.push(cosine(variation, caption)?);
        real_variation.push(cosine(parent, variation)?);
    }

    Ok(SimilarityReport {
        real_vs_caption: PairStats::from_values(&real_caption),
        synthetic_vs_caption: PairStats::from_values(&synth_caption),
        real_vs_variation: PairStats::from_values(&real_variation),
    })
}
