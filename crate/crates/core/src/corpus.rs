//! Dataset manifests: the real artworks, their caption sentences and split labels.
//!
//! A manifest is UTF-8 text with one JSON object per line:
//!
//! ```text
//! {"id": "a1", "image": "img/a1.jpg", "split": "train",
//!  "visual_sentences": ["A woman stands."], "contextual_sentences": []}
//! ```
//!
//! `contextual_sentences` is optional. Unknown fields are rejected unless the
//! manifest is loaded in lax mode, where they are logged and ignored.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Sentence separator used when no other joiner is configured.
pub const DEFAULT_JOINER: &str = " ";

const KNOWN_FIELDS: [&str; 5] = ["id", "image", "split", "visual_sentences", "contextual_sentences"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: malformed record: {1}")]
    MalformedLine(usize, String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("line {1}: missing field `{0}`")]
    MissingField(String, usize),
    #[error("line {1}: unknown field `{0}`")]
    UnknownField(String, usize),
    #[error("line {0}: invalid record: {1}")]
    InvalidRecord(usize, String),
    #[error("record {0:?} has no visual sentences")]
    EmptyCaptionSet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

/// How a record's sentences become the caption set `y_i` seen by training
/// and evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionMode {
    /// All visual sentences combined into one description.
    #[default]
    Joined,
    /// Every visual sentence is its own caption.
    PerSentence,
}

impl FromStr for CaptionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joined" => Ok(CaptionMode::Joined),
            "per_sentence" | "per-sentence" => Ok(CaptionMode::PerSentence),
            other => Err(format!("unknown caption mode {other:?}")),
        }
    }
}

/// One real artwork `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtworkRecord {
    pub id: String,
    #[serde(rename = "image")]
    pub image_path: String,
    pub split: Split,
    pub visual_sentences: Vec<String>,
    #[serde(default)]
    pub contextual_sentences: Vec<String>,
}

impl ArtworkRecord {
    fn validate(&self, line_no: usize) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::InvalidRecord(line_no, "empty id".into()));
        }
        if self.image_path.is_empty() {
            return Err(CorpusError::InvalidRecord(line_no, "empty image path".into()));
        }
        if is_absolute_like(&self.image_path) {
            return Err(CorpusError::InvalidRecord(
                line_no,
                format!("image path {:?} must be relative", self.image_path),
            ));
        }
        if self.visual_sentences.is_empty() {
            return Err(CorpusError::EmptyCaptionSet(self.id.clone()));
        }
        Ok(())
    }
}

fn is_absolute_like(path: &str) -> bool {
    // Also reject Windows drive and UNC forms regardless of host platform.
    Path::new(path).is_absolute()
        || path.starts_with('/')
        || path.starts_with('\\')
        || path.as_bytes().get(1) == Some(&b':')
}

/// The text prompt built from a record's visual sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub source_id: String,
    pub joiner: String,
}

/// Joins the visual sentences of `record` in manifest order.
///
/// Each sentence is trimmed first so the joiner is the only separator between
/// neighbours; sentences that are blank after trimming are dropped.
/// Contextual sentences are never used.
pub fn build_prompt(record: &ArtworkRecord, joiner: &str) -> Result<Prompt, CorpusError> {
    let parts: Vec<&str> = record
        .visual_sentences
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.is_empty() {
        return Err(CorpusError::EmptyCaptionSet(record.id.clone()));
    }
    Ok(Prompt {
        text: parts.join(joiner),
        source_id: record.id.clone(),
        joiner: joiner.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Reject unknown fields instead of warning about them.
    pub strict: bool,
    pub caption_mode: CaptionMode,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            strict: true,
            caption_mode: CaptionMode::Joined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub caption_mode: CaptionMode,
    pub joiner: String,
    pub records: Vec<ArtworkRecord>,
}

impl Dataset {
    /// Builds a dataset from records, enforcing every record invariant and id
    /// uniqueness.
    pub fn new(name: impl Into<String>, records: Vec<ArtworkRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.validate(i + 1)?;
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            caption_mode: CaptionMode::Joined,
            joiner: DEFAULT_JOINER.to_string(),
            records,
        })
    }

    pub fn with_caption_mode(mut self, mode: CaptionMode) -> Self {
        self.caption_mode = mode;
        self
    }

    pub fn with_joiner(mut self, joiner: impl Into<String>) -> Self {
        self.joiner = joiner.into();
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ArtworkRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// The caption set `y_i` of a record under this dataset's caption mode.
    pub fn caption_set(&self, record: &ArtworkRecord) -> Vec<String> {
        match self.caption_mode {
            CaptionMode::Joined => build_prompt(record, &self.joiner)
                .map(|p| vec![p.text])
                .unwrap_or_default(),
            CaptionMode::PerSentence => record
                .visual_sentences
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    /// Number of records per split, in `Split::ALL` order.
    pub fn split_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for r in &self.records {
            counts[r.split as usize] += 1;
        }
        counts
    }

    /// Serializes the records in manifest form, one object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Records whose split matches, in the original order.
pub fn select_split(dataset: &Dataset, split: Split) -> Dataset {
    Dataset {
        name: format!("{}[{}]", dataset.name, split),
        caption_mode: dataset.caption_mode,
        joiner: dataset.joiner.clone(),
        records: dataset.records.iter().filter(|r| r.split == split).cloned().collect(),
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    load_manifest_with(path, LoadOptions::default())
}

pub fn load_manifest_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_manifest(&text, &name, opts)
}

/// Parses manifest text. Blank lines are skipped; line numbers are 1-based
/// physical lines.
pub fn parse_manifest(text: &str, name: &str, opts: LoadOptions) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line, line_no, opts.strict)?;
        record.validate(line_no)?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(Dataset {
        name: name.to_string(),
        caption_mode: opts.caption_mode,
        joiner: DEFAULT_JOINER.to_string(),
        records,
    })
}

fn parse_record(line: &str, line_no: usize, strict: bool) -> Result<ArtworkRecord, CorpusError> {
    let value: Value = serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine(line_no, e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(CorpusError::MalformedLine(line_no, "expected a JSON object".into()));
    };
    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            if strict {
                return Err(CorpusError::UnknownField(key.clone(), line_no));
            }
            log::warn!("manifest line {line_no}: ignoring unknown field `{key}`");
        }
    }
    let id = string_field(&obj, "id", line_no)?;
    let image_path = string_field(&obj, "image", line_no)?;
    let split = string_field(&obj, "split", line_no)?
        .parse::<Split>()
        .map_err(|e| CorpusError::MalformedLine(line_no, e))?;
    let visual_sentences = string_list(&obj, "visual_sentences", line_no)?
        .ok_or_else(|| CorpusError::MissingField("visual_sentences".into(), line_no))?;
    let contextual_sentences = string_list(&obj, "contextual_sentences", line_no)?.unwrap_or_default();
    Ok(ArtworkRecord {
        id,
        image_path,
        split,
        visual_sentences,
        contextual_sentences,
    })
}

fn string_field(obj: &Map<String, Value>, field: &str, line_no: usize) -> Result<String, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(CorpusError::MissingField(field.into(), line_no)),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(CorpusError::MalformedLine(
            line_no,
            format!("`{field}` must be a string"),
        )),
    }
}

fn string_list(obj: &Map<String, Value>, field: &str, line_no: usize) -> Result<Option<Vec<String>>, CorpusError> {
    let Some(value) = obj.get(field) else {
        return Ok(None);
    };
    let bad = || CorpusError::MalformedLine(line_no, format!("`{field}` must be an array of strings"));
    match value {
        Value::Null => Ok(None),
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        _ => Err(bad()),
    }
}
