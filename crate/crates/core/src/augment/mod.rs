//! Planning and executing the generation of `M` synthetic variations per
//! artwork through a pluggable generator backend.

mod mock;
mod remote;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{build_prompt, CorpusError, Dataset};
use crate::seed::hash64;

pub use mock::{mock_generate, MockBackend};
pub use remote::{remote_generate, RemoteBackend, RetryPolicy, VariationWireRequest, VariationWireResponse};

pub const SYNTHETIC_MANIFEST: &str = "synthetic.jsonl";
pub const CHECKSUM_FILE: &str = "SHA256SUMS";

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("invalid generation parameter: {0}")]
    InvalidParams(String),
    #[error("record id {0:?} cannot be used in an output file name")]
    InvalidId(String),
    #[error("two requests map to output file {0:?}")]
    NameCollision(String),
    #[error("generator backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("generation failed for {parent_id}#{variation_index}: {cause}")]
    GenerationFailed {
        parent_id: String,
        variation_index: usize,
        cause: String,
    },
    #[error("malformed generator response: {0}")]
    ProtocolError(String),
    #[error("generator returned {status}: {message}")]
    RemoteError { status: u16, message: String },
    #[error("synthetic manifest line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("duplicate variation {0}#{1}")]
    DuplicateVariation(String, usize),
    #[error("variations of {0:?} share seed {1}")]
    SeedCollision(String, u64),
    #[error("variation references unknown parent {0:?}")]
    UnknownParent(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AugmentError + '_ {
    move |source| AugmentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Image-to-image generation settings shared by every request of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub strength: f64,
    pub guidance_scale: f64,
    pub width: u32,
    pub height: u32,
    pub joiner: String,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            strength: 0.75,
            guidance_scale: 7.5,
            width: 512,
            height: 512,
            joiner: crate::corpus::DEFAULT_JOINER.to_string(),
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(AugmentError::InvalidParams(format!(
                "strength {} outside [0, 1]",
                self.strength
            )));
        }
        if !(self.guidance_scale > 0.0 && self.guidance_scale.is_finite()) {
            return Err(AugmentError::InvalidParams(format!(
                "guidance scale {} must be positive",
                self.guidance_scale
            )));
        }
        if self.width == 0 || self.height == 0 || self.width > 8192 || self.height > 8192 {
            return Err(AugmentError::InvalidParams(format!(
                "output size {}x{} outside 1..=8192",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub parent_id: String,
    pub variation_index: usize,
    pub prompt_text: String,
    pub init_image_path: PathBuf,
    pub seed: u64,
    pub strength: f64,
    pub guidance_scale: f64,
    pub output_size: (u32, u32),
}

impl GenerationRequest {
    pub fn output_name(&self) -> String {
        canonical_image_name(&self.parent_id, self.variation_index)
    }
}

pub fn canonical_image_name(parent_id: &str, variation_index: usize) -> String {
    format!("{parent_id}_{variation_index}.png")
}

/// Seed of variation `variation_index` of `parent_id`.
///
/// The first 8 bytes (little-endian) of SHA-256 over
/// `u64le(len(id)) ‖ id ‖ u64le(8) ‖ u64le(index) ‖ u64le(8) ‖ u64le(base_seed)`.
/// Depends only on its own record, so inserting or removing other records
/// never shifts a seed.
pub fn derive_seed(parent_id: &str, variation_index: usize, base_seed: u64) -> u64 {
    hash64(&[
        parent_id.as_bytes(),
        &(variation_index as u64).to_le_bytes(),
        &base_seed.to_le_bytes(),
    ])
}

/// The full set of generation requests for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// SHA-256 of the parent manifest in serialized form.
    pub parent_manifest: String,
    pub variations_per_image: usize,
    pub base_seed: u64,
    pub params: GenParams,
    pub requests: Vec<GenerationRequest>,
}

/// Builds `N × M` requests ordered by manifest position, then variation index.
///
/// Init image paths are resolved against `image_root`. Seeds come from
/// [`derive_seed`]; a seed equal to an earlier one of the same parent is
/// incremented until unique.
pub fn plan_variations(
    dataset: &Dataset,
    variations_per_image: usize,
    base_seed: u64,
    params: &GenParams,
    image_root: &Path,
) -> Result<Plan, AugmentError> {
    if dataset.is_empty() {
        return Err(AugmentError::EmptyDataset);
    }
    if variations_per_image == 0 {
        return Err(AugmentError::InvalidParams("M must be at least 1".into()));
    }
    params.validate()?;

    let mut requests = Vec::with_capacity(dataset.len() * variations_per_image);
    for record in &dataset.records {
        check_id(&record.id)?;
        let prompt = build_prompt(record, &params.joiner)?;
        let mut used = HashSet::with_capacity(variations_per_image);
        for index in 0..variations_per_image {
            let mut seed = derive_seed(&record.id, index, base_seed);
            while !used.insert(seed) {
                seed = seed.wrapping_add(1);
            }
            requests.push(GenerationRequest {
                parent_id: record.id.clone(),
                variation_index: index,
                prompt_text: prompt.text.clone(),
                init_image_path: image_root.join(&record.image_path),
                seed,
                strength: params.strength,
                guidance_scale: params.guidance_scale,
                output_size: (params.width, params.height),
            });
        }
    }

    Ok(Plan {
        parent_manifest: sha256_hex(dataset.to_jsonl().as_bytes()),
        variations_per_image,
        base_seed,
        params: params.clone(),
        requests,
    })
}

fn check_id(id: &str) -> Result<(), AugmentError> {
    let bad = id.is_empty()
        || id == "."
        || id == ".."
        || id.chars().any(|c| matches!(c, '/' | '\\' | '\0') || c.is_control());
    if bad {
        Err(AugmentError::InvalidId(id.to_string()))
    } else {
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// An image generator: the diffusion sidecar in production, a deterministic
/// double in tests.
pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Checks that the backend can be reached before any work is dispatched.
    fn probe(&self) -> Result<(), AugmentError> {
        Ok(())
    }

    /// Returns PNG bytes for one request.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<u8>, AugmentError>;
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn probe(&self) -> Result<(), AugmentError> {
        (**self).probe()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<u8>, AugmentError> {
        (**self).generate(request)
    }
}

/// One synthetic image `x̃_ij` in the synthetic manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationRecord {
    pub parent_id: String,
    pub variation_index: usize,
    pub seed: u64,
    #[serde(rename = "image")]
    pub image_path: String,
    #[serde(rename = "prompt")]
    pub prompt_text: String,
    pub strength: f64,
    pub guidance_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub parent_manifest: String,
    pub variations_per_image: usize,
    pub variations: Vec<VariationRecord>,
}

impl SyntheticDataset {
    pub fn new(
        parent_manifest: impl Into<String>,
        variations_per_image: usize,
        variations: Vec<VariationRecord>,
    ) -> Result<Self, AugmentError> {
        let mut keys = HashSet::new();
        let mut seeds = HashSet::new();
        for v in &variations {
            if !keys.insert((v.parent_id.as_str(), v.variation_index)) {
                return Err(AugmentError::DuplicateVariation(v.parent_id.clone(), v.variation_index));
            }
            if !seeds.insert((v.parent_id.as_str(), v.seed)) {
                return Err(AugmentError::SeedCollision(v.parent_id.clone(), v.seed));
            }
        }
        Ok(Self {
            parent_manifest: parent_manifest.into(),
            variations_per_image,
            variations,
        })
    }

    pub fn empty() -> Self {
        Self {
            parent_manifest: String::new(),
            variations_per_image: 0,
            variations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.variations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variations.is_empty()
    }

    /// Fails on the first variation whose parent is not in `dataset`.
    pub fn check_parents(&self, dataset: &Dataset) -> Result<(), AugmentError> {
        let ids: HashSet<&str> = dataset.records.iter().map(|r| r.id.as_str()).collect();
        match self.variations.iter().find(|v| !ids.contains(v.parent_id.as_str())) {
            Some(v) => Err(AugmentError::UnknownParent(v.parent_id.clone())),
            None => Ok(()),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for v in &self.variations {
            out.push_str(&serde_json::to_string(v).expect("variation serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, parent_manifest: impl Into<String>) -> Result<Self, AugmentError> {
        let mut variations = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: VariationRecord =
                serde_json::from_str(line).map_err(|e| AugmentError::MalformedLine(idx + 1, e.to_string()))?;
            variations.push(v);
        }
        let m = variations.iter().map(|v| v.variation_index + 1).max().unwrap_or(0);
        Self::new(parent_manifest, m, variations)
    }
}

/// Sidecar written next to the synthetic manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMeta {
    pub parent_manifest: String,
    pub variations_per_image: usize,
    pub base_seed: u64,
    pub params: GenParams,
    pub backend: String,
    pub requested: usize,
    pub failures: Vec<GenerationFailure>,
}

pub fn meta_path(manifest: &Path) -> PathBuf {
    let mut name = manifest.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    manifest.with_file_name(name)
}

/// Loads a synthetic manifest, taking M and the parent digest from the
/// `.meta.json` sidecar when one exists.
pub fn load_synthetic(path: impl AsRef<Path>) -> Result<SyntheticDataset, AugmentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut synthetic = SyntheticDataset::parse(&text, "")?;
    let meta = meta_path(path);
    if meta.exists() {
        let raw = fs::read_to_string(&meta).map_err(io_err(&meta))?;
        let meta: SyntheticMeta =
            serde_json::from_str(&raw).map_err(|e| AugmentError::MalformedLine(0, e.to_string()))?;
        synthetic.parent_manifest = meta.parent_manifest;
        synthetic.variations_per_image = synthetic.variations_per_image.max(meta.variations_per_image);
    } else {
        synthetic.parent_manifest = path.display().to_string();
    }
    Ok(synthetic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub parent_id: String,
    pub variation_index: usize,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub struct ExecutionReport {
    pub synthetic: SyntheticDataset,
    pub failures: Vec<GenerationFailure>,
    /// Requests sent to the backend in this run.
    pub backend_calls: usize,
    /// Requests satisfied by an existing, checksum-verified output file.
    pub reused: usize,
}

impl ExecutionReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs a plan, writing `{parent_id}_{variation_index}.png` per request, the
/// synthetic manifest, its `.meta.json` sidecar and a `SHA256SUMS` file into
/// `out_dir`.
///
/// Requests whose output already exists with the checksum recorded by a
/// previous run are not sent again. Backend failures are logged and recorded
/// rather than aborting the run. Up to `jobs` requests are in flight at once;
/// everything written is ordered by plan position.
pub fn execute_plan(
    plan: &Plan,
    backend: &dyn GeneratorBackend,
    out_dir: &Path,
    jobs: usize,
) -> Result<ExecutionReport, AugmentError> {
    let mut names = HashSet::with_capacity(plan.requests.len());
    for req in &plan.requests {
        check_id(&req.parent_id)?;
        let name = req.output_name();
        if !names.insert(name.clone()) {
            return Err(AugmentError::NameCollision(name));
        }
    }

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let known = read_checksums(&out_dir.join(CHECKSUM_FILE));

    let mut digests: Vec<Option<String>> = vec![None; plan.requests.len()];
    let mut pending = Vec::new();
    for (i, req) in plan.requests.iter().enumerate() {
        let name = req.output_name();
        let reusable = known.get(&name).and_then(|expected| {
            let bytes = fs::read(out_dir.join(&name)).ok()?;
            (sha256_hex(&bytes) == *expected).then(|| expected.clone())
        });
        match reusable {
            Some(digest) => digests[i] = Some(digest),
            None => pending.push(i),
        }
    }
    let reused = plan.requests.len() - pending.len();

    if !pending.is_empty() {
        backend.probe()?;
    }
    log::info!(
        "{} requests: {} reused, {} to generate with {} backend",
        plan.requests.len(),
        reused,
        pending.len(),
        backend.name()
    );

    let errors: Mutex<HashMap<usize, String>> = Mutex::new(HashMap::new());
    let fresh: Mutex<HashMap<usize, String>> = Mutex::new(HashMap::new());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(pending.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = pending.get(slot) else { break };
                let req = &plan.requests[i];
                let outcome = backend
                    .generate(req)
                    .and_then(|png| write_atomic(&out_dir.join(req.output_name()), &png).map(|_| sha256_hex(&png)));
                match outcome {
                    Ok(digest) => {
                        fresh.lock().unwrap().insert(i, digest);
                    }
                    Err(e) => {
                        log::warn!("{}#{}: {e}", req.parent_id, req.variation_index);
                        errors.lock().unwrap().insert(i, e.to_string());
                    }
                }
            });
        }
    });
    for (i, digest) in fresh.into_inner().unwrap() {
        digests[i] = Some(digest);
    }
    let errors = errors.into_inner().unwrap();

    let mut variations = Vec::with_capacity(plan.requests.len());
    let mut failures = Vec::new();
    let mut sums = String::new();
    for (i, req) in plan.requests.iter().enumerate() {
        match &digests[i] {
            Some(digest) => {
                let name = req.output_name();
                sums.push_str(&format!("{digest}  {name}\n"));
                variations.push(VariationRecord {
                    parent_id: req.parent_id.clone(),
                    variation_index: req.variation_index,
                    seed: req.seed,
                    image_path: name,
                    prompt_text: req.prompt_text.clone(),
                    strength: req.strength,
                    guidance_scale: req.guidance_scale,
                });
            }
            None => failures.push(GenerationFailure {
                parent_id: req.parent_id.clone(),
                variation_index: req.variation_index,
                cause: errors.get(&i).cloned().unwrap_or_default(),
            }),
        }
    }

    let synthetic = SyntheticDataset::new(plan.parent_manifest.clone(), plan.variations_per_image, variations)?;
    let manifest = out_dir.join(SYNTHETIC_MANIFEST);
    write_atomic(&manifest, synthetic.to_jsonl().as_bytes())?;
    write_atomic(&out_dir.join(CHECKSUM_FILE), sums.as_bytes())?;
    let meta = SyntheticMeta {
        parent_manifest: plan.parent_manifest.clone(),
        variations_per_image: plan.variations_per_image,
        base_seed: plan.base_seed,
        params: plan.params.clone(),
        backend: backend.name().to_string(),
        requested: plan.requests.len(),
        failures: failures.clone(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    write_atomic(&meta_path(&manifest), meta_json.as_bytes())?;

    Ok(ExecutionReport {
        synthetic,
        failures,
        backend_calls: pending.len(),
        reused,
    })
}

fn read_checksums(path: &Path) -> HashMap<String, String> {
    let Ok(text) = fs::read_to_string(path) else {
        return HashMap::new();
    };
    text.lines()
        .filter_map(|line| {
            let (digest, name) = line.split_once("  ")?;
            Some((name.to_string(), digest.to_string()))
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AugmentError> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".part");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ArtworkRecord, Split};

    pub(crate) fn fixture(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| ArtworkRecord {
                id: format!("a{i}"),
                image_path: format!("img/a{i}.jpg"),
                split: Split::Train,
                visual_sentences: vec![format!("Painting number {i}."), "A figure stands.".into()],
                contextual_sentences: vec![],
            })
            .collect();
        Dataset::new("fixture", records).unwrap()
    }

    fn small_params() -> GenParams {
        GenParams {
            width: 8,
            height: 8,
            ..GenParams::default()
        }
    }

    #[test]
    fn seed_derivation() {
        assert_eq!(derive_seed("a1", 0, 17), derive_seed("a1", 0, 17));
        assert_ne!(derive_seed("a1", 0, 17), derive_seed("a1", 1, 17));
        assert_ne!(derive_seed("a1", 0, 17), derive_seed("a2", 0, 17));
        assert_ne!(derive_seed("a1", 0, 17), derive_seed("a1", 0, 18));
    }

    #[test]
    fn seed_matches_documented_hash() {
        let mut h = Sha256::new();
        h.update(2u64.to_le_bytes());
        h.update(b"a1");
        h.update(8u64.to_le_bytes());
        h.update(0u64.to_le_bytes());
        h.update(8u64.to_le_bytes());
        h.update(17u64.to_le_bytes());
        let d = h.finalize();
        assert_eq!(derive_seed("a1", 0, 17), u64::from_le_bytes(d[..8].try_into().unwrap()));
    }

    #[test]
    fn plan_shape() {
        let d = fixture(10);
        let plan = plan_variations(&d, 4, 17, &small_params(), Path::new("root")).unwrap();
        assert_eq!(plan.requests.len(), 40);
        let order: Vec<_> = plan
            .requests
            .iter()
            .map(|r| (r.parent_id.clone(), r.variation_index))
            .collect();
        let expected: Vec<_> = (0..10)
            .flat_map(|i| (0..4).map(move |j| (format!("a{i}"), j)))
            .collect();
        assert_eq!(order, expected);
        assert_eq!(plan.requests[0].prompt_text, "Painting number 0. A figure stands.");
        assert_eq!(plan.requests[0].init_image_path, Path::new("root/img/a0.jpg"));
        for r in &plan.requests {
            assert_eq!(r.seed, derive_seed(&r.parent_id, r.variation_index, 17));
        }
    }

    #[test]
    fn plan_single_variation_and_determinism() {
        let d = fixture(3);
        let plan = plan_variations(&d, 1, 5, &small_params(), Path::new(".")).unwrap();
        assert_eq!(plan.requests.len(), 3);
        assert!(plan.requests.iter().all(|r| r.variation_index == 0));
        let again = plan_variations(&d, 1, 5, &small_params(), Path::new(".")).unwrap();
        assert_eq!(serde_json::to_vec(&plan).unwrap(), serde_json::to_vec(&again).unwrap());
    }

    #[test]
    fn plan_errors() {
        let empty = Dataset::new("e", vec![]).unwrap();
        assert!(matches!(
            plan_variations(&empty, 4, 0, &small_params(), Path::new(".")),
            Err(AugmentError::EmptyDataset)
        ));
        let d = fixture(1);
        assert!(plan_variations(&d, 0, 0, &small_params(), Path::new(".")).is_err());
        let bad = GenParams {
            strength: 1.5,
            ..small_params()
        };
        assert!(matches!(
            plan_variations(&d, 1, 0, &bad, Path::new(".")),
            Err(AugmentError::InvalidParams(_))
        ));
        let bad = GenParams {
            guidance_scale: 0.0,
            ..small_params()
        };
        assert!(plan_variations(&d, 1, 0, &bad, Path::new(".")).is_err());
    }

    #[test]
    fn ids_with_separators_rejected() {
        assert!(check_id("a/b").is_err());
        assert!(check_id("..").is_err());
        assert!(check_id("a_1").is_ok());
    }

    #[test]
    fn synthetic_constraints() {
        let v = |p: &str, i: usize, seed: u64| VariationRecord {
            parent_id: p.into(),
            variation_index: i,
            seed,
            image_path: canonical_image_name(p, i),
            prompt_text: "x".into(),
            strength: 0.75,
            guidance_scale: 7.5,
        };
        assert!(SyntheticDataset::new("d", 2, vec![v("a", 0, 1), v("a", 1, 2)]).is_ok());
        assert!(matches!(
            SyntheticDataset::new("d", 2, vec![v("a", 0, 1), v("a", 0, 2)]),
            Err(AugmentError::DuplicateVariation(..))
        ));
        assert!(matches!(
            SyntheticDataset::new("d", 2, vec![v("a", 0, 1), v("a", 1, 1)]),
            Err(AugmentError::SeedCollision(..))
        ));
        let s = SyntheticDataset::new("d", 1, vec![v("zz", 0, 1)]).unwrap();
        assert!(matches!(
            s.check_parents(&fixture(2)),
            Err(AugmentError::UnknownParent(_))
        ));
    }

    #[test]
    fn synthetic_manifest_roundtrip() {
        let d = fixture(2);
        let plan = plan_variations(&d, 3, 1, &small_params(), Path::new(".")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let report = execute_plan(&plan, &MockBackend, dir.path(), 2).unwrap();
        let text = report.synthetic.to_jsonl();
        let back = SyntheticDataset::parse(&text, plan.parent_manifest.clone()).unwrap();
        assert_eq!(back, report.synthetic);
        let loaded = load_synthetic(dir.path().join(SYNTHETIC_MANIFEST)).unwrap();
        assert_eq!(loaded, report.synthetic);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let mut keys: Vec<_> = first.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "guidance_scale",
                "image",
                "parent_id",
                "prompt",
                "seed",
                "strength",
                "variation_index"
            ]
        );
    }
}
