//! Training minibatches that mix real samples with their synthetic variations.
//!
//! Each batch position independently holds the real record with probability
//! `alpha` and otherwise a variation drawn uniformly from that record's
//! variation set. Only the train split is mixed; records without variations
//! always come out real.
//!
//! Randomness is keyed by `(epoch_seed, position)` rather than drawn from one
//! sequential stream, so changing the batch size regroups the same items
//! without changing any of them.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{SyntheticDataset, VariationRecord};
use crate::corpus::{ArtworkRecord, Dataset, Split};
use crate::seed::stream_rng;

/// Default mixing probability for real samples.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("variation references missing parent {0:?}")]
    OrphanVariation(String),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedItem {
    pub image_ref: String,
    pub caption_set: Vec<String>,
    pub origin: Origin,
    pub parent_id: String,
    pub variation_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedBatch {
    pub items: Vec<MixedItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub epoch_seed: u64,
    pub shuffle: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            batch_size: 8,
            epoch_seed: 0,
            shuffle: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SamplerError::InvalidAlpha(self.alpha));
        }
        if self.batch_size == 0 {
            return Err(SamplerError::InvalidBatchSize);
        }
        Ok(())
    }
}

/// A dataset joined with its variation sets, ready to produce epochs.
#[derive(Debug, Clone)]
pub struct MixedSampler<'a> {
    dataset: &'a Dataset,
    train: Vec<&'a ArtworkRecord>,
    variations: HashMap<&'a str, Vec<&'a VariationRecord>>,
}

impl<'a> MixedSampler<'a> {
    pub fn new(dataset: &'a Dataset, synthetic: &'a SyntheticDataset) -> Result<Self, SamplerError> {
        let mut variations: HashMap<&str, Vec<&VariationRecord>> = HashMap::new();
        for v in &synthetic.variations {
            if dataset.get(&v.parent_id).is_none() {
                return Err(SamplerError::OrphanVariation(v.parent_id.clone()));
            }
            variations.entry(v.parent_id.as_str()).or_default().push(v);
        }
        for set in variations.values_mut() {
            set.sort_by_key(|v| v.variation_index);
        }
        let train = dataset.records.iter().filter(|r| r.split == Split::Train).collect();
        Ok(Self {
            dataset,
            train,
            variations,
        })
    }

    /// Number of items one epoch yields.
    pub fn epoch_len(&self) -> usize {
        self.train.len()
    }

    pub fn variation_count(&self, parent_id: &str) -> usize {
        self.variations.get(parent_id).map_or(0, Vec::len)
    }

    pub fn epoch(&self, cfg: &SamplerConfig) -> Result<Vec<MixedBatch>, SamplerError> {
        cfg.validate()?;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        if cfg.shuffle {
            order.shuffle(&mut stream_rng(cfg.epoch_seed, "shuffle", 0));
        }
        let items: Vec<MixedItem> = order
            .iter()
            .enumerate()
            .map(|(position, &i)| self.draw(self.train[i], cfg, position))
            .collect();
        Ok(items
            .chunks(cfg.batch_size)
            .map(|chunk| MixedBatch { items: chunk.to_vec() })
            .collect())
    }

    fn draw(&self, record: &ArtworkRecord, cfg: &SamplerConfig, position: usize) -> MixedItem {
        let mut rng = stream_rng(cfg.epoch_seed, "position", position as u64);
        let keep_real = rng.random::<f64>() < cfg.alpha;
        let caption_set = self.dataset.caption_set(record);
        let set = self.variations.get(record.id.as_str()).filter(|s| !s.is_empty());
        match set {
            Some(set) if !keep_real => {
                let v = set[rng.random_range(0..set.len())];
                MixedItem {
                    image_ref: v.image_path.clone(),
                    caption_set,
                    origin: Origin::Synthetic,
                    parent_id: record.id.clone(),
                    variation_index: Some(v.variation_index),
                }
            }
            _ => MixedItem {
                image_ref: record.image_path.clone(),
                caption_set,
                origin: Origin::Real,
                parent_id: record.id.clone(),
                variation_index: None,
            },
        }
    }
}

/// One epoch of mixed batches over the train split.
pub fn mixed_epoch(
    dataset: &Dataset,
    synthetic: &SyntheticDataset,
    cfg: &SamplerConfig,
) -> Result<Vec<MixedBatch>, SamplerError> {
    MixedSampler::new(dataset, synthetic)?.epoch(cfg)
}

/// Occurrences of each synthetic `(parent_id, variation_index)`.
pub fn variation_histogram<'b>(
    batches: impl IntoIterator<Item = &'b MixedBatch>,
) -> BTreeMap<String, BTreeMap<usize, usize>> {
    let mut hist: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for item in batches.into_iter().flat_map(|b| &b.items) {
        if let (Origin::Synthetic, Some(index)) = (item.origin, item.variation_index) {
            *hist
                .entry(item.parent_id.clone())
                .or_default()
                .entry(index)
                .or_default() += 1;
        }
    }
    hist
}
