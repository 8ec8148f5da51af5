//! On-disk form of the synthetic dataset: one binary array file per
//! sample plus a `manifest.json` carrying labels, shapes, and a hash of
//! the generator spec.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{LabeledSample, SkeletonSequence, SyntheticDatasetSpec};
use crate::tensor::DenseArray;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub label: usize,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SyntheticDatasetSpec,
    pub spec_hash: String,
    pub entries: Vec<ManifestEntry>,
}

pub fn spec_hash(spec: &SyntheticDatasetSpec) -> Result<String> {
    let canonical = serde_json::to_string(spec)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write samples and manifest into `dir`. Refuses a non-empty existing
/// directory unless `force` is set.
pub fn write_dataset(
    dir: &Path,
    samples: &[LabeledSample],
    spec: &SyntheticDatasetSpec,
    force: bool,
) -> Result<Manifest> {
    if dir.exists() {
        let non_empty = std::fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} is not empty; pass --force to overwrite", dir.display()),
            )));
        }
    } else {
        std::fs::create_dir_all(dir)?;
    }
    let mut entries = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let file = format!("sample_{i:04}.bin");
        sample.sequence.data().save(&dir.join(&file))?;
        entries.push(ManifestEntry {
            file,
            label: sample.label,
            shape: sample.sequence.data().shape().to_vec(),
        });
    }
    let manifest = Manifest {
        spec: spec.clone(),
        spec_hash: spec_hash(spec)?,
        entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let raw = std::fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&raw)?)
}

pub fn load_dataset(dir: &Path) -> Result<(Vec<LabeledSample>, Manifest)> {
    let manifest = load_manifest(dir)?;
    let mut samples = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let arr = DenseArray::load(&dir.join(&entry.file))?;
        if arr.shape() != entry.shape.as_slice() {
            return Err(Error::Format(format!(
                "{}: shape {:?} disagrees with manifest {:?}",
                entry.file,
                arr.shape(),
                entry.shape
            )));
        }
        samples.push(LabeledSample {
            sequence: SkeletonSequence::new(arr)?,
            label: entry.label,
        });
    }
    Ok((samples, manifest))
}
