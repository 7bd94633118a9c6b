//! Dataset dispatch: a path names either a directory of MNIST-style IDX
//! files, a CSV file of raw samples, or an FSNF feature batch; feature
//! batches are accepted anywhere a dataset is.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fsn_core::FeatureBatch;

use crate::formats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataRole {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub batch: FeatureBatch,
    /// True when the rows are pre-extracted features rather than raw inputs.
    pub is_features: bool,
}

fn existing(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.exists())
}

/// Loads the dataset at `path`. Directories follow the MNIST naming
/// convention (`train-*` / `t10k-*`, optionally gzipped) with the split
/// picked by `role`; single files are dispatched on extension.
pub fn load_dataset(path: &Path, role: DataRole) -> Result<LoadedData> {
    if !path.exists() {
        bail!("dataset path {} does not exist", path.display());
    }
    if path.is_dir() {
        let (img_names, lbl_names): (&[&str], &[&str]) = match role {
            DataRole::Train => (
                &["train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"],
                &["train-labels-idx1-ubyte", "train-labels-idx1-ubyte.gz"],
            ),
            DataRole::Test => (
                &["t10k-images-idx3-ubyte", "t10k-images-idx3-ubyte.gz"],
                &["t10k-labels-idx1-ubyte", "t10k-labels-idx1-ubyte.gz"],
            ),
        };
        let images = existing(path, img_names)
            .with_context(|| format!("no {:?} split in {}", role, path.display()))?;
        let labels = existing(path, lbl_names)
            .with_context(|| format!("no labels for {:?} split in {}", role, path.display()))?;
        let batch = formats::read_idx(&images, &labels)
            .with_context(|| format!("reading IDX pair in {}", path.display()))?;
        return Ok(LoadedData {
            batch,
            is_features: false,
        });
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("fsnf") => Ok(LoadedData {
            batch: formats::read_features(path)
                .with_context(|| format!("reading {}", path.display()))?,
            is_features: true,
        }),
        Some("csv") => Ok(LoadedData {
            batch: formats::read_csv_dataset(path)
                .with_context(|| format!("reading {}", path.display()))?,
            is_features: false,
        }),
        _ => bail!(
            "unrecognized dataset {}: expected a directory of IDX files, a .csv, or a .fsnf",
            path.display()
        ),
    }
}
