//! Row-major matrices and labeled sample batches.

use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Dense row-major `rows x cols` matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidData("matrix buffer does not match rows*cols"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Where a batch's rows came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    /// Rows were computed by running the frozen prefix of a network.
    ComputedByPrefix,
    /// Rows were imported from disk (raw inputs or pre-extracted features).
    Imported,
}

/// A labeled batch: one row per sample plus a class label per row.
///
/// Rows are either raw network inputs or the activation vectors feeding a
/// specific layer; the consumer decides which via context.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub source: FeatureSource,
}

impl FeatureBatch {
    /// Builds a batch, rejecting empty or inconsistent inputs.
    pub fn new(features: Matrix, labels: Vec<usize>, source: FeatureSource) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidData("empty batch"));
        }
        if features.rows() != labels.len() {
            return Err(Error::InvalidData("label count does not match row count"));
        }
        Ok(Self {
            features,
            labels,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Checks that every label is below `num_classes`.
    pub fn validate_labels(&self, num_classes: usize) -> Result<()> {
        for &label in &self.labels {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange { label, num_classes });
            }
        }
        Ok(())
    }
}
