//! Bit-exact readers and writers for every on-disk format: FSNM model
//! files, FSNF feature batches, FSND delta vectors, MNIST IDX inputs, and
//! the CSV dataset form.
//!
//! Every reader is total: it consumes a byte buffer and either produces a
//! value or a structured error. Payload sizes are checked against the
//! bytes actually present before anything is allocated, so a corrupt
//! header cannot trigger an oversized allocation. Unknown magic tags are a
//! hard error, never a silent fallback.

use std::fs;
use std::io::Read;
use std::path::Path;

use fsn_core::{
    Activation, DenseLayer, DenseNetwork, FeatureBatch, FeatureSource, Matrix,
};
use thiserror::Error;

pub const MODEL_MAGIC: &[u8; 8] = b"FSNMODL1";
pub const FEATURES_MAGIC: &[u8; 8] = b"FSNFEAT1";
pub const DELTA_MAGIC: &[u8; 8] = b"FSNDELT1";

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Cap on bytes pulled out of a gzip stream, so a crafted member cannot
/// expand without bound.
const MAX_GZIP_BYTES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected}")]
    BadMagic { expected: &'static str },
    #[error("truncated file while reading {0}")]
    Truncated(&'static str),
    #[error("dimension overflow in header")]
    DimensionOverflow,
    #[error("unknown activation code {0}")]
    BadActivation(u8),
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid content: {0}")]
    Invalid(&'static str),
    #[error("unexpected trailing bytes")]
    TrailingBytes,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] fsn_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(FormatError::Truncated(what));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32_le(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u32_be(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Checks that `count * elem_size` bytes are actually present before
    /// the caller allocates anything.
    fn check_payload(&self, count: u64, elem_size: u64, what: &'static str) -> Result<usize> {
        let bytes = count
            .checked_mul(elem_size)
            .ok_or(FormatError::DimensionOverflow)?;
        if bytes > self.remaining() as u64 {
            return Err(FormatError::Truncated(what));
        }
        usize::try_from(count).map_err(|_| FormatError::DimensionOverflow)
    }

    fn f32_slice(&mut self, count: usize, what: &'static str) -> Result<Vec<f64>> {
        let raw = self.take(count * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(FormatError::TrailingBytes);
        }
        Ok(())
    }
}

fn expect_magic(r: &mut Reader, magic: &'static [u8; 8], name: &'static str) -> Result<()> {
    let got = r.take(8, "magic")?;
    if got != magic {
        return Err(FormatError::BadMagic { expected: name });
    }
    Ok(())
}

fn push_f32(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

// ---------------------------------------------------------------------------
// FSNM v1 model files
// ---------------------------------------------------------------------------

pub fn model_to_bytes(net: &DenseNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.push(match layer.activation() {
            Activation::Identity => 0,
            Activation::ReLU => 1,
        });
        push_f32(&mut out, layer.weights());
        push_f32(&mut out, layer.bias());
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<DenseNetwork> {
    let mut r = Reader::new(bytes);
    expect_magic(&mut r, MODEL_MAGIC, "FSNMODL1")?;
    let n_layers = r.u32_le("layer count")?;
    // Each layer needs at least its 9 header bytes.
    r.check_payload(n_layers as u64, 9, "layer headers")?;

    let mut layers = Vec::with_capacity(n_layers as usize);
    for _ in 0..n_layers {
        let out_dim = r.u32_le("out_dim")? as u64;
        let in_dim = r.u32_le("in_dim")? as u64;
        let act = match r.u8("activation")? {
            0 => Activation::Identity,
            1 => Activation::ReLU,
            code => return Err(FormatError::BadActivation(code)),
        };
        if out_dim == 0 || in_dim == 0 {
            return Err(FormatError::Invalid("zero layer dimension"));
        }
        let n_weights = out_dim
            .checked_mul(in_dim)
            .ok_or(FormatError::DimensionOverflow)?;
        let n_weights = r.check_payload(n_weights, 4, "weights")?;
        let weights = r.f32_slice(n_weights, "weights")?;
        let n_bias = r.check_payload(out_dim, 4, "biases")?;
        let bias = r.f32_slice(n_bias, "biases")?;
        layers.push(DenseLayer::new(
            in_dim as usize,
            out_dim as usize,
            weights,
            bias,
            act,
        )?);
    }
    r.finish()?;
    Ok(DenseNetwork::new(layers)?)
}

pub fn write_model(path: &Path, net: &DenseNetwork) -> Result<()> {
    Ok(fs::write(path, model_to_bytes(net))?)
}

pub fn read_model(path: &Path) -> Result<DenseNetwork> {
    model_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// FSNF v1 feature batches
// ---------------------------------------------------------------------------

pub fn features_to_bytes(batch: &FeatureBatch) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(FEATURES_MAGIC);
    out.extend_from_slice(&(batch.len() as u32).to_le_bytes());
    out.extend_from_slice(&(batch.dim() as u32).to_le_bytes());
    push_f32(&mut out, batch.features.as_slice());
    for &label in &batch.labels {
        out.extend_from_slice(&(label as u32).to_le_bytes());
    }
    out
}

pub fn features_from_bytes(bytes: &[u8]) -> Result<FeatureBatch> {
    let mut r = Reader::new(bytes);
    expect_magic(&mut r, FEATURES_MAGIC, "FSNFEAT1")?;
    let n = r.u32_le("row count")? as u64;
    let d = r.u32_le("row dim")? as u64;
    if n == 0 {
        return Err(FormatError::Invalid("empty feature batch"));
    }
    if d == 0 {
        return Err(FormatError::Invalid("zero feature dimension"));
    }
    let count = n.checked_mul(d).ok_or(FormatError::DimensionOverflow)?;
    let count = r.check_payload(count, 4, "feature rows")?;
    let values = r.f32_slice(count, "feature rows")?;
    let n_labels = r.check_payload(n, 4, "labels")?;
    let mut labels = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        labels.push(r.u32_le("labels")? as usize);
    }
    r.finish()?;
    let features = Matrix::from_vec(n as usize, d as usize, values)?;
    Ok(FeatureBatch::new(features, labels, FeatureSource::Imported)?)
}

pub fn write_features(path: &Path, batch: &FeatureBatch) -> Result<()> {
    Ok(fs::write(path, features_to_bytes(batch))?)
}

pub fn read_features(path: &Path) -> Result<FeatureBatch> {
    features_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// FSND v1 delta vectors
// ---------------------------------------------------------------------------

pub fn delta_to_bytes(delta: &[f64]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DELTA_MAGIC);
    out.extend_from_slice(&(delta.len() as u32).to_le_bytes());
    push_f32(&mut out, delta);
    out
}

pub fn delta_from_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut r = Reader::new(bytes);
    expect_magic(&mut r, DELTA_MAGIC, "FSNDELT1")?;
    let n = r.u32_le("length")? as u64;
    let n = r.check_payload(n, 4, "delta values")?;
    let values = r.f32_slice(n, "delta values")?;
    r.finish()?;
    Ok(values)
}

pub fn write_delta(path: &Path, delta: &[f64]) -> Result<()> {
    Ok(fs::write(path, delta_to_bytes(delta))?)
}

pub fn read_delta(path: &Path) -> Result<Vec<f64>> {
    delta_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// MNIST IDX files (big-endian headers, optional gzip)
// ---------------------------------------------------------------------------

/// Raw image matrix scaled to [0, 1] by dividing pixel bytes by 255.
pub fn idx_images_from_bytes(bytes: &[u8]) -> Result<Matrix> {
    let mut r = Reader::new(bytes);
    if r.u32_be("magic")? != IDX_IMAGES_MAGIC {
        return Err(FormatError::BadMagic {
            expected: "IDX images (0x00000803)",
        });
    }
    let n = r.u32_be("image count")? as u64;
    let rows = r.u32_be("rows")? as u64;
    let cols = r.u32_be("cols")? as u64;
    let d = rows.checked_mul(cols).ok_or(FormatError::DimensionOverflow)?;
    if n == 0 || d == 0 {
        return Err(FormatError::Invalid("empty image set"));
    }
    let count = n.checked_mul(d).ok_or(FormatError::DimensionOverflow)?;
    let count = r.check_payload(count, 1, "pixels")?;
    let raw = r.take(count, "pixels")?;
    r.finish()?;
    let values: Vec<f64> = raw.iter().map(|&p| p as f64 / 255.0).collect();
    Ok(Matrix::from_vec(n as usize, d as usize, values)?)
}

pub fn idx_labels_from_bytes(bytes: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader::new(bytes);
    if r.u32_be("magic")? != IDX_LABELS_MAGIC {
        return Err(FormatError::BadMagic {
            expected: "IDX labels (0x00000801)",
        });
    }
    let n = r.u32_be("label count")? as u64;
    let n = r.check_payload(n, 1, "labels")?;
    let raw = r.take(n, "labels")?;
    r.finish()?;
    Ok(raw.iter().map(|&b| b as usize).collect())
}

/// Reads a file, transparently decompressing gzip members (sniffed by the
/// 0x1f 0x8b leader, so both plain and `.gz` paths work).
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .take(MAX_GZIP_BYTES)
            .read_to_end(&mut out)?;
        return Ok(out);
    }
    Ok(raw)
}

/// Loads an images/labels IDX pair into a batch; the counts must agree.
pub fn read_idx(images_path: &Path, labels_path: &Path) -> Result<FeatureBatch> {
    let images = idx_images_from_bytes(&read_maybe_gz(images_path)?)?;
    let labels = idx_labels_from_bytes(&read_maybe_gz(labels_path)?)?;
    if images.rows() != labels.len() {
        return Err(FormatError::CountMismatch {
            images: images.rows(),
            labels: labels.len(),
        });
    }
    Ok(FeatureBatch::new(images, labels, FeatureSource::Imported)?)
}

/// Writes a batch with values in [0, 1] as an IDX pair, quantizing each
/// value to the nearest u8 step. Square dimensions become rows x cols
/// grids, everything else a single row.
pub fn write_idx(images_path: &Path, labels_path: &Path, batch: &FeatureBatch) -> Result<()> {
    let d = batch.dim();
    let side = (d as f64).sqrt() as usize;
    let (rows, cols) = if side * side == d { (side, side) } else { (1, d) };

    let mut images = Vec::with_capacity(16 + batch.len() * d);
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(batch.len() as u32).to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    for &v in batch.features.as_slice() {
        images.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    fs::write(images_path, images)?;

    let mut labels = Vec::with_capacity(8 + batch.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(batch.len() as u32).to_be_bytes());
    for &l in &batch.labels {
        labels.push(l as u8);
    }
    fs::write(labels_path, labels)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV datasets: one sample per line, label first, then the feature values
// ---------------------------------------------------------------------------

pub fn read_csv_dataset(path: &Path) -> Result<FeatureBatch> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("");
        let label: usize = label_field.trim().parse().map_err(|_| FormatError::Parse {
            line: lineno + 1,
            msg: format!("bad label {label_field:?}"),
        })?;
        let mut row = Vec::new();
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| FormatError::Parse {
                line: lineno + 1,
                msg: format!("bad value {field:?}"),
            })?;
            row.push(v);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(FormatError::Parse {
                    line: lineno + 1,
                    msg: format!("expected {d} values, got {}", row.len()),
                })
            }
            _ => {}
        }
        labels.push(label);
        values.extend_from_slice(&row);
    }
    let d = dim.ok_or(FormatError::Invalid("empty dataset"))?;
    if d == 0 {
        return Err(FormatError::Invalid("rows carry no features"));
    }
    let features = Matrix::from_vec(labels.len(), d, values)?;
    Ok(FeatureBatch::new(features, labels, FeatureSource::Imported)?)
}

pub fn write_csv_dataset(path: &Path, batch: &FeatureBatch) -> Result<()> {
    use std::fmt::Write as _;
    let mut text = String::new();
    for i in 0..batch.len() {
        write!(text, "{}", batch.labels[i]).expect("string write");
        for v in batch.features.row(i) {
            write!(text, ",{v}").expect("string write");
        }
        text.push('\n');
    }
    Ok(fs::write(path, text)?)
}
