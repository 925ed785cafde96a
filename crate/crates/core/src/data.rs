//! Desk-scale datasets: synthetic Gaussian clusters, an IDX-format reader
//! for MNIST-style files, and the noisy train/validation split.

use crate::error::{Error, Result};
use crate::noise::NoiseOutcome;
use crate::rng::SeededRng;
use crate::tensor::Tensor;
use std::path::Path;

/// A classification dataset. `noisy_labels` are the labels training
/// observes; `clean_labels`, when present, exist only for diagnostics and
/// clean-test evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Tensor,
    pub clean_labels: Option<Vec<usize>>,
    pub noisy_labels: Vec<usize>,
    pub num_classes: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.noisy_labels.len() != n {
            return Err(Error::dim_mismatch(
                "dataset labels",
                &[self.noisy_labels.len()],
                &[n],
            ));
        }
        if let Some(clean) = &self.clean_labels {
            if clean.len() != n {
                return Err(Error::dim_mismatch("clean labels", &[clean.len()], &[n]));
            }
            if let Some((i, &y)) = clean
                .iter()
                .enumerate()
                .find(|(_, &y)| y >= self.num_classes)
            {
                return Err(Error::InvalidLabel {
                    index: i,
                    label: y,
                    num_classes: self.num_classes,
                });
            }
        }
        if let Some((i, &y)) = self
            .noisy_labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y >= self.num_classes)
        {
            return Err(Error::InvalidLabel {
                index: i,
                label: y,
                num_classes: self.num_classes,
            });
        }
        if !self.features.is_finite() {
            return Err(Error::Data("dataset features must be finite".into()));
        }
        Ok(())
    }

    /// Same features with the observed labels replaced by a noise outcome.
    pub fn with_noise(&self, outcome: &NoiseOutcome, tag: &str) -> Result<Dataset> {
        if outcome.noisy_labels.len() != self.len() {
            return Err(Error::dim_mismatch(
                "noise outcome",
                &[outcome.noisy_labels.len()],
                &[self.len()],
            ));
        }
        Ok(Dataset {
            features: self.features.clone(),
            clean_labels: self.clean_labels.clone(),
            noisy_labels: outcome.noisy_labels.clone(),
            num_classes: self.num_classes,
            provenance: format!("{}-{}", self.provenance, tag),
        })
    }

    /// Per-example flip indicators; requires clean labels.
    pub fn flip_mask(&self) -> Option<Vec<bool>> {
        self.clean_labels.as_ref().map(|clean| {
            clean
                .iter()
                .zip(&self.noisy_labels)
                .map(|(c, n)| c != n)
                .collect()
        })
    }
}

/// Rows of a 2-D tensor gathered by index into a new tensor.
pub fn gather_rows(t: &Tensor, indices: &[usize]) -> Tensor {
    let cols = t.cols();
    let mut data = Vec::with_capacity(indices.len() * cols);
    for &i in indices {
        data.extend_from_slice(t.row(i));
    }
    Tensor::from_vec(&[indices.len(), cols], data).unwrap()
}

pub fn gather<T: Copy>(xs: &[T], indices: &[usize]) -> Vec<T> {
    indices.iter().map(|&i| xs[i]).collect()
}

// Cluster centers sit at pairwise distance max(BASE_DISTANCE, 4 * std):
// the 4-sigma floor keeps classes resolvable at large spreads, while the
// fixed base distance makes cluster_std an actual difficulty knob for
// small spreads (per-dimension standardization erases absolute scale).
const BASE_DISTANCE: f64 = 0.8;
const MIN_DISTANCE_FACTOR: f64 = 4.0;

fn blob_centers(d: usize, k: usize, cluster_std: f64) -> Vec<Vec<f64>> {
    let dist = BASE_DISTANCE.max(MIN_DISTANCE_FACTOR * cluster_std);
    let mut centers = vec![vec![0.0; d]; k];
    if k <= d {
        // Scaled standard-basis arrangement: all pairs equidistant.
        let scale = dist / 2.0f64.sqrt();
        for (j, c) in centers.iter_mut().enumerate() {
            c[j] = scale;
        }
    } else {
        // Circle in the first two dimensions.
        let radius = dist / (2.0 * (std::f64::consts::PI / k as f64).sin());
        for (j, c) in centers.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            c[0] = radius * theta.cos();
            c[1] = radius * theta.sin();
        }
    }
    centers
}

/// Gaussian clusters with per-class counts as equal as possible and
/// features standardized to zero mean and unit variance per dimension.
/// The labels come out clean (`noisy == clean`).
pub fn make_blobs(
    n: usize,
    d: usize,
    k: usize,
    cluster_std: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if k < 2 || n < k || d < 2 {
        return Err(Error::Config(format!(
            "blobs need n >= k >= 2 and d >= 2, got n={n}, d={d}, k={k}"
        )));
    }
    let std_ok = cluster_std.is_finite() && cluster_std > 0.0;
    if !std_ok {
        return Err(Error::Config(format!(
            "cluster_std must be positive, got {cluster_std}"
        )));
    }
    let centers = blob_centers(d, k, cluster_std);

    let base = n / k;
    let extra = n % k;
    let mut labels = Vec::with_capacity(n);
    for class in 0..k {
        let count = base + if class < extra { 1 } else { 0 };
        labels.extend(std::iter::repeat_n(class, count));
    }

    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        for &center in &centers[y] {
            data.push(center + cluster_std * rng.normal());
        }
    }

    // Per-dimension standardization.
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += data[i * d + j];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let c = data[i * d + j] - mean;
            var += c * c;
        }
        var /= n as f64;
        let std = var.sqrt().max(1e-12);
        for i in 0..n {
            data[i * d + j] = (data[i * d + j] - mean) / std;
        }
    }

    Ok(Dataset {
        features: Tensor::from_vec(&[n, d], data)?,
        clean_labels: Some(labels.clone()),
        noisy_labels: labels,
        num_classes: k,
        provenance: format!("blobs-n{n}-d{d}-k{k}-std{cluster_std}"),
    })
}

// IDX data-type code for unsigned bytes, the only payload type used by
// the MNIST-style files this crate reads.
const IDX_UNSIGNED_BYTE: u8 = 0x08;

/// Parse an IDX file: two zero bytes, a type code, a dimension count,
/// big-endian u32 dimension sizes, then the raw payload. Pixel payloads
/// (two or more dimensions) are rescaled to `[0, 1]`; one-dimensional
/// label payloads keep their raw integer values.
pub fn parse_idx(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    parse_idx_bytes(&bytes)
}

pub fn parse_idx_bytes(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 {
        return Err(Error::IdxFormat {
            offset: bytes.len(),
            message: "file shorter than the 4-byte magic".into(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::IdxFormat {
            offset: 0,
            message: format!("magic must start 0x00 0x00, got {:#04x} {:#04x}", bytes[0], bytes[1]),
        });
    }
    if bytes[2] != IDX_UNSIGNED_BYTE {
        return Err(Error::IdxFormat {
            offset: 2,
            message: format!("unsupported data type code {:#04x}", bytes[2]),
        });
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::IdxFormat {
            offset: 3,
            message: "dimension count must be at least 1".into(),
        });
    }
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(Error::IdxFormat {
            offset: bytes.len(),
            message: format!("truncated header, need {header_len} bytes"),
        });
    }
    let mut shape = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = 4 + 4 * i;
        let dim = u32::from_be_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
        shape.push(dim as usize);
    }
    let total: usize = shape.iter().product();
    if bytes.len() != header_len + total {
        return Err(Error::IdxFormat {
            offset: bytes.len().min(header_len + total),
            message: format!(
                "payload length {} does not match declared shape {:?}",
                bytes.len() - header_len,
                shape
            ),
        });
    }
    let payload = &bytes[header_len..];
    let data: Vec<f64> = if ndims >= 2 {
        payload.iter().map(|&b| b as f64 / 255.0).collect()
    } else {
        payload.iter().map(|&b| b as f64).collect()
    };
    Tensor::from_vec(&shape, data)
}

/// Inverse of [`parse_idx`] for unsigned-byte payloads: multi-dimensional
/// tensors are assumed to hold `[0, 1]` pixel values and are scaled back
/// by 255; 1-D tensors are written as raw integer bytes.
pub fn write_idx_u8(t: &Tensor, path: &Path) -> Result<()> {
    let shape = t.shape();
    let mut bytes = Vec::with_capacity(4 + 4 * shape.len() + t.len());
    bytes.extend_from_slice(&[0, 0, IDX_UNSIGNED_BYTE, shape.len() as u8]);
    for &dim in shape {
        bytes.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    let scale = if shape.len() >= 2 { 255.0 } else { 1.0 };
    for &v in t.data() {
        let b = (v * scale).round().clamp(0.0, 255.0) as u8;
        bytes.push(b);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn idx_labels(t: &Tensor) -> Result<Vec<usize>> {
    if t.shape().len() != 1 {
        return Err(Error::Data(format!(
            "label tensor must be 1-D, got shape {:?}",
            t.shape()
        )));
    }
    Ok(t.data().iter().map(|&v| v as usize).collect())
}

fn flatten_examples(t: Tensor) -> Result<Tensor> {
    let shape = t.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::Data(format!(
            "image tensor must have at least 2 dims, got {:?}",
            shape
        )));
    }
    let n = shape[0];
    let d: usize = shape[1..].iter().product();
    Tensor::from_vec(&[n, d], t.data().to_vec())
}

/// Load `train-images`, `train-labels`, `test-images`, `test-labels` from
/// a dataset cache directory; images are flattened to `[n, d]`.
pub fn load_idx_dataset_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let load = |images: &str, labels: &str| -> Result<Dataset> {
        let x = flatten_examples(parse_idx(&dir.join(images))?)?;
        let y = idx_labels(&parse_idx(&dir.join(labels))?)?;
        if y.len() != x.rows() {
            return Err(Error::dim_mismatch(
                "idx labels vs images",
                &[y.len()],
                &[x.rows()],
            ));
        }
        let k = y.iter().copied().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            features: x,
            clean_labels: Some(y.clone()),
            noisy_labels: y,
            num_classes: k.max(2),
            provenance: format!("idx:{}", dir.display()),
        })
    };
    let mut train = load("train-images", "train-labels")?;
    let mut test = load("test-images", "test-labels")?;
    let k = train.num_classes.max(test.num_classes);
    train.num_classes = k;
    test.num_classes = k;
    Ok((train, test))
}

/// Disjoint train/validation index sets covering `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Uniform random split without replacement; the validation side gets
/// `round(n * val_fraction)` examples. Run this after noise injection so
/// the validation labels are noisy.
pub fn split_train_val(
    dataset: &Dataset,
    val_fraction: f64,
    rng: &mut SeededRng,
) -> Result<SplitIndices> {
    let n = dataset.len();
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let v = (n as f64 * val_fraction).round() as usize;
    if v == 0 || v >= n {
        return Err(Error::Config(format!(
            "degenerate split: {v} validation examples out of {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut val: Vec<usize> = perm[..v].to_vec();
    let mut train: Vec<usize> = perm[v..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, val })
}
