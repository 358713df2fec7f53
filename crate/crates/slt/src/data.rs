//! Dataset ingestion: MNIST IDX files, CIFAR-10 binary batches, and
//! generated toy/synthetic sets. Train data is split 4:1 into train and
//! validation by a seeded shuffle; images are normalized per channel with
//! train-split statistics.

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, StreamKey};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Split {
    /// Normalized sample data, row-major, `n * sample_len` values.
    pub data: Vec<f32>,
    pub labels: Vec<usize>,
    pub n: usize,
    pub sample_len: usize,
}

impl Split {
    fn empty(sample_len: usize) -> Self {
        Split { data: Vec::new(), labels: Vec::new(), n: 0, sample_len }
    }

    /// Assemble a batch tensor for the given sample indices.
    pub fn gather(&self, idxs: &[usize], sample_shape: &[usize]) -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(idxs.len() * self.sample_len);
        let mut labels = Vec::with_capacity(idxs.len());
        for &i in idxs {
            data.extend_from_slice(&self.data[i * self.sample_len..(i + 1) * self.sample_len]);
            labels.push(self.labels[i]);
        }
        let mut shape = vec![idxs.len()];
        shape.extend_from_slice(sample_shape);
        (Tensor { shape, data }, labels)
    }

    fn truncate(&mut self, n: usize) {
        if n < self.n {
            self.n = n;
            self.data.truncate(n * self.sample_len);
            self.labels.truncate(n);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub sample_shape: Vec<usize>,
    pub num_classes: usize,
    pub train: Split,
    pub val: Split,
    pub test: Split,
    /// Per-channel normalization constants computed on the train split.
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Dataset {
    /// Cap split sizes for desk-scale runs; keeps split membership stable.
    pub fn limit(&mut self, train: usize, val: usize, test: usize) {
        self.train.truncate(train);
        self.val.truncate(val);
        self.test.truncate(test);
    }
}

pub fn load_dataset(name: &str, path: &Path, seed: u64) -> Result<Dataset> {
    match name {
        "mnist" => load_mnist(path, seed),
        "cifar10" => load_cifar10(path, seed),
        "toy_gaussians" => Ok(toy_gaussians(seed, 200, 16)),
        other => Err(Error::Dataset(format!("unknown dataset '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// IDX (MNIST layout)
// ---------------------------------------------------------------------------

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or_else(|| {
        Error::Dataset(format!("{}: truncated at byte {offset}", path.display()))
    })?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

fn read_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != 0x0000_0803 {
        return Err(Error::Dataset(format!(
            "{}: bad image magic {magic:#010x} at byte 0 (want 0x00000803)",
            path.display()
        )));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expect = 16 + n * rows * cols;
    if bytes.len() != expect {
        return Err(Error::Dataset(format!(
            "{}: {} bytes, expected {expect} (header says {n} images of {rows}x{cols})",
            path.display(),
            bytes.len()
        )));
    }
    Ok((bytes[16..].to_vec(), rows, cols, n))
}

fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != 0x0000_0801 {
        return Err(Error::Dataset(format!(
            "{}: bad label magic {magic:#010x} at byte 0 (want 0x00000801)",
            path.display()
        )));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() != 8 + n {
        return Err(Error::Dataset(format!(
            "{}: {} bytes, expected {} for {n} labels",
            path.display(),
            bytes.len(),
            8 + n
        )));
    }
    Ok(bytes[8..].to_vec())
}

pub fn load_mnist(dir: &Path, seed: u64) -> Result<Dataset> {
    let (train_px, rows, cols, n_train) = read_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let train_lb = read_idx_labels(&dir.join("train-labels-idx1-ubyte"))?;
    let (test_px, tr, tc, n_test) = read_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
    let test_lb = read_idx_labels(&dir.join("t10k-labels-idx1-ubyte"))?;
    if train_lb.len() != n_train || test_lb.len() != n_test || (tr, tc) != (rows, cols) {
        return Err(Error::Dataset("mnist image/label files disagree".to_string()));
    }
    for &l in train_lb.iter().chain(&test_lb) {
        if l >= 10 {
            return Err(Error::Dataset(format!("mnist label {l} out of [0,10)")));
        }
    }
    build_image_dataset(
        "mnist",
        &train_px,
        &train_lb,
        &test_px,
        &test_lb,
        &[1, rows, cols],
        10,
        seed,
    )
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches
// ---------------------------------------------------------------------------

pub fn load_cifar10(dir: &Path, seed: u64) -> Result<Dataset> {
    const REC: usize = 3073;
    let mut train_px = Vec::new();
    let mut train_lb = Vec::new();
    for i in 1..=5 {
        let path = dir.join(format!("data_batch_{i}.bin"));
        read_cifar_batch(&path, REC, &mut train_px, &mut train_lb)?;
    }
    let mut test_px = Vec::new();
    let mut test_lb = Vec::new();
    read_cifar_batch(&dir.join("test_batch.bin"), REC, &mut test_px, &mut test_lb)?;
    build_image_dataset(
        "cifar10",
        &train_px,
        &train_lb,
        &test_px,
        &test_lb,
        &[3, 32, 32],
        10,
        seed,
    )
}

fn read_cifar_batch(
    path: &Path,
    rec: usize,
    pixels: &mut Vec<u8>,
    labels: &mut Vec<u8>,
) -> Result<()> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if bytes.len() % rec != 0 {
        return Err(Error::Dataset(format!(
            "{}: {} bytes is not a multiple of the {rec}-byte record",
            path.display(),
            bytes.len()
        )));
    }
    for (i, chunk) in bytes.chunks(rec).enumerate() {
        if chunk[0] >= 10 {
            return Err(Error::Dataset(format!(
                "{}: label byte {} at byte offset {} outside [0,10)",
                path.display(),
                chunk[0],
                i * rec
            )));
        }
        labels.push(chunk[0]);
        pixels.extend_from_slice(&chunk[1..]);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn build_image_dataset(
    name: &str,
    train_px: &[u8],
    train_lb: &[u8],
    test_px: &[u8],
    test_lb: &[u8],
    sample_shape: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<Dataset> {
    let sample_len: usize = sample_shape.iter().product();
    let channels = sample_shape[0];
    let plane = sample_len / channels;
    let n_total = train_lb.len();
    if n_total == 0 {
        return Err(Error::EmptyDataset);
    }

    // 4:1 train/val split by seeded shuffle
    let mut order: Vec<usize> = (0..n_total).collect();
    let mut rng = stream(StreamKey::new(seed, 0, Purpose::DataSplit));
    order.shuffle(&mut rng);
    let n_val = n_total / 5;
    let (val_idx, train_idx) = order.split_at(n_val);

    // per-channel stats over the train split, in raw [0,1] scale
    let mut mean = vec![0.0f64; channels];
    let mut var = vec![0.0f64; channels];
    for &i in train_idx {
        for c in 0..channels {
            for p in 0..plane {
                mean[c] += train_px[i * sample_len + c * plane + p] as f64 / 255.0;
            }
        }
    }
    let count = (train_idx.len() * plane) as f64;
    for m in mean.iter_mut() {
        *m /= count;
    }
    for &i in train_idx {
        for c in 0..channels {
            for p in 0..plane {
                let d = train_px[i * sample_len + c * plane + p] as f64 / 255.0 - mean[c];
                var[c] += d * d;
            }
        }
    }
    let std: Vec<f32> = var.iter().map(|v| ((v / count).sqrt().max(1e-6)) as f32).collect();
    let mean: Vec<f32> = mean.iter().map(|&m| m as f32).collect();

    let normalize = |px: &[u8], idxs: &[usize]| -> Split {
        let mut data = Vec::with_capacity(idxs.len() * sample_len);
        for &i in idxs {
            for c in 0..channels {
                for p in 0..plane {
                    let v = px[i * sample_len + c * plane + p] as f32 / 255.0;
                    data.push((v - mean[c]) / std[c]);
                }
            }
        }
        Split { data, labels: Vec::new(), n: idxs.len(), sample_len }
    };

    let mut train = normalize(train_px, train_idx);
    train.labels = train_idx.iter().map(|&i| train_lb[i] as usize).collect();
    let mut val = normalize(train_px, val_idx);
    val.labels = val_idx.iter().map(|&i| train_lb[i] as usize).collect();
    let test_idx: Vec<usize> = (0..test_lb.len()).collect();
    let mut test = normalize(test_px, &test_idx);
    test.labels = test_lb.iter().map(|&l| l as usize).collect();
    if test.n == 0 {
        test = Split::empty(sample_len);
    }

    Ok(Dataset {
        name: name.to_string(),
        sample_shape: sample_shape.to_vec(),
        num_classes,
        train,
        val,
        test,
        mean,
        std,
    })
}

// ---------------------------------------------------------------------------
// Generated sets
// ---------------------------------------------------------------------------

/// Two separable Gaussian clusters; `n` samples per split third.
pub fn toy_gaussians(seed: u64, n: usize, dim: usize) -> Dataset {
    let mut rng = stream(StreamKey::new(seed, 1, Purpose::DataSplit));
    let noise = Normal::new(0.0f32, 0.5).unwrap();
    let mut center = vec![0.0f32; dim];
    for c in center.iter_mut() {
        *c = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    }
    let mut make = |count: usize| {
        let mut data = Vec::with_capacity(count * dim);
        let mut labels = Vec::with_capacity(count);
        for s in 0..count {
            let label = s % 2;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            for c in &center {
                data.push(sign * c + noise.sample(&mut rng));
            }
            labels.push(label);
        }
        Split { data, labels, n: count, sample_len: dim }
    };
    let train = make(n);
    let val = make(n / 4);
    let test = make(n / 4);
    Dataset {
        name: "toy_gaussians".to_string(),
        sample_shape: vec![dim],
        num_classes: 2,
        train,
        val,
        test,
        mean: vec![0.0],
        std: vec![1.0],
    }
}

/// Write a synthetic MNIST-like corpus in real IDX format: one smooth random
/// template per class plus pixel noise. Exercises the IDX loader end to end
/// without shipping the real corpus.
pub fn synthesize_mnist(
    dir: &Path,
    seed: u64,
    n_train: usize,
    n_test: usize,
    noise: f32,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rng = stream(StreamKey::new(seed, 2, Purpose::DataSplit));
    const SIDE: usize = 28;
    const COARSE: usize = 7;
    let scale = SIDE / COARSE;
    // smooth templates: coarse noise upsampled with nearest-neighbor blur
    let mut templates = Vec::with_capacity(10);
    for _ in 0..10 {
        let coarse: Vec<f32> = (0..COARSE * COARSE).map(|_| rng.gen::<f32>()).collect();
        let mut tpl = vec![0.0f32; SIDE * SIDE];
        for y in 0..SIDE {
            for x in 0..SIDE {
                tpl[y * SIDE + x] = coarse[(y / scale) * COARSE + x / scale];
            }
        }
        templates.push(tpl);
    }
    let noise_dist = Normal::new(0.0f32, noise).unwrap();
    let mut emit = |n: usize, img_path: &Path, lbl_path: &Path| -> Result<()> {
        let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
        let mut labels = Vec::with_capacity(n);
        for s in 0..n {
            let class = s % 10;
            labels.push(class as u8);
            for &t in &templates[class] {
                let v = (t + noise_dist.sample(&mut rng)).clamp(0.0, 1.0);
                pixels.push((v * 255.0).round() as u8);
            }
        }
        let mut img = fs::File::create(img_path)?;
        img.write_all(&0x0000_0803u32.to_be_bytes())?;
        img.write_all(&(n as u32).to_be_bytes())?;
        img.write_all(&(SIDE as u32).to_be_bytes())?;
        img.write_all(&(SIDE as u32).to_be_bytes())?;
        img.write_all(&pixels)?;
        let mut lbl = fs::File::create(lbl_path)?;
        lbl.write_all(&0x0000_0801u32.to_be_bytes())?;
        lbl.write_all(&(n as u32).to_be_bytes())?;
        lbl.write_all(&labels)?;
        Ok(())
    };
    emit(n_train, &dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))?;
    emit(n_test, &dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_mnist_roundtrips_through_idx_loader() {
        let dir = tempfile::tempdir().unwrap();
        synthesize_mnist(dir.path(), 0, 100, 20, 0.1).unwrap();
        let ds = load_mnist(dir.path(), 0).unwrap();
        assert_eq!(ds.train.n, 80);
        assert_eq!(ds.val.n, 20);
        assert_eq!(ds.test.n, 20);
        assert_eq!(ds.sample_shape, vec![1, 28, 28]);
        assert!(ds.train.labels.iter().all(|&l| l < 10));
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let dir = tempfile::tempdir().unwrap();
        synthesize_mnist(dir.path(), 0, 50, 10, 0.1).unwrap();
        let a = load_mnist(dir.path(), 3).unwrap();
        let b = load_mnist(dir.path(), 3).unwrap();
        let c = load_mnist(dir.path(), 4).unwrap();
        assert_eq!(a.train.labels, b.train.labels);
        assert_ne!(a.train.labels, c.train.labels);
    }

    #[test]
    fn corrupt_idx_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train-images-idx3-ubyte");
        fs::write(&path, [0, 0]).unwrap();
        let err = load_mnist(dir.path(), 0).unwrap_err();
        assert!(err.to_string().contains("byte 0"), "{err}");
    }

    #[test]
    fn cifar_label_validation() {
        let dir = tempfile::tempdir().unwrap();
        for i in 1..=5 {
            let mut rec = vec![0u8; 3073];
            rec[0] = if i == 3 { 200 } else { 1 }; // corrupt batch 3
            fs::write(dir.path().join(format!("data_batch_{i}.bin")), &rec).unwrap();
        }
        fs::write(dir.path().join("test_batch.bin"), vec![0u8; 3073]).unwrap();
        let err = load_cifar10(dir.path(), 0).unwrap_err();
        assert!(err.to_string().contains("label byte 200"), "{err}");
    }

    #[test]
    fn cifar_loads_valid_batches() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = stream(StreamKey::new(0, 0, Purpose::DataSplit));
        for i in 1..=5 {
            let mut bytes = Vec::new();
            for _ in 0..10 {
                bytes.push(rng.gen_range(0..10u8));
                bytes.extend((0..3072).map(|_| rng.gen::<u8>()));
            }
            fs::write(dir.path().join(format!("data_batch_{i}.bin")), &bytes).unwrap();
        }
        let mut bytes = Vec::new();
        for _ in 0..10 {
            bytes.push(rng.gen_range(0..10u8));
            bytes.extend((0..3072).map(|_| rng.gen::<u8>()));
        }
        fs::write(dir.path().join("test_batch.bin"), &bytes).unwrap();
        let ds = load_cifar10(dir.path(), 0).unwrap();
        assert_eq!(ds.train.n + ds.val.n, 50);
        assert_eq!(ds.test.n, 10);
    }

    #[test]
    fn toy_gaussians_shapes() {
        let ds = toy_gaussians(1, 200, 16);
        assert_eq!(ds.train.n, 200);
        assert_eq!(ds.val.n, 50);
        assert_eq!(ds.num_classes, 2);
        let (batch, labels) = ds.train.gather(&[0, 1, 2], &ds.sample_shape);
        assert_eq!(batch.shape, vec![3, 16]);
        assert_eq!(labels.len(), 3);
    }
}
