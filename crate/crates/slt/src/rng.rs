//! Seed-reconstructible random streams and the weight/score initializers.
//!
//! Every stream is keyed by (global_seed, layer_index, purpose). The key is
//! mixed through SplitMix64 into a ChaCha8 seed, so the n-th draw depends
//! only on the key and n: layers and masks can be regenerated independently
//! without replaying earlier draws. The exact scheme is part of the ticket
//! file contract and documented in docs/format.md.

use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Weights,
    Scores,
    PruneMask,
    LockMask,
    DataSplit,
    Ssa,
}

impl Purpose {
    pub fn id(self) -> u64 {
        match self {
            Purpose::Weights => 1,
            Purpose::Scores => 2,
            Purpose::PruneMask => 3,
            Purpose::LockMask => 4,
            Purpose::DataSplit => 5,
            Purpose::Ssa => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub global_seed: u64,
    pub layer_index: u32,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(global_seed: u64, layer_index: u32, purpose: Purpose) -> Self {
        StreamKey { global_seed, layer_index, purpose }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic generator for a stream key.
pub fn stream(key: StreamKey) -> ChaCha8Rng {
    let mut state = key.global_seed;
    let _ = splitmix64(&mut state);
    state ^= u64::from(key.layer_index).wrapping_mul(0xd1342543de82ef95);
    let _ = splitmix64(&mut state);
    state ^= key.purpose.id().wrapping_mul(0x2545f4914f6cdd1d);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    KaimingUniform,
    KaimingNormal,
    /// +-sqrt(2/fan_in) with equiprobable sign, scaled by 1/sqrt(1 - sparsity).
    SignedKaimingConstant { sparsity: f32 },
}

impl InitKind {
    /// Same initializer family with a different SKC scaling sparsity.
    pub fn with_sparsity(self, sparsity: f32) -> Self {
        match self {
            InitKind::SignedKaimingConstant { .. } => InitKind::SignedKaimingConstant { sparsity },
            other => other,
        }
    }
}

/// Draw the random weights of one layer. Regenerable: same (spec, kind, key)
/// always yields the identical tensor.
pub fn init_weights(spec: &LayerSpec, kind: InitKind, key: StreamKey) -> Result<Tensor> {
    if !spec.has_params() {
        return Err(Error::NoParams { layer: key.layer_index as usize });
    }
    let fan_in = spec.fan_in() as f32;
    let n = spec.param_count();
    let mut rng = stream(key);
    let data: Vec<f32> = match kind {
        InitKind::KaimingUniform => {
            let bound = (6.0 / fan_in).sqrt();
            let dist = Uniform::new(-bound, bound);
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        InitKind::KaimingNormal => {
            let dist = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).unwrap();
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        InitKind::SignedKaimingConstant { sparsity } => {
            assert!(sparsity < 1.0, "SKC scaling sparsity must be < 1");
            let magnitude = (2.0 / fan_in).sqrt() / (1.0 - sparsity).sqrt();
            (0..n)
                .map(|_| if rng.gen::<bool>() { magnitude } else { -magnitude })
                .collect()
        }
    };
    Tensor::new(spec.param_shape(), data)
}

/// Draw the initial weight scores of one layer: N(0, 2/fan_in).
pub fn init_scores(spec: &LayerSpec, key: StreamKey) -> Result<Tensor> {
    if !spec.has_params() {
        return Err(Error::NoParams { layer: key.layer_index as usize });
    }
    let fan_in = spec.fan_in() as f32;
    let mut rng = stream(key);
    let dist = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).unwrap();
    let data = (0..spec.param_count()).map(|_| dist.sample(&mut rng)).collect();
    Tensor::new(spec.param_shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let key = StreamKey::new(7, 3, Purpose::Weights);
        let a: Vec<u32> = stream(key).sample_iter(rand::distributions::Standard).take(1000).collect();
        let b: Vec<u32> = stream(key).sample_iter(rand::distributions::Standard).take(1000).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn purpose_changes_sequence() {
        let a: u64 = stream(StreamKey::new(7, 3, Purpose::Weights)).gen();
        let b: u64 = stream(StreamKey::new(7, 3, Purpose::Scores)).gen();
        assert_ne!(a, b);
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut rng = stream(StreamKey::new(0, 0, Purpose::DataSplit));
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rng.gen::<f64>()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn skc_magnitudes_exact() {
        let spec = LayerSpec::dense(8, 4);
        let key = StreamKey::new(1, 0, Purpose::Weights);
        let w = init_weights(&spec, InitKind::SignedKaimingConstant { sparsity: 0.0 }, key).unwrap();
        assert!(w.data.iter().all(|v| v.abs() == 0.5));
        let w = init_weights(&spec, InitKind::SignedKaimingConstant { sparsity: 0.75 }, key).unwrap();
        assert!(w.data.iter().all(|v| v.abs() == 1.0));
        // both signs appear
        assert!(w.data.iter().any(|v| *v > 0.0) && w.data.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn kaiming_uniform_bounds_and_variance() {
        let spec = LayerSpec::dense(6, 20000);
        let key = StreamKey::new(2, 0, Purpose::Weights);
        let w = init_weights(&spec, InitKind::KaimingUniform, key).unwrap();
        assert!(w.data.iter().all(|v| v.abs() <= 1.0));
        let n = w.len() as f64;
        let mean = w.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = w.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        // U(-1,1) has variance 1/3
        assert!((var - 1.0 / 3.0).abs() < 0.05 / 3.0, "var {var}");
    }

    #[test]
    fn score_std_matches_fan_in() {
        let spec = LayerSpec::dense(2, 50000);
        let s = init_scores(&spec, StreamKey::new(3, 0, Purpose::Scores)).unwrap();
        let n = s.len() as f64;
        let mean = s.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let std = (s.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn scores_uncorrelated_with_weights() {
        let spec = LayerSpec::dense(2, 50000);
        let w = init_weights(&spec, InitKind::KaimingNormal, StreamKey::new(3, 0, Purpose::Weights))
            .unwrap();
        let s = init_scores(&spec, StreamKey::new(3, 0, Purpose::Scores)).unwrap();
        let n = w.len() as f64;
        let mw = w.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let ms = s.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vw = 0.0;
        let mut vs = 0.0;
        for (a, b) in w.data.iter().zip(&s.data) {
            let (da, db) = (*a as f64 - mw, *b as f64 - ms);
            cov += da * db;
            vw += da * da;
            vs += db * db;
        }
        let corr = cov / (vw.sqrt() * vs.sqrt());
        assert!(corr.abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn init_rejects_parameterless_layer() {
        let spec = LayerSpec::relu();
        assert!(init_weights(&spec, InitKind::KaimingUniform, StreamKey::new(0, 0, Purpose::Weights))
            .is_err());
    }
}
