//! Ticket serialization (`.ftkt`) and the model-size accountant.
//!
//! A packed ticket stores only what cannot be regenerated from seed: the
//! header (seed, architecture, ratios, counts), the bit-packed supermask
//! over FREE positions, and batchnorm running statistics. Weights, scores,
//! and the freezing mask are reconstructed on unpack. The byte layout is
//! documented in docs/format.md.

use crate::arch;
use crate::error::{Error, Result};
use crate::freeze::{self, Cell, FreezePlan, LayerPlan, Strategy};
use crate::nn::{self, ArchSpec, BatchNormState, Mode};
use crate::rng::{InitKind, Purpose, StreamKey};
use crate::search::{effective_mask, TicketModel};
use crate::tensor::Tensor;
use crate::{data, rng};

pub const MAGIC: &[u8; 4] = b"FTKT";
pub const FORMAT_VERSION: u16 = 1;
pub const RNG_SCHEME_VERSION: u8 = 1;
/// Raw bit-packing; other codec ids are reserved for entropy coding.
pub const CODEC_RAW: u8 = 0;

/// Model-size accounting per the 1-bit/32-bit counting rule: each FREE
/// supermask element costs 1 bit, each stored normalization statistic 32
/// bits; random weights and frozen supermask regions cost nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeReport {
    pub supermask_bits: u64,
    pub bn_param_bits: u64,
    pub total_bytes: u64,
}

impl SizeReport {
    pub fn total_bits(&self) -> u64 {
        self.supermask_bits + self.bn_param_bits
    }

    pub fn megabytes(&self) -> f64 {
        self.total_bytes as f64 / 1e6
    }
}

/// Count the stored size of a ticket with the given plan and number of
/// batchnorm statistics. Depends only on counts, never on values.
pub fn account_size(plan: &FreezePlan, bn_stat_count: usize) -> SizeReport {
    let supermask_bits = plan.total_free() as u64;
    let bn_param_bits = 32 * bn_stat_count as u64;
    SizeReport {
        supermask_bits,
        bn_param_bits,
        total_bytes: (supermask_bits + bn_param_bits).div_ceil(8),
    }
}

pub fn bn_stat_count(bn: &[Option<BatchNormState>]) -> usize {
    bn.iter()
        .flatten()
        .map(|s| s.running_mean.len() + s.running_var.len())
        .sum()
}

fn init_kind_id(kind: InitKind) -> u8 {
    match kind {
        InitKind::KaimingUniform => 0,
        InitKind::KaimingNormal => 1,
        InitKind::SignedKaimingConstant { .. } => 2,
    }
}

fn strategy_id(s: Strategy) -> u8 {
    match s {
        Strategy::Epl => 0,
        Strategy::Erk => 1,
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .buf
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.at)))?;
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Serialize a searched model. Stores the supermask bits of FREE positions
/// in ascending flat-index order (bit 0 = lowest index, LSB-first bytes)
/// plus everything needed to regenerate the rest from seed.
pub fn pack(model: &TicketModel, arch_name: &str, width: f32) -> Result<Vec<u8>> {
    let masks = effective_mask(model)?;
    let realized = model.realized_layer_sparsity(&masks);
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(RNG_SCHEME_VERSION);
    w.u8(CODEC_RAW);
    w.u64(model.global_seed);
    w.u8(init_kind_id(model.init));
    w.u8(strategy_id(model.plan.strategy));
    w.f32(model.sparsity);
    w.f32(model.plan.freeze_ratio);
    w.f32(model.plan.prune_ratio);
    w.f32(model.plan.lock_ratio);
    let name = arch_name.as_bytes();
    if name.len() > u8::MAX as usize {
        return Err(Error::Format("architecture name too long".to_string()));
    }
    w.u8(name.len() as u8);
    w.bytes(name);
    w.f32(width);
    w.u8(model.arch.input_shape.len() as u8);
    for &d in &model.arch.input_shape {
        w.u32(d as u32);
    }
    w.u32(model.arch.num_classes as u32);

    w.u16(model.plan.layers.len() as u16);
    for (slot, lp) in model.plan.layers.iter().enumerate() {
        w.u16(lp.layer_index as u16);
        w.u64(lp.size as u64);
        w.u64(lp.pruned as u64);
        w.u64(lp.locked as u64);
        w.f32(realized[slot]);
        // free-region bitmap
        let cells = &model.freeze.layers[slot].cells;
        let mask = &masks[lp.layer_index];
        let mut byte = 0u8;
        let mut nbits = 0u32;
        for (i, cell) in cells.iter().enumerate() {
            if *cell != Cell::Free {
                continue;
            }
            if mask.data[i] != 0.0 {
                byte |= 1 << nbits;
            }
            nbits += 1;
            if nbits == 8 {
                w.u8(byte);
                byte = 0;
                nbits = 0;
            }
        }
        if nbits > 0 {
            w.u8(byte);
        }
    }

    let bn_layers: Vec<(usize, &BatchNormState)> = model
        .bn
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|s| (i, s)))
        .collect();
    w.u16(bn_layers.len() as u16);
    for (li, state) in bn_layers {
        w.u16(li as u16);
        w.u32(state.running_mean.len() as u32);
        w.f32(state.momentum);
        w.f32(state.eps);
        for &v in &state.running_mean {
            w.f32(v);
        }
        for &v in &state.running_var {
            w.f32(v);
        }
    }

    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

/// An inference-ready ticket: regenerated weights, the overlaid binary
/// supermask, and stored normalization statistics. Scores are not
/// reconstructed.
#[derive(Debug, Clone)]
pub struct InferenceTicket {
    pub arch: ArchSpec,
    pub arch_name: String,
    pub width: f32,
    pub global_seed: u64,
    pub init: InitKind,
    pub sparsity: f32,
    pub plan: FreezePlan,
    pub weights: Vec<Tensor>,
    pub masks: Vec<Tensor>,
    pub bn: Vec<Option<BatchNormState>>,
    /// SKC scaling sparsity per parameterized layer as observed at pack time.
    pub realized_sparsity: Vec<f32>,
}

impl InferenceTicket {
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (logits, _) =
            nn::forward(&self.arch, &self.weights, &self.masks, &mut self.bn, input, Mode::Eval)?;
        Ok(logits)
    }

    pub fn evaluate(&mut self, dataset: &data::Dataset, split: &data::Split, batch: usize) -> Result<f32> {
        crate::search::evaluate(
            &self.arch,
            &self.weights,
            &self.masks,
            &mut self.bn,
            dataset,
            split,
            batch,
        )
    }

    pub fn size_report(&self) -> SizeReport {
        account_size(&self.plan, bn_stat_count(&self.bn))
    }
}

pub fn unpack(bytes: &[u8]) -> Result<InferenceTicket> {
    if bytes.len() < 8 {
        return Err(Error::Format("file shorter than header".to_string()));
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { buf: payload, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a .ftkt file".to_string()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let rng_version = r.u8()?;
    if rng_version != RNG_SCHEME_VERSION {
        return Err(Error::Format(format!(
            "rng scheme version {rng_version} not supported (this build writes {RNG_SCHEME_VERSION})"
        )));
    }
    let codec = r.u8()?;
    if codec != CODEC_RAW {
        return Err(Error::Format(format!("codec id {codec} not supported")));
    }
    let global_seed = r.u64()?;
    let init_id = r.u8()?;
    let strategy = match r.u8()? {
        0 => Strategy::Epl,
        1 => Strategy::Erk,
        other => return Err(Error::Format(format!("strategy id {other}"))),
    };
    let sparsity = r.f32()?;
    let freeze_ratio = r.f32()?;
    let prune_ratio = r.f32()?;
    let lock_ratio = r.f32()?;
    let name_len = r.u8()? as usize;
    let arch_name = String::from_utf8(r.take(name_len)?.to_vec())
        .map_err(|_| Error::Format("architecture name is not utf-8".to_string()))?;
    let width = r.f32()?;
    let ndim = r.u8()? as usize;
    let mut input_shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        input_shape.push(r.u32()? as usize);
    }
    let num_classes = r.u32()? as usize;
    let init = match init_id {
        0 => InitKind::KaimingUniform,
        1 => InitKind::KaimingNormal,
        2 => InitKind::SignedKaimingConstant { sparsity },
        other => return Err(Error::Format(format!("init kind id {other}"))),
    };

    let arch = arch::by_name(&arch_name, width, &input_shape, num_classes)?;
    let param_layers = arch.param_layers();
    let layer_count = r.u16()? as usize;
    if layer_count != param_layers.len() {
        return Err(Error::Format(format!(
            "file has {layer_count} parameterized layers, architecture '{arch_name}' has {}",
            param_layers.len()
        )));
    }

    let mut plan_layers = Vec::with_capacity(layer_count);
    let mut free_bits: Vec<Vec<u8>> = Vec::with_capacity(layer_count);
    let mut realized_sparsity = Vec::with_capacity(layer_count);
    for slot in 0..layer_count {
        let layer_index = r.u16()? as usize;
        let size = r.u64()? as usize;
        let pruned = r.u64()? as usize;
        let locked = r.u64()? as usize;
        realized_sparsity.push(r.f32()?);
        if layer_index != param_layers[slot] || size != arch.layers[layer_index].param_count() {
            return Err(Error::Format(format!(
                "layer record {slot}: index {layer_index}/size {size} does not match architecture"
            )));
        }
        if pruned + locked > size {
            return Err(Error::Format(format!(
                "layer {layer_index}: pruned {pruned} + locked {locked} exceeds size {size}"
            )));
        }
        let free = size - pruned - locked;
        free_bits.push(r.take(free.div_ceil(8))?.to_vec());
        plan_layers.push(LayerPlan { layer_index, size, pruned, locked });
    }
    let plan = FreezePlan { freeze_ratio, prune_ratio, lock_ratio, strategy, layers: plan_layers };

    // regenerate weights and the freezing mask from seed
    let mut weights = arch.zero_params();
    for &li in &param_layers {
        weights[li] = rng::init_weights(
            &arch.layers[li],
            init,
            StreamKey::new(global_seed, li as u32, Purpose::Weights),
        )?;
    }
    let freeze_mask = freeze::materialize_mask(&plan, global_seed);

    // overlay the stored free-region bits
    let mut masks: Vec<Tensor> = arch
        .layers
        .iter()
        .map(|l| if l.has_params() { Tensor::zeros(&l.param_shape()) } else { Tensor::empty() })
        .collect();
    for (slot, lm) in freeze_mask.layers.iter().enumerate() {
        let m = &mut masks[lm.layer_index];
        let bits = &free_bits[slot];
        let mut fi = 0usize;
        for (i, cell) in lm.cells.iter().enumerate() {
            match cell {
                Cell::Locked => m.data[i] = 1.0,
                Cell::Free => {
                    if bits[fi / 8] >> (fi % 8) & 1 == 1 {
                        m.data[i] = 1.0;
                    }
                    fi += 1;
                }
                Cell::Pruned => {}
            }
        }
    }

    let bn_count = r.u16()? as usize;
    let mut bn = arch.fresh_bn();
    for _ in 0..bn_count {
        let li = r.u16()? as usize;
        let channels = r.u32()? as usize;
        let momentum = r.f32()?;
        let eps = r.f32()?;
        let mut running_mean = Vec::with_capacity(channels);
        for _ in 0..channels {
            running_mean.push(r.f32()?);
        }
        let mut running_var = Vec::with_capacity(channels);
        for _ in 0..channels {
            running_var.push(r.f32()?);
        }
        let slot = bn.get_mut(li).ok_or_else(|| {
            Error::Format(format!("batchnorm record for layer {li} out of range"))
        })?;
        if slot.is_none() {
            return Err(Error::Format(format!("layer {li} is not a batchnorm layer")));
        }
        *slot = Some(BatchNormState { running_mean, running_var, momentum, eps });
    }
    if r.at != payload.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last record",
            payload.len() - r.at
        )));
    }

    Ok(InferenceTicket {
        arch,
        arch_name,
        width,
        global_seed,
        init,
        sparsity,
        plan,
        weights,
        masks,
        bn,
        realized_sparsity,
    })
}
