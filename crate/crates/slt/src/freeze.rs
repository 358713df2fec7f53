//! Frozen-network construction: global prune/lock proportion planning,
//! per-layer allocation (ERK / EPL), exact-count mask materialization, and
//! the ternary freezing-mask encoding.

use crate::error::{Error, Result};
use crate::nn::ArchSpec;
use crate::rng::{stream, Purpose, StreamKey};
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Erk,
    Epl,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erk" => Ok(Strategy::Erk),
            "epl" => Ok(Strategy::Epl),
            other => Err(Error::Config(format!("unknown strategy '{other}' (want erk|epl)"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Erk => "erk",
            Strategy::Epl => "epl",
        })
    }
}

/// Split a global freezing ratio into prune and lock ratios so the frozen
/// region is centered on the desired SLT sparsity: P_r = k - (1 - F_r)/2,
/// clamped to [0, F_r], and L_r = F_r - P_r.
pub fn plan_proportion(freeze_ratio: f32, sparsity: f32) -> Result<(f32, f32)> {
    if !(0.0..1.0).contains(&freeze_ratio) {
        return Err(Error::InfeasiblePlan(format!("freeze ratio {freeze_ratio} outside [0,1)")));
    }
    if !(0.0..1.0).contains(&sparsity) || sparsity <= 0.0 {
        return Err(Error::InfeasiblePlan(format!("sparsity {sparsity} outside (0,1)")));
    }
    let p = (sparsity - (1.0 - freeze_ratio) / 2.0).clamp(0.0, freeze_ratio);
    let l = freeze_ratio - p;
    debug_assert!(p <= sparsity + 1e-6 && sparsity <= 1.0 - l + 1e-6);
    Ok((p, l))
}

/// Per-layer keep counts for removing `remove_ratio` of all parameters.
///
/// The removed total is exactly round(remove_ratio * N); integer counts come
/// from largest-remainder rounding, tie-broken by ascending layer index.
pub fn allocate_layerwise(arch: &ArchSpec, remove_ratio: f32, strategy: Strategy) -> Result<Vec<usize>> {
    let sizes: Vec<usize> =
        arch.param_layers().iter().map(|&i| arch.layers[i].param_count()).collect();
    let scales: Vec<f64> = arch.param_layers().iter().map(|&i| arch.layers[i].erk_scale()).collect();
    if sizes.is_empty() {
        return Err(Error::InfeasiblePlan("no parameterized layers".to_string()));
    }
    if !(0.0..=1.0).contains(&remove_ratio) {
        return Err(Error::InfeasiblePlan(format!("ratio {remove_ratio} outside [0,1]")));
    }
    let total: usize = sizes.iter().sum();
    let removed = (remove_ratio as f64 * total as f64).round() as usize;
    let keep_total = total - removed;
    match strategy {
        Strategy::Epl => Ok(epl_keep(&sizes, keep_total)),
        Strategy::Erk => Ok(erk_keep(&sizes, &scales, keep_total)),
    }
}

/// Equal remaining weights per layer, waterfilling layers smaller than the
/// equal share.
fn epl_keep(sizes: &[usize], keep_total: usize) -> Vec<usize> {
    let n = sizes.len();
    let mut capped = vec![false; n];
    let mut keep = vec![0usize; n];
    let mut rem = keep_total as f64;
    loop {
        let unc: Vec<usize> = (0..n).filter(|&i| !capped[i]).collect();
        if unc.is_empty() {
            break;
        }
        let share = rem / unc.len() as f64;
        let mut changed = false;
        for &i in &unc {
            if (sizes[i] as f64) <= share {
                capped[i] = true;
                keep[i] = sizes[i];
                rem -= sizes[i] as f64;
                changed = true;
            }
        }
        if !changed {
            let targets: Vec<f64> = unc.iter().map(|_| share).collect();
            let caps: Vec<usize> = unc.iter().map(|&i| sizes[i]).collect();
            let ints = largest_remainder(&targets, rem.round() as usize, &caps);
            for (&i, v) in unc.iter().zip(ints) {
                keep[i] = v;
            }
            break;
        }
    }
    keep
}

/// Per-layer density proportional to the ERK scale, capped at 1 with the
/// excess redistributed proportionally over the still-uncapped layers.
fn erk_keep(sizes: &[usize], scales: &[f64], keep_total: usize) -> Vec<usize> {
    let n = sizes.len();
    let mut capped = vec![false; n];
    let mut keep = vec![0usize; n];
    let mut rem = keep_total as f64;
    loop {
        let unc: Vec<usize> = (0..n).filter(|&i| !capped[i]).collect();
        if unc.is_empty() {
            break;
        }
        let denom: f64 = unc.iter().map(|&i| scales[i] * sizes[i] as f64).sum();
        let c = if denom > 0.0 { rem / denom } else { 0.0 };
        let mut changed = false;
        for &i in &unc {
            if c * scales[i] >= 1.0 {
                capped[i] = true;
                keep[i] = sizes[i];
                rem -= sizes[i] as f64;
                changed = true;
            }
        }
        if !changed {
            let targets: Vec<f64> = unc.iter().map(|&i| c * scales[i] * sizes[i] as f64).collect();
            let caps: Vec<usize> = unc.iter().map(|&i| sizes[i]).collect();
            let ints = largest_remainder(&targets, rem.round() as usize, &caps);
            for (&i, v) in unc.iter().zip(ints) {
                keep[i] = v;
            }
            break;
        }
    }
    keep
}

/// Integerize real targets so they sum exactly to `total`, never exceeding
/// the per-entry caps. Ties break toward lower index.
fn largest_remainder(targets: &[f64], total: usize, caps: &[usize]) -> Vec<usize> {
    let mut ints: Vec<usize> = targets
        .iter()
        .zip(caps)
        .map(|(t, &c)| (t.floor().max(0.0) as usize).min(c))
        .collect();
    let mut assigned: usize = ints.iter().sum();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    // hand out the remainder by descending fractional part, then wrap around
    // to any layer with headroom
    while assigned < total {
        let mut progressed = false;
        for &i in &order {
            if assigned == total {
                break;
            }
            if ints[i] < caps[i] {
                ints[i] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    while assigned > total {
        for &i in order.iter().rev() {
            if assigned == total {
                break;
            }
            if ints[i] > 0 {
                ints[i] -= 1;
                assigned -= 1;
            }
        }
    }
    ints
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    /// Index into ArchSpec::layers.
    pub layer_index: usize,
    pub size: usize,
    pub pruned: usize,
    pub locked: usize,
}

impl LayerPlan {
    pub fn frozen(&self) -> usize {
        self.pruned + self.locked
    }

    pub fn free(&self) -> usize {
        self.size - self.frozen()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreezePlan {
    pub freeze_ratio: f32,
    pub prune_ratio: f32,
    pub lock_ratio: f32,
    pub strategy: Strategy,
    pub layers: Vec<LayerPlan>,
}

impl FreezePlan {
    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.size).sum()
    }

    pub fn total_pruned(&self) -> usize {
        self.layers.iter().map(|l| l.pruned).sum()
    }

    pub fn total_locked(&self) -> usize {
        self.layers.iter().map(|l| l.locked).sum()
    }

    pub fn total_free(&self) -> usize {
        self.layers.iter().map(|l| l.free()).sum()
    }

    /// Layers left with zero searchable-or-locked parameters. Permitted, but
    /// the harness warns: the network function is destroyed.
    pub fn collapsed_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.pruned == l.size)
            .map(|l| l.layer_index)
            .collect()
    }
}

/// Plan from a global freezing ratio and desired SLT sparsity using the
/// centered prune:lock proportion.
pub fn build_freeze_plan(
    arch: &ArchSpec,
    freeze_ratio: f32,
    sparsity: f32,
    strategy: Strategy,
) -> Result<FreezePlan> {
    let (p, l) = plan_proportion(freeze_ratio, sparsity)?;
    build_freeze_plan_explicit(arch, p, l, strategy)
}

/// Plan from explicit global prune and lock ratios (bypasses the centering
/// rule; used by ratio overrides and sweeps).
pub fn build_freeze_plan_explicit(
    arch: &ArchSpec,
    prune_ratio: f32,
    lock_ratio: f32,
    strategy: Strategy,
) -> Result<FreezePlan> {
    let freeze_ratio = prune_ratio + lock_ratio;
    if !(0.0..=1.0).contains(&freeze_ratio) {
        return Err(Error::InfeasiblePlan(format!(
            "prune {prune_ratio} + lock {lock_ratio} outside [0,1]"
        )));
    }
    let keep_p = allocate_layerwise(arch, prune_ratio, strategy)?;
    let keep_f = allocate_layerwise(arch, freeze_ratio, strategy)?;
    let param_layers = arch.param_layers();
    let sizes: Vec<usize> = param_layers.iter().map(|&i| arch.layers[i].param_count()).collect();

    let pruned: Vec<usize> = sizes.iter().zip(&keep_p).map(|(s, k)| s - k).collect();
    let mut frozen: Vec<i64> = sizes.iter().zip(&keep_f).map(|(s, k)| (s - k) as i64).collect();

    // locking = freezing - pruning per layer; rounding can leave a layer with
    // frozen < pruned, repaired by shifting frozen mass from the layers with
    // the most locking headroom
    for i in 0..frozen.len() {
        let mut deficit = pruned[i] as i64 - frozen[i];
        while deficit > 0 {
            let donor = (0..frozen.len())
                .filter(|&j| j != i && frozen[j] > pruned[j] as i64)
                .max_by_key(|&j| frozen[j] - pruned[j] as i64);
            match donor {
                Some(j) => {
                    let give = deficit.min(frozen[j] - pruned[j] as i64);
                    frozen[j] -= give;
                    frozen[i] += give;
                    deficit -= give;
                }
                None => {
                    return Err(Error::InfeasiblePlan(format!(
                        "layer {} frozen count below pruned count and no donor layer",
                        param_layers[i]
                    )))
                }
            }
        }
    }

    let layers = param_layers
        .iter()
        .enumerate()
        .map(|(slot, &li)| LayerPlan {
            layer_index: li,
            size: sizes[slot],
            pruned: pruned[slot],
            locked: (frozen[slot] - pruned[slot] as i64) as usize,
        })
        .collect();
    Ok(FreezePlan { freeze_ratio, prune_ratio, lock_ratio, strategy, layers })
}

/// Ternary state of one parameter position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Pruned,
    Free,
    Locked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMask {
    pub layer_index: usize,
    pub cells: Vec<Cell>,
}

impl LayerMask {
    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }
}

/// Per-layer ternary freezing mask over flat parameter indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FreezeMask {
    pub layers: Vec<LayerMask>,
}

impl FreezeMask {
    pub fn count(&self, cell: Cell) -> usize {
        self.layers.iter().map(|l| l.count(cell)).sum()
    }
}

/// Draw the exact-count freezing mask for a plan. Per layer, a seeded
/// uniform permutation of flat indices assigns the first `pruned` positions
/// PRUNED and the next `locked` positions LOCKED. Disjoint by construction
/// and regenerable from (seed, layer index, counts).
pub fn materialize_mask(plan: &FreezePlan, global_seed: u64) -> FreezeMask {
    let layers = plan
        .layers
        .iter()
        .map(|lp| {
            let mut order: Vec<usize> = (0..lp.size).collect();
            let mut rng = stream(StreamKey::new(global_seed, lp.layer_index as u32, Purpose::PruneMask));
            order.shuffle(&mut rng);
            let mut cells = vec![Cell::Free; lp.size];
            for &i in &order[..lp.pruned] {
                cells[i] = Cell::Pruned;
            }
            for &i in &order[lp.pruned..lp.pruned + lp.locked] {
                cells[i] = Cell::Locked;
            }
            LayerMask { layer_index: lp.layer_index, cells }
        })
        .collect();
    FreezeMask { layers }
}

/// Encode as m_l + (m_p - 1): -1 pruned, 0 free (supermask region), +1 locked.
pub fn encode_ternary(mask: &FreezeMask) -> Vec<Vec<i8>> {
    mask.layers
        .iter()
        .map(|l| {
            l.cells
                .iter()
                .map(|c| match c {
                    Cell::Pruned => -1i8,
                    Cell::Free => 0,
                    Cell::Locked => 1,
                })
                .collect()
        })
        .collect()
}

pub fn decode_ternary(layer_indices: &[usize], encoded: &[Vec<i8>]) -> Result<FreezeMask> {
    if layer_indices.len() != encoded.len() {
        return Err(Error::InfeasiblePlan("ternary decode: layer count mismatch".to_string()));
    }
    let layers = layer_indices
        .iter()
        .zip(encoded)
        .map(|(&li, vals)| {
            let cells = vals
                .iter()
                .map(|v| match v {
                    -1 => Ok(Cell::Pruned),
                    0 => Ok(Cell::Free),
                    1 => Ok(Cell::Locked),
                    other => Err(Error::InfeasiblePlan(format!("ternary value {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LayerMask { layer_index: li, cells })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FreezeMask { layers })
}
