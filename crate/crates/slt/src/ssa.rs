//! Subset-sum approximation lab.
//!
//! Monte-Carlo verification of the subset-sum approximation properties that
//! make ticket search work in frozen networks: random values in U(-1,1),
//! availability indicators drawn Bernoulli(p), mandatory-inclusion
//! indicators Bernoulli(q), and the question of whether every target in
//! [-1,1] is reachable within eps by the locked sum plus some subset of the
//! free values. Small instances are solved exactly (full enumeration or
//! meet-in-the-middle); larger ones fall back to a residual-halving greedy
//! that upper-bounds the error.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, StreamKey};

/// Largest free-variable count the exact solver accepts.
pub const EXACT_FREE_BOUND: usize = 40;

/// One subset-sum instance. `keep[i]` is the availability indicator M_i,
/// `lock[i]` the mandatory-inclusion indicator M'_i; variable i contributes
/// to the locked sum iff keep && lock, and is choosable iff keep && !lock.
#[derive(Debug, Clone)]
pub struct SsaTrial {
    pub values: Vec<f64>,
    pub keep: Vec<bool>,
    pub lock: Vec<bool>,
    pub z: f64,
    pub eps: f64,
    pub achieved_error: Option<f64>,
    pub subset: Vec<usize>,
}

impl SsaTrial {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn locked_sum(&self) -> f64 {
        (0..self.n())
            .filter(|&i| self.keep[i] && self.lock[i])
            .map(|i| self.values[i])
            .sum()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.keep[i] && !self.lock[i]).collect()
    }

    /// The error achieved by a given subset of free indices.
    pub fn error_for_subset(&self, subset: &[usize]) -> f64 {
        let chosen: f64 = subset.iter().map(|&i| self.values[i]).sum();
        (self.z - self.locked_sum() - chosen).abs()
    }
}

/// Draw one instance. Indicators are iid Bernoulli, not exact-count, so the
/// sampled distribution is exactly the one the approximation guarantees are
/// stated for. p=1, q=0 gives the plain setting with no pruning or locking.
pub fn sample_trial(n: usize, p: f64, q: f64, z: f64, eps: f64, key: StreamKey) -> SsaTrial {
    let mut rng = rng::stream(key);
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let keep: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
    let lock: Vec<bool> = (0..n).map(|_| rng.gen_bool(q)).collect();
    SsaTrial { values, keep, lock, z, eps, achieved_error: None, subset: Vec::new() }
}

/// All 2^len subset sums of `vals`, with the choosing bitmask alongside.
fn enumerate(vals: &[f64]) -> Vec<(f64, u32)> {
    let mut out = Vec::with_capacity(1 << vals.len());
    out.push((0.0, 0));
    for (i, &v) in vals.iter().enumerate() {
        for j in 0..out.len() {
            let (s, m) = out[j];
            out.push((s + v, m | 1 << i));
        }
    }
    out
}

struct ExactSolver {
    free: Vec<usize>,
    locked_sum: f64,
    half_a: Vec<(f64, u32)>,
    /// sorted by sum for binary search
    half_b: Vec<(f64, u32)>,
    split: usize,
}

impl ExactSolver {
    fn new(trial: &SsaTrial) -> Result<Self> {
        let free = trial.free_indices();
        if free.len() > EXACT_FREE_BOUND {
            return Err(Error::InstanceTooLarge { free: free.len(), bound: EXACT_FREE_BOUND });
        }
        let vals: Vec<f64> = free.iter().map(|&i| trial.values[i]).collect();
        let split = vals.len() / 2;
        let half_a = enumerate(&vals[..split]);
        let mut half_b = enumerate(&vals[split..]);
        half_b.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ExactSolver { free, locked_sum: trial.locked_sum(), half_a, half_b, split })
    }

    /// Global minimum of |z - locked_sum - subset_sum| and the minimizer.
    fn solve(&self, z: f64) -> (f64, Vec<usize>) {
        let want = z - self.locked_sum;
        let mut best = (f64::INFINITY, 0u32, 0u32);
        for &(sa, ma) in &self.half_a {
            let target = want - sa;
            let at = self.half_b.partition_point(|e| e.0 < target);
            for idx in [at.wrapping_sub(1), at] {
                if let Some(&(sb, mb)) = self.half_b.get(idx) {
                    let err = (target - sb).abs();
                    if err < best.0 {
                        best = (err, ma, mb);
                    }
                }
            }
        }
        let mut subset = Vec::new();
        for (j, &i) in self.free.iter().enumerate() {
            let hit = if j < self.split {
                best.1 >> j & 1 == 1
            } else {
                best.2 >> (j - self.split) & 1 == 1
            };
            if hit {
                subset.push(i);
            }
        }
        (best.0, subset)
    }
}

/// Exact minimum error over all subsets of free-available variables.
/// Refuses instances with more than [`EXACT_FREE_BOUND`] free variables;
/// use [`solve_greedy`] for those.
pub fn solve_exact(trial: &SsaTrial) -> Result<(f64, Vec<usize>)> {
    Ok(ExactSolver::new(trial)?.solve(trial.z))
}

/// Residual-halving heuristic: walk free values by descending magnitude,
/// including each iff it shrinks the residual. The returned error is an
/// upper bound on the exact one.
pub fn solve_greedy(trial: &SsaTrial) -> (f64, Vec<usize>) {
    let mut free = trial.free_indices();
    free.sort_by(|&a, &b| trial.values[b].abs().total_cmp(&trial.values[a].abs()));
    let mut residual = trial.z - trial.locked_sum();
    let mut subset = Vec::new();
    for &i in &free {
        if (residual - trial.values[i]).abs() < residual.abs() {
            residual -= trial.values[i];
            subset.push(i);
        }
    }
    subset.sort_unstable();
    (residual.abs(), subset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Exact,
    Greedy,
    Mixed,
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::Exact => "exact",
            Solver::Greedy => "greedy",
            Solver::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub solver: Solver,
}

impl CurvePoint {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error of the estimated rate.
    pub fn sigma(&self) -> f64 {
        let r = self.success_rate();
        (r * (1.0 - r) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SuccessCurve {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub z_grid: Vec<f64>,
    pub points: Vec<CurvePoint>,
}

impl SuccessCurve {
    /// Least-squares fit of log(1 - success) against n over points where
    /// 1 - success is strictly positive. Returns (slope, r_squared), or
    /// None with fewer than three estimable points. An R^2 near 1 with
    /// negative slope is the empirical signature of an exponential tail.
    pub fn log_tail_fit(&self) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|c| c.successes < c.trials)
            .map(|c| (c.n as f64, (1.0 - c.success_rate()).ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 || syy == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        Some((slope, sxy * sxy / (sxx * syy)))
    }
}

/// 21 evenly spaced targets in [-1,1], the testable surrogate for "all z".
pub fn default_z_grid(points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64).collect()
}

/// Estimate, per n in the grid, the probability that a single random
/// instance can approximate EVERY z in z_grid within eps. The exact solver
/// is used whenever the instance fits its bound; otherwise the greedy
/// heuristic gives a lower bound on success, and the point is flagged.
pub fn estimate_success(
    n_grid: &[usize],
    p: f64,
    q: f64,
    eps: f64,
    z_grid: &[f64],
    trials_per_point: usize,
    seed: u64,
) -> SuccessCurve {
    let mut points = Vec::with_capacity(n_grid.len());
    for (row, &n) in n_grid.iter().enumerate() {
        let mut successes = 0;
        let mut used_exact = false;
        let mut used_greedy = false;
        for t in 0..trials_per_point {
            let key =
                StreamKey::new(seed, (row as u32) << 20 | t as u32, Purpose::Ssa);
            let mut trial = sample_trial(n, p, q, 0.0, eps, key);
            let ok = match ExactSolver::new(&trial) {
                Ok(solver) => {
                    used_exact = true;
                    z_grid.iter().all(|&z| solver.solve(z).0 <= eps)
                }
                Err(_) => {
                    used_greedy = true;
                    z_grid.iter().all(|&z| {
                        trial.z = z;
                        solve_greedy(&trial).0 <= eps
                    })
                }
            };
            if ok {
                successes += 1;
            }
        }
        let solver = match (used_exact, used_greedy) {
            (true, false) | (false, false) => Solver::Exact,
            (false, true) => Solver::Greedy,
            (true, true) => Solver::Mixed,
        };
        points.push(CurvePoint { n, trials: trials_per_point, successes, solver });
    }
    SuccessCurve { p, q, eps, z_grid: z_grid.to_vec(), points }
}
