//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; a FAIL also panics the corresponding test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slt::arch;
use slt::data;
use slt::freeze::{
    allocate_layerwise, build_freeze_plan, build_freeze_plan_explicit, materialize_mask,
    plan_proportion, Cell, Strategy,
};
use slt::harness::{self, ExperimentConfig, RunMode, SweepAxis};
use slt::nn::{self, ArchSpec, LayerSpec, Mode};
use slt::pack;
use slt::rng::{InitKind, Purpose, StreamKey};
use slt::search::{self, SearchConfig, TicketModel};
use slt::ssa;
use slt::Tensor;

fn report(criterion: usize, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({name}): {verdict}{}", if detail.is_empty() {
        String::new()
    } else {
        format!(" [{detail}]")
    });
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

#[test]
fn criterion_01_proportion_planner() {
    let (p, l) = plan_proportion(0.8, 0.5).unwrap();
    let centered = (p - 0.4).abs() < 1e-6 && (l - 0.4).abs() < 1e-6;
    let (p, l) = plan_proportion(0.8, 0.05).unwrap();
    let clamp_low = p == 0.0 && (l - 0.8).abs() < 1e-6;
    let (p, l) = plan_proportion(0.8, 0.95).unwrap();
    let clamp_high = (p - 0.8).abs() < 1e-6 && l == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut window = true;
    for _ in 0..10_000 {
        let f: f32 = rng.gen_range(0.0..0.999);
        let k: f32 = rng.gen_range(0.001..0.999);
        let (p, l) = plan_proportion(f, k).unwrap();
        if !(p <= k + 1e-6 && k <= 1.0 - l + 1e-6 && (p + l - f).abs() < 1e-6) {
            window = false;
            break;
        }
    }
    report(
        1,
        "proportion planner",
        centered && clamp_low && clamp_high && window,
        &format!("centered {centered} clamp_low {clamp_low} clamp_high {clamp_high} window {window}"),
    );
}

#[test]
fn criterion_02_mask_exactness() {
    let a = arch::conv6(1.0, &[3, 32, 32], 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ok = true;
    let mut detail = String::new();
    for trial in 0..100 {
        let p: f32 = rng.gen_range(0.0..0.6);
        let l: f32 = rng.gen_range(0.0..(0.95 - p));
        let plan = build_freeze_plan_explicit(&a, p, l, if trial % 2 == 0 { Strategy::Epl } else { Strategy::Erk })
            .unwrap();
        let mask = materialize_mask(&plan, trial as u64);
        let mut total = (0usize, 0usize);
        for (lm, lp) in mask.layers.iter().zip(&plan.layers) {
            let pruned = lm.count(Cell::Pruned);
            let locked = lm.count(Cell::Locked);
            let free = lm.count(Cell::Free);
            total.0 += pruned;
            total.1 += locked;
            if pruned != lp.pruned || locked != lp.locked || pruned + locked + free != lp.size {
                ok = false;
                detail = format!("trial {trial} layer {} count mismatch", lp.layer_index);
            }
        }
        if total.0 != plan.total_pruned() || total.1 != plan.total_locked() {
            ok = false;
            detail = format!("trial {trial} global count mismatch");
        }
    }
    report(2, "mask exactness", ok, &detail);
}

/// Independent waterfill: find the common per-layer level by bisection.
fn epl_oracle(sizes: &[usize], keep_total: usize) -> Vec<f64> {
    let mut lo = 0.0f64;
    let mut hi = *sizes.iter().max().unwrap() as f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = sizes.iter().map(|&z| (z as f64).min(mid)).sum();
        if s < keep_total as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sizes.iter().map(|&z| (z as f64).min(hi)).collect()
}

/// Independent ERK: try every consistent capped set in descending scale
/// order and solve the renormalization constant in closed form.
fn erk_oracle(sizes: &[usize], scales: &[f64], keep_total: usize) -> Vec<f64> {
    let n = sizes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scales[b].partial_cmp(&scales[a]).unwrap());
    for capped_count in 0..n {
        let capped = &order[..capped_count];
        let unc = &order[capped_count..];
        let capped_mass: f64 = capped.iter().map(|&i| sizes[i] as f64).sum();
        let denom: f64 = unc.iter().map(|&i| scales[i] * sizes[i] as f64).sum();
        let c = (keep_total as f64 - capped_mass) / denom;
        let consistent = capped.iter().all(|&i| c * scales[i] >= 1.0)
            && unc.iter().all(|&i| c * scales[i] < 1.0);
        if consistent {
            let mut t = vec![0.0; n];
            for &i in capped {
                t[i] = sizes[i] as f64;
            }
            for &i in unc {
                t[i] = c * scales[i] * sizes[i] as f64;
            }
            return t;
        }
    }
    sizes.iter().map(|&z| z as f64).collect()
}

/// Independent largest-remainder integerization with caps, ties to lower index.
fn round_oracle(targets: &[f64], total: usize, caps: &[usize]) -> Vec<usize> {
    let mut ints: Vec<usize> = targets
        .iter()
        .zip(caps)
        .map(|(t, &c)| (t.floor().max(0.0) as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = ints.iter().sum();
    'outer: while assigned < total {
        let before = assigned;
        for &i in &order {
            if assigned == total {
                break 'outer;
            }
            if ints[i] < caps[i] {
                ints[i] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            break;
        }
    }
    ints
}

fn random_arch(rng: &mut ChaCha8Rng) -> ArchSpec {
    let mut layers = Vec::new();
    let convs = rng.gen_range(0..3);
    let mut c = rng.gen_range(1..4usize);
    for _ in 0..convs {
        let c2 = rng.gen_range(2..24usize);
        layers.push(LayerSpec::conv2d(c, c2, 3, 3));
        layers.push(LayerSpec::relu());
        c = c2;
    }
    let mut feat = c * 16;
    for _ in 0..rng.gen_range(1..4usize) {
        let out = rng.gen_range(3..80usize);
        layers.push(LayerSpec::dense(feat, out));
        layers.push(LayerSpec::relu());
        feat = out;
    }
    layers.push(LayerSpec::dense(feat, 4));
    ArchSpec { layers, input_shape: vec![c, 4, 4], num_classes: 4 }
}

#[test]
fn criterion_03_allocation_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut ok = true;
    let mut detail = String::new();
    for trial in 0..50 {
        let a = random_arch(&mut rng);
        let sizes: Vec<usize> =
            a.param_layers().iter().map(|&i| a.layers[i].param_count()).collect();
        let scales: Vec<f64> = a.param_layers().iter().map(|&i| a.layers[i].erk_scale()).collect();
        let total: usize = sizes.iter().sum();
        let ratio: f32 = rng.gen_range(0.05..0.9);
        let keep_total = total - (ratio as f64 * total as f64).round() as usize;

        let epl = allocate_layerwise(&a, ratio, Strategy::Epl).unwrap();
        let epl_expect = round_oracle(&epl_oracle(&sizes, keep_total), keep_total, &sizes);
        let erk = allocate_layerwise(&a, ratio, Strategy::Erk).unwrap();
        let erk_expect = round_oracle(&erk_oracle(&sizes, &scales, keep_total), keep_total, &sizes);

        let totals_exact =
            epl.iter().sum::<usize>() == keep_total && erk.iter().sum::<usize>() == keep_total;
        if epl != epl_expect || erk != erk_expect || !totals_exact {
            ok = false;
            detail = format!(
                "trial {trial}: sizes {sizes:?} ratio {ratio:.4} epl {epl:?} vs {epl_expect:?}, erk {erk:?} vs {erk_expect:?}"
            );
            break;
        }
    }
    report(3, "EPL/ERK allocation vs oracle", ok, &detail);
}

fn random_params(a: &ArchSpec, seed: u64) -> Vec<Tensor> {
    let mut params = a.zero_params();
    for &li in &a.param_layers() {
        params[li] = slt::rng::init_weights(
            &a.layers[li],
            InitKind::KaimingNormal,
            StreamKey::new(seed, li as u32, Purpose::Weights),
        )
        .unwrap();
    }
    params
}

fn loss_of(a: &ArchSpec, params: &[Tensor], masks: &[Tensor], x: &Tensor, y: &[usize]) -> f32 {
    let mut bn = a.fresh_bn();
    let (logits, _) = nn::forward(a, params, masks, &mut bn, x, Mode::Train).unwrap();
    nn::cross_entropy(&logits, y).unwrap().0
}

/// Central finite differences on a handful of well-conditioned positions.
fn fd_check(a: &ArchSpec, seed: u64) -> (usize, f32) {
    let batch = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let feat: usize = a.input_shape.iter().product();
    let mut shape = vec![batch];
    shape.extend_from_slice(&a.input_shape);
    let x = Tensor::new(shape, (0..batch * feat).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
        .unwrap();
    let y: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..a.num_classes)).collect();
    let mut params = random_params(a, seed);
    let masks = a.ones_masks();

    let mut bn = a.fresh_bn();
    let (logits, cache) = nn::forward(a, &params, &masks, &mut bn, &x, Mode::Train).unwrap();
    let (_, grad_logits) = nn::cross_entropy(&logits, &y).unwrap();
    let (grads, _) = nn::backward(a, &params, &masks, &cache, &grad_logits).unwrap();

    let h = 1e-3f32;
    let mut checked = 0;
    let mut worst = 0.0f32;
    for &li in &a.param_layers() {
        // probe positions with gradients big enough that f32 loss noise
        // cannot dominate the quotient
        let mut idxs: Vec<usize> = (0..grads[li].len()).collect();
        idxs.sort_by(|&i, &j| grads[li].data[j].abs().partial_cmp(&grads[li].data[i].abs()).unwrap());
        for &i in idxs.iter().take(6).filter(|&&i| grads[li].data[i].abs() > 2e-2) {
            let orig = params[li].data[i];
            let mid = loss_of(a, &params, &masks, &x, &y);
            params[li].data[i] = orig + h;
            let up = loss_of(a, &params, &masks, &x, &y);
            params[li].data[i] = orig - h;
            let down = loss_of(a, &params, &masks, &x, &y);
            params[li].data[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grads[li].data[i];
            // a relu/maxpool kink inside the probe interval invalidates the
            // central quotient; it shows up as disagreement between the two
            // one-sided quotients, and the position is skipped
            let d_plus = (up - mid) / h;
            let d_minus = (mid - down) / h;
            if (d_plus - d_minus).abs() > 5e-4 + 1e-2 * an.abs() {
                continue;
            }
            // f32 loss evaluation carries ~1e-4 of quotient noise at this h;
            // differences below that floor are not informative
            if (fd - an).abs() <= 2e-4 {
                checked += 1;
                continue;
            }
            let rel = (fd - an).abs() / fd.abs().max(an.abs());
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (checked, worst)
}

#[test]
fn criterion_04_gradient_checks() {
    let dense_arch = ArchSpec {
        layers: vec![LayerSpec::dense(12, 16), LayerSpec::relu(), LayerSpec::dense(16, 4)],
        input_shape: vec![12],
        num_classes: 4,
    };
    let conv_pool_arch = ArchSpec {
        layers: vec![
            LayerSpec::conv2d(2, 4, 3, 3),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::conv2d(4, 3, 3, 3),
            LayerSpec::avgpool_global(),
        ],
        input_shape: vec![2, 8, 8],
        num_classes: 3,
    };
    let bn_arch = ArchSpec {
        layers: vec![
            LayerSpec::conv2d(2, 4, 3, 3),
            LayerSpec::batchnorm(4),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::conv2d(4, 3, 3, 3),
            LayerSpec::avgpool_global(),
        ],
        input_shape: vec![2, 8, 8],
        num_classes: 3,
    };
    let mixed_arch = ArchSpec {
        layers: vec![
            LayerSpec::conv2d(1, 4, 3, 3),
            LayerSpec::batchnorm(4),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::dense(4 * 4 * 4, 6),
            LayerSpec::relu(),
            LayerSpec::dense(6, 3),
        ],
        input_shape: vec![1, 8, 8],
        num_classes: 3,
    };

    let mut ok = true;
    let mut detail = String::new();
    for (name, a) in [
        ("dense", &dense_arch),
        ("conv+pool", &conv_pool_arch),
        ("conv+bn", &bn_arch),
        ("mixed", &mixed_arch),
    ] {
        let mut total_checked = 0;
        for inst in 0..20u64 {
            let (checked, worst) = fd_check(a, 404 + inst);
            total_checked += checked;
            if worst > 1e-2 {
                ok = false;
                detail = format!("{name} instance {inst}: relative error {worst:.4}");
            }
        }
        if total_checked < 20 {
            ok = false;
            detail = format!("{name}: only {total_checked} informative positions checked");
        }
    }
    report(4, "finite-difference gradients", ok, &detail);
}

fn synth_corpus(dir: &std::path::Path) {
    data::synthesize_mnist(dir, 0, 2500, 600, 0.35).unwrap();
}

fn desk_config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.arch = "conv2".to_string();
    cfg.width = 0.2;
    cfg.dataset = "mnist".to_string();
    cfg.data_root = Some(dir.to_path_buf());
    cfg.batch_size = 64;
    cfg.epochs = 10;
    cfg.limit_train = 1000;
    cfg.limit_val = 400;
    cfg.limit_test = 600;
    cfg.repetitions = 3;
    cfg
}

#[test]
fn criterion_05_sparsity_containment() {
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path());
    let dataset = {
        let mut d = data::load_dataset("mnist", dir.path(), 0).unwrap();
        d.limit(1000, 400, 600);
        d
    };
    let a = arch::conv2(0.2, &dataset.sample_shape, dataset.num_classes).unwrap();
    let plan = build_freeze_plan(&a, 0.4, 0.5, Strategy::Epl).unwrap();
    let model = TicketModel::new(
        a,
        0,
        InitKind::SignedKaimingConstant { sparsity: 0.5 },
        plan,
        0.5,
    )
    .unwrap();
    let target = model.active_target();
    let config = SearchConfig { epochs: 5, batch_size: 64, ..Default::default() };

    let mut steps = 0usize;
    let mut ok = true;
    let mut detail = String::new();
    let outcome = search::search_observed(model, &config, &dataset, |m, masks| {
        steps += 1;
        let mut active = 0usize;
        for (lm, lp) in m.freeze.layers.iter().zip(&m.plan.layers) {
            let mask = &masks[lp.layer_index];
            for (i, cell) in lm.cells.iter().enumerate() {
                let on = mask.data[i] != 0.0;
                active += on as usize;
                match cell {
                    Cell::Locked if !on => {
                        ok = false;
                        detail = format!("step {steps}: locked position inactive");
                    }
                    Cell::Pruned if on => {
                        ok = false;
                        detail = format!("step {steps}: pruned position active");
                    }
                    _ => {}
                }
            }
        }
        if active != target {
            ok = false;
            detail = format!("step {steps}: active {active} != target {target}");
        }
        Ok(())
    })
    .unwrap();
    if steps < 5 {
        ok = false;
        detail = format!("only {steps} steps observed");
    }
    let _ = outcome;
    report(5, "per-step sparsity and containment", ok, &detail);
}

#[test]
fn criterion_06_roundtrip() {
    let mut ok = true;
    let mut detail = String::new();
    for m in 0..10u64 {
        let dataset = data::toy_gaussians(m, 120, 16);
        let a = arch::dense2(0.5, &dataset.sample_shape, dataset.num_classes).unwrap();
        let freeze_ratio = [0.0, 0.2, 0.4, 0.6][m as usize % 4];
        let strategy = if m % 2 == 0 { Strategy::Epl } else { Strategy::Erk };
        let plan = build_freeze_plan_explicit(
            &a,
            freeze_ratio / 2.0,
            freeze_ratio / 2.0,
            strategy,
        )
        .unwrap();
        let model = TicketModel::new(
            a,
            m,
            InitKind::SignedKaimingConstant { sparsity: 0.5 },
            plan,
            0.5,
        )
        .unwrap();
        let config = SearchConfig { epochs: 2, batch_size: 32, ..Default::default() };
        let model = search::search(model, &config, &dataset).unwrap().model;

        let bytes = pack::pack(&model, "dense2", 0.5).unwrap();
        let mut ticket = pack::unpack(&bytes).unwrap();
        if ticket.weights != model.weights {
            ok = false;
            detail = format!("model {m}: regenerated weights differ");
            break;
        }
        let regenerated = materialize_mask(&ticket.plan, ticket.global_seed);
        for (a_layer, b_layer) in regenerated.layers.iter().zip(&model.freeze.layers) {
            if a_layer.cells != b_layer.cells {
                ok = false;
                detail = format!("model {m}: regenerated freeze mask differs");
            }
        }
        let masks = search::effective_mask(&model).unwrap();
        if ticket.masks != masks {
            ok = false;
            detail = format!("model {m}: supermask differs");
            break;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(606 + m);
        for _ in 0..10 {
            let x = Tensor::new(
                vec![1, 16],
                (0..16).map(|_| rng.gen_range(-2.0f32..2.0)).collect(),
            )
            .unwrap();
            let mut bn = model.bn.clone();
            let (expect, _) =
                nn::forward(&model.arch, &model.weights, &masks, &mut bn, &x, Mode::Eval).unwrap();
            let got = ticket.forward(&x).unwrap();
            if expect.data != got.data {
                ok = false;
                detail = format!("model {m}: logits differ");
                break;
            }
        }
        if !ok {
            break;
        }
    }
    report(6, "pack/unpack round trip", ok, &detail);
}

#[test]
fn criterion_07_size_accounting() {
    let a = arch::conv6(1.0, &[3, 32, 32], 10).unwrap();
    let n = a.total_params() as f64;
    let dense_bits = pack::account_size(
        &build_freeze_plan_explicit(&a, 0.0, 0.0, Strategy::Epl).unwrap(),
        0,
    )
    .supermask_bits;

    let mut ratio_exact = true;
    for f in [0.1f32, 0.25, 0.5, 0.75, 0.9] {
        let plan = build_freeze_plan(&a, f, 0.5, Strategy::Epl).unwrap();
        let bits = pack::account_size(&plan, 0).supermask_bits;
        let expect = n - (f as f64 * n).round();
        if bits as f64 != expect {
            ratio_exact = false;
        }
    }

    let dense_mb = dense_bits as f64 / 8.0 / 1e6;
    let frozen_plan = build_freeze_plan(&a, 0.5, 0.5, Strategy::Epl).unwrap();
    let frozen_mb = pack::account_size(&frozen_plan, 0).megabytes();
    let dense_ok = (dense_mb - 0.27).abs() / 0.27 <= 0.15;
    let frozen_ok = frozen_mb >= 0.13 * 0.85 && frozen_mb <= 0.14 * 1.15;
    report(
        7,
        "size accounting",
        ratio_exact && dense_ok && frozen_ok,
        &format!("dense {dense_mb:.4} MB, frozen {frozen_mb:.4} MB, ratio_exact {ratio_exact}"),
    );
}

#[test]
fn criterion_08_ssa_verification() {
    let z_grid = ssa::default_z_grid(21);

    let plain = ssa::estimate_success(&[24], 1.0, 0.0, 0.05, &z_grid, 200, 808);
    let plain_rate = plain.points[0].success_rate();
    let plain_ok = plain.points[0].solver == ssa::Solver::Exact && plain_rate >= 0.95;

    let frozen = ssa::estimate_success(&[8, 16, 24, 32], 0.7, 0.2, 0.05, &z_grid, 200, 809);
    let exact_all = frozen.points.iter().all(|p| p.solver == ssa::Solver::Exact);
    let mut monotone = true;
    for w in frozen.points.windows(2) {
        let slack = 2.0 * (w[0].sigma() + w[1].sigma());
        if w[1].success_rate() < w[0].success_rate() - slack {
            monotone = false;
        }
    }
    let (fit_ok, fit_detail) = match frozen.log_tail_fit() {
        Some((slope, r2)) => (r2 >= 0.8 && slope < 0.0, format!("slope {slope:.3} r2 {r2:.3}")),
        None => (true, "tail not estimable".to_string()),
    };
    report(
        8,
        "subset-sum verification",
        plain_ok && exact_all && monotone && fit_ok,
        &format!("plain n=24 rate {plain_rate:.3}; monotone {monotone}; {fit_detail}"),
    );
}

#[test]
fn criterion_09_desk_scale_trends() {
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path());
    let base = desk_config(dir.path());

    // (a) frozen vs dense at F_r = 0.4, k = 0.5
    let mut dense = base.clone();
    dense.mode = RunMode::SltDense;
    let mut frozen = base.clone();
    frozen.mode = RunMode::SltFrozen;
    frozen.freeze_ratio = 0.4;
    // (b) matched stored size: both remove 45% of positions from the mask
    let mut frozen_matched = base.clone();
    frozen_matched.mode = RunMode::SltFrozen;
    frozen_matched.freeze_ratio = 0.45;
    let mut pruned = base.clone();
    pruned.mode = RunMode::SltPruned; // P_r defaults to k - 0.05 = 0.45

    let rows = harness::run_comparison(&[dense, frozen, frozen_matched, pruned]);
    let all_ok = rows.iter().all(|r| r.ok());
    let dense_acc = rows[0].mean();
    let frozen_acc = rows[1].mean();
    let frozen_m_acc = rows[2].mean();
    let pruned_acc = rows[3].mean();
    let matched_size = rows[2].size.supermask_bits == rows[3].size.supermask_bits;
    let a_ok = frozen_acc >= dense_acc - 0.02;
    let b_ok = frozen_m_acc >= pruned_acc - 0.01;

    // (c) prune:lock proportion sweep at fixed F_r = 0.8, centered at 0.40
    let mut sweep_base = base.clone();
    sweep_base.mode = RunMode::SltFrozen;
    sweep_base.freeze_ratio = 0.8;
    let grid = [0.32f32, 0.36, 0.40, 0.44, 0.48];
    let sweep_rows = harness::sweep(SweepAxis::PruneRatio, &grid, &sweep_base).unwrap();
    let sweep_ok = sweep_rows.iter().all(|r| r.ok());
    let best = sweep_rows
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.mean().partial_cmp(&y.mean()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let c_ok = (1..=3).contains(&best);
    let sweep_accs: Vec<String> = sweep_rows.iter().map(|r| format!("{:.3}", r.mean())).collect();

    report(
        9,
        "desk-scale trends",
        all_ok && matched_size && a_ok && b_ok && sweep_ok && c_ok,
        &format!(
            "dense {dense_acc:.3} frozen {frozen_acc:.3}; matched frozen {frozen_m_acc:.3} vs pruned {pruned_acc:.3}; sweep [{}] peak idx {best}",
            sweep_accs.join(", ")
        ),
    );
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path());
    let mut cfg = desk_config(dir.path());
    cfg.mode = RunMode::SltFrozen;
    cfg.freeze_ratio = 0.4;
    cfg.width = 0.125;
    cfg.epochs = 1;
    cfg.repetitions = 2;

    let first = harness::to_csv(&harness::run_comparison(&[cfg.clone()]));
    let second = harness::to_csv(&harness::run_comparison(&[cfg]));
    report(
        10,
        "byte-identical CSV",
        first == second && first.contains(",ok"),
        if first == second { "" } else { "CSV bytes differ between runs" },
    );
}
