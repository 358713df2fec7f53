use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slt::data;
use slt::freeze::{build_freeze_plan_explicit, Strategy};
use slt::harness::{self, ExperimentConfig, ResultRow, RunMode, SweepAxis};
use slt::pack;
use slt::search::{self, TicketModel};
use slt::ssa;
use slt::{arch, Error};

#[derive(Parser)]
#[command(name = "slt", version, about = "Strong-lottery-ticket toolkit for frozen random networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared experiment options. A config file is read first; every `--set
/// key=value` and dedicated flag applied afterwards takes precedence.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set epochs=5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    mode: Option<RunMode>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset directory; defaults to $SLT_DATA_ROOT, then the working directory
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for pair in &self.sets {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set wants KEY=VALUE, got '{pair}'")))?;
            cfg.apply(k.trim(), v.trim())?;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(a) = &self.arch {
            cfg.arch = a.clone();
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(r) = &self.data_root {
            cfg.data_root = Some(r.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(r) = self.repetitions {
            cfg.repetitions = r;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and emit a one-row CSV
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one axis of a base config, one CSV row per value
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. 0.2,0.4,0.6
        #[arg(long, value_delimiter = ',')]
        values: Vec<f32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several modes on one base config for a side-by-side table
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Modes to run, comma-separated
        #[arg(long, value_delimiter = ',',
              default_value = "weight_training,slt_dense,slt_pruned,slt_frozen")]
        modes: Vec<RunMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search a ticket and serialize it as a .ftkt file
    Pack {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a .ftkt file, verify it, and print its contents
    Unpack {
        input: PathBuf,
        /// Also evaluate test accuracy on this dataset
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
    /// Report stored model size for an architecture and freezing plan
    Size {
        #[arg(long, default_value = "conv6")]
        arch: String,
        #[arg(long, default_value_t = 1.0)]
        width: f32,
        /// Comma-separated input shape, channels first
        #[arg(long, value_delimiter = ',', default_value = "3,32,32")]
        input_shape: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        num_classes: usize,
        #[arg(long, default_value_t = 0.0)]
        freeze_ratio: f32,
        #[arg(long, default_value_t = 0.5)]
        sparsity: f32,
        #[arg(long, default_value = "epl")]
        strategy: Strategy,
    },
    /// Monte-Carlo verification of the subset-sum approximation behavior
    SsaVerify {
        /// Comma-separated instance sizes
        #[arg(long, value_delimiter = ',', default_value = "8,16,24,32")]
        n_grid: Vec<usize>,
        /// Availability probability
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Mandatory-inclusion probability
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Number of evenly spaced targets in [-1,1]
        #[arg(long, default_value_t = 21)]
        z_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic MNIST-like IDX corpus for offline runs
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4000)]
        train: usize,
        #[arg(long, default_value_t = 800)]
        test: usize,
        #[arg(long, default_value_t = 0.25)]
        noise: f32,
    },
}

fn emit(csv: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Exit 0 only when every row succeeded.
fn finish(rows: &[ResultRow], out: Option<&PathBuf>) -> Result<ExitCode, Error> {
    emit(&harness::to_csv(rows), out)?;
    for row in rows {
        for layer in &row.collapsed_layers {
            eprintln!("warning: row {} leaves layer {layer} fully pruned", row.index);
        }
        if let Some(e) = &row.error {
            eprintln!("row {} failed: {e}", row.index);
        }
    }
    Ok(if rows.iter().all(ResultRow::ok) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Train { config, out } => {
            let rows = harness::run_comparison(&[config.build()?]);
            finish(&rows, out.as_ref())
        }
        Command::Sweep { config, axis, values, out } => {
            let rows = harness::sweep(axis.parse::<SweepAxis>()?, &values, &config.build()?)?;
            finish(&rows, out.as_ref())
        }
        Command::Compare { config, modes, out } => {
            let base = config.build()?;
            let configs: Vec<ExperimentConfig> = modes
                .into_iter()
                .map(|mode| {
                    let mut c = base.clone();
                    c.mode = mode;
                    c
                })
                .collect();
            finish(&harness::run_comparison(&configs), out.as_ref())
        }
        Command::Pack { config, out } => {
            let cfg = config.build()?;
            if cfg.mode == RunMode::WeightTraining {
                return Err(Error::Config("pack needs an slt_* mode".to_string()));
            }
            let dataset = data::load_dataset(&cfg.dataset, &cfg.data_root(), cfg.seed)?;
            let a = arch::by_name(&cfg.arch, cfg.width, &dataset.sample_shape, dataset.num_classes)?;
            let (p, l) = cfg.resolved_ratios()?;
            let plan = build_freeze_plan_explicit(&a, p, l, cfg.strategy)?;
            let init = slt::rng::InitKind::SignedKaimingConstant { sparsity: cfg.sparsity };
            let model = TicketModel::new(a, cfg.seed, init, plan, cfg.sparsity)?;
            let outcome = search::search(model, &cfg.search_config(), &dataset)?;
            let bytes = pack::pack(&outcome.model, &cfg.arch, cfg.width)?;
            std::fs::write(&out, &bytes)?;
            println!(
                "packed {} ({} bytes, best val acc {:.4})",
                out.display(),
                bytes.len(),
                outcome.best_val_acc
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Unpack { input, dataset, data_root } => {
            let bytes = std::fs::read(&input)?;
            let mut ticket = pack::unpack(&bytes)?;
            let report = ticket.size_report();
            println!("arch: {} (width {})", ticket.arch_name, ticket.width);
            println!("seed: {}", ticket.global_seed);
            println!(
                "ratios: freeze {:.4} = prune {:.4} + lock {:.4}; sparsity {:.4}",
                ticket.plan.freeze_ratio,
                ticket.plan.prune_ratio,
                ticket.plan.lock_ratio,
                ticket.sparsity
            );
            for (slot, lp) in ticket.plan.layers.iter().enumerate() {
                println!(
                    "layer {}: {} params, {} pruned, {} locked, realized sparsity {:.4}",
                    lp.layer_index, lp.size, lp.pruned, lp.locked, ticket.realized_sparsity[slot]
                );
            }
            println!(
                "stored size: {} supermask bits + {} bn bits = {} bytes ({:.6} MB)",
                report.supermask_bits,
                report.bn_param_bits,
                report.total_bytes,
                report.megabytes()
            );
            if let Some(name) = dataset {
                let root = data_root
                    .or_else(|| std::env::var_os(harness::DATA_ROOT_ENV).map(PathBuf::from))
                    .unwrap_or_else(|| PathBuf::from("."));
                let ds = data::load_dataset(&name, &root, ticket.global_seed)?;
                let acc = ticket.evaluate(&ds, &ds.test, 128)?;
                println!("test accuracy on {name}: {acc:.4}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Size {
            arch: arch_name,
            width,
            input_shape,
            num_classes,
            freeze_ratio,
            sparsity,
            strategy,
        } => {
            let a = arch::by_name(&arch_name, width, &input_shape, num_classes)?;
            let plan = if freeze_ratio == 0.0 {
                build_freeze_plan_explicit(&a, 0.0, 0.0, strategy)?
            } else {
                slt::freeze::build_freeze_plan(&a, freeze_ratio, sparsity, strategy)?
            };
            let bn_stats: usize = a
                .fresh_bn()
                .iter()
                .flatten()
                .map(|s| s.running_mean.len() + s.running_var.len())
                .sum();
            let report = pack::account_size(&plan, bn_stats);
            println!("total params: {}", a.total_params());
            println!("supermask bits: {}", report.supermask_bits);
            println!("bn bits: {}", report.bn_param_bits);
            println!("total: {} bytes ({:.6} MB)", report.total_bytes, report.megabytes());
            Ok(ExitCode::SUCCESS)
        }
        Command::SsaVerify { n_grid, p, q, eps, trials, z_points, seed, out } => {
            let z_grid = ssa::default_z_grid(z_points);
            let curve = ssa::estimate_success(&n_grid, p, q, eps, &z_grid, trials, seed);
            let mut csv = String::from("n,solver,success_rate,trials\n");
            for pt in &curve.points {
                csv.push_str(&format!(
                    "{},{},{:.4},{}\n",
                    pt.n,
                    pt.solver,
                    pt.success_rate(),
                    pt.trials
                ));
            }
            emit(&csv, out.as_ref())?;
            if let Some((slope, r2)) = curve.log_tail_fit() {
                eprintln!("log(1-success) fit: slope {slope:.4}, r^2 {r2:.4}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SynthData { out, seed, train, test, noise } => {
            data::synthesize_mnist(&out, seed, train, test, noise)?;
            println!("wrote synthetic IDX corpus to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
