use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use placelab::config::{PolicyKind, RunConfig};
use placelab::evaluation::{self, load_label, SuiteResults};
use placelab::metrics::EpisodeMetrics;
use placelab::policy::{Checkpoint, PolicyParams};
use placelab::rng;
use placelab::sim::{offered_load, Catalog, CatalogKind, ClusterState, WorkloadGenerator, WorkloadTrace};
use placelab::trainer::{IterationStats, Trainer};
use placelab::{Error, Result};

#[derive(Parser)]
#[command(name = "placelab", version, about = "Cluster placement simulator, trainer and evaluator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload trace.
    GenWorkload {
        #[arg(long)]
        load: f64,
        #[arg(long)]
        horizon: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "train")]
        catalog: CatalogKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the placement network.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint that carries optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate one policy and write episode traces plus a metrics report.
    Evaluate {
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Trace file to replay; without it a test workload is generated per seed.
        #[arg(long, conflicts_with = "load")]
        workload: Option<PathBuf>,
        #[arg(long)]
        load: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the initial state image of each run as a CSV grid.
        #[arg(long)]
        dump_image: bool,
        #[arg(long)]
        unclamped_util: bool,
    },
    /// Evaluate several policies over several loads and tabulate the results.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "deepplace,tetris,bestfit")]
        policies: Vec<PolicyKind>,
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        unclamped_util: bool,
    },
    /// Print the annotated default configuration.
    ConfigDefaults {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Checkpoint::from_bytes(&bytes)
}

fn read_trace(path: &Path) -> Result<WorkloadTrace> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    WorkloadTrace::parse_bytes(&bytes)
}

/// Parameters for the learned policy, checked against the configured shape.
fn network_params(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<PolicyParams> {
    let path = checkpoint
        .or(cfg.paths.checkpoint.as_deref())
        .ok_or_else(|| Error::Config("deepplace requires --checkpoint".into()))?;
    let params = read_checkpoint(path)?.params;
    let expected = cfg.policy.shape(&cfg.sim, cfg.encoder()?.input_dim());
    if params.shape() != expected {
        return Err(Error::Shape(format!(
            "checkpoint has shape {:?}, configuration expects {:?}",
            params.shape(),
            expected
        )));
    }
    Ok(params)
}

fn gen_workload(
    load: f64,
    horizon: u32,
    seed: u64,
    kind: CatalogKind,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    if horizon == 0 {
        return Err(Error::Config("--horizon must be >= 1".into()));
    }
    let catalog = Catalog::standard(kind, &cfg.gen_params());
    let sim = &cfg.sim;
    let mut gen = WorkloadGenerator::new(&catalog, sim.num_machines, sim.capacity, sim.num_dims);
    if let Some(chain) = cfg.workload.chain() {
        gen = gen.with_chain(chain);
    }
    let trace = gen.generate(load, horizon, seed)?;
    write_file(out, trace.to_text()?)?;
    println!(
        "wrote {} jobs to {}; offered load {:.4}",
        trace.jobs.len(),
        out.display(),
        offered_load(&trace, horizon, sim.num_dims)
    );
    Ok(())
}

fn train(config: Option<&Path>, out: &Path, resume: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    create_dir(out)?;
    let ckpt_dir = out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;

    let ctx = cfg.rollout_context()?;
    let shape = cfg.policy.shape(&cfg.sim, ctx.encoder.input_dim());
    let catalog = Catalog::standard(CatalogKind::Train, &cfg.gen_params());
    let trainer = match resume {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if ckpt.params.shape() != shape {
                return Err(Error::Shape(format!(
                    "checkpoint has shape {:?}, configuration expects {shape:?}",
                    ckpt.params.shape()
                )));
            }
            let adam = ckpt
                .adam
                .ok_or_else(|| Error::Checkpoint("resume needs a checkpoint with optimizer state".into()))?;
            Trainer::new(ctx, cfg.train.clone(), catalog, ckpt.params)?.with_adam(adam)?
        }
        None => {
            let params = PolicyParams::init(shape, &mut rng::seeded(cfg.sim.rng_seed));
            Trainer::new(ctx, cfg.train.clone(), catalog, params)?
        }
    };
    let mut trainer = trainer;

    let log_path = out.join("train_log.csv");
    let append = resume.is_some() && log_path.exists();
    let mut log = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&log_path)
        .map_err(|e| io_err(&log_path, e))?;
    if !append {
        writeln!(log, "{}", IterationStats::CSV_HEADER)?;
    }
    let eval_every = cfg.train.eval_every as u64;
    trainer.run(|t, stats| {
        writeln!(log, "{}", stats.csv_row())?;
        let done = t.completed();
        if eval_every > 0 && done % eval_every == 0 {
            let ckpt = Checkpoint { params: t.params.clone(), adam: Some(t.adam.clone()) };
            write_file(&ckpt_dir.join(format!("iter_{done:06}.ckpt")), ckpt.to_bytes())?;
        }
        Ok(())
    })?;
    log.flush()?;
    let ckpt = Checkpoint { params: trainer.params.clone(), adam: Some(trainer.adam.clone()) };
    write_file(&out.join("final.ckpt"), ckpt.to_bytes())?;
    println!("trained {} iterations; final checkpoint {}", trainer.completed(), out.join("final.ckpt").display());
    Ok(())
}

const REPORT_HEADER: &str = "run,policy,load,metric,dimension,value\n";

#[allow(clippy::too_many_arguments)]
fn evaluate(
    kind: PolicyKind,
    config: Option<&Path>,
    checkpoint: Option<&Path>,
    workload: Option<&Path>,
    load: Option<f64>,
    seeds: &[u64],
    out: &Path,
    dump_image: bool,
    unclamped_util: bool,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    cfg.eval.unclamped_util |= unclamped_util;
    let params = match kind {
        PolicyKind::DeepPlace => Some(network_params(&cfg, checkpoint)?),
        _ => None,
    };
    let fixed = match workload.or(cfg.paths.workload.as_deref()) {
        Some(path) if load.is_none() => Some(read_trace(path)?),
        _ => None,
    };
    let load = load.unwrap_or(0.5);
    let catalog = evaluation::test_catalog(&cfg);
    let encoder = cfg.encoder()?;
    create_dir(out)?;
    let mut report = String::from(REPORT_HEADER);
    for &seed in seeds {
        let trace = match &fixed {
            Some(t) => t.clone(),
            None => evaluation::test_workload(&cfg, &catalog, load, seed)?,
        };
        if dump_image {
            let state = ClusterState::new(&cfg.sim, &trace)?;
            let image = encoder.encode(&state)?;
            write_file(&out.join(format!("image_{kind}_s{seed}.csv")), encoder.to_csv_grid(&image))?;
        }
        let ep = evaluation::evaluate(&cfg, kind, params.as_ref(), &trace, seed)?;
        write_file(&out.join(format!("episode_{kind}_s{seed}.csv")), ep.to_csv())?;
        let metrics = EpisodeMetrics::compute(&ep, !cfg.eval.unclamped_util);
        let label = load_label(trace.load_target);
        for (metric, dim, value) in metrics.rows() {
            writeln!(report, "s{seed},{kind},{label},{metric},{dim},{value}").unwrap();
        }
    }
    write_file(&out.join("report.csv"), &report)?;
    print!("{report}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn compare(
    policies: &[PolicyKind],
    loads: Option<&[f64]>,
    seeds: Option<&[u64]>,
    config: Option<&Path>,
    checkpoint: Option<&Path>,
    out: &Path,
    unclamped_util: bool,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    cfg.eval.unclamped_util |= unclamped_util;
    if let Some(loads) = loads {
        cfg.eval.loads = loads.to_vec();
    }
    if let Some(seeds) = seeds {
        cfg.eval.seeds = seeds.to_vec();
    }
    cfg.validate()?;
    let params = if policies.contains(&PolicyKind::DeepPlace) {
        Some(network_params(&cfg, checkpoint)?)
    } else {
        None
    };
    let results = evaluation::run_suite(&cfg, policies, &cfg.eval.loads, &cfg.eval.seeds, params.as_ref())?;
    create_dir(out)?;
    write_file(&out.join("comparison.csv"), results.comparison_csv())?;
    for (file, metrics) in [
        ("machines_used.csv", &["machines_max", "machines_mean"][..]),
        ("utilization.csv", &["avg_utilization"][..]),
        ("overutilization.csv", &["over_events", "overshoot_sum"][..]),
        ("fragmentation.csv", &["avg_fragmentation"][..]),
    ] {
        write_file(&out.join(file), results.metric_csv(metrics))?;
    }
    print_summary(&cfg, &results);
    Ok(())
}

fn print_summary(cfg: &RunConfig, results: &SuiteResults) {
    for &load in &cfg.eval.loads {
        for dim in 0..cfg.sim.num_dims {
            let d = dim.to_string();
            let dp = results.mean(PolicyKind::DeepPlace, load, "avg_utilization", &d);
            let tetris = results.mean(PolicyKind::Tetris, load, "avg_utilization", &d);
            if let (Some(dp), Some(t)) = (dp, tetris) {
                let rel = if t != 0.0 { format!("{:+.1}%", 100.0 * (dp - t) / t) } else { "n/a".into() };
                println!("load {load} dim {dim}: utilization deepplace {dp:.4} tetris {t:.4} ({rel})");
            }
        }
    }
}

fn config_defaults(out: Option<&Path>) -> Result<()> {
    let text = RunConfig::defaults_reference();
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenWorkload { load, horizon, seed, catalog, out, config } => {
            gen_workload(load, horizon, seed, catalog, &out, config.as_deref())
        }
        Command::Train { config, out, resume } => train(config.as_deref(), &out, resume.as_deref()),
        Command::Evaluate { policy, config, checkpoint, workload, load, seeds, out, dump_image, unclamped_util } => {
            evaluate(
                policy,
                config.as_deref(),
                checkpoint.as_deref(),
                workload.as_deref(),
                load,
                &seeds,
                &out,
                dump_image,
                unclamped_util,
            )
        }
        Command::Compare { policies, loads, seeds, config, checkpoint, out, unclamped_util } => compare(
            &policies,
            loads.as_deref(),
            seeds.as_deref(),
            config.as_deref(),
            checkpoint.as_deref(),
            &out,
            unclamped_util,
        ),
        Command::ConfigDefaults { out } => config_defaults(out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
