use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jed_core::detectors::{flops_estimate, linear_detector_flops, FlopsAlgorithm, FlopsReport};
use jed_core::harness::{
    emit_csv, emit_plot, preset, read_config, run_ber_sweep, run_selftest, threads_from_env, training_setup,
    with_threads, Algorithm, ExperimentConfig, SweepResult, TrainingSpec, UnfoldedSource,
};
use jed_core::unfolded::{save_params, train};
use jed_core::{Error, LinkScenario, ParamMode};

#[derive(Parser)]
#[command(name = "mimo-jed", version, about = "Joint channel estimation and detection BER simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment file (`key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel realizations per SNR point; overrides the configuration.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads [default: $MIMO_JED_THREADS, else all cores].
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment file given by --config.
    Sweep,
    /// Run a built-in experiment (exp1 to exp8).
    Preset { name: String },
    /// Train JED-U-ADMM and write its parameters.
    Train(TrainArgs),
    /// Print the FLOPS model for one configuration.
    Flops(FlopsArgs),
    /// Run the randomized invariant checks.
    Selftest {
        /// Random instances per check.
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Receive antennas (ignored with --config).
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Users (ignored with --config).
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 512)]
    td: usize,
    #[arg(long, default_value_t = 10)]
    layers: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Shared)]
    mode: ModeArg,
    /// Training SNR in dB.
    #[arg(long, default_value_t = 16.0)]
    snr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Output file [default: <out>/u_admm_<N>x<K>_L<layers>_<mode>.toml].
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Shared,
    Unshared,
}

#[derive(Args)]
struct FlopsArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    /// Pilot slots [default: K].
    #[arg(long)]
    tt: Option<u64>,
    #[arg(long)]
    td: u64,
    /// Iterations.
    #[arg(long, default_value_t = 1)]
    l: u64,
    #[arg(long, value_enum, default_value_t = AlgoArg::JedAdmm)]
    algo: AlgoArg,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AlgoArg {
    JedAm,
    JedAdmm,
    Zf,
    Mmse,
}

fn grouped(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn apply_overrides(c: &mut ExperimentConfig, g: &Global) {
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(t) = g.trials {
        c.trials = t;
    }
}

fn run_configs(configs: &[ExperimentConfig]) -> anyhow::Result<Vec<SweepResult>> {
    let mut results = Vec::with_capacity(configs.len());
    for c in configs {
        let start = Instant::now();
        let r = run_ber_sweep(c).with_context(|| format!("sweep {}", c.series_label()))?;
        eprintln!("{} done in {:.1}s", c.series_label(), start.elapsed().as_secs_f64());
        for p in &r.points {
            println!(
                "{:<40} snr {:>5.1} dB  ber {:.4e}  stderr {:.1e}  failed {}/{}",
                c.series_label(),
                p.snr_db,
                p.ber,
                p.stderr,
                p.trials_failed,
                p.trials
            );
            if p.is_flagged() {
                eprintln!(
                    "warning: {} at {} dB: {} of {} trials failed",
                    c.series_label(),
                    p.snr_db,
                    p.trials_failed,
                    p.trials
                );
            }
        }
        results.push(r);
    }
    Ok(results)
}

fn write_outputs(results: &[SweepResult], out: &Path, stem: &str, format: Format) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if matches!(format, Format::Csv | Format::Both) {
        let path = out.join(format!("{stem}.csv"));
        emit_csv(results, &path)?;
        eprintln!("wrote {}", path.display());
    }
    if matches!(format, Format::Svg | Format::Both) {
        let path = out.join(format!("{stem}.svg"));
        emit_plot(results, &path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn print_flops(name: &str, r: &FlopsReport, iterations: u64) {
    println!("algorithm      {name}");
    println!("init           {}", grouped(r.init_flops));
    println!("per-iteration  {}", grouped(r.per_iteration_flops));
    println!("iterations     {iterations}");
    println!("total          {}", grouped(r.total_flops));
}

fn train_command(args: &TrainArgs, g: &Global) -> anyhow::Result<()> {
    let (mut config, spec) = match &g.config {
        Some(path) => {
            let c = read_config(path)?;
            if c.algorithm != Algorithm::JedUAdmm {
                bail!(Error::Usage(format!("{}: algorithm: train needs jed_u_admm, got {}", path.display(), c.algorithm)));
            }
            let spec = match &c.unfolded {
                UnfoldedSource::Train(t) => *t,
                UnfoldedSource::Untrained(mode) => TrainingSpec::new(*mode, args.snr),
                UnfoldedSource::File(p) => bail!(Error::Usage(format!(
                    "{}: unfolded: already points at trained parameters {}",
                    path.display(),
                    p.display()
                ))),
            };
            (c, spec)
        }
        None => {
            let mode = match args.mode {
                ModeArg::Shared => ParamMode::Shared,
                ModeArg::Unshared => ParamMode::Unshared,
            };
            let scenario = LinkScenario::iid(args.n, args.k, args.td);
            let c = ExperimentConfig::new("train", scenario, Algorithm::JedUAdmm, args.layers, vec![args.snr]);
            let spec = TrainingSpec {
                mode,
                snr_db: args.snr,
                epochs: args.epochs,
                learning_rate: args.lr,
                batch_size: args.batch,
            };
            (c, spec)
        }
    };
    apply_overrides(&mut config, g);
    config.validate()?;
    let (tc, init) = training_setup(&config, &spec)?;
    let start = Instant::now();
    let outcome = train(&tc, &init)?;
    let hist = &outcome.loss_history;
    eprintln!(
        "trained {} epochs in {:.1}s, loss {:.4} -> {:.4}",
        hist.len(),
        start.elapsed().as_secs_f64(),
        hist.first().copied().unwrap_or(f64::NAN),
        hist.last().copied().unwrap_or(f64::NAN)
    );
    let ch = &config.scenario.channel;
    let mode = match spec.mode {
        ParamMode::Shared => "shared",
        ParamMode::Unshared => "unshared",
    };
    let path = match &args.params {
        Some(p) => p.clone(),
        None => {
            std::fs::create_dir_all(&g.out).map_err(|e| Error::io(&g.out, e))?;
            g.out.join(format!("u_admm_{}x{}_L{}_{mode}.toml", ch.n_rx, ch.n_tx, config.iterations))
        }
    };
    save_params(&path, &outcome.trained)?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let g = &cli.global;
    if g.trials == Some(0) {
        bail!(Error::Usage("--trials: must be positive".into()));
    }
    let threads = match g.parallelism {
        Some(0) => bail!(Error::Usage("--parallelism: must be positive".into())),
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    with_threads(threads, || -> anyhow::Result<bool> {
        match &cli.command {
            Command::Sweep => {
                let Some(path) = &g.config else {
                    bail!(Error::Usage("sweep needs --config <path>".into()));
                };
                let mut c = read_config(path)?;
                apply_overrides(&mut c, g);
                let results = run_configs(std::slice::from_ref(&c))?;
                write_outputs(&results, &g.out, &c.experiment, g.format)?;
            }
            Command::Preset { name } => {
                let mut configs = preset(name)?;
                for c in &mut configs {
                    apply_overrides(c, g);
                }
                let results = run_configs(&configs)?;
                write_outputs(&results, &g.out, name, g.format)?;
            }
            Command::Train(args) => train_command(args, g)?,
            Command::Flops(a) => {
                let tt = a.tt.unwrap_or(a.k);
                if tt < a.k {
                    bail!(Error::Usage(format!("--tt: need at least K = {} pilot slots", a.k)));
                }
                let (name, report, iters) = match a.algo {
                    AlgoArg::JedAm => ("jed_am", flops_estimate(FlopsAlgorithm::JedAm, a.n, a.k, tt, a.td, a.l), a.l),
                    AlgoArg::JedAdmm => ("jed_admm", flops_estimate(FlopsAlgorithm::JedAdmm, a.n, a.k, tt, a.td, a.l), a.l),
                    AlgoArg::Zf => ("zf", linear_detector_flops(a.n, a.k, a.td), 1),
                    AlgoArg::Mmse => ("mmse", linear_detector_flops(a.n, a.k, a.td), 1),
                };
                print_flops(name, &report, iters);
            }
            Command::Selftest { cases } => {
                let results = run_selftest(g.seed.unwrap_or(1), *cases);
                let mut ok = true;
                for r in &results {
                    match &r.failure {
                        None => println!("PASS {} ({} cases)", r.name, r.cases),
                        Some(f) => {
                            ok = false;
                            println!("FAIL {}: {f}", r.name);
                        }
                    }
                }
                return Ok(ok);
            }
        }
        Ok(true)
    })?
}

/// Error chain joined by `: `, skipping causes already quoted by their parent.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {}", diagnostic(&e));
            if let Some(Error::Usage(_)) = e.downcast_ref::<Error>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
