use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mnac_cli::config::ExperimentConfig;
use mnac_cli::format::format_real;
use mnac_cli::plot::{run_plot, PlotOptions};
use mnac_cli::report::run_capacity;
use mnac_cli::sweep::{run_sweep, sweep_path};
use mnac_cli::{thread_limit, CliError};

#[derive(Parser)]
#[command(
    name = "mnac",
    version,
    about = "Activity detection experiments for the non-coherent many-access channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal rate, thresholds and identification cost per SNR point.
    Capacity(RunArgs),
    /// Monte Carlo success probabilities over the configured grid.
    Sweep(RunArgs),
    /// SVG figures from sweep and capacity CSVs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; default `run.out`, else `out/` next to the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides `run.target_success`.
    #[arg(long)]
    target_success: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep or capacity CSVs; defaults to the outputs named by `--config`.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the SVGs; defaults to the config's output directory, else the current one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    target_success: Option<f64>,
    /// Decoder whose sweep defines the empirical cost curve.
    #[arg(long, default_value = "bp_st")]
    decoder: String,
    #[arg(long, default_value = "exact")]
    criterion: String,
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        cfg.run.trials = trials;
    }
    if let Some(t) = args.target_success {
        cfg.run.target_success = t;
    }
    let out = out_dir(args.out.as_deref(), &cfg, &args.config);
    Ok((cfg, out))
}

fn out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| config_path.parent().unwrap_or(Path::new(".")).join("out"))
}

fn capacity(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = load(args)?;
    let (path, rows) = run_capacity(&cfg, &out)?;
    println!(
        "{:>8} {:>10} {:>10} {:>8} {:>10} {:>10} {:>10}",
        "snr_db", "C", "gamma*", "q*", "n(l)", "n0(l)", "bound"
    );
    for row in &rows {
        let r = &row.report;
        println!(
            "{:>8} {:>10.6} {:>10.4} {:>8.4} {:>10.1} {:>10.1} {:>10.1}",
            format_real(row.snr_db),
            r.c_star,
            r.gamma_star,
            r.q_star,
            r.n_required,
            r.gaussian_baseline,
            r.sublinear_lower_bound
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = load(args)?;
    let summary = run_sweep(&cfg, &out)?;
    eprintln!(
        "wrote {} ({} cells simulated, {} rows reused)",
        summary.path.display(),
        summary.computed_cells,
        summary.reused_rows
    );
    if summary.infeasible.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(summary.infeasible.join("; ")))
    }
}

fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let mut opts = PlotOptions {
        cost_decoder: args.decoder.clone(),
        cost_criterion: args.criterion.clone(),
        ..PlotOptions::default()
    };
    let mut inputs = args.inputs.clone();
    let mut out = args.out.clone();
    if let Some(path) = &args.config {
        let cfg = ExperimentConfig::load(path)?;
        opts.target_success = cfg.run.target_success;
        let dir = out_dir(None, &cfg, path);
        if inputs.is_empty() {
            inputs.push(sweep_path(&cfg, &dir));
            let cap = mnac_cli::report::capacity_path(&cfg, &dir);
            if cap.exists() {
                inputs.push(cap);
            }
        }
        out.get_or_insert(dir);
    }
    if let Some(t) = args.target_success {
        opts.target_success = t;
    }
    if !(opts.target_success > 0.0 && opts.target_success <= 1.0) {
        return Err(CliError::Config(format!(
            "--target-success must lie in (0, 1], got {}",
            opts.target_success
        )));
    }
    if inputs.is_empty() {
        return Err(CliError::Config("plot needs CSV inputs or --config".into()));
    }
    let out = out.unwrap_or_else(|| PathBuf::from("."));
    for path in run_plot(&inputs, &out, &opts)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = thread_limit(std::env::var("MNAC_THREADS").ok().as_deref())?;
    let job = || match &cli.command {
        Command::Capacity(a) => capacity(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("MNAC_THREADS: {e}")))?
            .install(job),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mnac: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
