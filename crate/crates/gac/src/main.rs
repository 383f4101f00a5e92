//! Command-line entry point: training runs, checkpoint evaluation, plot
//! emission, and the gradient self-check.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gac::agent::{ActNoise, Trainer};
use gac::error::{GacError, Result};
use gac::harness::checkpoint;
use gac::harness::config::RunConfig;
use gac::harness::gradcheck;
use gac::harness::metrics::MetricsWriter;
use gac::harness::plot;

#[derive(Parser)]
#[command(name = "gac", version, about = "Generative actor-critic training laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed listed in a config file, or resume a checkpoint.
    Train {
        /// Key = value config file.
        config: Option<PathBuf>,
        /// Continue a saved checkpoint in its own directory instead.
        #[arg(long, value_name = "CHECKPOINT", conflicts_with = "config")]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpointed policy and report mean/std returns.
    Eval {
        checkpoint: PathBuf,
        /// Evaluation episodes per report row.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Evaluate at this latent sigma instead of the configured test
        /// sigma; repeat the flag to compare several values in one report.
        #[arg(long = "latent-sigma", value_name = "SIGMA")]
        latent_sigma: Vec<f64>,
        /// Additionally dump this many freshly sampled evaluation actions
        /// to actions.csv next to the checkpoint.
        #[arg(long, value_name = "COUNT")]
        dump_actions: Option<usize>,
    },
    /// Render SVG charts from one or more run directories.
    Plot {
        /// Run directories holding metrics.csv or seed_<n>/metrics.csv.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Output directory for the SVG files.
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Compare analytic gradients of every loss against finite differences.
    Gradcheck {
        /// Independent random scenarios per suite.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Deliberately corrupt one gradient to verify failure detection.
        #[arg(long)]
        corrupt: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { config, resume } => match (config, resume) {
            (Some(path), None) => cmd_train(&path),
            (None, Some(ckpt)) => cmd_resume(&ckpt),
            (None, None) => Err(GacError::InvalidArgument(
                "train needs a config file or --resume <checkpoint>".into(),
            )),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        },
        Command::Eval { checkpoint, episodes, latent_sigma, dump_actions } => {
            cmd_eval(&checkpoint, episodes, &latent_sigma, dump_actions)
        }
        Command::Plot { dirs, out } => cmd_plot(&dirs, &out),
        Command::Gradcheck { seeds, corrupt } => cmd_gradcheck(seeds, corrupt),
    }
}

/// Trains every configured seed into its own subdirectory. The config is
/// fully validated before the first directory is created.
fn cmd_train(config_path: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    for &seed in &config.seeds {
        let dir = config.seed_dir(seed);
        fs::create_dir_all(&dir).map_err(|e| GacError::io(dir.clone(), e))?;
        let config_copy = dir.join("config.txt");
        fs::write(&config_copy, config.resolved_text()).map_err(|e| GacError::io(config_copy, e))?;
        let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"))?;
        let mut trainer =
            Trainer::new(&config.env_name, config.reward_scale, config.gac.clone(), seed)?;
        println!("seed {seed} -> {}", dir.display());
        run_loop(&mut trainer, &config, &dir, &mut metrics)?;
    }
    Ok(())
}

/// Continues a checkpointed run in the directory the checkpoint lives in.
/// Metrics rows beyond the checkpointed iteration are dropped before
/// appending, so the resumed file matches an uninterrupted run.
fn cmd_resume(ckpt: &Path) -> Result<()> {
    let (mut trainer, config) = checkpoint::load(ckpt)?;
    let dir = ckpt.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let config_copy = dir.join("config.txt");
    fs::write(&config_copy, config.resolved_text()).map_err(|e| GacError::io(config_copy, e))?;
    let metrics_path = dir.join("metrics.csv");
    let mut metrics = if metrics_path.is_file() {
        MetricsWriter::resume(&metrics_path, trainer.iteration())?
    } else {
        MetricsWriter::create(&metrics_path)?
    };
    if trainer.iteration() >= config.gac.iterations as u64 {
        println!(
            "seed {}: already at iteration {} of {}, nothing to do",
            trainer.root_seed(),
            trainer.iteration(),
            config.gac.iterations
        );
        return Ok(());
    }
    println!("seed {} resumes at iteration {} -> {}", trainer.root_seed(), trainer.iteration(), dir.display());
    run_loop(&mut trainer, &config, dir, &mut metrics)
}

fn run_loop(
    trainer: &mut Trainer,
    config: &RunConfig,
    dir: &Path,
    metrics: &mut MetricsWriter,
) -> Result<()> {
    let total = config.gac.iterations as u64;
    while trainer.iteration() < total {
        let row = trainer.run_iteration()?;
        metrics.append(&row)?;
        println!(
            "[seed {}] iter {}/{total} env_steps {} return {:.3} (std {:.3}) alpha {:.3} beta {:.4}",
            trainer.root_seed(),
            row.step,
            row.env_steps,
            row.eval_return_mean,
            row.eval_return_std,
            row.alpha,
            row.beta
        );
        if row.step % config.checkpoint_every as u64 == 0 && row.step < total {
            checkpoint::save(&dir.join(format!("checkpoint_{}.ckpt", row.step)), trainer, config)?;
        }
    }
    checkpoint::save(&dir.join("checkpoint_final.ckpt"), trainer, config)?;
    Ok(())
}

/// Evaluates a checkpoint, printing one row per requested latent sigma and
/// writing the same report next to the checkpoint.
fn cmd_eval(
    ckpt: &Path,
    episodes: usize,
    latent_sigma: &[f64],
    dump_actions: Option<usize>,
) -> Result<()> {
    if episodes == 0 {
        return Err(GacError::InvalidArgument("eval needs at least one episode".into()));
    }
    for &s in latent_sigma {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(GacError::InvalidArgument(format!(
                "latent sigma must be finite and non-negative, got {s}"
            )));
        }
    }
    let (mut trainer, config) = checkpoint::load(ckpt)?;
    let mut rows: Vec<(f64, gac::agent::EvalStats)> = Vec::new();
    if latent_sigma.is_empty() {
        rows.push((config.gac.latent.test_sigma, trainer.evaluate(episodes, ActNoise::Eval)?));
    } else {
        for &s in latent_sigma {
            rows.push((s, trainer.evaluate(episodes, ActNoise::Sigma(s))?));
        }
    }
    let mut report = String::new();
    report.push_str(&format!(
        "checkpoint: {}\nenv: {}\nalgorithm: {}\nseed: {}\nepisodes: {episodes}\n",
        ckpt.display(),
        config.env_name,
        config.gac.algorithm.name(),
        trainer.root_seed()
    ));
    report.push_str("latent_sigma,return_mean,return_std\n");
    for (sigma, stats) in &rows {
        report.push_str(&format!("{sigma},{},{}\n", stats.mean, stats.std));
    }
    print!("{report}");
    let report_path = ckpt.with_extension("eval.txt");
    fs::write(&report_path, &report).map_err(|e| GacError::io(report_path.clone(), e))?;
    println!("report written to {}", report_path.display());

    if let Some(n) = dump_actions {
        if n == 0 {
            return Err(GacError::InvalidArgument("--dump-actions needs a positive count".into()));
        }
        let actions = trainer.sample_eval_actions(n)?;
        let dir = ckpt.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dump_path = dir.join("actions.csv");
        plot::write_actions(&dump_path, &actions)?;
        println!("{n} actions written to {}", dump_path.display());
    }
    Ok(())
}

/// Renders the chart set for the given run directories. All inputs are read
/// and validated before the first file is written.
fn cmd_plot(dirs: &[PathBuf], out: &Path) -> Result<()> {
    let mut runs = Vec::with_capacity(dirs.len());
    for dir in dirs {
        runs.push(plot::collect_run(dir)?);
    }
    let mut scatters = Vec::new();
    for (dir, run) in dirs.iter().zip(&runs) {
        if let Some(actions) = plot::collect_actions(dir)? {
            let svg = plot::action_scatter(&format!("actions: {}", run.label), &actions)?;
            scatters.push((format!("actions_{}.svg", run.label), svg));
        }
    }
    let written = plot::write_plots(&runs, out)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    for (name, svg) in scatters {
        let path = out.join(name);
        fs::write(&path, svg).map_err(|e| GacError::io(path.clone(), e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_gradcheck(seeds: u64, corrupt: bool) -> Result<()> {
    let report = gradcheck::run(seeds, &[8, 8], corrupt)?;
    print!("{}", gradcheck::format_report(&report));
    if report.passed() {
        Ok(())
    } else {
        Err(GacError::InvalidArgument(format!(
            "gradient check exceeded tolerance {:e}",
            gradcheck::TOLERANCE
        )))
    }
}
