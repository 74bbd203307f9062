//! `ionspec run | converge | presets` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical or I/O failure, 2 invalid config or usage,
//! 3 convergence check failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ionspec::cli::{convergence_report, load_config, preset, run, ExperimentConfig, PRESETS};
use ionspec::Error;

#[derive(Parser)]
#[command(name = "ionspec", version, about = "Multidimensional spectroscopy of trapped-ion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a shipped preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread cap.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rerun with cap + 1, alpha / 2 and a doubled grid and report the changes.
    Converge {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Shipped preset configs.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names and descriptions.
    List,
    /// Print a preset's config JSON.
    Show { name: String },
}

fn load(source: &Source) -> ionspec::Result<ExperimentConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => load_config(path),
        (None, Some(name)) => preset(name),
        (None, None) => unreachable!("clap enforces one source"),
    }
}

fn set_threads(threads: Option<usize>) -> ionspec::Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Json(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, out, threads } => set_threads(threads).and_then(|_| load(&source)).and_then(|cfg| {
            let outcome = run(&cfg, out.as_deref())?;
            for f in &outcome.files {
                println!("{}", outcome.output_dir.join(f).display());
            }
            Ok(ExitCode::SUCCESS)
        }),
        Command::Converge { source, threads } => set_threads(threads).and_then(|_| load(&source)).and_then(|cfg| {
            let report = convergence_report(&cfg)?;
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FLAG" };
                println!("{status} {:<15} {:.3e} (limit {:.3e})  {}", c.name, c.metric, c.threshold, c.detail);
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }),
        Command::Presets { action } => match action {
            PresetAction::List => PRESETS
                .iter()
                .map(|(name, _)| {
                    let cfg = preset(name)?;
                    println!("{name:<24} {}", cfg.description.unwrap_or_default());
                    Ok(())
                })
                .collect::<ionspec::Result<Vec<()>>>()
                .map(|_| ExitCode::SUCCESS),
            PresetAction::Show { name } => ionspec::cli::preset_text(&name)
                .map(|t| {
                    print!("{t}");
                    ExitCode::SUCCESS
                })
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`"))),
        },
    };
    result.unwrap_or_else(|e| fail(&e))
}
