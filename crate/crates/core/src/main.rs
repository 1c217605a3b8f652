use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use pyrosort::dataset::Split;
use pyrosort::experiment::{self, Context, DEFAULT_TARGET};
use pyrosort::Result;

#[derive(Debug, Parser)]
#[command(name = "pyrosort", version, about = "Component sorting experiments: dataset, training, evaluation")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides split_seed and training.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replace existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop, split and write the dataset manifest.
    BuildDataset,
    /// Train the configured preset.
    Train,
    /// Evaluate a checkpoint on a manifest split.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = DEFAULT_TARGET)]
        target: String,
    },
    /// Train four_class, scratch and binary presets and compare them.
    Ablate {
        /// Run the presets concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Material-flow report for one target class.
    Flow {
        /// Confusion matrix JSON: {"classes": [...], "counts": [[...]]}.
        #[arg(long, conflicts_with = "checkpoint")]
        confusion: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = DEFAULT_TARGET)]
        target: String,
    },
    /// Accuracy and loss curves from a history CSV.
    Plot {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        run_id: Option<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut ctx = Context::new(&cli.out);
    ctx.seed = cli.seed;
    ctx.force = cli.force;
    if let Some(path) = &cli.config {
        ctx = ctx.with_config_file(path)?;
    }
    match cli.command {
        Command::BuildDataset => {
            let b = experiment::cmd_build_dataset(&ctx)?;
            print!("{}", b.manifest.split_table());
            println!("manifest: {}", b.manifest_path.display());
        }
        Command::Train => {
            let m = experiment::cmd_train(&ctx)?;
            println!(
                "{}: best epoch {}, stopped at {}{}",
                m.run_id,
                m.best_epoch,
                m.stopped_epoch,
                m.test_accuracy.map(|a| format!(", test accuracy {:.2}%", 100.0 * a)).unwrap_or_default()
            );
            println!("run directory: {}", experiment::run_dir(&ctx.out, &m.run_id).display());
        }
        Command::Evaluate {
            checkpoint,
            manifest,
            split,
            target,
        } => {
            let e = experiment::cmd_evaluate(&ctx, checkpoint.as_deref(), manifest.as_deref(), split, &target)?;
            print!("{}", e.report.confusion_matrix()?.render());
            print!("{}", e.report.render());
            print!("{}", e.flow.summary());
            println!("report: {}\nflow: {}", e.report_path.display(), e.flow_path.display());
        }
        Command::Ablate { parallel } => {
            let (c, path) = experiment::cmd_ablate(&ctx, parallel)?;
            print!("{}", c.render());
            println!("comparison: {}", path.display());
        }
        Command::Flow {
            confusion,
            checkpoint,
            manifest,
            split,
            target,
        } => {
            let (f, path) =
                experiment::cmd_flow(&ctx, confusion.as_deref(), checkpoint.as_deref(), manifest.as_deref(), split, &target)?;
            print!("{}", f.summary());
            println!("report: {}", path.display());
        }
        Command::Plot { history, run_id } => {
            let p = experiment::cmd_plot(&ctx, &history, run_id.as_deref())?;
            println!("{}\n{}", p.accuracy.display(), p.loss.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
