use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod dataset;
mod metrics;
mod model;
mod triplets;

#[derive(Debug, Parser)]
#[command(
    name = "scenecap",
    version,
    about = "Deep-buffer datasets, style triplets and image metrics"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render deep buffers for every registered image and write an aligned dataset.
    BuildDataset(dataset::Args),
    /// Mine style-based (anchor, positive, negative) triplets from a manifest.
    MineTriplets(triplets::Args),
    /// Compare predicted images against ground truth.
    Metrics(metrics::Args),
    /// Render a single registered view to an NRDB file.
    Render(model::RenderArgs),
    /// Convert a reconstruction between binary and text.
    Convert(model::ConvertArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = scenecap::configure_threads(n) {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::BuildDataset(args) => dataset::run(args),
        Command::MineTriplets(args) => triplets::run(args),
        Command::Metrics(args) => metrics::run(args),
        Command::Render(args) => model::render_view(args),
        Command::Convert(args) => model::convert(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub(crate) fn ensure_parent(path: &std::path::Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}
