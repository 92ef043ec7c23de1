use std::path::PathBuf;

use anyhow::{bail, Context};
use log::info;
use scenecap::metrics::{evaluate_pairs, pair_directories, PerceptualSource};
use scenecap::style::FilterBank;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of predicted images.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth images with matching file names.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Skip the perceptual distance.
    #[arg(long, conflicts_with_all = ["pred_features", "truth_features"])]
    no_perceptual: bool,
    /// Seed of the random filter bank used for the perceptual distance.
    #[arg(long, default_value_t = 0)]
    filterbank_seed: u64,
    /// Precomputed NRFT features for the predictions, `<stem>.nrft`.
    #[arg(long, requires = "truth_features")]
    pred_features: Option<PathBuf>,
    /// Precomputed NRFT features for the ground truth, `<stem>.nrft`.
    #[arg(long, requires = "pred_features")]
    truth_features: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let pairs = pair_directories(&args.pred, &args.truth)?;
    if pairs.is_empty() {
        bail!("no images found in {}", args.pred.display());
    }
    let bank = FilterBank::new(args.filterbank_seed);
    let source = match (args.no_perceptual, args.pred_features, args.truth_features) {
        (true, ..) => PerceptualSource::None,
        (false, Some(pred_dir), Some(truth_dir)) => PerceptualSource::Nrft {
            pred_dir,
            truth_dir,
        },
        _ => PerceptualSource::Extractor(&bank),
    };
    info!("scoring {} image pairs", pairs.len());
    let report = evaluate_pairs(&pairs, &source)?;
    crate::ensure_parent(&args.out)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&args.out, json + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    info!(
        "mean L1 {:.4}, mean PSNR {:.4} dB{}",
        report.mean_l1,
        report.mean_psnr,
        report
            .mean_perceptual
            .map(|p| format!(", mean perceptual {p:.6}"))
            .unwrap_or_default()
    );
    Ok(())
}
