use std::path::PathBuf;

use anyhow::Context;
use log::info;
use scenecap::dataset::{DatasetPaths, MANIFEST_FILE};
use scenecap::splat::Footprint;
use scenecap::{build_dataset, parse_reconstruction, DatasetConfig, Format, Palette};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Reconstruction directory (cameras, images, points3D).
    #[arg(long)]
    recon: PathBuf,
    /// Reconstruction file format: binary or text.
    #[arg(long, default_value = "binary")]
    format: Format,
    /// Directory of photos, addressed by the image names in the reconstruction.
    #[arg(long)]
    photos: PathBuf,
    /// Directory of class-index PNG label maps, `<image name stem>.png`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Dataset name recorded in the manifest header.
    #[arg(long)]
    name: Option<String>,
    /// Short side of the rendered buffers.
    #[arg(long, default_value_t = 600)]
    min_dim: u64,
    /// Renders with a larger fraction of empty pixels are dropped.
    #[arg(long, default_value_t = 0.85)]
    empty_threshold: f64,
    /// Photos with a shorter side below this are dropped.
    #[arg(long, default_value_t = 450)]
    min_image_dim: u32,
    #[arg(long, default_value_t = 100)]
    val_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Use a square footprint instead of the Euclidean disk.
    #[arg(long)]
    square: bool,
    /// Palette JSON to use instead of the built-in 150-class table.
    #[arg(long)]
    palette: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let recon = parse_reconstruction(&args.recon, args.format)
        .with_context(|| format!("reading reconstruction from {}", args.recon.display()))?;
    info!(
        "loaded {} cameras, {} images, {} points",
        recon.cameras.len(),
        recon.images.len(),
        recon.points.len()
    );
    let palette = match &args.palette {
        Some(path) => Palette::load(path)?,
        None => Palette::ade20k(),
    };
    let name = args.name.clone().unwrap_or_else(|| {
        args.recon
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("dataset")
            .to_string()
    });
    let cfg = DatasetConfig {
        name,
        min_dim: args.min_dim,
        empty_threshold: args.empty_threshold,
        min_image_dim: args.min_image_dim,
        val_count: args.val_count,
        seed: args.seed,
        radius: args.radius,
        footprint: if args.square {
            Footprint::Square
        } else {
            Footprint::Disk
        },
    };
    let paths = DatasetPaths {
        photos_dir: args.photos,
        labels_dir: args.labels,
        out_dir: args.out,
    };
    let manifest = build_dataset(&recon, &paths, &cfg, &palette)?;
    let h = &manifest.header;
    info!(
        "kept {} of {} images ({} train, {} val); skipped: {}",
        h.kept,
        h.registered_images,
        h.train,
        h.val,
        serde_json::to_string(&h.skipped)?
    );
    info!("wrote {}", paths.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}
