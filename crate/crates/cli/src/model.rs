use std::path::PathBuf;

use anyhow::{anyhow, Context};
use log::info;
use scenecap::buffer::{ALBEDO_B, ALBEDO_G, ALBEDO_R};
use scenecap::splat::Footprint;
use scenecap::{
    parse_reconstruction, render, serialize_reconstruction, Format, ImageRgb, PointCloud,
    SplatOptions, Viewpoint,
};

#[derive(Debug, clap::Args)]
pub struct RenderArgs {
    #[arg(long)]
    recon: PathBuf,
    #[arg(long, default_value = "binary")]
    format: Format,
    /// Registered image whose viewpoint is rendered.
    #[arg(long)]
    image_id: u32,
    /// Output NRDB file.
    #[arg(long)]
    out: PathBuf,
    /// Rescale the camera so its short side has this many pixels.
    #[arg(long)]
    min_dim: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    square: bool,
    /// Also write the albedo channels as a PNG.
    #[arg(long)]
    preview: Option<PathBuf>,
}

pub fn render_view(args: RenderArgs) -> anyhow::Result<()> {
    let recon = parse_reconstruction(&args.recon, args.format)
        .with_context(|| format!("reading reconstruction from {}", args.recon.display()))?;
    let image = recon
        .images
        .get(&args.image_id)
        .ok_or_else(|| anyhow!("no registered image with id {}", args.image_id))?;
    let camera = recon.camera_for(image).expect("validated reconstruction");
    let mut vp = Viewpoint::from_image(image, camera)?;
    if let Some(min_dim) = args.min_dim {
        vp = vp.scale_to_min_dim(min_dim);
    }
    let opts = SplatOptions {
        radius: args.radius,
        footprint: if args.square {
            Footprint::Square
        } else {
            Footprint::Disk
        },
    };
    let buf = render(&PointCloud::from_reconstruction(&recon), &vp, &opts)?;
    crate::ensure_parent(&args.out)?;
    buf.save(&args.out)?;
    info!(
        "rendered {}x{} view of image {} ({:.1}% empty) to {}",
        buf.width(),
        buf.height(),
        args.image_id,
        100.0 * buf.empty_fraction(),
        args.out.display()
    );
    if let Some(path) = args.preview {
        let [r, g, b] =
            [ALBEDO_R, ALBEDO_G, ALBEDO_B].map(|n| buf.channel(n).expect("render channel"));
        let preview = ImageRgb::from_fn(buf.width(), buf.height(), |x, y| {
            let i = y * buf.width() + x;
            [r[i], g[i], b[i]].map(f64::from)
        });
        crate::ensure_parent(&path)?;
        preview.save_png(&path)?;
    }
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "binary")]
    from: Format,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "text")]
    to: Format,
}

pub fn convert(args: ConvertArgs) -> anyhow::Result<()> {
    let recon = parse_reconstruction(&args.input, args.from)
        .with_context(|| format!("reading reconstruction from {}", args.input.display()))?;
    serialize_reconstruction(&recon, &args.output, args.to)?;
    info!(
        "converted {} cameras, {} images, {} points to {}",
        recon.cameras.len(),
        recon.images.len(),
        recon.points.len(),
        args.output.display()
    );
    Ok(())
}
