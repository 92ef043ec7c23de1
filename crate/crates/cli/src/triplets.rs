use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use log::info;
use scenecap::dataset::Split;
use scenecap::raster::{self, load_rgb8};
use scenecap::style::{read_nrft, FeatureExtractor, FilterBank};
use scenecap::{mine_triplets, GramSet, ImageRgb, Manifest, TripletConfig};

/// `filterbank` or `nrft:DIR`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    FilterBank,
    Nrft(PathBuf),
}

impl FromStr for FeatureSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "filterbank" => Ok(FeatureSource::FilterBank),
            Some(("nrft", dir)) if !dir.is_empty() => Ok(FeatureSource::Nrft(dir.into())),
            _ => Err(format!("expected `filterbank` or `nrft:DIR`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitFilter {
    Train,
    Val,
    All,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset manifest written by build-dataset.
    #[arg(long)]
    manifest: PathBuf,
    /// Feature source: `filterbank`, or `nrft:DIR` with `<image_id>.nrft` files.
    #[arg(long, default_value = "filterbank")]
    features: FeatureSource,
    /// Neighbour pool size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Separation margin recorded with the triplets.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    n_per_anchor: usize,
    /// Which manifest samples take part.
    #[arg(long, value_enum, default_value_t = SplitFilter::Train)]
    split: SplitFilter,
    /// Seed of the random filter bank.
    #[arg(long, default_value_t = 0)]
    filterbank_seed: u64,
    /// Photos are downscaled so their longer side is at most this many pixels
    /// before filter-bank features are computed. 0 keeps full resolution.
    #[arg(long, default_value_t = 256)]
    max_side: u32,
    #[arg(long)]
    out: PathBuf,
}

fn downscale(img: image::RgbImage, max_side: u32) -> image::RgbImage {
    let (w, h) = img.dimensions();
    let long = w.max(h);
    if max_side == 0 || long <= max_side {
        return img;
    }
    let s = f64::from(max_side) / f64::from(long);
    let nw = ((f64::from(w) * s).round() as u32).max(1);
    let nh = ((f64::from(h) * s).round() as u32).max(1);
    raster::resize_rgb8(&img, nw, nh)
}

fn filterbank_grams(photo: &Path, bank: &FilterBank, max_side: u32) -> anyhow::Result<GramSet> {
    let img = downscale(load_rgb8(photo)?, max_side);
    let pyramid = bank.extract(&ImageRgb::from_rgb8(&img))?;
    Ok(GramSet::from_pyramid(&pyramid))
}

fn nrft_grams(dir: &Path, image_id: u32) -> anyhow::Result<GramSet> {
    let path = dir.join(format!("{image_id}.nrft"));
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let pyramid = read_nrft(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(GramSet::from_pyramid(&pyramid))
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let manifest = Manifest::load(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let root = args.manifest.parent().unwrap_or(Path::new("."));
    let samples: Vec<_> = manifest
        .samples
        .iter()
        .filter(|s| match args.split {
            SplitFilter::All => true,
            SplitFilter::Train => s.split == Split::Train,
            SplitFilter::Val => s.split == Split::Val,
        })
        .collect();
    if samples.is_empty() {
        bail!("no {:?} samples in {}", args.split, args.manifest.display());
    }
    let cfg = TripletConfig {
        k: args.k,
        alpha: args.alpha,
        seed: args.seed,
        n_per_anchor: args.n_per_anchor,
    };
    cfg.validate()?;

    let bank = FilterBank::new(args.filterbank_seed);
    let extractor = match &args.features {
        FeatureSource::FilterBank => bank.tag(),
        FeatureSource::Nrft(_) => "nrft".to_string(),
    };
    info!(
        "computing style statistics for {} images ({extractor})",
        samples.len()
    );
    let grams = samples
        .iter()
        .map(|s| match &args.features {
            FeatureSource::FilterBank => {
                filterbank_grams(&root.join(&s.photo), &bank, args.max_side)
            }
            FeatureSource::Nrft(dir) => nrft_grams(dir, s.image_id),
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let ids: Vec<u32> = samples.iter().map(|s| s.image_id).collect();
    let set = mine_triplets(&ids, &grams, &cfg)?;

    crate::ensure_parent(&args.out)?;
    let file = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    set.write_jsonl(&extractor, ids.len(), &mut w)?;
    std::io::Write::flush(&mut w)?;
    info!(
        "wrote {} triplets to {}",
        set.triplets.len(),
        args.out.display()
    );
    Ok(())
}
