//! Image reconstruction metrics: L1 and PSNR on the 0-255 scale and a
//! feature-space perceptual distance.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ImageRgb, RasterError};
use crate::style::{read_nrft, FeatureExtractor, FeaturePyramid, StyleError};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Features(#[from] StyleError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{name}: {reason}")]
    Pairing { name: String, reason: String },
}

/// Mean absolute difference over pixels and channels, scaled to 0-255.
pub fn l1(a: &ImageRgb, b: &ImageRgb) -> Result<f64, MetricError> {
    a.same_size(b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(255.0 * sum / a.data.len() as f64)
}

/// Mean squared error on the 0-255 scale.
pub fn mse(a: &ImageRgb, b: &ImageRgb) -> Result<f64, MetricError> {
    a.same_size(b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = 255.0 * (x - y);
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// `10 log10(255^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// A feature pyramid together with the tag of the extractor that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedFeatures {
    pub extractor: String,
    pub features: FeaturePyramid,
}

/// Sum over layers of the mean squared feature difference.
pub fn perceptual(a: &TaggedFeatures, b: &TaggedFeatures) -> Result<f64, MetricError> {
    if a.extractor != b.extractor {
        return Err(StyleError::ExtractorMismatch(a.extractor.clone(), b.extractor.clone()).into());
    }
    let (la, lb) = (&a.features.layers, &b.features.layers);
    if la.len() != lb.len() {
        return Err(StyleError::LayerCount(la.len(), lb.len()).into());
    }
    let mut total = 0.0;
    for (j, (fa, fb)) in la.iter().zip(lb).enumerate() {
        if fa.shape() != fb.shape() {
            return Err(StyleError::ShapeMismatch {
                layer: j,
                a: fa.shape(),
                b: fb.shape(),
            }
            .into());
        }
        if fa.data.is_empty() {
            continue;
        }
        let sq: f64 = fa
            .data
            .iter()
            .zip(&fb.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        total += sq / fa.data.len() as f64;
    }
    Ok(total)
}

pub fn perceptual_images(
    a: &ImageRgb,
    b: &ImageRgb,
    extractor: &dyn FeatureExtractor,
) -> Result<f64, MetricError> {
    a.same_size(b)?;
    let tag = extractor.tag();
    let fa = TaggedFeatures {
        extractor: tag.clone(),
        features: extractor.extract(a)?,
    };
    let fb = TaggedFeatures {
        extractor: tag,
        features: extractor.extract(b)?,
    };
    perceptual(&fa, &fb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    pub l1: f64,
    pub psnr: f64,
    pub perceptual: Option<f64>,
}

/// Per-image and mean metrics for a prediction/ground-truth set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub extractor: Option<String>,
    pub count: usize,
    pub mean_l1: f64,
    pub mean_psnr: f64,
    pub mean_perceptual: Option<f64>,
    pub images: Vec<ImageMetrics>,
}

impl MetricReport {
    pub fn from_images(extractor: Option<String>, images: Vec<ImageMetrics>) -> Self {
        let n = images.len();
        let mean = |f: &dyn Fn(&ImageMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                images.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mean_perceptual = if n > 0 && images.iter().all(|m| m.perceptual.is_some()) {
            Some(mean(&|m| m.perceptual.unwrap()))
        } else {
            None
        };
        MetricReport {
            extractor,
            count: n,
            mean_l1: mean(&|m| m.l1),
            mean_psnr: mean(&|m| m.psnr),
            mean_perceptual,
            images,
        }
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// A prediction and its ground truth, matched by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePair {
    pub name: String,
    pub pred: PathBuf,
    pub truth: PathBuf,
}

fn list_images(dir: &Path) -> Result<Vec<String>, MetricError> {
    let io = |source| MetricError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Pairs every image in `pred_dir` with the same file name in `truth_dir`.
/// Extra ground-truth images are ignored; a prediction without ground truth
/// is an error.
pub fn pair_directories(pred_dir: &Path, truth_dir: &Path) -> Result<Vec<ImagePair>, MetricError> {
    let pairs: Vec<ImagePair> = list_images(pred_dir)?
        .into_iter()
        .map(|name| ImagePair {
            pred: pred_dir.join(&name),
            truth: truth_dir.join(&name),
            name,
        })
        .collect();
    if let Some(p) = pairs.iter().find(|p| !p.truth.is_file()) {
        return Err(MetricError::Pairing {
            name: p.name.clone(),
            reason: format!("no ground truth at {}", p.truth.display()),
        });
    }
    Ok(pairs)
}

/// Where perceptual features come from, if anywhere.
pub enum PerceptualSource<'a> {
    None,
    Extractor(&'a dyn FeatureExtractor),
    /// Precomputed NRFT pyramids named `<file stem>.nrft` in each directory.
    Nrft {
        pred_dir: PathBuf,
        truth_dir: PathBuf,
    },
}

impl PerceptualSource<'_> {
    pub fn tag(&self) -> Option<String> {
        match self {
            PerceptualSource::None => None,
            PerceptualSource::Extractor(e) => Some(e.tag()),
            PerceptualSource::Nrft { .. } => Some("nrft".to_string()),
        }
    }
}

fn load_nrft(dir: &Path, name: &str) -> Result<FeaturePyramid, MetricError> {
    let stem = Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name);
    let path = dir.join(format!("{stem}.nrft"));
    let file = std::fs::File::open(&path).map_err(|source| MetricError::Io { path, source })?;
    Ok(read_nrft(std::io::BufReader::new(file))?)
}

fn evaluate_pair(pair: &ImagePair, source: &PerceptualSource) -> Result<ImageMetrics, MetricError> {
    let pred = ImageRgb::load(&pair.pred)?;
    let truth = ImageRgb::load(&pair.truth)?;
    let perceptual = match source {
        PerceptualSource::None => None,
        PerceptualSource::Extractor(e) => Some(perceptual_images(&pred, &truth, *e)?),
        PerceptualSource::Nrft {
            pred_dir,
            truth_dir,
        } => {
            let tagged = |features| TaggedFeatures {
                extractor: "nrft".into(),
                features,
            };
            let a = tagged(load_nrft(pred_dir, &pair.name)?);
            let b = tagged(load_nrft(truth_dir, &pair.name)?);
            Some(perceptual(&a, &b)?)
        }
    };
    Ok(ImageMetrics {
        name: pair.name.clone(),
        l1: l1(&pred, &truth)?,
        psnr: psnr(&pred, &truth)?,
        perceptual,
    })
}

/// Scores all pairs in parallel. Per-image results keep the input order.
pub fn evaluate_pairs(
    pairs: &[ImagePair],
    source: &PerceptualSource,
) -> Result<MetricReport, MetricError> {
    let images = pairs
        .par_iter()
        .map(|p| evaluate_pair(p, source))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricReport::from_images(source.tag(), images))
}
