//! Gram-matrix style statistics, style distances, the per-layer triplet
//! hinge and style-based triplet mining for appearance pretraining.

mod filterbank;
mod mining;
mod nrft;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filterbank::{FeatureExtractor, FilterBank, FILTERBANK_LEVELS};
pub use mining::{
    distance_matrix, mine_triplets, neighbor_pools, NeighborPools, Triplet, TripletFileHeader,
    TripletSet,
};
pub use nrft::{read_nrft, write_nrft, NRFT_MAGIC, NRFT_VERSION};

#[derive(Debug, Error)]
pub enum StyleError {
    #[error("layer count mismatch: {0} vs {1}")]
    LayerCount(usize, usize),
    #[error("layer {layer}: shape mismatch {a:?} vs {b:?}")]
    ShapeMismatch {
        layer: usize,
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("need at least k+1 = {needed} images for mining, got {got}; lower k")]
    TooFewImages { needed: usize, got: usize },
    #[error("invalid triplet config: {0}")]
    InvalidConfig(String),
    #[error("feature extractor mismatch: {0:?} vs {1:?}")]
    ExtractorMismatch(String, String),
    #[error("empty feature pyramid or zero-sized layer")]
    EmptyFeatures,
    #[error("NRFT: {0}")]
    Nrft(String),
    #[error("triplet file line {line}: {reason}")]
    TripletFile { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One layer of activations, `channels x height x width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width, "feature map size");
        FeatureMap {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap::new(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Ordered layers of feature maps, shallow to deep.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub layers: Vec<FeatureMap>,
}

impl FeaturePyramid {
    pub fn validate(&self) -> Result<(), StyleError> {
        if self.layers.is_empty() || self.layers.iter().any(|l| l.data.is_empty()) {
            return Err(StyleError::EmptyFeatures);
        }
        Ok(())
    }
}

/// Symmetric `dim x dim` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Gram {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramSet {
    pub layers: Vec<Gram>,
}

impl GramSet {
    pub fn from_pyramid(features: &FeaturePyramid) -> GramSet {
        GramSet {
            layers: features.layers.iter().map(gram).collect(),
        }
    }
}

/// `G = F F^T / (C H W)` with `F` the `C x (H W)` flattening. Only the upper
/// triangle is accumulated; the lower one is mirrored so `G` is exactly
/// symmetric.
pub fn gram(f: &FeatureMap) -> Gram {
    let c = f.channels;
    let norm = (f.channels * f.height * f.width) as f64;
    let mut data = vec![0.0; c * c];
    let rows: Vec<Vec<(usize, f64)>> = (0..c)
        .into_par_iter()
        .map(|a| {
            let fa = f.plane(a);
            (a..c)
                .map(|b| {
                    let fb = f.plane(b);
                    let dot: f64 = fa.iter().zip(fb).map(|(x, y)| x * y).sum();
                    (b, dot / norm)
                })
                .collect()
        })
        .collect();
    for (a, row) in rows.into_iter().enumerate() {
        for (b, v) in row {
            data[a * c + b] = v;
            data[b * c + a] = v;
        }
    }
    Gram { dim: c, data }
}

fn check_shapes(a: &GramSet, b: &GramSet) -> Result<(), StyleError> {
    if a.layers.len() != b.layers.len() {
        return Err(StyleError::LayerCount(a.layers.len(), b.layers.len()));
    }
    for (j, (ga, gb)) in a.layers.iter().zip(&b.layers).enumerate() {
        if ga.dim != gb.dim {
            return Err(StyleError::ShapeMismatch {
                layer: j,
                a: (ga.dim, ga.dim, 1),
                b: (gb.dim, gb.dim, 1),
            });
        }
    }
    Ok(())
}

fn sq_frobenius(a: &Gram, b: &Gram) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Per-layer squared Frobenius distances `||g_a^j - g_b^j||_F^2`.
pub fn layer_distances(a: &GramSet, b: &GramSet) -> Result<Vec<f64>, StyleError> {
    check_shapes(a, b)?;
    Ok(a.layers
        .iter()
        .zip(&b.layers)
        .map(|(ga, gb)| sq_frobenius(ga, gb))
        .collect())
}

/// Style loss between two images: the sum of per-layer squared Frobenius
/// distances between their Gram matrices.
pub fn style_distance(a: &GramSet, b: &GramSet) -> Result<f64, StyleError> {
    Ok(layer_distances(a, b)?.into_iter().sum())
}

/// `sum_j max(||g_i^j - g_p^j||^2 - ||g_i^j - g_n^j||^2 + alpha, 0)`; the hinge
/// is taken per layer before summing.
pub fn triplet_loss(
    anchor: &GramSet,
    positive: &GramSet,
    negative: &GramSet,
    alpha: f64,
) -> Result<f64, StyleError> {
    let dp = layer_distances(anchor, positive)?;
    let dn = layer_distances(anchor, negative)?;
    Ok(dp
        .iter()
        .zip(&dn)
        .map(|(p, n)| (p - n + alpha).max(0.0))
        .sum())
}

/// Mining parameters, echoed into the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletConfig {
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n_per_anchor: usize,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            k: 10,
            alpha: 0.3,
            seed: 0,
            n_per_anchor: 4,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<(), StyleError> {
        if self.k == 0 {
            return Err(StyleError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(StyleError::InvalidConfig(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}
