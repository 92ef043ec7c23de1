//! Deterministic random-filter feature extractor.
//!
//! Level 1 convolves the RGB image with 16 random 3x3 kernels and rectifies.
//! Each further level average-pools the previous level 2x and applies twice as
//! many kernels. Kernels have zero bias and unit L2 norm, so a black image
//! yields an all-zero pyramid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{FeatureMap, FeaturePyramid, StyleError};
use crate::raster::ImageRgb;

pub const FILTERBANK_LEVELS: usize = 4;
const BASE_KERNELS: usize = 16;

/// Anything that turns an image into a feature pyramid.
pub trait FeatureExtractor: Sync {
    /// Identifies the extractor so features from different sources are never
    /// compared with each other.
    fn tag(&self) -> String;

    fn extract(&self, image: &ImageRgb) -> Result<FeaturePyramid, StyleError>;
}

/// Kernels for one level: `out x in x 3 x 3`.
#[derive(Debug, Clone, PartialEq)]
struct Bank {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    seed: u64,
    nonnegative: bool,
    levels: Vec<Bank>,
}

impl FilterBank {
    pub fn new(seed: u64) -> Self {
        Self::build(seed, false)
    }

    /// Same construction with every kernel weight replaced by its absolute
    /// value.
    pub fn nonnegative(seed: u64) -> Self {
        Self::build(seed, true)
    }

    fn build(seed: u64, nonnegative: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = 3;
        let mut levels = Vec::with_capacity(FILTERBANK_LEVELS);
        for level in 0..FILTERBANK_LEVELS {
            let outputs = BASE_KERNELS << level;
            let taps = inputs * 9;
            let mut weights = Vec::with_capacity(outputs * taps);
            for _ in 0..outputs {
                let mut k: Vec<f64> = (0..taps)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        if nonnegative {
                            v.abs()
                        } else {
                            v
                        }
                    })
                    .collect();
                let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut k {
                    *v /= norm;
                }
                weights.extend(k);
            }
            levels.push(Bank {
                inputs,
                outputs,
                weights,
            });
            inputs = outputs;
        }
        FilterBank {
            seed,
            nonnegative,
            levels,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level_channels(&self) -> Vec<usize> {
        self.levels.iter().map(|b| b.outputs).collect()
    }

    pub fn features(&self, image: &ImageRgb) -> Result<FeaturePyramid, StyleError> {
        if image.width == 0 || image.height == 0 {
            return Err(StyleError::EmptyFeatures);
        }
        let mut input = image_to_map(image);
        let mut layers = Vec::with_capacity(self.levels.len());
        for (j, bank) in self.levels.iter().enumerate() {
            if j > 0 {
                input = avg_pool2(&input);
            }
            let out = conv3x3_relu(&input, bank);
            layers.push(out.clone());
            input = out;
        }
        Ok(FeaturePyramid { layers })
    }
}

impl FeatureExtractor for FilterBank {
    fn tag(&self) -> String {
        if self.nonnegative {
            format!("filterbank-nonneg:{}", self.seed)
        } else {
            format!("filterbank:{}", self.seed)
        }
    }

    fn extract(&self, image: &ImageRgb) -> Result<FeaturePyramid, StyleError> {
        self.features(image)
    }
}

fn image_to_map(image: &ImageRgb) -> FeatureMap {
    let n = image.num_pixels();
    let mut data = vec![0.0; 3 * n];
    for (i, px) in image.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * n + i] = px[c];
        }
    }
    FeatureMap::new(3, image.height, image.width, data)
}

/// 2x2 average pooling; odd trailing rows/columns are dropped and a side of
/// length 1 stays 1.
fn avg_pool2(f: &FeatureMap) -> FeatureMap {
    let (h2, w2) = ((f.height / 2).max(1), (f.width / 2).max(1));
    let mut out = FeatureMap::zeros(f.channels, h2, w2);
    for c in 0..f.channels {
        let src = f.plane(c);
        for y in 0..h2 {
            for x in 0..w2 {
                let mut sum = 0.0;
                let mut n = 0.0;
                for sy in 2 * y..(2 * y + 2).min(f.height) {
                    for sx in 2 * x..(2 * x + 2).min(f.width) {
                        sum += src[sy * f.width + sx];
                        n += 1.0;
                    }
                }
                out.data[(c * h2 + y) * w2 + x] = sum / n;
            }
        }
    }
    out
}

/// Zero-padded same-size 3x3 convolution followed by `max(0, .)`.
fn conv3x3_relu(input: &FeatureMap, bank: &Bank) -> FeatureMap {
    let (h, w) = (input.height, input.width);
    let planes: Vec<Vec<f64>> = (0..bank.outputs)
        .into_par_iter()
        .map(|o| {
            let mut acc = vec![0.0; h * w];
            for i in 0..bank.inputs {
                let src = input.plane(i);
                let k = &bank.weights[(o * bank.inputs + i) * 9..][..9];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wgt = k[ky * 3 + kx];
                        if wgt == 0.0 {
                            continue;
                        }
                        let dy = ky as isize - 1;
                        let dx = kx as isize - 1;
                        let y0 = (-dy).max(0) as usize;
                        let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let srow = &src[sy * w..(sy + 1) * w];
                            let drow = &mut acc[y * w..(y + 1) * w];
                            for x in x0..x1 {
                                drow[x] += wgt * srow[(x as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
            for v in &mut acc {
                *v = v.max(0.0);
            }
            acc
        })
        .collect();
    FeatureMap::new(bank.outputs, h, w, planes.concat())
}
