//! Plain RGB images in `[0, 1]` and PNG helpers.

use std::path::Path;

use image::{imageops::FilterType, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
}

/// Interleaved RGB image with f64 samples nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize) -> Self {
        ImageRgb {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        ImageRgb {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_size(&self, other: &ImageRgb) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::SizeMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        ImageRgb {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect(),
        }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        Ok(Self::from_rgb8(&load_rgb8(path)?))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        save_rgb8(&self.to_rgb8(), path)
    }
}

pub fn image_dimensions(path: &Path) -> Result<(u32, u32), RasterError> {
    image::image_dimensions(path).map_err(|source| RasterError::Image {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_rgb8(path: &Path) -> Result<RgbImage, RasterError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| RasterError::Image {
            path: path.display().to_string(),
            source,
        })
}

pub fn save_rgb8(img: &RgbImage, path: &Path) -> Result<(), RasterError> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| RasterError::Image {
            path: path.display().to_string(),
            source,
        })
}

/// Resamples a photo to exactly `width x height` (bilinear).
pub fn resize_rgb8(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    image::imageops::resize(img, width, height, FilterType::Triangle)
}
