//! Semantic label maps, the 150-class color palette and transient masks.
//!
//! Label maps are single-channel 8-bit images of class indices: values
//! `0..=149` are classes and `255` means unlabeled.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::ImageRgb;

pub const NUM_CLASSES: usize = 150;
pub const UNLABELED: u8 = 255;

const ADE20K_PALETTE_JSON: &str = include_str!("../assets/ade20k_palette.json");

/// Default transient categories, by palette name.
pub const DEFAULT_TRANSIENT_NAMES: [&str; 10] = [
    "person", "car", "bus", "truck", "van", "minibike", "bicycle", "boat", "airplane", "animal",
];

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("class out of range: {value} at ({x}, {y})")]
    ClassOutOfRange { value: u8, x: usize, y: usize },
    #[error("palette: {0}")]
    Palette(String),
    #[error("label map {path}: {reason}")]
    LabelFile { path: String, reason: String },
    #[error("size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("color ({0}, {1}, {2}) at pixel {3} is not in the palette")]
    UnknownColor(u8, u8, u8, usize),
    #[error("unknown class name {0:?}")]
    UnknownClassName(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, classes: Vec<u8>) -> Self {
        assert_eq!(classes.len(), width * height, "label map size");
        LabelMap {
            width,
            height,
            classes,
        }
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Self {
        LabelMap::new(width, height, vec![class; width * height])
    }

    /// Errors on the first value outside `0..=149` and `255`.
    pub fn validate(&self) -> Result<(), SemanticsError> {
        match self
            .classes
            .iter()
            .position(|&c| c as usize >= NUM_CLASSES && c != UNLABELED)
        {
            Some(i) => Err(SemanticsError::ClassOutOfRange {
                value: self.classes[i],
                x: i % self.width.max(1),
                y: i / self.width.max(1),
            }),
            None => Ok(()),
        }
    }

    /// Loads a single-channel 8-bit PNG of class indices.
    pub fn load_png(path: &Path) -> Result<Self, SemanticsError> {
        let err = |reason: String| SemanticsError::LabelFile {
            path: path.display().to_string(),
            reason,
        };
        let img = image::open(path).map_err(|e| err(e.to_string()))?;
        match img {
            image::DynamicImage::ImageLuma8(gray) => {
                let (w, h) = gray.dimensions();
                Ok(LabelMap::new(w as usize, h as usize, gray.into_raw()))
            }
            other => Err(err(format!(
                "expected single-channel 8-bit image, got {:?}",
                other.color()
            ))),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SemanticsError> {
        let img =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.classes.clone())
                .expect("label buffer matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| SemanticsError::LabelFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
    }

    /// Nearest-neighbour resampling, so no new class values appear.
    pub fn resize_nearest(&self, width: usize, height: usize) -> LabelMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut classes = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            let sy = sy.min(self.height - 1);
            for x in 0..width {
                let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as usize;
                classes.push(self.classes[sy * self.width + sx.min(self.width - 1)]);
            }
        }
        LabelMap::new(width, height, classes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub class_id: u8,
    pub name: String,
    pub rgb: [u8; 3],
}

/// Injective map from class id to 8-bit color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
    inverse: HashMap<[u8; 3], u8>,
}

impl Palette {
    /// The standard ADE20K 150-class table shipped with the crate.
    pub fn ade20k() -> Self {
        Palette::from_json(ADE20K_PALETTE_JSON).expect("bundled palette is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, SemanticsError> {
        let entries: Vec<PaletteEntry> =
            serde_json::from_str(json).map_err(|e| SemanticsError::Palette(e.to_string()))?;
        Palette::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self, SemanticsError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| SemanticsError::Palette(format!("{}: {e}", path.display())))?;
        Palette::from_json(&json)
    }

    pub fn from_entries(mut entries: Vec<PaletteEntry>) -> Result<Self, SemanticsError> {
        if entries.len() != NUM_CLASSES {
            return Err(SemanticsError::Palette(format!(
                "expected {NUM_CLASSES} entries, got {}",
                entries.len()
            )));
        }
        entries.sort_by_key(|e| e.class_id);
        let mut inverse = HashMap::with_capacity(NUM_CLASSES);
        for (i, e) in entries.iter().enumerate() {
            if e.class_id as usize != i {
                return Err(SemanticsError::Palette(format!(
                    "class ids must be 0..{NUM_CLASSES}, found {}",
                    e.class_id
                )));
            }
            if e.rgb == [0, 0, 0] {
                return Err(SemanticsError::Palette(format!(
                    "class {i} uses black, which is reserved for unlabeled"
                )));
            }
            if let Some(prev) = inverse.insert(e.rgb, e.class_id) {
                return Err(SemanticsError::Palette(format!(
                    "classes {prev} and {i} share color {:?}",
                    e.rgb
                )));
            }
        }
        Ok(Palette { entries, inverse })
    }

    pub fn color(&self, class: u8) -> Option<[u8; 3]> {
        self.entries.get(class as usize).map(|e| e.rgb)
    }

    pub fn class_of(&self, rgb: [u8; 3]) -> Option<u8> {
        self.inverse.get(&rgb).copied()
    }

    pub fn class_id(&self, name: &str) -> Option<u8> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.class_id)
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }
}

/// Palette lookup per pixel; unlabeled pixels become black.
pub fn encode_labels(map: &LabelMap, palette: &Palette) -> Result<ImageRgb, SemanticsError> {
    map.validate()?;
    let mut data = Vec::with_capacity(map.classes.len() * 3);
    for &c in &map.classes {
        let rgb = if c == UNLABELED {
            [0, 0, 0]
        } else {
            palette.color(c).expect("validated class id")
        };
        data.extend(rgb.iter().map(|&v| f64::from(v) / 255.0));
    }
    Ok(ImageRgb {
        width: map.width,
        height: map.height,
        data,
    })
}

/// Inverse of [`encode_labels`]: black decodes to unlabeled.
pub fn decode_labels(img: &ImageRgb, palette: &Palette) -> Result<LabelMap, SemanticsError> {
    let mut classes = Vec::with_capacity(img.num_pixels());
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        let rgb = [
            (px[0] * 255.0).round() as u8,
            (px[1] * 255.0).round() as u8,
            (px[2] * 255.0).round() as u8,
        ];
        let class = if rgb == [0, 0, 0] {
            UNLABELED
        } else {
            palette
                .class_of(rgb)
                .ok_or(SemanticsError::UnknownColor(rgb[0], rgb[1], rgb[2], i))?
        };
        classes.push(class);
    }
    Ok(LabelMap::new(img.width, img.height, classes))
}

/// Set of class ids treated as transient.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransientClasses(pub BTreeSet<u8>);

impl TransientClasses {
    pub fn from_names<'a>(
        palette: &Palette,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, SemanticsError> {
        names
            .into_iter()
            .map(|n| {
                palette
                    .class_id(n)
                    .ok_or_else(|| SemanticsError::UnknownClassName(n.to_string()))
            })
            .collect::<Result<BTreeSet<_>, _>>()
            .map(TransientClasses)
    }

    pub fn default_for(palette: &Palette) -> Result<Self, SemanticsError> {
        Self::from_names(palette, DEFAULT_TRANSIENT_NAMES)
    }

    pub fn contains(&self, class: u8) -> bool {
        self.0.contains(&class)
    }

    pub fn union(&self, other: &TransientClasses) -> TransientClasses {
        TransientClasses(self.0.union(&other.0).copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask, SemanticsError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(SemanticsError::SizeMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a || *b)
                .collect(),
        })
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// 1 where the pixel's class is transient, else 0. Unlabeled pixels are never
/// transient.
pub fn transient_mask(map: &LabelMap, transient: &TransientClasses) -> BinaryMask {
    let mut lut = [false; 256];
    for &c in &transient.0 {
        lut[c as usize] = true;
    }
    lut[UNLABELED as usize] = false;
    BinaryMask {
        width: map.width,
        height: map.height,
        data: map.classes.iter().map(|&c| lut[c as usize]).collect(),
    }
}
