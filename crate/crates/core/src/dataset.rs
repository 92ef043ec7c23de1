//! Aligned dataset construction.
//!
//! For every registered image the builder renders a deep buffer at the
//! configured minimum dimension, appends the encoded semantic labeling, resizes
//! the photo to the buffer resolution and records the sample in a JSON-lines
//! manifest. Images are dropped when the photo is smaller than
//! `min_image_dim` on its short side or when the rendering is more than
//! `empty_threshold` empty. Both comparisons are strict.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! manifest.jsonl          header line, then one sample per line
//! buffers/<id>.nrdb       albedo, depth, validity, semantic channels
//! photos/<id>.png         ground truth resized to the buffer size
//! labels/<id>.png         class indices resized to the buffer size
//! ```

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{BufferError, SEMANTIC_CHANNELS};
use crate::camera::{Viewpoint, ViewpointRecord};
use crate::raster::{self, RasterError};
use crate::recon::{Reconstruction, RegisteredImage};
use crate::semantics::{encode_labels, LabelMap, Palette, SemanticsError};
use crate::splat::{render, Footprint, PointCloud, SplatOptions};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    /// Short side of the rendered buffers, in pixels.
    pub min_dim: u64,
    /// Renders with a larger empty fraction are dropped.
    pub empty_threshold: f64,
    /// Photos with a shorter side below this are dropped.
    pub min_image_dim: u32,
    pub val_count: usize,
    pub seed: u64,
    pub radius: f64,
    pub footprint: Footprint,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "dataset".into(),
            min_dim: 600,
            empty_threshold: 0.85,
            min_image_dim: 450,
            val_count: 100,
            seed: 0,
            radius: 1.0,
            footprint: Footprint::Disk,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.min_dim == 0 {
            return Err(DatasetError::Config("min_dim must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.empty_threshold) {
            return Err(DatasetError::Config(format!(
                "empty_threshold must be in [0, 1], got {}",
                self.empty_threshold
            )));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(DatasetError::Config(format!(
                "invalid radius {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn splat_options(&self) -> SplatOptions {
        SplatOptions {
            radius: self.radius,
            footprint: self.footprint,
        }
    }
}

/// Photos whose short side is below the minimum are rejected.
pub fn photo_too_small(width: u32, height: u32, min_image_dim: u32) -> bool {
    width.min(height) < min_image_dim
}

/// Renders more than `threshold` empty are rejected; exactly at the threshold
/// is kept.
pub fn too_sparse(empty_fraction: f64, threshold: f64) -> bool {
    empty_fraction > threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSample {
    pub image_id: u32,
    pub name: String,
    pub split: Split,
    /// Paths are relative to the manifest directory.
    pub deep_buffer: String,
    pub photo: String,
    pub label_map: String,
    pub viewpoint: ViewpointRecord,
    pub empty_fraction: f64,
}

/// Why registered images were left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub missing_photo: usize,
    pub unreadable_photo: usize,
    pub small_photo: usize,
    pub missing_label: usize,
    pub invalid_label: usize,
    pub render_failed: usize,
    pub sparse_render: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.missing_photo
            + self.unreadable_photo
            + self.small_photo
            + self.missing_label
            + self.invalid_label
            + self.render_failed
            + self.sparse_render
    }

    fn record(&mut self, reason: SkipReason) {
        let slot = match reason {
            SkipReason::MissingPhoto => &mut self.missing_photo,
            SkipReason::UnreadablePhoto => &mut self.unreadable_photo,
            SkipReason::SmallPhoto => &mut self.small_photo,
            SkipReason::MissingLabel => &mut self.missing_label,
            SkipReason::InvalidLabel => &mut self.invalid_label,
            SkipReason::RenderFailed => &mut self.render_failed,
            SkipReason::SparseRender => &mut self.sparse_render,
        };
        *slot += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SkipReason {
    MissingPhoto,
    UnreadablePhoto,
    SmallPhoto,
    MissingLabel,
    InvalidLabel,
    RenderFailed,
    SparseRender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub dataset: String,
    pub version: u32,
    pub config: DatasetConfig,
    pub registered_images: usize,
    pub kept: usize,
    pub train: usize,
    pub val: usize,
    pub skipped: SkipCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub samples: Vec<AlignedSample>,
}

impl Manifest {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        let mut header = None;
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let bad = |reason: String| DatasetError::Manifest {
                line: i + 1,
                reason,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?);
            } else {
                samples.push(serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?);
            }
        }
        let header = header.ok_or(DatasetError::Manifest {
            line: 0,
            reason: "empty manifest".into(),
        })?;
        Ok(Manifest { header, samples })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }
}

/// Tags a seeded uniform random subset of `min(val_count, n)` items as
/// validation, the rest as training.
pub fn split_validation(n: usize, val_count: usize, seed: u64) -> Vec<Split> {
    let mut splits = vec![Split::Train; n];
    let m = val_count.min(n);
    if m == 0 {
        return splits;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in rand::seq::index::sample(&mut rng, n, m) {
        splits[i] = Split::Val;
    }
    splits
}

/// Input and output locations for [`build_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub photos_dir: PathBuf,
    pub labels_dir: PathBuf,
    pub out_dir: PathBuf,
}

/// Label map for an image `a/b.jpg` is `labels_dir/a/b.png`.
pub fn label_path_for(labels_dir: &Path, image_name: &str) -> PathBuf {
    labels_dir.join(Path::new(image_name).with_extension("png"))
}

struct Candidate {
    image_id: u32,
    name: String,
    viewpoint: Viewpoint,
    empty_fraction: f64,
}

fn process_image(
    image: &RegisteredImage,
    recon: &Reconstruction,
    cloud: &PointCloud,
    paths: &DatasetPaths,
    cfg: &DatasetConfig,
    palette: &Palette,
) -> Result<Result<Candidate, SkipReason>, DatasetError> {
    let photo_path = paths.photos_dir.join(&image.name);
    if !photo_path.is_file() {
        warn!(
            "image {} ({}): photo not found at {}",
            image.id,
            image.name,
            photo_path.display()
        );
        return Ok(Err(SkipReason::MissingPhoto));
    }
    let (pw, ph) = match raster::image_dimensions(&photo_path) {
        Ok(d) => d,
        Err(e) => {
            warn!("image {}: {e}", image.id);
            return Ok(Err(SkipReason::UnreadablePhoto));
        }
    };
    if photo_too_small(pw, ph, cfg.min_image_dim) {
        return Ok(Err(SkipReason::SmallPhoto));
    }
    let label_path = label_path_for(&paths.labels_dir, &image.name);
    if !label_path.is_file() {
        warn!(
            "image {} ({}): label map not found at {}",
            image.id,
            image.name,
            label_path.display()
        );
        return Ok(Err(SkipReason::MissingLabel));
    }
    let labels = match LabelMap::load_png(&label_path).and_then(|m| m.validate().map(|_| m)) {
        Ok(m) => m,
        Err(e) => {
            warn!("image {}: {e}", image.id);
            return Ok(Err(SkipReason::InvalidLabel));
        }
    };

    let camera = recon
        .camera_for(image)
        .expect("validated reconstruction resolves camera ids");
    let viewpoint = match Viewpoint::from_image(image, camera) {
        Ok(v) => v.scale_to_min_dim(cfg.min_dim),
        Err(e) => {
            warn!("image {}: {e}", image.id);
            return Ok(Err(SkipReason::RenderFailed));
        }
    };
    let mut buffer = match render(cloud, &viewpoint, &cfg.splat_options()) {
        Ok(b) => b,
        Err(e) => {
            warn!("image {}: {e}", image.id);
            return Ok(Err(SkipReason::RenderFailed));
        }
    };
    let empty_fraction = buffer.empty_fraction();
    if too_sparse(empty_fraction, cfg.empty_threshold) {
        return Ok(Err(SkipReason::SparseRender));
    }

    let (w, h) = (buffer.width(), buffer.height());
    let labels = labels.resize_nearest(w, h);
    let encoded = encode_labels(&labels, palette)?;
    for (c, name) in SEMANTIC_CHANNELS.iter().enumerate() {
        let plane = encoded
            .data
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| v as f32)
            .collect();
        buffer.push_channel(*name, plane)?;
    }

    let photo = raster::load_rgb8(&photo_path)?;
    let photo = raster::resize_rgb8(&photo, w as u32, h as u32);

    let out = &paths.out_dir;
    buffer.save(&out.join(buffer_rel(image.id)))?;
    raster::save_rgb8(&photo, &out.join(photo_rel(image.id)))?;
    labels.save_png(&out.join(label_rel(image.id)))?;

    Ok(Ok(Candidate {
        image_id: image.id,
        name: image.name.clone(),
        viewpoint,
        empty_fraction,
    }))
}

fn buffer_rel(id: u32) -> String {
    format!("buffers/{id}.nrdb")
}

fn photo_rel(id: u32) -> String {
    format!("photos/{id}.png")
}

fn label_rel(id: u32) -> String {
    format!("labels/{id}.png")
}

/// Builds the aligned dataset and writes `manifest.jsonl` to `paths.out_dir`.
/// Per-image problems (missing or unreadable files, failed filters) skip the
/// image and are counted in the manifest header.
pub fn build_dataset(
    recon: &Reconstruction,
    paths: &DatasetPaths,
    cfg: &DatasetConfig,
    palette: &Palette,
) -> Result<Manifest, DatasetError> {
    cfg.validate()?;
    for sub in ["buffers", "photos", "labels"] {
        let dir = paths.out_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let cloud = PointCloud::from_reconstruction(recon);
    let images: Vec<&RegisteredImage> = recon.images.values().collect();

    let outcomes = images
        .par_iter()
        .map(|img| process_image(img, recon, &cloud, paths, cfg, palette))
        .collect::<Result<Vec<_>, _>>()?;

    let mut skipped = SkipCounts::default();
    let mut kept = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(c) => kept.push(c),
            Err(reason) => skipped.record(reason),
        }
    }

    let splits = split_validation(kept.len(), cfg.val_count, cfg.seed);
    let samples: Vec<AlignedSample> = kept
        .into_iter()
        .zip(splits)
        .map(|(c, split)| AlignedSample {
            image_id: c.image_id,
            name: c.name,
            split,
            deep_buffer: buffer_rel(c.image_id),
            photo: photo_rel(c.image_id),
            label_map: label_rel(c.image_id),
            viewpoint: ViewpointRecord::from(&c.viewpoint),
            empty_fraction: c.empty_fraction,
        })
        .collect();
    let val = samples.iter().filter(|s| s.split == Split::Val).count();
    let manifest = Manifest {
        header: ManifestHeader {
            dataset: cfg.name.clone(),
            version: MANIFEST_VERSION,
            config: cfg.clone(),
            registered_images: images.len(),
            kept: samples.len(),
            train: samples.len() - val,
            val,
            skipped,
        },
        samples,
    };
    manifest.save(&paths.out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
