//! Sparse reconstruction interchange (cameras, registered images, 3D points).
//!
//! The on-disk layout follows the COLMAP `sparse/` model directory:
//!
//! ```text
//! cameras.bin | cameras.txt
//! images.bin  | images.txt
//! points3D.bin | points3D.txt
//! ```
//!
//! All binary integers are little-endian and all floats IEEE-754 f64.
//! Parsing reads exactly the declared record counts; trailing bytes after the
//! last record are ignored.

mod binary;
mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub use binary::{read_cameras_bin, read_images_bin, read_points_bin};
pub use binary::{write_cameras_bin, write_images_bin, write_points_bin};
pub use text::{read_cameras_txt, read_images_txt, read_points_txt};
pub use text::{write_cameras_txt, write_images_txt, write_points_txt};

/// Sentinel stored on disk for an observation that is not linked to a 3D point.
pub const INVALID_POINT3D_ID: u64 = u64::MAX;

/// Tolerance on `|q| - 1` accepted for image rotations.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated stream at {kind} {index}")]
    Truncated { kind: RecordKind, index: u64 },
    #[error("unknown camera model id {0}")]
    UnknownCameraModel(i32),
    #[error("unknown camera model name {0:?}")]
    UnknownCameraModelName(String),
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: RecordKind, id: u64 },
    #[error("image {image_id} references missing camera {camera_id}")]
    DanglingCamera { image_id: u32, camera_id: u32 },
    #[error("point {point_id} track references missing image {image_id}")]
    DanglingTrackImage { point_id: u64, image_id: u32 },
    #[error("camera {camera_id}: {reason}")]
    InvalidCamera { camera_id: u32, reason: String },
    #[error("image {image_id}: {reason}")]
    InvalidImage { image_id: u32, reason: String },
    #[error("{file}:{line}: {reason}")]
    Syntax {
        file: &'static str,
        line: usize,
        reason: String,
    },
}

impl ReconError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReconError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Camera,
    Image,
    Point,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Camera => "camera",
            RecordKind::Image => "image",
            RecordKind::Point => "point",
        })
    }
}

/// On-disk flavour of a model directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Binary,
    Text,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Binary => "bin",
            Format::Text => "txt",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "bin" => Ok(Format::Binary),
            "text" | "txt" => Ok(Format::Text),
            other => Err(format!("unknown reconstruction format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
}

impl CameraModel {
    pub fn id(self) -> i32 {
        match self {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
            CameraModel::SimpleRadial => 2,
        }
    }

    pub fn from_id(id: i32) -> Result<Self, ReconError> {
        match id {
            0 => Ok(CameraModel::SimplePinhole),
            1 => Ok(CameraModel::Pinhole),
            2 => Ok(CameraModel::SimpleRadial),
            other => Err(ReconError::UnknownCameraModel(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ReconError> {
        match name {
            "SIMPLE_PINHOLE" => Ok(CameraModel::SimplePinhole),
            "PINHOLE" => Ok(CameraModel::Pinhole),
            "SIMPLE_RADIAL" => Ok(CameraModel::SimpleRadial),
            other => Err(ReconError::UnknownCameraModelName(other.to_string())),
        }
    }

    /// Number of intrinsic parameters stored for the model.
    pub fn num_params(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
            CameraModel::SimpleRadial => 4,
        }
    }
}

/// Camera intrinsics.
///
/// Parameter layout per model:
/// - `SIMPLE_PINHOLE`: `f, cx, cy`
/// - `PINHOLE`: `fx, fy, cx, cy`
/// - `SIMPLE_RADIAL`: `f, cx, cy, k`
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: u32,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl Camera {
    pub fn new(id: u32, model: CameraModel, width: u64, height: u64, params: Vec<f64>) -> Self {
        Camera {
            id,
            model,
            width,
            height,
            params,
        }
    }

    pub fn validate(&self) -> Result<(), ReconError> {
        let invalid = |reason: String| ReconError::InvalidCamera {
            camera_id: self.id,
            reason,
        };
        if self.params.len() != self.model.num_params() {
            return Err(invalid(format!(
                "{} expects {} params, got {}",
                self.model.name(),
                self.model.num_params(),
                self.params.len()
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid(format!(
                "empty size {}x{}",
                self.width, self.height
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("non-finite parameter".into()));
        }
        let (fx, fy) = self.focal();
        if fx <= 0.0 || fy <= 0.0 {
            return Err(invalid(format!("non-positive focal length ({fx}, {fy})")));
        }
        Ok(())
    }

    /// `(fx, fy)`.
    pub fn focal(&self) -> (f64, f64) {
        match self.model {
            CameraModel::Pinhole => (self.params[0], self.params[1]),
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => {
                (self.params[0], self.params[0])
            }
        }
    }

    /// `(cx, cy)`.
    pub fn principal_point(&self) -> (f64, f64) {
        match self.model {
            CameraModel::Pinhole => (self.params[2], self.params[3]),
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => {
                (self.params[1], self.params[2])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
    pub point3d_id: Option<u64>,
}

/// A posed photo. `rotation` is the world-to-camera unit quaternion `(w, x, y, z)`
/// and `translation` is expressed in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredImage {
    pub id: u32,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub camera_id: u32,
    pub name: String,
    pub observations: Vec<Observation>,
}

impl RegisteredImage {
    pub fn validate(&self) -> Result<(), ReconError> {
        let invalid = |reason: String| ReconError::InvalidImage {
            image_id: self.id,
            reason,
        };
        if self.name.is_empty() {
            return Err(invalid("empty name".into()));
        }
        if self.name.contains('\0') {
            return Err(invalid("name contains NUL".into()));
        }
        let norm = self.rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(invalid(format!("rotation quaternion norm {norm}")));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(invalid("non-finite translation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackEntry {
    pub image_id: u32,
    pub point2d_idx: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub id: u64,
    pub xyz: [f64; 3],
    pub rgb: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackEntry>,
}

/// A full sparse/dense model. Maps are keyed by id so iteration order is the
/// canonical (ascending id) order used when serializing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub cameras: BTreeMap<u32, Camera>,
    pub images: BTreeMap<u32, RegisteredImage>,
    pub points: BTreeMap<u64, Point3D>,
}

impl Reconstruction {
    /// Builds a reconstruction from record lists, rejecting duplicate ids and
    /// broken references.
    pub fn from_parts(
        cameras: Vec<Camera>,
        images: Vec<RegisteredImage>,
        points: Vec<Point3D>,
    ) -> Result<Self, ReconError> {
        let mut recon = Reconstruction::default();
        for cam in cameras {
            let id = cam.id;
            if recon.cameras.insert(id, cam).is_some() {
                return Err(ReconError::DuplicateId {
                    kind: RecordKind::Camera,
                    id: id.into(),
                });
            }
        }
        for img in images {
            let id = img.id;
            if recon.images.insert(id, img).is_some() {
                return Err(ReconError::DuplicateId {
                    kind: RecordKind::Image,
                    id: id.into(),
                });
            }
        }
        for pt in points {
            let id = pt.id;
            if recon.points.insert(id, pt).is_some() {
                return Err(ReconError::DuplicateId {
                    kind: RecordKind::Point,
                    id,
                });
            }
        }
        recon.validate()?;
        Ok(recon)
    }

    /// Checks per-record invariants and referential integrity.
    pub fn validate(&self) -> Result<(), ReconError> {
        for cam in self.cameras.values() {
            cam.validate()?;
        }
        for img in self.images.values() {
            img.validate()?;
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(ReconError::DanglingCamera {
                    image_id: img.id,
                    camera_id: img.camera_id,
                });
            }
        }
        for pt in self.points.values() {
            if let Some(entry) = pt
                .track
                .iter()
                .find(|e| !self.images.contains_key(&e.image_id))
            {
                return Err(ReconError::DanglingTrackImage {
                    point_id: pt.id,
                    image_id: entry.image_id,
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty() && self.images.is_empty() && self.points.is_empty()
    }

    pub fn camera_for(&self, image: &RegisteredImage) -> Option<&Camera> {
        self.cameras.get(&image.camera_id)
    }
}

fn file_paths(dir: &Path, format: Format) -> [PathBuf; 3] {
    let ext = format.extension();
    [
        dir.join(format!("cameras.{ext}")),
        dir.join(format!("images.{ext}")),
        dir.join(format!("points3D.{ext}")),
    ]
}

/// Reads a model directory. The three files are parsed concurrently.
pub fn parse_reconstruction(dir: &Path, format: Format) -> Result<Reconstruction, ReconError> {
    let [cam_path, img_path, pts_path] = file_paths(dir, format);
    let read = |path: &Path| std::fs::read(path).map_err(|e| ReconError::io(path, e));

    let (cameras, (images, points)) = rayon::join(
        || {
            let bytes = read(&cam_path)?;
            match format {
                Format::Binary => read_cameras_bin(&bytes),
                Format::Text => read_cameras_txt(&bytes),
            }
        },
        || {
            rayon::join(
                || {
                    let bytes = read(&img_path)?;
                    match format {
                        Format::Binary => read_images_bin(&bytes),
                        Format::Text => read_images_txt(&bytes),
                    }
                },
                || {
                    let bytes = read(&pts_path)?;
                    match format {
                        Format::Binary => read_points_bin(&bytes),
                        Format::Text => read_points_txt(&bytes),
                    }
                },
            )
        },
    );
    Reconstruction::from_parts(cameras?, images?, points?)
}

/// Writes the three model files in canonical (ascending id) order.
pub fn serialize_reconstruction(
    recon: &Reconstruction,
    dir: &Path,
    format: Format,
) -> Result<(), ReconError> {
    recon.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| ReconError::io(dir, e))?;
    let [cam_path, img_path, pts_path] = file_paths(dir, format);
    let (cams, imgs, pts) = match format {
        Format::Binary => (
            write_cameras_bin(recon.cameras.values()),
            write_images_bin(recon.images.values()),
            write_points_bin(recon.points.values()),
        ),
        Format::Text => (
            write_cameras_txt(recon.cameras.values()),
            write_images_txt(recon.images.values()),
            write_points_txt(recon.points.values()),
        ),
    };
    for (path, bytes) in [(cam_path, cams), (img_path, imgs), (pts_path, pts)] {
        std::fs::write(&path, bytes).map_err(|e| ReconError::io(&path, e))?;
    }
    Ok(())
}
