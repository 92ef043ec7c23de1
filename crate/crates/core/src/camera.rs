//! Viewpoints and pinhole-family projection.
//!
//! Pixel convention: pixel `(u, v)` covers `[u, u+1) x [v, v+1)`. Projection
//! returns continuous coordinates and rasterizers take the floor.

use serde::{Deserialize, Serialize};

use crate::recon::{Camera, CameraModel, ReconError, RegisteredImage, QUATERNION_NORM_TOLERANCE};

/// Points with camera-space depth at or below this are not projected.
pub const Z_NEAR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Extrinsics plus intrinsics for one rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    /// World-to-camera unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub camera: Camera,
}

impl Viewpoint {
    pub fn new(
        rotation: [f64; 4],
        translation: [f64; 3],
        camera: Camera,
    ) -> Result<Self, ReconError> {
        let vp = Viewpoint {
            rotation,
            translation,
            camera,
        };
        vp.validate()?;
        Ok(vp)
    }

    pub fn from_image(image: &RegisteredImage, camera: &Camera) -> Result<Self, ReconError> {
        Viewpoint::new(image.rotation, image.translation, camera.clone())
    }

    pub fn validate(&self) -> Result<(), ReconError> {
        self.camera.validate()?;
        let norm = self.rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(ReconError::InvalidCamera {
                camera_id: self.camera.id,
                reason: format!("viewpoint rotation quaternion norm {norm}"),
            });
        }
        Ok(())
    }

    pub fn width(&self) -> u64 {
        self.camera.width
    }

    pub fn height(&self) -> u64 {
        self.camera.height
    }

    /// Rotates a world-space vector into the camera frame using the quaternion
    /// directly: `v' = v + 2w(q x v) + 2 q x (q x v)`.
    pub fn rotate(&self, p: [f64; 3]) -> [f64; 3] {
        let [w, x, y, z] = self.rotation;
        let q = [x, y, z];
        let t = scale(cross(q, p), 2.0);
        let qt = cross(q, t);
        [
            p[0] + w * t[0] + qt[0],
            p[1] + w * t[1] + qt[1],
            p[2] + w * t[2] + qt[2],
        ]
    }

    /// Row-major world-to-camera rotation matrix.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let [w, x, y, z] = self.rotation;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotate(p);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }

    /// Projects a world point. Returns `None` when it lies at or behind the
    /// near plane.
    pub fn project(&self, p: [f64; 3]) -> Option<Projection> {
        let pc = self.to_camera(p);
        self.project_camera_space(pc)
    }

    pub fn project_camera_space(&self, pc: [f64; 3]) -> Option<Projection> {
        let depth = pc[2];
        if depth.is_nan() || depth <= Z_NEAR {
            return None;
        }
        let (u, v) = apply_intrinsics(&self.camera, pc[0] / depth, pc[1] / depth);
        Some(Projection { u, v, depth })
    }

    /// Rescales the viewpoint so that `min(width, height) == min_dim`.
    pub fn scale_to_min_dim(&self, min_dim: u64) -> Viewpoint {
        Viewpoint {
            rotation: self.rotation,
            translation: self.translation,
            camera: scale_camera_to_min_dim(&self.camera, min_dim),
        }
    }
}

pub(crate) fn apply_intrinsics(camera: &Camera, x: f64, y: f64) -> (f64, f64) {
    let p = &camera.params;
    match camera.model {
        CameraModel::SimplePinhole => (p[0] * x + p[1], p[0] * y + p[2]),
        CameraModel::Pinhole => (p[0] * x + p[2], p[1] * y + p[3]),
        CameraModel::SimpleRadial => {
            let radial = 1.0 + p[3] * (x * x + y * y);
            (p[0] * x * radial + p[1], p[0] * y * radial + p[2])
        }
    }
}

/// Scales a camera uniformly so its shorter side equals `min_dim`. The longer
/// side is rounded to the nearest pixel; focal lengths and the principal point
/// are multiplied by the same factor, distortion is left untouched.
pub fn scale_camera_to_min_dim(camera: &Camera, min_dim: u64) -> Camera {
    assert!(min_dim >= 1, "min_dim must be at least one pixel");
    let short = camera.width.min(camera.height);
    if short == min_dim {
        return camera.clone();
    }
    let s = min_dim as f64 / short as f64;
    let scale_dim = |d: u64| {
        if d == short {
            min_dim
        } else {
            ((d as f64 * s).round() as u64).max(1)
        }
    };
    let mut params = camera.params.clone();
    let scaled = match camera.model {
        CameraModel::SimplePinhole => 3,
        CameraModel::Pinhole => 4,
        CameraModel::SimpleRadial => 3,
    };
    for v in &mut params[..scaled] {
        *v *= s;
    }
    Camera {
        id: camera.id,
        model: camera.model,
        width: scale_dim(camera.width),
        height: scale_dim(camera.height),
        params,
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Serializable echo of a viewpoint for manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointRecord {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub model: String,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl From<&Viewpoint> for ViewpointRecord {
    fn from(v: &Viewpoint) -> Self {
        ViewpointRecord {
            rotation: v.rotation,
            translation: v.translation,
            model: v.camera.model.name().to_string(),
            width: v.camera.width,
            height: v.camera.height,
            params: v.camera.params.clone(),
        }
    }
}

impl ViewpointRecord {
    pub fn to_viewpoint(&self, camera_id: u32) -> Result<Viewpoint, ReconError> {
        let camera = Camera::new(
            camera_id,
            CameraModel::from_name(&self.model)?,
            self.width,
            self.height,
            self.params.clone(),
        );
        Viewpoint::new(self.rotation, self.translation, camera)
    }
}
