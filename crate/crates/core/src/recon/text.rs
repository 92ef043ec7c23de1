//! Human-writable text form. One record per line except images, which take
//! two lines (pose line, then the observation line, which may be empty).
//! Lines starting with `#` are comments. Observations without a 3D point use
//! id `-1`.

use std::fmt::Write as _;
use std::str::{FromStr, SplitWhitespace};

use super::{
    Camera, CameraModel, Observation, Point3D, ReconError, RegisteredImage, TrackEntry,
    INVALID_POINT3D_ID,
};

struct Fields<'a> {
    file: &'static str,
    line: usize,
    tokens: SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn new(file: &'static str, line: usize, text: &'a str) -> Self {
        Fields {
            file,
            line,
            tokens: text.split_whitespace(),
        }
    }

    fn error(&self, reason: impl Into<String>) -> ReconError {
        ReconError::Syntax {
            file: self.file,
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T, ReconError> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| self.error(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.error(format!("invalid {what} {tok:?}")))
    }

    fn finish(mut self) -> Result<(), ReconError> {
        match self.tokens.next() {
            Some(extra) => Err(self.error(format!("unexpected trailing field {extra:?}"))),
            None => Ok(()),
        }
    }

    fn is_done(&self) -> bool {
        self.tokens.clone().next().is_none()
    }
}

/// Observation point id: `-1` (or the binary sentinel) means none.
struct PointRef(Option<u64>);

impl FromStr for PointRef {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "-1" {
            return Ok(PointRef(None));
        }
        let id: u64 = s.parse()?;
        Ok(PointRef((id != INVALID_POINT3D_ID).then_some(id)))
    }
}

fn to_str<'a>(file: &'static str, bytes: &'a [u8]) -> Result<&'a str, ReconError> {
    std::str::from_utf8(bytes).map_err(|e| ReconError::Syntax {
        file,
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

pub fn read_cameras_txt(bytes: &[u8]) -> Result<Vec<Camera>, ReconError> {
    const FILE: &str = "cameras.txt";
    let text = to_str(FILE, bytes)?;
    let mut cameras = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let mut f = Fields::new(FILE, i + 1, line);
        let id = f.next("camera id")?;
        let model = CameraModel::from_name(&f.next::<String>("model")?)?;
        let width = f.next("width")?;
        let height = f.next("height")?;
        let params = (0..model.num_params())
            .map(|_| f.next("param"))
            .collect::<Result<Vec<f64>, _>>()?;
        f.finish()?;
        cameras.push(Camera::new(id, model, width, height, params));
    }
    Ok(cameras)
}

pub fn read_images_txt(bytes: &[u8]) -> Result<Vec<RegisteredImage>, ReconError> {
    const FILE: &str = "images.txt";
    let text = to_str(FILE, bytes)?;
    let mut images = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((i, line)) = lines.next() {
        if is_skippable(line) {
            continue;
        }
        let mut f = Fields::new(FILE, i + 1, line);
        let id = f.next("image id")?;
        let mut rotation = [0.0; 4];
        for q in &mut rotation {
            *q = f.next("quaternion component")?;
        }
        let mut translation = [0.0; 3];
        for t in &mut translation {
            *t = f.next("translation component")?;
        }
        let camera_id = f.next("camera id")?;
        // The name is the remainder of the line so it may contain spaces.
        let rest: Vec<&str> = f.tokens.by_ref().collect();
        if rest.is_empty() {
            return Err(f.error("missing name"));
        }
        let name = rest.join(" ");

        // The observation line directly follows, even when empty.
        let (j, obs_line) = lines.next().unwrap_or((i + 1, ""));
        let mut f = Fields::new(FILE, j + 1, obs_line);
        let mut observations = Vec::new();
        while !f.is_done() {
            let x = f.next("observation x")?;
            let y = f.next("observation y")?;
            let PointRef(point3d_id) = f.next("point3D id")?;
            observations.push(Observation { x, y, point3d_id });
        }
        images.push(RegisteredImage {
            id,
            rotation,
            translation,
            camera_id,
            name,
            observations,
        });
    }
    Ok(images)
}

pub fn read_points_txt(bytes: &[u8]) -> Result<Vec<Point3D>, ReconError> {
    const FILE: &str = "points3D.txt";
    let text = to_str(FILE, bytes)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let mut f = Fields::new(FILE, i + 1, line);
        let id = f.next("point id")?;
        let xyz = [f.next("x")?, f.next("y")?, f.next("z")?];
        let rgb = [f.next("r")?, f.next("g")?, f.next("b")?];
        let error = f.next("error")?;
        let mut track = Vec::new();
        while !f.is_done() {
            track.push(TrackEntry {
                image_id: f.next("track image id")?,
                point2d_idx: f.next("track point2D index")?,
            });
        }
        f.finish()?;
        points.push(Point3D {
            id,
            xyz,
            rgb,
            error,
            track,
        });
    }
    Ok(points)
}

pub fn write_cameras_txt<'a>(cameras: impl ExactSizeIterator<Item = &'a Camera>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("# Camera list with one line of data per camera:\n");
    out.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(out, "# Number of cameras: {}", cameras.len());
    for cam in cameras {
        let _ = write!(
            out,
            "{} {} {} {}",
            cam.id,
            cam.model.name(),
            cam.width,
            cam.height
        );
        for p in &cam.params {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_images_txt<'a>(images: impl ExactSizeIterator<Item = &'a RegisteredImage>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("# Image list with two lines of data per image:\n");
    out.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    out.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(out, "# Number of images: {}", images.len());
    for img in images {
        let [qw, qx, qy, qz] = img.rotation;
        let [tx, ty, tz] = img.translation;
        let _ = writeln!(
            out,
            "{} {qw} {qx} {qy} {qz} {tx} {ty} {tz} {} {}",
            img.id, img.camera_id, img.name
        );
        let obs: Vec<String> = img
            .observations
            .iter()
            .map(|o| match o.point3d_id {
                Some(p) => format!("{} {} {p}", o.x, o.y),
                None => format!("{} {} -1", o.x, o.y),
            })
            .collect();
        out.push_str(&obs.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_points_txt<'a>(points: impl ExactSizeIterator<Item = &'a Point3D>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("# 3D point list with one line of data per point:\n");
    out.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(out, "# Number of points: {}", points.len());
    for pt in points {
        let [x, y, z] = pt.xyz;
        let [r, g, b] = pt.rgb;
        let _ = write!(out, "{} {x} {y} {z} {r} {g} {b} {}", pt.id, pt.error);
        for e in &pt.track {
            let _ = write!(out, " {} {}", e.image_id, e.point2d_idx);
        }
        out.push('\n');
    }
    out.into_bytes()
}
