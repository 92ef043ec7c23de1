use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{
    Camera, CameraModel, Observation, Point3D, ReconError, RecordKind, RegisteredImage, TrackEntry,
    INVALID_POINT3D_ID,
};

// Smallest possible on-disk size of one record, used to bound preallocation.
const MIN_CAMERA_BYTES: usize = 4 + 4 + 8 + 8 + 3 * 8;
const MIN_IMAGE_BYTES: usize = 4 + 7 * 8 + 4 + 2 + 8;
const MIN_POINT_BYTES: usize = 8 + 3 * 8 + 3 + 8 + 8;

struct Reader<'a> {
    buf: &'a [u8],
    kind: RecordKind,
    index: u64,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], kind: RecordKind) -> Self {
        Reader {
            buf,
            kind,
            index: 0,
        }
    }

    fn truncated(&self) -> ReconError {
        ReconError::Truncated {
            kind: self.kind,
            index: self.index,
        }
    }

    fn u8(&mut self) -> Result<u8, ReconError> {
        self.buf.read_u8().map_err(|_| self.truncated())
    }

    fn u32(&mut self) -> Result<u32, ReconError> {
        self.buf
            .read_u32::<LittleEndian>()
            .map_err(|_| self.truncated())
    }

    fn i32(&mut self) -> Result<i32, ReconError> {
        self.buf
            .read_i32::<LittleEndian>()
            .map_err(|_| self.truncated())
    }

    fn u64(&mut self) -> Result<u64, ReconError> {
        self.buf
            .read_u64::<LittleEndian>()
            .map_err(|_| self.truncated())
    }

    fn f64(&mut self) -> Result<f64, ReconError> {
        self.buf
            .read_f64::<LittleEndian>()
            .map_err(|_| self.truncated())
    }

    fn f64s<const N: usize>(&mut self) -> Result<[f64; N], ReconError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64()?;
        }
        Ok(out)
    }

    fn cstr(&mut self) -> Result<String, ReconError> {
        let end = self
            .buf
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| self.truncated())?;
        let name = String::from_utf8_lossy(&self.buf[..end]).into_owned();
        self.buf = &self.buf[end + 1..];
        Ok(name)
    }

    fn capacity(&self, count: u64, min_record: usize) -> usize {
        (count as usize).min(self.buf.len() / min_record)
    }
}

pub fn read_cameras_bin(bytes: &[u8]) -> Result<Vec<Camera>, ReconError> {
    let mut r = Reader::new(bytes, RecordKind::Camera);
    let count = r.u64()?;
    let mut cameras = Vec::with_capacity(r.capacity(count, MIN_CAMERA_BYTES));
    for index in 0..count {
        r.index = index;
        let id = r.u32()?;
        let model = CameraModel::from_id(r.i32()?)?;
        let width = r.u64()?;
        let height = r.u64()?;
        let params = (0..model.num_params())
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        cameras.push(Camera::new(id, model, width, height, params));
    }
    Ok(cameras)
}

pub fn read_images_bin(bytes: &[u8]) -> Result<Vec<RegisteredImage>, ReconError> {
    let mut r = Reader::new(bytes, RecordKind::Image);
    let count = r.u64()?;
    let mut images = Vec::with_capacity(r.capacity(count, MIN_IMAGE_BYTES));
    for index in 0..count {
        r.index = index;
        let id = r.u32()?;
        let rotation = r.f64s::<4>()?;
        let translation = r.f64s::<3>()?;
        let camera_id = r.u32()?;
        let name = r.cstr()?;
        let num_obs = r.u64()?;
        let mut observations = Vec::with_capacity(r.capacity(num_obs, 24));
        for _ in 0..num_obs {
            let x = r.f64()?;
            let y = r.f64()?;
            let pid = r.u64()?;
            observations.push(Observation {
                x,
                y,
                point3d_id: (pid != INVALID_POINT3D_ID).then_some(pid),
            });
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

pub fn read_points_bin(bytes: &[u8]) -> Result<Vec<Point3D>, ReconError> {
    let mut r = Reader::new(bytes, RecordKind::Point);
    let count = r.u64()?;
    let mut points = Vec::with_capacity(r.capacity(count, MIN_POINT_BYTES));
    for index in 0..count {
        r.index = index;
        let id = r.u64()?;
        let xyz = r.f64s::<3>()?;
        let rgb = [r.u8()?, r.u8()?, r.u8()?];
        let error = r.f64()?;
        let track_len = r.u64()?;
        let mut track = Vec::with_capacity(r.capacity(track_len, 8));
        for _ in 0..track_len {
            track.push(TrackEntry {
                image_id: r.u32()?,
                point2d_idx: r.u32()?,
            });
        }
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

// Writes into a Vec<u8> cannot fail.
pub fn write_cameras_bin<'a>(cameras: impl ExactSizeIterator<Item = &'a Camera>) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LittleEndian>(cameras.len() as u64).unwrap();
    for cam in cameras {
        out.write_u32::<LittleEndian>(cam.id).unwrap();
        out.write_i32::<LittleEndian>(cam.model.id()).unwrap();
        out.write_u64::<LittleEndian>(cam.width).unwrap();
        out.write_u64::<LittleEndian>(cam.height).unwrap();
        for &p in &cam.params {
            out.write_f64::<LittleEndian>(p).unwrap();
        }
    }
    out
}

pub fn write_images_bin<'a>(images: impl ExactSizeIterator<Item = &'a RegisteredImage>) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LittleEndian>(images.len() as u64).unwrap();
    for img in images {
        out.write_u32::<LittleEndian>(img.id).unwrap();
        for &q in &img.rotation {
            out.write_f64::<LittleEndian>(q).unwrap();
        }
        for &t in &img.translation {
            out.write_f64::<LittleEndian>(t).unwrap();
        }
        out.write_u32::<LittleEndian>(img.camera_id).unwrap();
        out.extend_from_slice(img.name.as_bytes());
        out.push(0);
        out.write_u64::<LittleEndian>(img.observations.len() as u64)
            .unwrap();
        for obs in &img.observations {
            out.write_f64::<LittleEndian>(obs.x).unwrap();
            out.write_f64::<LittleEndian>(obs.y).unwrap();
            out.write_u64::<LittleEndian>(obs.point3d_id.unwrap_or(INVALID_POINT3D_ID))
                .unwrap();
        }
    }
    out
}

pub fn write_points_bin<'a>(points: impl ExactSizeIterator<Item = &'a Point3D>) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LittleEndian>(points.len() as u64).unwrap();
    for pt in points {
        out.write_u64::<LittleEndian>(pt.id).unwrap();
        for &c in &pt.xyz {
            out.write_f64::<LittleEndian>(c).unwrap();
        }
        out.extend_from_slice(&pt.rgb);
        out.write_f64::<LittleEndian>(pt.error).unwrap();
        out.write_u64::<LittleEndian>(pt.track.len() as u64)
            .unwrap();
        for e in &pt.track {
            out.write_u32::<LittleEndian>(e.image_id).unwrap();
            out.write_u32::<LittleEndian>(e.point2d_idx).unwrap();
        }
    }
    out
}
