//! Generators and brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use scenecap::buffer::{ALBEDO_B, ALBEDO_G, ALBEDO_R, DEPTH, VALIDITY};
use scenecap::recon::{Camera, CameraModel, Observation, Point3D, RegisteredImage, TrackEntry};
use scenecap::splat::Footprint;
use scenecap::{DeepBuffer, LabelMap, PointCloud, Reconstruction, SplatOptions, Viewpoint};

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 {
            return q.map(|c| c / n);
        }
    }
}

fn random_float<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-1e3..1e3),
        1 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-12..12)),
        2 => f64::from(rng.random_range(-100i32..100)),
        _ => 0.0,
    }
}

pub fn random_camera<R: Rng>(rng: &mut R, id: u32) -> Camera {
    let model = *[
        CameraModel::SimplePinhole,
        CameraModel::Pinhole,
        CameraModel::SimpleRadial,
    ]
    .choose(rng)
    .unwrap();
    let (w, h) = (rng.random_range(1..5000u64), rng.random_range(1..5000u64));
    let params = match model {
        CameraModel::SimplePinhole => vec![
            rng.random_range(1.0..5000.0),
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
        ],
        CameraModel::Pinhole => vec![
            rng.random_range(1.0..5000.0),
            rng.random_range(1.0..5000.0),
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
        ],
        CameraModel::SimpleRadial => vec![
            rng.random_range(1.0..5000.0),
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
            rng.random_range(-0.5..0.5),
        ],
    };
    Camera::new(id, model, w, h, params)
}

/// Random but referentially consistent reconstruction with sparse ids.
pub fn random_reconstruction<R: Rng>(rng: &mut R) -> Reconstruction {
    let n_cams = rng.random_range(1..5);
    let mut cam_ids: Vec<u32> = Vec::new();
    while cam_ids.len() < n_cams {
        let id = rng.random_range(1..1000);
        if !cam_ids.contains(&id) {
            cam_ids.push(id);
        }
    }
    let cameras: Vec<Camera> = cam_ids.iter().map(|&id| random_camera(rng, id)).collect();

    let n_imgs = rng.random_range(0..8);
    let mut img_ids: Vec<u32> = Vec::new();
    while img_ids.len() < n_imgs {
        let id = rng.random_range(1..100_000);
        if !img_ids.contains(&id) {
            img_ids.push(id);
        }
    }
    let n_pts = rng.random_range(0..60);
    let mut pt_ids: Vec<u64> = Vec::new();
    while pt_ids.len() < n_pts {
        let id = rng.random_range(0..u64::MAX - 1);
        if !pt_ids.contains(&id) {
            pt_ids.push(id);
        }
    }

    let images: Vec<RegisteredImage> = img_ids
        .iter()
        .map(|&id| {
            let n_obs = rng.random_range(0..20);
            let observations = (0..n_obs)
                .map(|_| Observation {
                    x: random_float(rng),
                    y: random_float(rng),
                    point3d_id: if rng.random_bool(0.3) || pt_ids.is_empty() {
                        None
                    } else {
                        Some(*pt_ids.choose(rng).unwrap())
                    },
                })
                .collect();
            let dir = if rng.random_bool(0.3) { "sub dir/" } else { "" };
            RegisteredImage {
                id,
                rotation: random_unit_quaternion(rng),
                translation: std::array::from_fn(|_| random_float(rng)),
                camera_id: *cam_ids.choose(rng).unwrap(),
                name: format!("{dir}IMG_{id:05}.jpg"),
                observations,
            }
        })
        .collect();

    let points: Vec<Point3D> = pt_ids
        .iter()
        .map(|&id| {
            let track_len = if img_ids.is_empty() {
                0
            } else {
                rng.random_range(0..6)
            };
            Point3D {
                id,
                xyz: std::array::from_fn(|_| random_float(rng)),
                rgb: std::array::from_fn(|_| rng.random()),
                error: rng.random_range(0.0..4.0),
                track: (0..track_len)
                    .map(|_| TrackEntry {
                        image_id: *img_ids.choose(rng).unwrap(),
                        point2d_idx: rng.random_range(0..50),
                    })
                    .collect(),
            }
        })
        .collect();

    Reconstruction::from_parts(cameras, images, points).expect("generator keeps references valid")
}

/// Winner of a pixel: `(depth, id, input index)`.
pub type Winner = (f64, u64, usize);

/// Visits every pixel and every point; no footprint tables, no z-buffer.
pub fn naive_splat(cloud: &PointCloud, vp: &Viewpoint, opts: &SplatOptions) -> Vec<Option<Winner>> {
    let (w, h) = (vp.width() as i64, vp.height() as i64);
    let projected: Vec<_> = cloud.xyz.iter().map(|&p| vp.project(p)).collect();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<Winner> = None;
            for (i, p) in projected.iter().enumerate() {
                let Some(p) = p else { continue };
                let (cx, cy) = (p.u.floor(), p.v.floor());
                let (dx, dy) = ((x as f64 - cx).abs(), (y as f64 - cy).abs());
                let covered = match opts.footprint {
                    Footprint::Disk => (dx * dx + dy * dy).sqrt() <= opts.radius,
                    Footprint::Square => dx <= opts.radius && dy <= opts.radius,
                };
                if !covered {
                    continue;
                }
                let cand = (p.depth, cloud.ids[i], i);
                let better = match best {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2)),
                };
                if better {
                    best = Some(cand);
                }
            }
            out.push(best);
        }
    }
    out
}

/// Expected channel values for a naive winner list.
pub fn expected_channels(cloud: &PointCloud, winners: &[Option<Winner>]) -> [Vec<f32>; 5] {
    let mut planes: [Vec<f32>; 5] = std::array::from_fn(|_| vec![0.0; winners.len()]);
    for (pix, w) in winners.iter().enumerate() {
        if let Some((depth, _, i)) = w {
            let rgb = cloud.rgb[*i];
            planes[0][pix] = rgb[0] as f32 / 255.0;
            planes[1][pix] = rgb[1] as f32 / 255.0;
            planes[2][pix] = rgb[2] as f32 / 255.0;
            planes[3][pix] = *depth as f32;
            planes[4][pix] = 1.0;
        }
    }
    planes
}

pub fn render_channels(buf: &DeepBuffer) -> [Vec<f32>; 5] {
    [ALBEDO_R, ALBEDO_G, ALBEDO_B, DEPTH, VALIDITY].map(|n| buf.channel(n).unwrap().to_vec())
}

/// Identity-pose pinhole camera with unit focal length and the principal
/// point at the origin: camera-space `(x, y, z)` lands on pixel `(x/z, y/z)`.
pub fn unit_viewpoint(w: u64, h: u64) -> Viewpoint {
    let cam = Camera::new(1, CameraModel::Pinhole, w, h, vec![1.0, 1.0, 0.0, 0.0]);
    Viewpoint::new([1.0, 0.0, 0.0, 0.0], [0.0; 3], cam).unwrap()
}

/// Random splat scene. Odd seeds use an identity pose with depths drawn from
/// a handful of values and repeated positions, so exact depth ties are common.
pub fn random_splat_scene<R: Rng>(rng: &mut R, odd: bool) -> (PointCloud, Viewpoint, SplatOptions) {
    let (w, h) = (rng.random_range(1..=64u64), rng.random_range(1..=64u64));
    let n = rng.random_range(0..=1000usize);
    let radius = match rng.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        2 => 2.0,
        3 => 1.5,
        4 => std::f64::consts::SQRT_2,
        _ => rng.random_range(0.0..2.0),
    };
    let footprint = if rng.random_bool(0.8) {
        Footprint::Disk
    } else {
        Footprint::Square
    };
    let opts = SplatOptions { radius, footprint };

    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + 3).collect();
    ids.shuffle(rng);
    let mut cloud = PointCloud::with_capacity(n);
    if odd {
        let vp = unit_viewpoint(w, h);
        let depths = [1.0, 2.0, 2.5, 4.0];
        let mut seen: Vec<[f64; 3]> = Vec::new();
        for &id in &ids {
            let xyz = if !seen.is_empty() && rng.random_bool(0.2) {
                *seen.choose(rng).unwrap()
            } else {
                let z = *depths.choose(rng).unwrap();
                let u = rng.random_range(-3.0..w as f64 + 3.0);
                let v = rng.random_range(-3.0..h as f64 + 3.0);
                let p = [u * z, v * z, if rng.random_bool(0.05) { -z } else { z }];
                seen.push(p);
                p
            };
            cloud.push(id, xyz, rng.random());
        }
        (cloud, vp, opts)
    } else {
        let f = rng.random_range(10.0..100.0);
        let cam = Camera::new(
            1,
            CameraModel::SimpleRadial,
            w,
            h,
            vec![
                f,
                w as f64 / 2.0,
                h as f64 / 2.0,
                rng.random_range(-0.05..0.05),
            ],
        );
        let rotation = random_unit_quaternion(rng);
        let translation = [0.0, 0.0, 0.0];
        let vp = Viewpoint::new(rotation, translation, cam).unwrap();
        // Place points in camera space and rotate back to the world frame.
        let inv = Viewpoint::new(
            [rotation[0], -rotation[1], -rotation[2], -rotation[3]],
            [0.0; 3],
            vp.camera.clone(),
        )
        .unwrap();
        for &id in &ids {
            let z: f64 = rng.random_range(-0.5..10.0);
            let x = rng.random_range(-0.6..0.6) * z.abs() * w as f64 / f;
            let y = rng.random_range(-0.6..0.6) * z.abs() * h as f64 / f;
            cloud.push(id, inv.rotate([x, y, z]), rng.random());
        }
        (cloud, vp, opts)
    }
}

pub fn write_photo(path: &Path, w: u32, h: u32, seed: u8) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([
            (x as u8).wrapping_add(seed),
            (y as u8).wrapping_mul(3),
            seed,
        ])
    });
    img.save(path).unwrap();
}

pub fn write_labels(path: &Path, w: usize, h: usize, seed: u8) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let classes = (0..w * h)
        .map(|i| ((i as u32 + seed as u32) % 150) as u8)
        .collect();
    LabelMap::new(w, h, classes).save_png(path).unwrap();
}

/// `n` images of a `w x h` PINHOLE camera (focal 1, principal point 0, so a
/// point `(u z, v z, z)` lands on pixel `(u, v)`). Image `i` sees the points
/// `covered[i]` pixels, one point per pixel in raster order.
pub fn coverage_reconstruction(w: u64, h: u64, covered: &[usize]) -> Reconstruction {
    let cam = Camera::new(1, CameraModel::Pinhole, w, h, vec![1.0, 1.0, 0.0, 0.0]);
    let mut images = Vec::new();
    let mut points = Vec::new();
    let mut next_id = 1u64;
    for (i, &count) in covered.iter().enumerate() {
        let image_id = i as u32 + 1;
        // Each image looks at its own slab of space, offset along x by a large
        // translation so the slabs never overlap on screen.
        let offset = 1e6 * (i as f64 + 1.0);
        images.push(RegisteredImage {
            id: image_id,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [-offset, 0.0, 0.0],
            camera_id: 1,
            name: format!("img_{image_id:03}.png"),
            observations: vec![],
        });
        for k in 0..count {
            let (u, v) = ((k as u64 % w) as f64 + 0.5, (k as u64 / w) as f64 + 0.5);
            points.push(Point3D {
                id: next_id,
                xyz: [u + offset, v, 1.0],
                rgb: [200, 100, 50],
                error: 0.0,
                track: vec![],
            });
            next_id += 1;
        }
    }
    Reconstruction::from_parts(vec![cam], images, points).unwrap()
}
