//! Z-buffered point splatting into deep buffers.
//!
//! Every point projects to a continuous pixel position whose floor is its
//! integer center. The splat covers each pixel whose integer coordinates lie
//! within `radius` of that center (Euclidean for [`Footprint::Disk`], which
//! gives the 5-pixel cross at radius 1, or Chebyshev for
//! [`Footprint::Square`]). A pixel keeps the covering point with the smallest
//! `(depth, point id, input index)` key, so the result does not depend on the
//! order points are visited or how they are split across workers.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{DeepBuffer, ALBEDO_B, ALBEDO_G, ALBEDO_R, DEPTH, VALIDITY};
use crate::camera::Viewpoint;
use crate::recon::Reconstruction;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("zero-sized viewport {0}x{1}")]
    EmptyViewport(u64, u64),
    #[error("viewport {0}x{1} is too large")]
    ViewportTooLarge(u64, u64),
    #[error("invalid splat radius {0}")]
    InvalidRadius(f64),
    #[error("point cloud has {0} points, more than the renderer can index")]
    TooManyPoints(usize),
    #[error("failed to start render workers: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Footprint {
    #[default]
    Disk,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplatOptions {
    pub radius: f64,
    pub footprint: Footprint,
}

impl Default for SplatOptions {
    fn default() -> Self {
        SplatOptions {
            radius: 1.0,
            footprint: Footprint::Disk,
        }
    }
}

impl SplatOptions {
    pub fn with_radius(radius: f64) -> Self {
        SplatOptions {
            radius,
            ..Default::default()
        }
    }

    /// Pixel offsets covered by one splat, relative to its integer center.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let reach = self.radius.floor() as i64;
        let mut out = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let inside = match self.footprint {
                    Footprint::Disk => ((dx * dx + dy * dy) as f64).sqrt() <= self.radius,
                    Footprint::Square => dx.abs().max(dy.abs()) as f64 <= self.radius,
                };
                if inside {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

/// Structure-of-arrays colored point cloud.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub ids: Vec<u64>,
    pub xyz: Vec<[f64; 3]>,
    pub rgb: Vec<[u8; 3]>,
}

impl PointCloud {
    pub fn with_capacity(n: usize) -> Self {
        PointCloud {
            ids: Vec::with_capacity(n),
            xyz: Vec::with_capacity(n),
            rgb: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, id: u64, xyz: [f64; 3], rgb: [u8; 3]) {
        self.ids.push(id);
        self.xyz.push(xyz);
        self.rgb.push(rgb);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_reconstruction(recon: &Reconstruction) -> Self {
        let mut cloud = PointCloud::with_capacity(recon.points.len());
        for p in recon.points.values() {
            cloud.push(p.id, p.xyz, p.rgb);
        }
        cloud
    }
}

const EMPTY: u32 = u32::MAX;

/// Per-pixel winner: depth plus index into the point cloud.
struct ZBuffer {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    index: Vec<u32>,
}

impl ZBuffer {
    fn new(width: usize, height: usize) -> Self {
        ZBuffer {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            index: vec![EMPTY; width * height],
        }
    }

    #[inline]
    fn wins(ids: &[u64], depth: f64, idx: u32, cur_depth: f64, cur_idx: u32) -> bool {
        if cur_idx == EMPTY {
            return true;
        }
        match depth.partial_cmp(&cur_depth) {
            Some(Ordering::Less) => true,
            Some(Ordering::Greater) => false,
            _ => (ids[idx as usize], idx) < (ids[cur_idx as usize], cur_idx),
        }
    }

    fn splat_range(
        &mut self,
        cloud: &PointCloud,
        vp: &Viewpoint,
        offsets: &[(i64, i64)],
        reach: i64,
        start: usize,
        end: usize,
    ) {
        let (w, h) = (self.width as i64, self.height as i64);
        for i in start..end {
            let Some(p) = vp.project(cloud.xyz[i]) else {
                continue;
            };
            let (u, v) = (p.u.floor(), p.v.floor());
            // Also rejects NaN.
            if !(u >= -(reach as f64) - 1.0
                && u <= (w + reach) as f64
                && v >= -(reach as f64) - 1.0
                && v <= (h + reach) as f64)
            {
                continue;
            }
            let (cx, cy) = (u as i64, v as i64);
            let idx = i as u32;
            for &(dx, dy) in offsets {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || y < 0 || x >= w || y >= h {
                    continue;
                }
                let pix = (y * w + x) as usize;
                if Self::wins(&cloud.ids, p.depth, idx, self.depth[pix], self.index[pix]) {
                    self.depth[pix] = p.depth;
                    self.index[pix] = idx;
                }
            }
        }
    }

    fn merge(&mut self, other: &ZBuffer, ids: &[u64]) {
        for pix in 0..self.depth.len() {
            let oi = other.index[pix];
            if oi != EMPTY
                && Self::wins(ids, other.depth[pix], oi, self.depth[pix], self.index[pix])
            {
                self.depth[pix] = other.depth[pix];
                self.index[pix] = oi;
            }
        }
    }

    fn into_deep_buffer(self, cloud: &PointCloud) -> DeepBuffer {
        let n = self.width * self.height;
        let mut planes = [
            vec![0f32; n],
            vec![0f32; n],
            vec![0f32; n],
            vec![0f32; n],
            vec![0f32; n],
        ];
        for (pix, &idx) in self.index.iter().enumerate() {
            if idx == EMPTY {
                continue;
            }
            let rgb = cloud.rgb[idx as usize];
            planes[0][pix] = f32::from(rgb[0]) / 255.0;
            planes[1][pix] = f32::from(rgb[1]) / 255.0;
            planes[2][pix] = f32::from(rgb[2]) / 255.0;
            planes[3][pix] = (self.depth[pix] as f32).min(f32::MAX);
            planes[4][pix] = 1.0;
        }
        let mut buf = DeepBuffer::new(self.width, self.height);
        let [r, g, b, d, v] = planes;
        for (name, data) in [
            (ALBEDO_R, r),
            (ALBEDO_G, g),
            (ALBEDO_B, b),
            (DEPTH, d),
            (VALIDITY, v),
        ] {
            buf.push_channel(name, data)
                .expect("fresh buffer with matching planes");
        }
        buf
    }
}

fn check_inputs(
    cloud: &PointCloud,
    vp: &Viewpoint,
    opts: &SplatOptions,
) -> Result<(usize, usize), RenderError> {
    let (w, h) = (vp.width(), vp.height());
    if w == 0 || h == 0 {
        return Err(RenderError::EmptyViewport(w, h));
    }
    if w > u32::MAX as u64 || h > u32::MAX as u64 || w.saturating_mul(h) > (1u64 << 32) {
        return Err(RenderError::ViewportTooLarge(w, h));
    }
    if !(opts.radius >= 0.0 && opts.radius.is_finite()) {
        return Err(RenderError::InvalidRadius(opts.radius));
    }
    if cloud.len() >= EMPTY as usize {
        return Err(RenderError::TooManyPoints(cloud.len()));
    }
    Ok((w as usize, h as usize))
}

fn render_chunks(
    cloud: &PointCloud,
    vp: &Viewpoint,
    opts: &SplatOptions,
    width: usize,
    height: usize,
    chunks: usize,
) -> DeepBuffer {
    let offsets = opts.offsets();
    let reach = opts.radius.floor() as i64;
    let n = cloud.len();
    if chunks <= 1 || n < 2 {
        let mut zb = ZBuffer::new(width, height);
        zb.splat_range(cloud, vp, &offsets, reach, 0, n);
        return zb.into_deep_buffer(cloud);
    }
    let per = n.div_ceil(chunks);
    let merged = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut zb = ZBuffer::new(width, height);
            zb.splat_range(
                cloud,
                vp,
                &offsets,
                reach,
                (c * per).min(n),
                ((c + 1) * per).min(n),
            );
            zb
        })
        .reduce_with(|mut a, b| {
            a.merge(&b, &cloud.ids);
            a
        })
        .expect("at least one chunk");
    merged.into_deep_buffer(cloud)
}

/// Renders a deep buffer with albedo, depth and validity channels, using the
/// current rayon pool.
pub fn render(
    cloud: &PointCloud,
    vp: &Viewpoint,
    opts: &SplatOptions,
) -> Result<DeepBuffer, RenderError> {
    let (w, h) = check_inputs(cloud, vp, opts)?;
    Ok(render_chunks(
        cloud,
        vp,
        opts,
        w,
        h,
        rayon::current_num_threads(),
    ))
}

/// Same as [`render`] on a dedicated pool of `threads` workers; `threads == 1`
/// runs on the calling thread.
pub fn render_with_threads(
    cloud: &PointCloud,
    vp: &Viewpoint,
    opts: &SplatOptions,
    threads: usize,
) -> Result<DeepBuffer, RenderError> {
    let (w, h) = check_inputs(cloud, vp, opts)?;
    if threads <= 1 {
        return Ok(render_chunks(cloud, vp, opts, w, h, 1));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RenderError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| render_chunks(cloud, vp, opts, w, h, threads)))
}

pub fn empty_fraction(buffer: &DeepBuffer) -> f64 {
    buffer.empty_fraction()
}
