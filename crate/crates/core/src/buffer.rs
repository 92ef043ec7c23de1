//! Deep buffers and the NRDB container.
//!
//! NRDB layout (little-endian):
//!
//! ```text
//! "NRDB" | u32 version = 1 | u32 height | u32 width | u32 channel_count
//! channel_count x (u32 name_len | name_len bytes UTF-8)
//! channel_count x (height * width f32, row-major)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const NRDB_MAGIC: &[u8; 4] = b"NRDB";
pub const NRDB_VERSION: u32 = 1;

pub const ALBEDO_R: &str = "albedo_r";
pub const ALBEDO_G: &str = "albedo_g";
pub const ALBEDO_B: &str = "albedo_b";
pub const DEPTH: &str = "depth";
pub const VALIDITY: &str = "validity";
pub const SEMANTIC_R: &str = "semantic_r";
pub const SEMANTIC_G: &str = "semantic_g";
pub const SEMANTIC_B: &str = "semantic_b";

/// Channel order produced by the splat renderer.
pub const RENDER_CHANNELS: [&str; 5] = [ALBEDO_R, ALBEDO_G, ALBEDO_B, DEPTH, VALIDITY];
pub const SEMANTIC_CHANNELS: [&str; 3] = [SEMANTIC_R, SEMANTIC_G, SEMANTIC_B];

#[derive(Debug, Error)]
pub enum BufferError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an NRDB file (bad magic)")]
    BadMagic,
    #[error("unsupported NRDB version {0}")]
    UnsupportedVersion(u32),
    #[error("channel name is not UTF-8")]
    BadChannelName,
    #[error("duplicate channel {0:?}")]
    DuplicateChannel(String),
    #[error("channel {name:?} has {got} samples, expected {expected}")]
    ChannelSize {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("missing channel {0:?}")]
    MissingChannel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub data: Vec<f32>,
}

/// Multi-channel per-pixel raster, one row-major f32 plane per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepBuffer {
    width: usize,
    height: usize,
    channels: Vec<Channel>,
}

impl DeepBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        DeepBuffer {
            width,
            height,
            channels: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.data.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f32], BufferError> {
        self.channel(name)
            .ok_or_else(|| BufferError::MissingChannel(name.to_string()))
    }

    pub fn push_channel(
        &mut self,
        name: impl Into<String>,
        data: Vec<f32>,
    ) -> Result<(), BufferError> {
        let name = name.into();
        if self.channel(&name).is_some() {
            return Err(BufferError::DuplicateChannel(name));
        }
        if data.len() != self.num_pixels() {
            return Err(BufferError::ChannelSize {
                name,
                got: data.len(),
                expected: self.num_pixels(),
            });
        }
        self.channels.push(Channel { name, data });
        Ok(())
    }

    /// Fraction of pixels whose validity is zero. A buffer without a validity
    /// channel counts as entirely empty.
    pub fn empty_fraction(&self) -> f64 {
        let total = self.num_pixels();
        if total == 0 {
            return 1.0;
        }
        match self.channel(VALIDITY) {
            Some(v) => v.iter().filter(|&&x| x == 0.0).count() as f64 / total as f64,
            None => 1.0,
        }
    }

    pub fn write_nrdb<W: Write>(&self, mut w: W) -> Result<(), BufferError> {
        w.write_all(NRDB_MAGIC)?;
        w.write_u32::<LittleEndian>(NRDB_VERSION)?;
        w.write_u32::<LittleEndian>(self.height as u32)?;
        w.write_u32::<LittleEndian>(self.width as u32)?;
        w.write_u32::<LittleEndian>(self.channels.len() as u32)?;
        for c in &self.channels {
            w.write_u32::<LittleEndian>(c.name.len() as u32)?;
            w.write_all(c.name.as_bytes())?;
        }
        let mut plane = Vec::with_capacity(self.num_pixels() * 4);
        for c in &self.channels {
            plane.clear();
            for &v in &c.data {
                plane.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&plane)?;
        }
        Ok(())
    }

    pub fn read_nrdb<R: Read>(mut r: R) -> Result<Self, BufferError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != NRDB_MAGIC {
            return Err(BufferError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != NRDB_VERSION {
            return Err(BufferError::UnsupportedVersion(version));
        }
        let height = r.read_u32::<LittleEndian>()? as usize;
        let width = r.read_u32::<LittleEndian>()? as usize;
        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut names = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            names.push(String::from_utf8(bytes).map_err(|_| BufferError::BadChannelName)?);
        }
        let mut buf = DeepBuffer::new(width, height);
        let mut raw = vec![0u8; width * height * 4];
        for name in names {
            r.read_exact(&mut raw)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            buf.push_channel(name, data)?;
        }
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), BufferError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_nrdb(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BufferError> {
        let file = std::fs::File::open(path)?;
        Self::read_nrdb(std::io::BufReader::new(file))
    }

    /// Checks the render-channel invariants: empty pixels have zero depth and
    /// black albedo, valid pixels have positive depth, everything is finite.
    pub fn check_render_invariants(&self) -> Result<(), String> {
        let get = |n| self.channel(n).ok_or_else(|| format!("missing {n}"));
        let (r, g, b) = (get(ALBEDO_R)?, get(ALBEDO_G)?, get(ALBEDO_B)?);
        let (depth, validity) = (get(DEPTH)?, get(VALIDITY)?);
        for i in 0..self.num_pixels() {
            let vals = [r[i], g[i], b[i], depth[i], validity[i]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(format!("non-finite sample at pixel {i}"));
            }
            if depth[i] < 0.0 {
                return Err(format!("negative depth at pixel {i}"));
            }
            let empty = validity[i] == 0.0;
            if empty != (depth[i] == 0.0) {
                return Err(format!("validity/depth disagree at pixel {i}"));
            }
            if empty && (r[i] != 0.0 || g[i] != 0.0 || b[i] != 0.0) {
                return Err(format!("empty pixel {i} has albedo"));
            }
        }
        Ok(())
    }
}
