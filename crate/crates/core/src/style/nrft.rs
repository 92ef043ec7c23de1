//! NRFT container for externally computed feature pyramids.
//!
//! ```text
//! "NRFT" | u32 version = 1 | u32 layer_count
//! layer_count x (u32 C | u32 H | u32 W | C*H*W f32, channel-major)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{FeatureMap, FeaturePyramid, StyleError};

pub const NRFT_MAGIC: &[u8; 4] = b"NRFT";
pub const NRFT_VERSION: u32 = 1;

pub fn write_nrft<W: Write>(features: &FeaturePyramid, mut w: W) -> Result<(), StyleError> {
    w.write_all(NRFT_MAGIC)?;
    w.write_u32::<LittleEndian>(NRFT_VERSION)?;
    w.write_u32::<LittleEndian>(features.layers.len() as u32)?;
    for layer in &features.layers {
        w.write_u32::<LittleEndian>(layer.channels as u32)?;
        w.write_u32::<LittleEndian>(layer.height as u32)?;
        w.write_u32::<LittleEndian>(layer.width as u32)?;
        for &v in &layer.data {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

pub fn read_nrft<R: Read>(mut r: R) -> Result<FeaturePyramid, StyleError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != NRFT_MAGIC {
        return Err(StyleError::Nrft("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != NRFT_VERSION {
        return Err(StyleError::Nrft(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for j in 0..count {
        let c = r.read_u32::<LittleEndian>()? as usize;
        let h = r.read_u32::<LittleEndian>()? as usize;
        let w = r.read_u32::<LittleEndian>()? as usize;
        let n = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| StyleError::Nrft(format!("layer {j} is too large")))?;
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        layers.push(FeatureMap::new(c, h, w, data));
    }
    let pyramid = FeaturePyramid { layers };
    pyramid.validate()?;
    Ok(pyramid)
}
