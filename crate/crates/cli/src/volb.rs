//! VOLB volume files.
//!
//! ```text
//! 0..4   magic "VOLB"
//! 4      version (1)
//! 5      dtype (0 = f32, 1 = u8 mask)
//! 6      ndim (2 or 3)
//! 7      reserved (0)
//! 8..    ndim × u32 LE dims: [slices,] height, width
//! ..     payload, little-endian, width fastest
//! ```

use std::path::Path;

use mhdmap::{BinaryMask, Image2D, Volume3D};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"VOLB";
pub const VERSION: u8 = 1;
pub const MAX_DIM: u32 = 1 << 16;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum VolumeData {
    Image(Image2D),
    Volume(Volume3D),
    Mask(BinaryMask),
    MaskVolume(Vec<BinaryMask>),
}

impl VolumeData {
    /// Slices as scalar images; masks become 0/1 images.
    pub fn into_images(self) -> Vec<Image2D> {
        match self {
            VolumeData::Image(img) => vec![img],
            VolumeData::Volume(v) => v.into_slices(),
            VolumeData::Mask(m) => vec![m.to_image()],
            VolumeData::MaskVolume(ms) => ms.iter().map(BinaryMask::to_image).collect(),
        }
    }

    fn dims(&self) -> Vec<u32> {
        let hw = |h: usize, w: usize| [h as u32, w as u32];
        match self {
            VolumeData::Image(img) => hw(img.height(), img.width()).to_vec(),
            VolumeData::Mask(m) => hw(m.height(), m.width()).to_vec(),
            VolumeData::Volume(v) => {
                let mut d = vec![v.n_slices() as u32];
                d.extend(hw(v.height(), v.width()));
                d
            }
            VolumeData::MaskVolume(ms) => {
                let (h, w) = ms.first().map_or((0, 0), BinaryMask::shape);
                let mut d = vec![ms.len() as u32];
                d.extend(hw(h, w));
                d
            }
        }
    }
}

/// Serializes `data`. Scalar values are rounded to the nearest f32.
pub fn encode(data: &VolumeData) -> Vec<u8> {
    let dims = data.dims();
    let dtype = matches!(data, VolumeData::Mask(_) | VolumeData::MaskVolume(_)) as u8;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, dtype, dims.len() as u8, 0]);
    for d in &dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    let put_image = |img: &Image2D, out: &mut Vec<u8>| {
        for &v in img.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    match data {
        VolumeData::Image(img) => put_image(img, &mut out),
        VolumeData::Volume(v) => v.slices().iter().for_each(|s| put_image(s, &mut out)),
        VolumeData::Mask(m) => out.extend(m.as_slice().iter().map(|&b| b as u8)),
        VolumeData::MaskVolume(ms) => {
            for m in ms {
                out.extend(m.as_slice().iter().map(|&b| b as u8));
            }
        }
    }
    out
}

/// Parses a VOLB byte buffer. `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> CliResult<VolumeData> {
    let fail = |offset: usize, msg: String| CliError::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(
            bytes.len(),
            format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail(
            0,
            format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4])),
        ));
    }
    if bytes[4] != VERSION {
        return Err(fail(4, format!("unsupported version {}", bytes[4])));
    }
    let dtype = bytes[5];
    if dtype > 1 {
        return Err(fail(5, format!("unknown dtype {dtype}")));
    }
    let ndim = bytes[6] as usize;
    if ndim != 2 && ndim != 3 {
        return Err(fail(6, format!("ndim must be 2 or 3, got {ndim}")));
    }
    if bytes[7] != 0 {
        return Err(fail(7, format!("reserved byte must be 0, got {}", bytes[7])));
    }
    let dims_end = HEADER_LEN + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(fail(bytes.len(), "truncated dimension table".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let at = HEADER_LEN + 4 * i;
        let d = u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        if d == 0 || d > MAX_DIM {
            return Err(fail(at, format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        dims.push(d as usize);
    }
    let (slices, h, w) = if ndim == 3 {
        (dims[0], dims[1], dims[2])
    } else {
        (1, dims[0], dims[1])
    };
    let elem = if dtype == 0 { 4 } else { 1 };
    let expected = slices * h * w * elem;
    let payload = &bytes[dims_end..];
    if payload.len() < expected {
        return Err(fail(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(fail(
            dims_end + expected,
            format!("{} trailing bytes", payload.len() - expected),
        ));
    }

    let plane = h * w;
    if dtype == 0 {
        let mut images = Vec::with_capacity(slices);
        for s in 0..slices {
            let mut data = Vec::with_capacity(plane);
            for k in 0..plane {
                let at = (s * plane + k) * 4;
                let v = f32::from_le_bytes(payload[at..at + 4].try_into().expect("4 bytes"));
                if !v.is_finite() {
                    return Err(fail(dims_end + at, format!("non-finite value {v}")));
                }
                data.push(v as f64);
            }
            images.push(Image2D::new(h, w, data)?);
        }
        Ok(if ndim == 2 {
            VolumeData::Image(images.pop().expect("one slice"))
        } else {
            VolumeData::Volume(Volume3D::new(images)?)
        })
    } else {
        let mut masks = Vec::with_capacity(slices);
        for s in 0..slices {
            let mut data = Vec::with_capacity(plane);
            for k in 0..plane {
                let at = s * plane + k;
                match payload[at] {
                    0 => data.push(false),
                    1 => data.push(true),
                    v => return Err(fail(dims_end + at, format!("mask byte must be 0 or 1, got {v}"))),
                }
            }
            masks.push(BinaryMask::new(h, w, data)?);
        }
        Ok(if ndim == 2 {
            VolumeData::Mask(masks.pop().expect("one slice"))
        } else {
            VolumeData::MaskVolume(masks)
        })
    }
}

pub fn read_volume(path: &Path) -> CliResult<VolumeData> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes, path)
}

pub fn write_volume(data: &VolumeData, path: &Path) -> CliResult<()> {
    std::fs::write(path, encode(data)).map_err(|e| CliError::io(path, e))
}

pub fn read_image(path: &Path) -> CliResult<Image2D> {
    match read_volume(path)? {
        VolumeData::Image(img) => Ok(img),
        VolumeData::Mask(m) => Ok(m.to_image()),
        _ => Err(CliError::Data(format!("{}: expected a 2D volume", path.display()))),
    }
}

pub fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    match read_volume(path)? {
        VolumeData::Mask(m) => Ok(m),
        _ => Err(CliError::Data(format!("{}: expected a 2D mask", path.display()))),
    }
}
