//! On-disk interchange: the raw tensor format and lossy 8-bit image export.
//!
//! Tensor layout, bit-exact: magic bytes `LTNSR1\0`, then little-endian u32
//! rank, u32 dims, then the float64 payload in row-major order.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{Image, ImageShape};

const MAGIC: &[u8; 7] = b"LTNSR1\0";

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let expect: usize = dims.iter().product();
    if expect != data.len() {
        return Err(Error::shape(format!("{expect} elements"), format!("{}", data.len())));
    }
    let mut buf = Vec::with_capacity(7 + 4 + 4 * dims.len() + 8 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 11 || &bytes[..7] != MAGIC {
        return Err(Error::TensorFormat(format!("{}: bad magic", path.display())));
    }
    let rank = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let header = 11 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::TensorFormat("truncated dims".into()));
    }
    let dims: Vec<usize> = (0..rank)
        .map(|i| u32::from_le_bytes(bytes[11 + 4 * i..15 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let n: usize = dims.iter().product();
    if bytes.len() != header + 8 * n {
        return Err(Error::TensorFormat(format!(
            "payload size {} does not match dims {:?}",
            bytes.len() - header,
            dims
        )));
    }
    let data: Vec<f64> = (0..n)
        .map(|i| f64::from_le_bytes(bytes[header + 8 * i..header + 8 * (i + 1)].try_into().unwrap()))
        .collect();
    Ok((dims, data))
}

pub fn write_image_tensor(path: &Path, image: &Image) -> Result<()> {
    let s = image.shape();
    write_tensor(path, &[s.channels, s.height, s.width], image.as_flat())
}

pub fn read_image_tensor(path: &Path) -> Result<Image> {
    let (dims, data) = read_tensor(path)?;
    if dims.len() != 3 {
        return Err(Error::TensorFormat(format!("expected rank 3, got {}", dims.len())));
    }
    Image::from_flat(ImageShape::new(dims[0], dims[1], dims[2]), data)
}

/// Lossy 8-bit export: PGM (P5) for one channel, PPM (P6) for three.
/// Values are clamped to [0, 1] and quantized.
pub fn export_8bit(path: &Path, image: &Image) -> Result<()> {
    let s = image.shape();
    let clamped = image.clamp01();
    let quant = |v: f64| (v * 255.0).round() as u8;
    let mut buf: Vec<u8>;
    match s.channels {
        1 => {
            buf = format!("P5\n{} {}\n255\n", s.width, s.height).into_bytes();
            buf.extend(clamped.as_flat().iter().map(|&v| quant(v)));
        }
        3 => {
            buf = format!("P6\n{} {}\n255\n", s.width, s.height).into_bytes();
            let d = clamped.data();
            for y in 0..s.height {
                for x in 0..s.width {
                    for c in 0..3 {
                        buf.push(quant(d[(c, y, x)]));
                    }
                }
            }
        }
        other => {
            return Err(Error::config("channels", format!("8-bit export needs 1 or 3 channels, got {other}")));
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}
