//! Binary PPM (P6) output and frame strips.

use std::io::Write;
use std::path::Path;

use toolrl_core::env::render::{Image, Rgb, CHANNELS};

use crate::error::{Error, Result};

/// Encodes a planar image as interleaved P6.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(CHANNELS * img.width * img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            out.extend_from_slice(&img.pixel(x, y));
        }
    }
    out
}

pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(&encode_ppm(img)).map_err(Error::io(path))
}

/// Lays `frames` out left to right with a `gap`-pixel separator column.
/// All frames must share one size.
pub fn strip(frames: &[&Image], gap: usize, separator: Rgb) -> Image {
    let (w, h) = frames.first().map_or((0, 0), |f| (f.width, f.height));
    let n = frames.len();
    let total = if n == 0 { 0 } else { n * w + (n - 1) * gap };
    let mut out = Image::filled(total, h, separator);
    for (i, f) in frames.iter().enumerate() {
        assert!(f.width == w && f.height == h, "strip frames differ in size");
        let x0 = i * (w + gap);
        for y in 0..h {
            for x in 0..w {
                out.set(x0 + x, y, f.pixel(x, y));
            }
        }
    }
    out
}

/// Indices of `count` frames spread evenly over `0..len`, always including
/// the first and last.
pub fn strip_indices(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count >= len {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![len - 1];
    }
    let mut v: Vec<usize> = (0..count).map(|i| i * (len - 1) / (count - 1)).collect();
    v.dedup();
    v
}
