//! Float raster grids, the `RTWMAP1` exchange format and PNG conversion.
//!
//! `RTWMAP1` layout (all little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `RTWMAP1\0`                       |
//! | 8      | 4    | width (u32)                             |
//! | 12     | 4    | height (u32)                            |
//! | 16     | 4    | channels (u32, one of 1, 3, 4)          |
//! | 20     | 4·n  | f32 samples, row-major, channel-interleaved |

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

pub const MAP_MAGIC: &[u8; 8] = b"RTWMAP1\0";
pub const MAP_HEADER_LEN: usize = 20;
pub const MAX_SIDE: u32 = 65535;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic at byte offset {offset}")]
    BadMagic { offset: usize },
    #[error("dimension {value} at byte offset {offset} exceeds {MAX_SIDE}")]
    DimensionOverflow { offset: usize, value: u32 },
    #[error("zero dimension at byte offset {offset}")]
    ZeroDimension { offset: usize },
    #[error("unsupported channel count {channels} at byte offset {offset}")]
    UnsupportedChannels { offset: usize, channels: u32 },
    #[error("non-finite sample at byte offset {offset}")]
    NonFiniteSample { offset: usize },
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("raster shape {width}x{height}x{channels} does not match {len} samples")]
    ShapeMismatch { width: usize, height: usize, channels: usize, len: usize },
    #[error("expected {expected} channel(s), found {found}")]
    WrongChannelCount { expected: usize, found: usize },
    #[error("I/O failure on {path}: {source}")]
    IoFailure { path: String, source: io::Error },
    #[error("image codec failure on {path}: {source}")]
    Codec { path: String, source: image::ImageError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RasterError + '_ {
    move |source| RasterError::IoFailure { path: path.display().to_string(), source }
}

/// Row-major, channel-interleaved f32 grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || !(1..=4).contains(&channels) || data.len() != width * height * channels {
            return Err(RasterError::ShapeMismatch { width, height, channels, len: data.len() });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("non-empty raster shape")
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data).expect("non-empty raster shape")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn expect_channels(&self, expected: usize) -> Result<(), RasterError> {
        if self.channels == expected {
            Ok(())
        } else {
            Err(RasterError::WrongChannelCount { expected, found: self.channels })
        }
    }

    /// Clamped bilinear sample; `(x, y)` in pixel coordinates where pixel
    /// centers sit at half-integers.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f32 {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.get(x0, y0, c) as f64 * (1.0 - tx) + self.get(x1, y0, c) as f64 * tx;
        let bottom = self.get(x0, y1, c) as f64 * (1.0 - tx) + self.get(x1, y1, c) as f64 * tx;
        (top * (1.0 - ty) + bottom * ty) as f32
    }
}

/// Binary pixel mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union_with(&mut self, other: &Mask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// Mask of 1-channel samples strictly above `threshold`.
    pub fn from_threshold(r: &Raster, threshold: f32) -> Result<Self, RasterError> {
        r.expect_channels(1)?;
        Ok(Self { width: r.width, height: r.height, bits: r.data.iter().map(|&v| v > threshold).collect() })
    }
}

/// Encodes a raster in the `RTWMAP1` format.
pub fn encode_map(r: &Raster) -> Result<Vec<u8>, RasterError> {
    if !matches!(r.channels, 1 | 3 | 4) {
        return Err(RasterError::UnsupportedChannels { offset: 16, channels: r.channels as u32 });
    }
    for (i, side) in [r.width, r.height].into_iter().enumerate() {
        if side > MAX_SIDE as usize {
            return Err(RasterError::DimensionOverflow { offset: 8 + 4 * i, value: side as u32 });
        }
    }
    let mut out = Vec::with_capacity(MAP_HEADER_LEN + 4 * r.data.len());
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&(r.width as u32).to_le_bytes());
    out.extend_from_slice(&(r.height as u32).to_le_bytes());
    out.extend_from_slice(&(r.channels as u32).to_le_bytes());
    for v in &r.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes an `RTWMAP1` byte buffer; errors carry the offending byte offset.
pub fn decode_map(bytes: &[u8]) -> Result<Raster, RasterError> {
    if bytes.len() < MAP_HEADER_LEN {
        if !MAP_MAGIC.starts_with(&bytes[..bytes.len().min(8)]) {
            return Err(RasterError::BadMagic { offset: 0 });
        }
        return Err(RasterError::Truncated { expected: MAP_HEADER_LEN, found: bytes.len() });
    }
    if let Some(i) = (0..8).find(|&i| bytes[i] != MAP_MAGIC[i]) {
        return Err(RasterError::BadMagic { offset: i });
    }
    let field = |offset: usize| u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
    let (width, height, channels) = (field(8), field(12), field(16));
    for (offset, value) in [(8, width), (12, height)] {
        if value == 0 {
            return Err(RasterError::ZeroDimension { offset });
        }
        if value > MAX_SIDE {
            return Err(RasterError::DimensionOverflow { offset, value });
        }
    }
    if !matches!(channels, 1 | 3 | 4) {
        return Err(RasterError::UnsupportedChannels { offset: 16, channels });
    }
    let n = width as usize * height as usize * channels as usize;
    let expected = MAP_HEADER_LEN + 4 * n;
    if bytes.len() != expected {
        return Err(RasterError::Truncated { expected, found: bytes.len() });
    }
    let mut data = Vec::with_capacity(n);
    for (i, chunk) in bytes[MAP_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(RasterError::NonFiniteSample { offset: MAP_HEADER_LEN + 4 * i });
        }
        data.push(v);
    }
    Raster::new(width as usize, height as usize, channels as usize, data)
}

pub fn load_map(path: &Path) -> Result<Raster, RasterError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_map(&bytes)
}

pub fn save_map(r: &Raster, path: &Path) -> Result<(), RasterError> {
    let bytes = encode_map(r)?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))
}

/// Min-max rescale of a 1-channel depth map to `[0, 1]`; constant maps become 0.5.
pub fn normalize_depth(d: &Raster) -> Result<Raster, RasterError> {
    d.expect_channels(1)?;
    let (lo, hi) = d
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
    let range = hi - lo;
    let data = if range > 0.0 {
        d.data.iter().map(|&v| (((v as f64) - lo) / range) as f32).collect()
    } else {
        vec![0.5; d.data.len()]
    };
    Raster::new(d.width, d.height, 1, data)
}

#[inline]
pub fn to_u8(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Reads a PNG (any color type) as a 3-channel raster with values `v / 255`.
pub fn load_png_rgb(path: &Path) -> Result<Raster, RasterError> {
    let img = image::open(path)
        .map_err(|source| RasterError::Codec { path: path.display().to_string(), source })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Raster::new(w as usize, h as usize, 3, data)
}

/// Writes a 1-, 3- or 4-channel raster as an 8-bit PNG.
pub fn save_png(r: &Raster, path: &Path) -> Result<(), RasterError> {
    let color = match r.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        4 => image::ExtendedColorType::Rgba8,
        c => return Err(RasterError::UnsupportedChannels { offset: 0, channels: c as u32 }),
    };
    let bytes: Vec<u8> = r.data.iter().map(|&v| to_u8(v)).collect();
    image::save_buffer_with_format(path, &bytes, r.width as u32, r.height as u32, color, image::ImageFormat::Png)
        .map_err(|source| RasterError::Codec { path: path.display().to_string(), source })
}
