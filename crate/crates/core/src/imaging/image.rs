use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// 8-bit greyscale raster, row-major, `height × width` with both `≥ 2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::MalformedImage(format!(
                "image must be at least 2x2, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::MalformedImage(format!(
                "expected {} pixels, found {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self::new(height, width, pixels)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.width..(i + 1) * self.width]
    }

    pub(crate) fn same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(self.shape(), other.shape()));
        }
        Ok(())
    }
}

/// Maps `x ∈ [0, 255]` (already clamped) to the nearest pixel, halves rounded up.
pub(crate) fn round_half_up<T: Real>(x: T) -> u8 {
    let clamped = x.max(T::zero()).min(T::lit(255.0));
    (clamped + T::lit(0.5)).floor().to_u8().unwrap_or(255)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// Each column's `[min, max]` maps to `[0, 255]` independently.
    PerColumn,
    /// The dataset-wide `[min, max]` maps to `[0, 255]`.
    Global,
}

/// Ranges used to map a dataset to pixels. For global scaling `mins` and
/// `maxs` have one entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScaling<T> {
    pub mode: Scaling,
    pub mins: Vec<T>,
    pub maxs: Vec<T>,
}

/// Renders record `x`, attribute `y` as the pixel at row `x`, column `y`.
pub fn dataset_to_image<T: Real>(
    d: &Dataset<T>,
    scaling: Scaling,
) -> Result<(GrayImage, ImageScaling<T>)> {
    let (n, p) = d.shape();
    let values = d.values();
    let (mins, maxs) = match scaling {
        Scaling::PerColumn => {
            let mut mins = vec![T::infinity(); p];
            let mut maxs = vec![T::neg_infinity(); p];
            for row in values.row_iter() {
                for j in 0..p {
                    mins[j] = mins[j].min(row[j]);
                    maxs[j] = maxs[j].max(row[j]);
                }
            }
            if let Some(j) = (0..p).find(|&j| !(maxs[j] > mins[j])) {
                return Err(Error::ZeroRange(format!(
                    "column {:?} is constant",
                    d.column_names()[j]
                )));
            }
            (mins, maxs)
        }
        Scaling::Global => {
            let lo = values.as_slice().iter().copied().fold(T::infinity(), T::min);
            let hi = values
                .as_slice()
                .iter()
                .copied()
                .fold(T::neg_infinity(), T::max);
            if !(hi > lo) {
                return Err(Error::ZeroRange("dataset is constant".into()));
            }
            (vec![lo], vec![hi])
        }
    };
    let full = T::lit(255.0);
    let img = GrayImage::from_fn(n, p, |i, j| {
        let k = if scaling == Scaling::Global { 0 } else { j };
        round_half_up(full * (values[(i, j)] - mins[k]) / (maxs[k] - mins[k]))
    })?;
    Ok((
        img,
        ImageScaling {
            mode: scaling,
            mins,
            maxs,
        },
    ))
}

/// Parses a binary PGM (`P5`, maxval 255). Header comments are allowed.
pub fn read_pgm<R: Read>(mut reader: R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    decode_pgm(&bytes)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::MalformedImage(format!(
            "expected P5 magic, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut field = |name: &str| -> Result<usize> {
        let tok = next_token(bytes, &mut pos)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedImage(format!("bad {name} field")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(Error::MalformedImage(format!(
            "maxval {maxval} unsupported, only 255"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedImage("missing raster separator".into())),
    }
    let need = width * height;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::MalformedImage(format!(
            "raster truncated: need {need} bytes, found {}",
            raster.len()
        )));
    }
    GrayImage::new(height, width, raster[..need].to_vec())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedImage("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm<W: Write>(img: &GrayImage, mut writer: W) -> std::io::Result<()> {
    writer.write_all(&encode_pgm(img))?;
    writer.flush()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
