//! Grayscale rasters and binary PGM (P5) I/O.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::validation(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("image intensities must be finite"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
        }
    }
}

fn next_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::validation("truncated PGM header"));
    }
    Ok(&data[start..*pos])
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(data, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::validation(format!("invalid PGM {what}")))
}

/// Decodes a binary PGM; samples are two bytes big-endian when maxval > 255.
pub fn decode_pgm(data: &[u8]) -> Result<Image> {
    let mut pos = 0;
    if next_token(data, &mut pos)? != b"P5" {
        return Err(Error::validation("not a binary PGM (missing P5 magic)"));
    }
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::validation(format!(
            "PGM maxval {maxval} out of range"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let n = width * height;
    let raster = data
        .get(pos..pos + n * bytes_per)
        .ok_or_else(|| Error::validation("truncated PGM raster"))?;
    let scale = maxval as f64;
    let pixels = if bytes_per == 1 {
        raster.iter().map(|&b| f64::from(b) / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
            .collect()
    };
    Image::new(width, height, pixels)
}

/// Encodes with the given maxval, rounding `v * maxval` to the nearest level.
pub fn encode_pgm(img: &Image, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::validation("PGM maxval must be positive"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    let scale = f64::from(maxval);
    for &p in &img.pixels {
        let level = (p.clamp(0.0, 1.0) * scale).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&level.to_be_bytes());
        } else {
            out.push(level as u8);
        }
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    decode_pgm(&fs::read(path)?).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn write_pgm(path: &Path, img: &Image, maxval: u16) -> Result<()> {
    fs::write(path, encode_pgm(img, maxval)?)?;
    Ok(())
}
