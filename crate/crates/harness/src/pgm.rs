//! Grayscale PGM images (`P2` plain and `P5` binary).
//!
//! Reading normalizes by the header's maxval; writing quantizes to maxval 255
//! with round-half-up, so a round trip moves each entry by at most 1/510.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{io_error, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// `P2`, decimal samples.
    Plain,
    /// `P5`, one byte per sample (two for maxval above 255).
    Binary,
}

fn malformed(offset: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Pgm {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(malformed(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| malformed(start, format!("{what} out of range")))
    }
}

/// Decodes a PGM image into `[0, 1]` (rows = height, columns = width).
pub fn decode(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let encoding = match bytes.get(..2) {
        Some(b"P2") => Encoding::Plain,
        Some(b"P5") => Encoding::Binary,
        _ => return Err(malformed(0, "expected magic number P2 or P5")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(malformed(maxval_at, "empty image"));
    }
    let scale = maxval as f64;
    let mut image = DMatrix::zeros(height, width);
    match encoding {
        Encoding::Plain => {
            for k in 0..width * height {
                let at = cur.pos;
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(malformed(at, format!("sample {v} exceeds maxval {maxval}")));
                }
                image[(k / width, k % width)] = v as f64 / scale;
            }
        }
        Encoding::Binary => {
            // Exactly one whitespace byte separates the header from the raster.
            if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
                return Err(malformed(cur.pos, "expected whitespace after maxval"));
            }
            let start = cur.pos + 1;
            let wide = maxval > 255;
            let sample_len = if wide { 2 } else { 1 };
            let needed = width * height * sample_len;
            if bytes.len() < start + needed {
                return Err(malformed(
                    bytes.len(),
                    format!("raster truncated: {} of {needed} bytes", bytes.len().saturating_sub(start)),
                ));
            }
            for k in 0..width * height {
                let at = start + k * sample_len;
                let v = if wide {
                    u16::from_be_bytes([bytes[at], bytes[at + 1]]) as usize
                } else {
                    bytes[at] as usize
                };
                if v > maxval {
                    return Err(malformed(at, format!("sample {v} exceeds maxval {maxval}")));
                }
                image[(k / width, k % width)] = v as f64 / scale;
            }
        }
    }
    Ok(image)
}

/// `round(255·v)` with halves rounded up, after clamping to `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Encodes at maxval 255.
pub fn encode(image: &DMatrix<f64>, encoding: Encoding) -> Vec<u8> {
    let (height, width) = image.shape();
    let magic = match encoding {
        Encoding::Plain => "P2",
        Encoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    for i in 0..height {
        let row = (0..width).map(|j| quantize(image[(i, j)]));
        match encoding {
            Encoding::Binary => out.extend(row),
            Encoding::Plain => {
                let line: Vec<String> = row.map(|v| v.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn read_file(path: &Path) -> Result<DMatrix<f64>> {
    decode(&std::fs::read(path).map_err(io_error(path))?)
}

pub fn write_file(path: &Path, image: &DMatrix<f64>, encoding: Encoding) -> Result<()> {
    std::fs::write(path, encode(image, encoding)).map_err(io_error(path))
}
