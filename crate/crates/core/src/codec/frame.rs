//! 8-bit luma frames and binary PGM (P5) I/O.
//!
//! Parsing accepts `P5`, then width, height and maxval as ASCII decimals
//! separated by whitespace, with `#` comments (to end of line) allowed
//! anywhere in the header after the magic. Exactly one whitespace byte
//! follows maxval, then `width * height` sample bytes. Maxval must be 255.
//! Trailing bytes after the raster are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Smallest frame side accepted.
pub const MIN_FRAME_SIDE: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(Error::InvalidGeometry(format!(
                "frame {width}x{height} smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        if luma.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: luma.len(),
            });
        }
        Ok(Frame { width, height, luma })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                luma.push(f(x, y));
            }
        }
        Self::new(width, height, luma)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    /// Sample at signed coordinates, 128 outside the frame.
    #[inline]
    pub fn at_or_gray(&self, x: isize, y: isize) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            128
        } else {
            self.at(x as usize, y as usize)
        }
    }

    /// Pads right and bottom to multiples of `multiple` by replicating the
    /// last column and row.
    pub fn pad_to_multiple(&self, multiple: usize) -> Frame {
        let w = self.width.div_ceil(multiple) * multiple;
        let h = self.height.div_ceil(multiple) * multiple;
        if w == self.width && h == self.height {
            return self.clone();
        }
        let mut luma = Vec::with_capacity(w * h);
        for y in 0..h {
            let sy = y.min(self.height - 1);
            for x in 0..w {
                luma.push(self.at(x.min(self.width - 1), sy));
            }
        }
        Frame {
            width: w,
            height: h,
            luma,
        }
    }

    /// Copies a `w x h` window; samples outside the frame read as 128.
    pub fn window(&self, x: isize, y: isize, w: usize, h: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(w * h);
        for dy in 0..h as isize {
            for dx in 0..w as isize {
                out.push(self.at_or_gray(x + dx, y + dy));
            }
        }
        out
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.luma);
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut parser = HeaderParser { bytes, pos: 0 };
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(Error::Pgm("missing P5 magic".into()));
        }
        parser.pos = 2;
        let width = parser.number("width")?;
        let height = parser.number("height")?;
        let maxval = parser.number("maxval")?;
        if maxval != 255 {
            return Err(Error::Pgm(format!("maxval must be 255, got {maxval}")));
        }
        match bytes.get(parser.pos) {
            Some(b) if b.is_ascii_whitespace() => parser.pos += 1,
            _ => return Err(Error::Pgm("expected whitespace after maxval".into())),
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Pgm("dimensions overflow".into()))?;
        let raster = bytes
            .get(parser.pos..parser.pos + n)
            .ok_or_else(|| Error::Pgm(format!("raster truncated: need {n} bytes")))?;
        Frame::new(width, height, raster.to_vec())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm_bytes(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm_bytes())?;
        Ok(())
    }
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderParser<'_> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        self.skip_separators();
        if self.pos == start {
            return Err(Error::Pgm(format!("expected whitespace before {what}")));
        }
        let digits_start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(Error::Pgm(format!("expected decimal {what}")));
        }
        std::str::from_utf8(&self.bytes[digits_start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("bad {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let f = Frame::from_fn(70, 64, |x, y| (x * 3 + y) as u8).unwrap();
        assert_eq!(Frame::from_pgm_bytes(&f.to_pgm_bytes()).unwrap(), f);
    }

    #[test]
    fn pgm_with_comments() {
        let mut bytes = b"P5\n# made by hand\n64 # width\n64\n# max\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(7u8, 64 * 64));
        let f = Frame::from_pgm_bytes(&bytes).unwrap();
        assert_eq!((f.width(), f.height(), f.at(5, 5)), (64, 64, 7));
    }

    #[test]
    fn pgm_errors() {
        assert!(Frame::from_pgm_bytes(b"P2\n64 64\n255\n").is_err());
        let mut bytes = b"P5\n64 64\n65535\n".to_vec();
        bytes.extend(vec![0u8; 64 * 64 * 2]);
        assert!(Frame::from_pgm_bytes(&bytes).is_err());
        let mut short = b"P5\n64 64\n255\n".to_vec();
        short.extend(vec![0u8; 100]);
        assert!(matches!(Frame::from_pgm_bytes(&short), Err(Error::Pgm(_))));
    }

    #[test]
    fn padding_replicates_edges() {
        let f = Frame::from_fn(70, 70, |x, y| (x + y) as u8).unwrap();
        let p = f.pad_to_multiple(64);
        assert_eq!((p.width(), p.height()), (128, 128));
        assert_eq!(p.at(127, 3), f.at(69, 3));
        assert_eq!(p.at(100, 127), f.at(69, 69));
        assert_eq!(p.at(10, 10), f.at(10, 10));
    }

    #[test]
    fn too_small_frame_rejected() {
        assert!(Frame::filled(32, 64, 0).is_err());
    }
}
