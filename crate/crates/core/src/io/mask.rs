//! Label masks stored as binary PGM (P5), one byte per pixel holding the
//! class index.

use std::fs;
use std::path::Path;

use super::{io_err, FormatError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self, FormatError> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(FormatError::MaskMalformed(format!(
                "{} labels for a {height}x{width} mask",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: u8) -> Self {
        Self {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.labels[i * self.width + j]
    }

    /// Checks every label against the class count of the paired data.
    pub fn check_classes(&self, classes: usize) -> Result<(), FormatError> {
        match self.labels.iter().position(|&l| l as usize >= classes) {
            Some(p) => Err(FormatError::LabelExceedsClassCount {
                label: self.labels[p],
                classes,
                row: p / self.width,
                col: p % self.width,
            }),
            None => Ok(()),
        }
    }
}

pub fn encode_mask(mask: &LabelMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend_from_slice(&mask.labels);
    out
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Option<String> {
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
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn decode_mask(bytes: &[u8]) -> Result<LabelMask, FormatError> {
    if !bytes.starts_with(b"P5") {
        return Err(FormatError::NotP5);
    }
    let mut pos = 2;
    let mut field = |name: &str| -> Result<usize, FormatError> {
        token(bytes, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| FormatError::MaskMalformed(format!("missing or invalid {name}")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(FormatError::MaskMalformed(format!("maxval {maxval} needs 8-bit samples")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(FormatError::MaskMalformed("missing raster".into()));
    }
    let raster = &bytes[pos + 1..];
    let n = width * height;
    if raster.len() < n {
        return Err(FormatError::MaskMalformed(format!(
            "raster truncated: expected {n} bytes, found {}",
            raster.len()
        )));
    }
    LabelMask::new(height, width, raster[..n].to_vec())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMask, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_mask(&bytes).map_err(|e| FormatError::in_file(path, e))
}

pub fn write_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| io_err(path, e))
}
