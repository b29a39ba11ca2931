//! PTEN probability tensors.
//!
//! Layout on disk:
//!
//! ```text
//! 0..4    b"PTEN"
//! 4       version byte (0x01)
//! 5..9    header length L, u32 little-endian
//! 9..9+L  UTF-8 JSON header {"dtype":"f32","shape":[K,M,H,W],"order":"row-major","model_names":[..]?}
//! 9+L..   K*M*H*W little-endian f32 values, index ((k*M + m)*H + i)*W + j
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, FormatError};

pub const MAGIC: &[u8; 4] = b"PTEN";
pub const VERSION: u8 = 1;
/// Byte offset at which the JSON header starts.
pub const HEADER_OFFSET: usize = 9;
/// Allowed deviation of a per-pixel probability row sum from 1 on load.
pub const SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_names: Option<Vec<String>>,
}

/// Class probabilities of `k` models over an `height x width` image.
///
/// Construction always validates: every value lies in `[0, 1]` and every
/// (model, pixel) row sums to 1 within [`SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityStack {
    models: usize,
    classes: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
    model_names: Option<Vec<String>>,
}

impl ProbabilityStack {
    pub fn new(
        models: usize,
        classes: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self, FormatError> {
        if models < 1 || classes < 2 || height < 1 || width < 1 {
            return Err(FormatError::InvalidShape(format!(
                "[{models}, {classes}, {height}, {width}] needs K >= 1, M >= 2, H >= 1, W >= 1"
            )));
        }
        let expected = models
            .checked_mul(classes)
            .and_then(|v| v.checked_mul(height))
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| FormatError::InvalidShape("element count overflows".into()))?;
        if data.len() != expected {
            return Err(FormatError::InvalidShape(format!(
                "{} values supplied for shape [{models}, {classes}, {height}, {width}]",
                data.len()
            )));
        }
        let stack = Self {
            models,
            classes,
            height,
            width,
            data,
            model_names: None,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn with_model_names(mut self, names: Vec<String>) -> Result<Self, FormatError> {
        if names.len() != self.models {
            return Err(FormatError::InvalidShape(format!(
                "{} model names for {} models",
                names.len(),
                self.models
            )));
        }
        self.model_names = Some(names);
        Ok(self)
    }

    /// Concatenates single- or multi-model stacks along the model axis.
    pub fn concat(parts: &[ProbabilityStack]) -> Result<Self, FormatError> {
        let first = parts
            .first()
            .ok_or_else(|| FormatError::InvalidShape("no stacks to concatenate".into()))?;
        let mut data = Vec::new();
        let mut models = 0;
        for p in parts {
            if (p.classes, p.height, p.width) != (first.classes, first.height, first.width) {
                return Err(FormatError::InvalidShape(format!(
                    "cannot concatenate [{}, {}, {}] with [{}, {}, {}]",
                    first.classes, first.height, first.width, p.classes, p.height, p.width
                )));
            }
            models += p.models;
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            models,
            classes: first.classes,
            height: first.height,
            width: first.width,
            data,
            model_names: None,
        })
    }

    fn validate(&self) -> Result<(), FormatError> {
        let plane = self.pixel_count();
        for (idx, &v) in self.data.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                let (k, m, p) = (idx / (self.classes * plane), (idx / plane) % self.classes, idx % plane);
                return Err(FormatError::ProbabilityOutOfRange {
                    model: k,
                    class: m,
                    row: p / self.width,
                    col: p % self.width,
                    value: v,
                });
            }
        }
        let mut worst: Option<(usize, usize, f64, f64)> = None;
        for k in 0..self.models {
            for p in 0..plane {
                let sum: f64 = (0..self.classes).map(|m| self.value_at(k, m, p) as f64).sum();
                let dev = (sum - 1.0).abs();
                if dev > SUM_TOLERANCE && worst.map_or(true, |w| dev > w.3) {
                    worst = Some((k, p, sum, dev));
                }
            }
        }
        match worst {
            Some((k, p, sum, deviation)) => Err(FormatError::RowNotNormalized {
                model: k,
                row: p / self.width,
                col: p % self.width,
                sum,
                deviation,
            }),
            None => Ok(()),
        }
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn model_names(&self) -> Option<&[String]> {
        self.model_names.as_deref()
    }

    pub fn get(&self, k: usize, m: usize, i: usize, j: usize) -> f32 {
        self.value_at(k, m, i * self.width + j)
    }

    #[inline]
    fn value_at(&self, k: usize, m: usize, pixel: usize) -> f32 {
        self.data[(k * self.classes + m) * self.pixel_count() + pixel]
    }

    /// Writes the `K x M` rows of `pixel` into `out` in 64-bit, each row
    /// divided by its own sum so that it lies exactly on the simplex.
    pub fn pixel_rows(&self, pixel: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.models * self.classes);
        for k in 0..self.models {
            let row = &mut out[k * self.classes..(k + 1) * self.classes];
            let mut sum = 0.0;
            for (m, slot) in row.iter_mut().enumerate() {
                *slot = self.value_at(k, m, pixel) as f64;
                sum += *slot;
            }
            for slot in row.iter_mut() {
                *slot /= sum;
            }
        }
    }

    /// Single-model view of member `k`.
    pub fn model(&self, k: usize) -> ProbabilityStack {
        let len = self.classes * self.pixel_count();
        ProbabilityStack {
            models: 1,
            classes: self.classes,
            height: self.height,
            width: self.width,
            data: self.data[k * len..(k + 1) * len].to_vec(),
            model_names: self.model_names.as_ref().map(|n| vec![n[k].clone()]),
        }
    }
}

pub fn encode_stack(stack: &ProbabilityStack) -> Vec<u8> {
    let header = Header {
        dtype: "f32".into(),
        shape: vec![stack.models, stack.classes, stack.height, stack.width],
        order: "row-major".into(),
        model_names: stack.model_names.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(HEADER_OFFSET + header.len() + stack.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_stack(bytes: &[u8]) -> Result<ProbabilityStack, FormatError> {
    let magic_len = bytes.len().min(5);
    let mut expected_magic = MAGIC.to_vec();
    expected_magic.push(VERSION);
    if bytes[..magic_len] != expected_magic[..magic_len] {
        return Err(FormatError::MagicMismatch);
    }
    if bytes.len() < HEADER_OFFSET {
        return Err(FormatError::HeaderMalformed("file ends inside the preamble".into()));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let payload_start = HEADER_OFFSET
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            FormatError::HeaderMalformed(format!(
                "declared header length {header_len} exceeds file size {}",
                bytes.len()
            ))
        })?;
    let header: Header = serde_json::from_slice(&bytes[HEADER_OFFSET..payload_start])
        .map_err(|e| FormatError::HeaderMalformed(e.to_string()))?;
    if header.dtype != "f32" {
        return Err(FormatError::HeaderMalformed(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.order != "row-major" {
        return Err(FormatError::HeaderMalformed(format!("unsupported order {:?}", header.order)));
    }
    let [k, m, h, w]: [usize; 4] = header.shape.as_slice().try_into().map_err(|_| {
        FormatError::HeaderMalformed(format!("shape must have 4 entries, got {:?}", header.shape))
    })?;
    let count = k
        .checked_mul(m)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| FormatError::HeaderMalformed("shape overflows".into()))?;
    let payload = &bytes[payload_start..];
    let expected = count * 4;
    if payload.len() < expected {
        return Err(FormatError::PayloadTruncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes {
            extra: payload.len() - expected,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let stack = ProbabilityStack::new(k, m, h, w, data)?;
    match header.model_names {
        Some(names) => stack.with_model_names(names),
        None => Ok(stack),
    }
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<ProbabilityStack, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_stack(&bytes).map_err(|e| FormatError::in_file(path, e))
}

pub fn write_stack(stack: &ProbabilityStack, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_stack(stack)).map_err(|e| io_err(path, e))
}
