//! On-disk formats.

mod document;
mod error;
mod manifest;
mod mask;
mod tensor;

pub use document::ThresholdDocument;
pub use error::FormatError;
pub use manifest::{DatasetManifest, PredictionRef, TestEntry, TrainEntry, DEFAULT_FOLDS};
pub use mask::{decode_mask, encode_mask, read_mask, write_mask, LabelMask};
pub use tensor::{
    decode_stack, encode_stack, read_stack, write_stack, ProbabilityStack, HEADER_OFFSET, MAGIC,
    SUM_TOLERANCE, VERSION,
};

use std::path::Path;

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}
