use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        source: Box<FormatError>,
    },
    #[error("not a PTEN v1 file (magic/version mismatch)")]
    MagicMismatch,
    #[error("malformed header: {0}")]
    HeaderMalformed(String),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    PayloadTruncated { expected: usize, found: usize },
    #[error("{extra} unexpected bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("probability {value} out of [0, 1] at model {model}, class {class}, pixel ({row}, {col})")]
    ProbabilityOutOfRange {
        model: usize,
        class: usize,
        row: usize,
        col: usize,
        value: f32,
    },
    #[error("probabilities of model {model} at pixel ({row}, {col}) sum to {sum} (deviation {deviation:.3e} exceeds tolerance)")]
    RowNotNormalized {
        model: usize,
        row: usize,
        col: usize,
        sum: f64,
        deviation: f64,
    },
    #[error("invalid stack shape: {0}")]
    InvalidShape(String),
    #[error("not a binary PGM (P5) file")]
    NotP5,
    #[error("malformed PGM: {0}")]
    MaskMalformed(String),
    #[error("label {label} at pixel ({row}, {col}) exceeds class count {classes}")]
    LabelExceedsClassCount {
        label: u8,
        classes: usize,
        row: usize,
        col: usize,
    },
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("invalid threshold document: {0}")]
    DocumentInvalid(String),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl FormatError {
    pub(crate) fn in_file(path: &std::path::Path, source: FormatError) -> Self {
        match source {
            e @ (FormatError::Io { .. } | FormatError::InFile { .. }) => e,
            e => FormatError::InFile {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// The underlying error with any file context stripped.
    pub fn root(&self) -> &FormatError {
        match self {
            FormatError::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self.root(), FormatError::Io { .. })
    }
}
