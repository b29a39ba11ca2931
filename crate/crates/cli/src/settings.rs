//! Config-file layer. Keys are the long flag names; precedence is
//! command line > config file > built-in defaults.

use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::path::Path;

use ensel::LearningProbMode;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    // optimize / bench-clpso
    pub pop: Option<usize>,
    pub iters: Option<usize>,
    pub c: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub refresh_gap: Option<usize>,
    pub vmax_frac: Option<f64>,
    pub pc_mode: Option<LearningProbMode>,
    pub inertia_literal: Option<bool>,
    // oracle
    pub delta: Option<f64>,
    // synth
    pub models: Option<Vec<String>>,
    pub train: Option<usize>,
    pub test: Option<usize>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub classes: Option<usize>,
    pub folds: Option<usize>,
    // bench-clpso
    pub functions: Option<Vec<String>>,
    pub dim: Option<usize>,
    pub runs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }
}

/// First present value of flag, file, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Seed from the flag or file, else a fresh one from the OS-seeded hasher.
/// Generated seeds are announced on stderr so the run can be repeated.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> u64 {
    if let Some(s) = flag.or(file) {
        return s;
    }
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0),
    );
    let seed = h.finish() >> 11; // keep it exactly representable in JSON numbers
    eprintln!("generated seed: {seed}");
    seed
}
