//! Dataset manifests.
//!
//! A manifest is a JSON document naming the ensemble members (their order
//! fixes the model index), the class count, the fold count, the training
//! entries with their out-of-fold predictions, and optional test entries.
//! Relative paths are resolved against the manifest's directory.
//!
//! ```json
//! {
//!   "model_names": ["strong", "weak"],
//!   "class_count": 2,
//!   "folds": 5,
//!   "entries": [
//!     { "id": "img0000", "fold": 0, "mask": "masks/img0000.pgm",
//!       "predictions": [ { "path": "oof/img0000.pten", "held_out_fold": 0 } ] }
//!   ],
//!   "test": [ { "id": "tst0000", "stack": "test/tst0000.pten", "mask": "test/tst0000.pgm" } ]
//! }
//! ```
//!
//! A prediction without `model` is a combined stack carrying all members in
//! manifest order; with `model` it is a single-member stack. `held_out_fold`
//! names the fold the producing model was *not* trained on.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, FormatError};

pub const DEFAULT_FOLDS: usize = 5;

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRef {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub held_out_fold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub mask: PathBuf,
    #[serde(default)]
    pub predictions: Vec<PredictionRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub id: String,
    pub stack: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub model_names: Vec<String>,
    pub class_count: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub entries: Vec<TrainEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test: Vec<TestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(model_names: Vec<String>, class_count: usize, folds: usize) -> Self {
        Self {
            model_names,
            class_count,
            folds,
            entries: Vec::new(),
            test: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, FormatError> {
        let mut m: DatasetManifest = serde_json::from_str(text)?;
        m.base_dir = base_dir.into();
        m.validate_structure()?;
        Ok(m)
    }

    /// Loads and structurally validates a manifest, then checks that every
    /// referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::from_json(&text, base).map_err(|e| FormatError::in_file(path, e))?;
        m.check_files().map_err(|e| FormatError::in_file(path, e))?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.model_names.iter().position(|n| n == name)
    }

    /// Fold of every training entry, in entry order. Entries without an
    /// explicit fold are dealt round-robin over the fold count after
    /// sorting by id.
    pub fn fold_assignment(&self) -> Vec<usize> {
        let mut folds: Vec<Option<usize>> = self.entries.iter().map(|e| e.fold).collect();
        let mut unassigned: Vec<usize> = (0..self.entries.len()).filter(|&i| folds[i].is_none()).collect();
        unassigned.sort_by(|&a, &b| self.entries[a].id.cmp(&self.entries[b].id));
        for (slot, idx) in unassigned.into_iter().enumerate() {
            folds[idx] = Some(slot % self.folds);
        }
        folds.into_iter().map(|f| f.unwrap()).collect()
    }

    fn validate_structure(&self) -> Result<(), FormatError> {
        let bad = |msg: String| Err(FormatError::ManifestInvalid(msg));
        if self.model_names.is_empty() {
            return bad("model_names is empty".into());
        }
        let mut seen = HashSet::new();
        for n in &self.model_names {
            if !seen.insert(n) {
                return bad(format!("duplicate model name {n:?}"));
            }
        }
        if !(2..=256).contains(&self.class_count) {
            return bad(format!("class_count {} outside 2..=256", self.class_count));
        }
        if self.folds == 0 {
            return bad("folds must be at least 1".into());
        }
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(&e.id) {
                return bad(format!("duplicate image id {:?}", e.id));
            }
            if let Some(f) = e.fold {
                if f >= self.folds {
                    return bad(format!("image {:?} has fold {f} but folds = {}", e.id, self.folds));
                }
            }
            for p in &e.predictions {
                if let Some(name) = &p.model {
                    if self.model_index(name).is_none() {
                        return bad(format!("image {:?} references unknown model {name:?}", e.id));
                    }
                }
                if p.held_out_fold >= self.folds {
                    return bad(format!(
                        "image {:?} prediction held_out_fold {} but folds = {}",
                        e.id, p.held_out_fold, self.folds
                    ));
                }
            }
        }
        if !self.entries.is_empty() {
            let mut covered = vec![false; self.folds];
            for f in self.fold_assignment() {
                covered[f] = true;
            }
            if let Some(t) = covered.iter().position(|c| !c) {
                return bad(format!("fold {t} has no training images"));
            }
        }
        let mut test_ids = HashSet::new();
        for t in &self.test {
            if !test_ids.insert(&t.id) {
                return bad(format!("duplicate test id {:?}", t.id));
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<(), FormatError> {
        let paths = self
            .entries
            .iter()
            .flat_map(|e| std::iter::once(&e.mask).chain(e.predictions.iter().map(|p| &p.path)))
            .chain(
                self.test
                    .iter()
                    .flat_map(|t| std::iter::once(&t.stack).chain(t.mask.iter())),
            );
        for p in paths {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(FormatError::ManifestInvalid(format!(
                    "referenced file {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetManifest {
        let mut m = DatasetManifest::new(vec!["a".into(), "b".into()], 2, 2);
        for (id, fold) in [("x", None), ("w", None), ("v", Some(1)), ("u", None)] {
            m.entries.push(TrainEntry {
                id: id.into(),
                fold,
                mask: format!("{id}.pgm").into(),
                predictions: vec![],
            });
        }
        m
    }

    #[test]
    fn round_robin_by_sorted_id() {
        // unassigned ids sorted: u, w, x -> folds 0, 1, 0
        assert_eq!(sample().fold_assignment(), vec![0, 1, 1, 0]);
    }

    #[test]
    fn json_roundtrip() {
        let m = sample();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(DatasetManifest::from_json(&text, "").unwrap(), m);
    }

    #[test]
    fn default_fold_count() {
        let m = DatasetManifest::from_json(r#"{"model_names":["a"],"class_count":2,"entries":[]}"#, "").unwrap();
        assert_eq!(m.folds, 5);
    }

    #[test]
    fn structural_errors() {
        let cases = [
            r#"{"model_names":[],"class_count":2,"entries":[]}"#,
            r#"{"model_names":["a","a"],"class_count":2,"entries":[]}"#,
            r#"{"model_names":["a"],"class_count":1,"entries":[]}"#,
            r#"{"model_names":["a"],"class_count":2,"folds":2,"entries":[{"id":"i","fold":3,"mask":"m"}]}"#,
            r#"{"model_names":["a"],"class_count":2,"folds":2,"entries":[{"id":"i","mask":"m"}]}"#,
            r#"{"model_names":["a"],"class_count":2,"folds":1,"entries":[{"id":"i","mask":"m","predictions":[{"path":"p","model":"z","held_out_fold":0}]}]}"#,
        ];
        for c in cases {
            assert!(
                matches!(DatasetManifest::from_json(c, ""), Err(FormatError::ManifestInvalid(_))),
                "{c}"
            );
        }
    }

    #[test]
    fn missing_files_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"model_names":["a"],"class_count":2,"folds":1,"entries":[{"id":"i","mask":"nope.pgm"}]}"#,
        )
        .unwrap();
        let err = DatasetManifest::load(&path).unwrap_err();
        assert!(matches!(err.root(), FormatError::ManifestInvalid(_)));
    }
}
