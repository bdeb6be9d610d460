//! Resumable run state: which sample indices of a prompt already completed.
//!
//! The manifest is rewritten atomically (temp file + rename) after every
//! completed sample, so an interrupted run resumes with exactly the missing
//! indices.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub prompt_id: String,
    pub total: usize,
    pub done: BTreeSet<usize>,
}

impl Manifest {
    pub fn new(prompt_id: &str, total: usize) -> Self {
        Self {
            prompt_id: prompt_id.to_string(),
            total,
            done: BTreeSet::new(),
        }
    }

    pub fn path_for(dir: &Path, prompt_id: &str) -> PathBuf {
        dir.join(format!("{}.manifest.json", sanitize(prompt_id)))
    }

    pub fn load_or_new(dir: &Path, prompt_id: &str, total: usize) -> Result<Self> {
        let path = Self::path_for(dir, prompt_id);
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let mut m: Manifest = serde_json::from_str(&text)?;
            // a larger request keeps prior work; a smaller one is honored
            m.total = total;
            Ok(m)
        } else {
            Ok(Self::new(prompt_id, total))
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let path = Self::path_for(dir, &self.prompt_id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.total).filter(|i| !self.done.contains(i)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.done.len() >= self.total
    }
}

/// File-system-safe name for a prompt id.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_indices() {
        let mut m = Manifest::new("p", 5);
        m.done.insert(0);
        m.done.insert(3);
        assert_eq!(m.missing(), vec![1, 2, 4]);
        assert!(!m.is_complete());
    }

    #[test]
    fn save_and_reload() {
        let dir = std::env::temp_dir().join(format!("manifest-test-{}", std::process::id()));
        let mut m = Manifest::new("p/1", 3);
        m.done.insert(1);
        m.save(&dir).unwrap();
        let back = Manifest::load_or_new(&dir, "p/1", 3).unwrap();
        assert_eq!(back.done, m.done);
        fs::remove_dir_all(&dir).ok();
    }
}
