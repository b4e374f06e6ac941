//! All-or-nothing output staging.
//!
//! Commands write every artifact into a temp file next to its destination,
//! then commit the whole set at the end. An error anywhere before the commit
//! drops the temp files, so a failed run never leaves partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

#[derive(Default)]
pub struct Stage {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Stage {
    pub fn new() -> Self {
        Stage::default()
    }

    /// Stages one output: `write` receives a temp path in the destination's
    /// directory (same filesystem, so the final rename cannot cross devices).
    pub fn add_with(
        &mut self,
        dest: impl AsRef<Path>,
        write: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<()> {
        let dest = dest.as_ref();
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let temp = tempfile::Builder::new()
            .prefix(".crosstitch-stage")
            .tempfile_in(&parent)
            .with_context(|| format!("cannot stage output under {}", parent.display()))?;
        write(temp.path())?;
        self.staged.push((temp, dest.to_path_buf()));
        Ok(())
    }

    pub fn add_text(&mut self, dest: impl AsRef<Path>, text: &str) -> Result<()> {
        self.add_with(dest, |path| {
            fs::write(path, text).map_err(anyhow::Error::from)
        })
    }

    /// Renames every staged file onto its destination. If one rename fails,
    /// the files committed so far are removed again before returning.
    pub fn commit(self) -> Result<()> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (temp, dest) in self.staged {
            match temp.persist(&dest) {
                Ok(_) => done.push(dest),
                Err(err) => {
                    for path in &done {
                        let _ = fs::remove_file(path);
                    }
                    bail!("failed to write {}: {}", dest.display(), err.error);
                }
            }
        }
        Ok(())
    }
}
