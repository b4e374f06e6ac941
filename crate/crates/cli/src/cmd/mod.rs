pub mod anchors;
pub mod ls;
pub mod map;
pub mod stitch_eval;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crosstitch_core::embeddings::{load_vec_file_opts, EmbeddingTable, LoadOptions};

/// Loads a `.vec` table, surfacing skipped-row tallies on stderr so a
/// quietly corrupted input never goes unnoticed.
pub(crate) fn load_table(
    path: &Path,
    expected_dim: Option<usize>,
    lowercase: bool,
) -> Result<EmbeddingTable> {
    let options = LoadOptions {
        expected_dim,
        lowercase,
    };
    let (table, report) =
        load_vec_file_opts(path, options).with_context(|| format!("loading {}", path.display()))?;
    if report.total() > 0 {
        eprintln!(
            "note: {}: skipped {} malformed, {} zero-norm, {} duplicate rows",
            path.display(),
            report.malformed,
            report.zero_norm,
            report.duplicates
        );
    }
    Ok(table)
}

/// `out.tsv` -> `out.tsv.manifest.json`, in the same directory.
pub(crate) fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// `reports/eval` + "tsv" -> `reports/eval.tsv` (always appends, never
/// replaces an existing extension).
pub(crate) fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut name = base
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".");
    name.push(ext);
    base.with_file_name(name)
}

/// Class names in index order, one per line; blank lines ignored.
pub(crate) fn read_label_map(path: &Path) -> Result<Vec<String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if names.len() < 2 {
        bail!(
            "label map {} declares {} classes, need at least 2",
            path.display(),
            names.len()
        );
    }
    Ok(names)
}
