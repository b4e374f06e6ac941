//! Embedding tables in the plain-text `.vec` format.
//!
//! A file starts with a `<count> <dim>` header line; every following line
//! is a token and `dim` space-separated floats. Tokens must be non-empty
//! and whitespace-free so the format stays parseable. Vectors are stored
//! as `f32`, but every reduction over them (dot products, norms, sums)
//! accumulates in `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Bijective token <-> row-index map. Indices are dense from zero in
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct tokens; duplicates are an error
    /// here because callers constructing one directly control the list.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for t in tokens {
            vocab.push(t.into())?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: String) -> Result<usize> {
        validate_token(&token)?;
        if self.index.contains_key(&token) {
            return Err(Error::InvalidToken {
                token,
                detail: "duplicate".into(),
            });
        }
        let id = self.tokens.len();
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at `index`. Panics if out of range, like slice indexing.
    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

fn validate_token(token: &str) -> Result<()> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::InvalidToken {
            token: token.into(),
            detail: "must be non-empty and whitespace-free".into(),
        });
    }
    Ok(())
}

/// `|V| x dim` matrix of `f32` rows plus the vocabulary naming them.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    matrix: Vec<f32>,
    dim: usize,
}

impl EmbeddingTable {
    /// Wraps a row-major matrix. `matrix.len()` must equal
    /// `vocab.len() * dim` and `dim` must be positive.
    pub fn new(vocab: Vocabulary, matrix: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if matrix.len() != vocab.len() * dim {
            return Err(Error::InvalidConfig(format!(
                "matrix has {} values, expected {} rows x {} dims",
                matrix.len(),
                vocab.len(),
                dim
            )));
        }
        Ok(EmbeddingTable { vocab, matrix, dim })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row at `index`. Panics if out of range, like slice indexing.
    pub fn row(&self, index: usize) -> &[f32] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vocab.lookup(token).map(|i| self.row(i))
    }
}

/// Per-file tally of rows that were dropped or merged while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Wrong field count or unparseable float.
    pub malformed: usize,
    /// Vector norm below `1e-12`.
    pub zero_norm: usize,
    /// Token seen before; the first occurrence was kept.
    pub duplicates: usize,
}

impl LoadReport {
    pub fn total(&self) -> usize {
        self.malformed + self.zero_norm + self.duplicates
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject the file unless the header dimension matches.
    pub expected_dim: Option<usize>,
    /// Lowercase tokens while reading; case-collisions count as duplicates.
    pub lowercase: bool,
}

/// Reads a `.vec` file, skipping (and tallying) malformed rows,
/// zero-norm vectors, and repeated tokens. Keeps the first occurrence of
/// a duplicate. Errors if the header is unusable or no row survives.
pub fn load_vec_file(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<(EmbeddingTable, LoadReport)> {
    load_vec_file_opts(
        path,
        LoadOptions {
            expected_dim,
            lowercase: false,
        },
    )
}

pub fn load_vec_file_opts(
    path: impl AsRef<Path>,
    options: LoadOptions,
) -> Result<(EmbeddingTable, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let mut fields = header.split_whitespace();
    let declared: Option<usize> = fields.next().and_then(|s| s.parse().ok());
    let dim: Option<usize> = fields.next().and_then(|s| s.parse().ok());
    let (declared, dim) = match (declared, dim, fields.next()) {
        (Some(c), Some(d), None) if d > 0 => (c, d),
        _ => {
            return Err(Error::VecHeader {
                path: path.into(),
                detail: format!("expected \"<count> <dim>\", got {:?}", header.trim_end()),
            })
        }
    };
    if let Some(expected) = options.expected_dim {
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim });
        }
    }

    let mut vocab = Vocabulary::default();
    let mut matrix: Vec<f32> = Vec::with_capacity(declared.saturating_mul(dim));
    let mut report = LoadReport::default();
    let mut values = Vec::with_capacity(dim);

    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue; // blank line, usually a trailing newline
        };

        values.clear();
        let mut ok = true;
        for field in fields {
            match field.parse::<f32>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || values.len() != dim {
            report.malformed += 1;
            continue;
        }

        if norm_f64(&values) < NORM_FLOOR {
            report.zero_norm += 1;
            continue;
        }

        let token = if options.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        };
        if vocab.contains(&token) {
            report.duplicates += 1;
            continue;
        }
        vocab.push(token)?;
        matrix.extend_from_slice(&values);
    }

    if vocab.is_empty() {
        return Err(Error::EmptyTable { path: path.into() });
    }
    Ok((EmbeddingTable::new(vocab, matrix, dim)?, report))
}

/// Writes a table back out in `.vec` format with six decimal places per
/// component, enough to round-trip within `1e-6` of the stored values.
pub fn save_vec_file(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if table.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    writeln!(w, "{} {}", table.len(), table.dim()).map_err(io_err)?;
    for i in 0..table.len() {
        w.write_all(table.vocab().token(i).as_bytes()).map_err(io_err)?;
        for &v in table.row(i) {
            write!(w, " {v:.6}").map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Norms below this are treated as zero vectors.
pub(crate) const NORM_FLOOR: f64 = 1e-12;

pub(crate) fn dot_f64(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

pub(crate) fn norm_f64(u: &[f32]) -> f64 {
    u.iter()
        .map(|&a| f64::from(a) * f64::from(a))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn cosine_with_norms(u: &[f32], u_norm: f64, v: &[f32], v_norm: f64) -> f64 {
    if u_norm < NORM_FLOOR || v_norm < NORM_FLOOR {
        return 0.0;
    }
    (dot_f64(u, v) / (u_norm * v_norm)).clamp(-1.0, 1.0)
}

/// Cosine similarity with `f64` accumulation, clamped to `[-1, 1]`.
/// Either vector having norm below `1e-12` yields `0.0` rather than NaN.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(cosine_with_norms(u, norm_f64(u), v, norm_f64(v)))
}
