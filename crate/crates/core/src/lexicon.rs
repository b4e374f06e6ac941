//! Bilingual lexica and anchor sets.
//!
//! An anchor is a translation pair whose tokens exist in both embedding
//! tables. Anchor order is load-bearing: every anchor-cosine row is
//! indexed by position in the set, so two runs only compare if their
//! anchor files are identical, byte for byte. The TSV export and the
//! checksum exist to make that explicit.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::hash::Fnv1a;
use crate::rng::substream;

/// One translation pair, optionally scored by the upstream aligner.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub source_token: String,
    pub target_token: String,
    pub score: Option<f64>,
}

/// Which side of the pair an operation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// Side selector for stopword removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopwordSide {
    Source,
    Target,
    Both,
}

impl StopwordSide {
    pub fn as_str(self) -> &'static str {
        match self {
            StopwordSide::Source => "source",
            StopwordSide::Target => "target",
            StopwordSide::Both => "both",
        }
    }
}

impl std::fmt::Display for StopwordSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StopwordSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(StopwordSide::Source),
            "target" => Ok(StopwordSide::Target),
            "both" => Ok(StopwordSide::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown stopword side {other:?} (expected source, target, or both)"
            ))),
        }
    }
}

/// Reads a lexicon where each line is either `src tgt` (any whitespace)
/// or `src<TAB>tgt<TAB>score`. Malformed lines are skipped and counted.
/// Errors if nothing usable remains.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<(Vec<LexiconEntry>, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut entries = Vec::new();
    let mut skipped = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_lexicon_line(&line) {
            Some(entry) => entries.push(entry),
            None => skipped += 1,
        }
    }

    if entries.is_empty() {
        return Err(Error::EmptyLexicon { path: path.into() });
    }
    Ok((entries, skipped))
}

fn parse_lexicon_line(line: &str) -> Option<LexiconEntry> {
    let token_ok = |t: &str| !t.is_empty() && !t.chars().any(char::is_whitespace);

    if line.contains('\t') {
        let fields: Vec<&str> = line.split('\t').collect();
        let (src, tgt, score) = match fields.as_slice() {
            [s, t] => (*s, *t, None),
            [s, t, sc] => {
                let parsed: f64 = sc.trim().parse().ok()?;
                if !parsed.is_finite() {
                    return None;
                }
                (*s, *t, Some(parsed))
            }
            _ => return None,
        };
        let (src, tgt) = (src.trim(), tgt.trim());
        if !token_ok(src) || !token_ok(tgt) {
            return None;
        }
        return Some(LexiconEntry {
            source_token: src.into(),
            target_token: tgt.into(),
            score,
        });
    }

    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.as_slice() {
        [s, t] => Some(LexiconEntry {
            source_token: (*s).into(),
            target_token: (*t).into(),
            score: None,
        }),
        _ => None,
    }
}

/// Keeps entries scoring at least `threshold`; unscored entries pass.
pub fn filter_by_score(entries: Vec<LexiconEntry>, threshold: f64) -> Vec<LexiconEntry> {
    entries
        .into_iter()
        .filter(|e| e.score.is_none_or(|s| s >= threshold))
        .collect()
}

/// Drops entries whose token on the selected side(s) is a stopword.
pub fn remove_stopwords(
    entries: Vec<LexiconEntry>,
    stopwords: &HashSet<String>,
    side: StopwordSide,
) -> Vec<LexiconEntry> {
    entries
        .into_iter()
        .filter(|e| {
            let src_hit = stopwords.contains(&e.source_token);
            let tgt_hit = stopwords.contains(&e.target_token);
            !match side {
                StopwordSide::Source => src_hit,
                StopwordSide::Target => tgt_hit,
                StopwordSide::Both => src_hit || tgt_hit,
            }
        })
        .collect()
}

/// One stopword per line; blank lines ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut set = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let word = line.trim();
        if !word.is_empty() {
            set.insert(word.to_string());
        }
    }
    Ok(set)
}

/// Lowercases both sides of every entry.
pub fn lowercase_entries(entries: Vec<LexiconEntry>) -> Vec<LexiconEntry> {
    entries
        .into_iter()
        .map(|e| LexiconEntry {
            source_token: e.source_token.to_lowercase(),
            target_token: e.target_token.to_lowercase(),
            score: e.score,
        })
        .collect()
}

/// Ordered list of translation pairs resolved to row indices in both
/// tables. Target indices are unique; source indices may repeat (one
/// source word can anchor several target words).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    source_tokens: Vec<String>,
    target_tokens: Vec<String>,
    source_indices: Vec<usize>,
    target_indices: Vec<usize>,
}

impl AnchorSet {
    fn from_parts(
        source_tokens: Vec<String>,
        target_tokens: Vec<String>,
        source_indices: Vec<usize>,
        target_indices: Vec<usize>,
    ) -> Result<Self> {
        if source_tokens.is_empty() {
            return Err(Error::EmptyAnchorSet);
        }
        Ok(AnchorSet {
            source_tokens,
            target_tokens,
            source_indices,
            target_indices,
        })
    }

    /// Builds a set from explicit `(source_index, target_index)` pairs.
    /// Rejects duplicate target indices and out-of-range rows.
    pub fn from_index_pairs(
        source: &EmbeddingTable,
        target: &EmbeddingTable,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut seen_targets = HashSet::new();
        let mut set = AnchorSet {
            source_tokens: Vec::with_capacity(pairs.len()),
            target_tokens: Vec::with_capacity(pairs.len()),
            source_indices: Vec::with_capacity(pairs.len()),
            target_indices: Vec::with_capacity(pairs.len()),
        };
        for &(si, ti) in pairs {
            if si >= source.len() {
                return Err(Error::RowOutOfRange {
                    index: si,
                    len: source.len(),
                });
            }
            if ti >= target.len() {
                return Err(Error::RowOutOfRange {
                    index: ti,
                    len: target.len(),
                });
            }
            if !seen_targets.insert(ti) {
                return Err(Error::InvalidConfig(format!(
                    "target row {ti} anchored twice"
                )));
            }
            set.source_tokens.push(source.vocab().token(si).into());
            set.target_tokens.push(target.vocab().token(ti).into());
            set.source_indices.push(si);
            set.target_indices.push(ti);
        }
        if set.source_tokens.is_empty() {
            return Err(Error::EmptyAnchorSet);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn target_indices(&self) -> &[usize] {
        &self.target_indices
    }

    pub fn source_tokens(&self) -> &[String] {
        &self.source_tokens
    }

    pub fn target_tokens(&self) -> &[String] {
        &self.target_tokens
    }

    /// Row indices for the requested side, in anchor order.
    pub fn indices(&self, side: Side) -> &[usize] {
        match side {
            Side::Source => &self.source_indices,
            Side::Target => &self.target_indices,
        }
    }

    /// Order-sensitive fingerprint over `(|A|, dim, pairs)`. Any change
    /// to the anchors, their order, or the embedding width changes it.
    pub fn checksum(&self, dim: usize) -> u64 {
        let mut h = Fnv1a::new();
        h.write_usize(self.len());
        h.write_usize(dim);
        for i in 0..self.len() {
            h.write(self.source_tokens[i].as_bytes());
            h.write(&[0xff]);
            h.write(self.target_tokens[i].as_bytes());
            h.write(&[0xff]);
            h.write_usize(self.source_indices[i]);
            h.write_usize(self.target_indices[i]);
        }
        h.finish()
    }

    /// Writes the set as TSV: header plus one
    /// `src_token  tgt_token  src_index  tgt_index` row per anchor.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);

        writeln!(w, "src_token\ttgt_token\tsrc_index\ttgt_index").map_err(io_err)?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                self.source_tokens[i],
                self.target_tokens[i],
                self.source_indices[i],
                self.target_indices[i]
            )
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    /// Reads a TSV export back and cross-checks every row against the
    /// given tables, so a stale anchor file cannot silently pair with
    /// the wrong embeddings.
    pub fn read_tsv(
        path: impl AsRef<Path>,
        source: &EmbeddingTable,
        target: &EmbeddingTable,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let mismatch = |detail: String| Error::AnchorMismatch {
            path: path.into(),
            detail,
        };

        let mut source_tokens = Vec::new();
        let mut target_tokens = Vec::new();
        let mut source_indices = Vec::new();
        let mut target_indices = Vec::new();
        let mut seen_targets = HashSet::new();

        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if lineno == 0 {
                if line.trim_end() != "src_token\ttgt_token\tsrc_index\ttgt_index" {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: 1,
                        detail: "missing anchor TSV header".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [src_tok, tgt_tok, src_idx, tgt_idx] = fields.as_slice() else {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    detail: "expected 4 tab-separated fields".into(),
                });
            };
            let parse_idx = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    detail: format!("bad index {s:?}"),
                })
            };
            let si = parse_idx(src_idx)?;
            let ti = parse_idx(tgt_idx)?;

            if si >= source.len() || source.vocab().token(si) != *src_tok {
                return Err(mismatch(format!(
                    "source row {si} is not {src_tok:?} in the source table"
                )));
            }
            if ti >= target.len() || target.vocab().token(ti) != *tgt_tok {
                return Err(mismatch(format!(
                    "target row {ti} is not {tgt_tok:?} in the target table"
                )));
            }
            if !seen_targets.insert(ti) {
                return Err(mismatch(format!("target row {ti} appears twice")));
            }

            source_tokens.push((*src_tok).to_string());
            target_tokens.push((*tgt_tok).to_string());
            source_indices.push(si);
            target_indices.push(ti);
        }

        AnchorSet::from_parts(source_tokens, target_tokens, source_indices, target_indices)
    }
}

/// Intersects a lexicon with both vocabularies, in lexicon order,
/// keeping the first entry for each target token. Errors if no entry
/// survives.
pub fn build_anchor_set(
    entries: &[LexiconEntry],
    source: &EmbeddingTable,
    target: &EmbeddingTable,
) -> Result<AnchorSet> {
    let mut seen_targets = HashSet::new();
    let mut source_tokens = Vec::new();
    let mut target_tokens = Vec::new();
    let mut source_indices = Vec::new();
    let mut target_indices = Vec::new();

    for entry in entries {
        let Some(si) = source.vocab().lookup(&entry.source_token) else {
            continue;
        };
        let Some(ti) = target.vocab().lookup(&entry.target_token) else {
            continue;
        };
        if !seen_targets.insert(ti) {
            continue;
        }
        source_tokens.push(entry.source_token.clone());
        target_tokens.push(entry.target_token.clone());
        source_indices.push(si);
        target_indices.push(ti);
    }

    AnchorSet::from_parts(source_tokens, target_tokens, source_indices, target_indices)
}

/// Uniform sample of `n` anchors without replacement, preserving their
/// relative order. Deterministic in `seed`.
pub fn sample_anchors(anchors: &AnchorSet, n: usize, seed: u64) -> Result<AnchorSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be positive".into()));
    }
    if n > anchors.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: anchors.len(),
        });
    }
    let mut rng = substream(seed, "lexicon/sample-anchors");
    let mut picked: Vec<usize> = sample(&mut rng, anchors.len(), n).into_iter().collect();
    picked.sort_unstable();

    AnchorSet::from_parts(
        picked.iter().map(|&i| anchors.source_tokens[i].clone()).collect(),
        picked.iter().map(|&i| anchors.target_tokens[i].clone()).collect(),
        picked.iter().map(|&i| anchors.source_indices[i]).collect(),
        picked.iter().map(|&i| anchors.target_indices[i]).collect(),
    )
}
