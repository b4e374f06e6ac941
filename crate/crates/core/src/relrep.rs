//! Anchor-cosine rows and mixing weights.
//!
//! A token's row is its cosine similarity to every anchor, computed
//! inside the token's own table — the anchor axis is what the two
//! languages share, so rows from different tables are comparable even
//! though the underlying spaces are not. Downstream, only the `k`
//! closest anchors are kept and turned into mixing weights by one of
//! three schemes:
//!
//! * `standard`  — divide each similarity by their sum; negatives keep
//!   their sign. If the sum is numerically zero the nearest anchor gets
//!   weight 1 on its own.
//! * `softmax`   — softmax of `sim / temperature`; dense, strictly
//!   positive.
//! * `sparsemax` — Euclidean projection of `sim / temperature` onto the
//!   probability simplex; reaches exact zeros, so far anchors drop out
//!   of the mix entirely.
//!
//! All weight vectors sum to 1. Tie-breaks everywhere go to the smaller
//! anchor index, which keeps every pipeline stage deterministic.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_with_norms, norm_f64, EmbeddingTable};
use crate::error::{Error, Result};

/// Anchor rows copied out of a table, with norms cached for the cosine
/// kernel. Row order is anchor order.
#[derive(Debug, Clone)]
pub struct AnchorRows {
    data: Vec<f32>,
    norms: Vec<f64>,
    dim: usize,
}

impl AnchorRows {
    pub fn extract(table: &EmbeddingTable, indices: &[usize]) -> Result<Self> {
        let dim = table.dim();
        let mut data = Vec::with_capacity(indices.len() * dim);
        let mut norms = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= table.len() {
                return Err(Error::RowOutOfRange {
                    index: i,
                    len: table.len(),
                });
            }
            let row = table.row(i);
            data.extend_from_slice(row);
            norms.push(norm_f64(row));
        }
        Ok(AnchorRows { data, norms, dim })
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Cosines of one token row against every anchor, in anchor order.
pub(crate) fn anchor_cosines(row: &[f32], row_norm: f64, anchors: &AnchorRows) -> Vec<f64> {
    (0..anchors.len())
        .map(|i| cosine_with_norms(row, row_norm, anchors.row(i), anchors.norms[i]))
        .collect()
}

/// A token's full anchor-cosine row. Component `i` is the cosine to the
/// `i`-th anchor; the anchor order is part of the row's meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct RelRepRow {
    sims: Vec<f64>,
}

impl RelRepRow {
    /// Wraps raw similarities. Meant for tests and tools; pipeline code
    /// goes through [`relative_representation`].
    pub fn new(sims: Vec<f64>) -> Self {
        RelRepRow { sims }
    }

    pub fn sims(&self) -> &[f64] {
        &self.sims
    }

    pub fn len(&self) -> usize {
        self.sims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sims.is_empty()
    }
}

/// Cosine row for `token_row` against the anchors at `anchor_indices`,
/// all within `table`.
pub fn relative_representation(
    table: &EmbeddingTable,
    anchor_indices: &[usize],
    token_row: usize,
) -> Result<RelRepRow> {
    if token_row >= table.len() {
        return Err(Error::RowOutOfRange {
            index: token_row,
            len: table.len(),
        });
    }
    let anchors = AnchorRows::extract(table, anchor_indices)?;
    let row = table.row(token_row);
    Ok(RelRepRow {
        sims: anchor_cosines(row, norm_f64(row), &anchors),
    })
}

/// The `k` largest entries of a cosine row: `(anchor_position, sim)`
/// pairs sorted by similarity descending, ties to the smaller position.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKRow {
    entries: Vec<(usize, f64)>,
}

impl TopKRow {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Top-k selection over raw similarities. `skip` hides one position
/// (the token's own anchor slot when self-matches are excluded).
pub(crate) fn select_top_k(sims: &[f64], k: usize, skip: Option<usize>) -> TopKRow {
    let mut order: Vec<usize> = (0..sims.len()).filter(|&i| Some(i) != skip).collect();
    // Descending similarity, ascending index on ties; total_cmp keeps the
    // comparator a total order.
    let by_sim_desc =
        |a: &usize, b: &usize| sims[*b].total_cmp(&sims[*a]).then_with(|| a.cmp(b));
    let k = k.min(order.len());
    if k < order.len() {
        order.select_nth_unstable_by(k.saturating_sub(1), by_sim_desc);
        order.truncate(k);
    }
    order.sort_unstable_by(by_sim_desc);
    TopKRow {
        entries: order.into_iter().map(|i| (i, sims[i])).collect(),
    }
}

/// The `k` nearest anchors of `row`. Errors unless `1 <= k <= row.len()`.
pub fn top_k(row: &RelRepRow, k: usize) -> Result<TopKRow> {
    if k == 0 || k > row.len() {
        return Err(Error::KOutOfRange {
            k,
            max: row.len(),
        });
    }
    Ok(select_top_k(row.sims(), k, None))
}

/// First anchor position claimed by each table row, for self-exclusion.
/// A row anchored twice on the source side keeps its first slot.
pub(crate) fn self_position_map(anchor_indices: &[usize]) -> HashMap<usize, usize> {
    let mut map = HashMap::with_capacity(anchor_indices.len());
    for (pos, &row) in anchor_indices.iter().enumerate() {
        map.entry(row).or_insert(pos);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Standard,
    Softmax,
    Sparsemax,
}

impl WeightKind {
    pub const ALL: [WeightKind; 3] = [
        WeightKind::Standard,
        WeightKind::Softmax,
        WeightKind::Sparsemax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::Standard => "standard",
            WeightKind::Softmax => "softmax",
            WeightKind::Sparsemax => "sparsemax",
        }
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(WeightKind::Standard),
            "softmax" => Ok(WeightKind::Softmax),
            "sparsemax" => Ok(WeightKind::Sparsemax),
            other => Err(Error::UnknownScheme(other.into())),
        }
    }
}

/// How top-k similarities become mixing weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingScheme {
    pub kind: WeightKind,
    /// Number of anchors kept per token.
    pub top_k: usize,
    /// Softmax/sparsemax temperature; the standard scheme's ratio is
    /// unaffected by it (the factor cancels), so it is ignored there.
    pub temperature: f64,
}

impl Default for WeightingScheme {
    fn default() -> Self {
        WeightingScheme {
            kind: WeightKind::Standard,
            top_k: 50,
            temperature: 1.0,
        }
    }
}

impl WeightingScheme {
    pub fn new(kind: WeightKind, top_k: usize, temperature: f64) -> Result<Self> {
        let scheme = WeightingScheme {
            kind,
            top_k,
            temperature,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be a positive finite number, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Mixing weights for a top-k row. One weight per entry, summing to 1.
pub fn weights(topk: &TopKRow, scheme: &WeightingScheme) -> Vec<f64> {
    let sims: Vec<f64> = topk.entries.iter().map(|&(_, s)| s).collect();
    if sims.len() == 1 {
        // All three schemes put everything on a lone anchor; returning
        // the weight directly keeps `1.0` exact.
        return vec![1.0];
    }
    match scheme.kind {
        WeightKind::Standard => {
            let total: f64 = sims.iter().sum();
            if total.abs() < 1e-8 {
                // Degenerate cancellation; fall back to the nearest
                // anchor (entry 0: highest sim, smallest index on ties).
                let mut w = vec![0.0; sims.len()];
                w[0] = 1.0;
                w
            } else {
                sims.iter().map(|s| s / total).collect()
            }
        }
        WeightKind::Softmax => softmax_scaled(&sims, scheme.temperature),
        WeightKind::Sparsemax => {
            let scaled: Vec<f64> = sims.iter().map(|s| s / scheme.temperature).collect();
            sparsemax(&scaled)
        }
    }
}

/// Numerically stable softmax of `sims / temperature`.
fn softmax_scaled(sims: &[f64], temperature: f64) -> Vec<f64> {
    let max = sims
        .iter()
        .fold(f64::NEG_INFINITY, |m, &s| m.max(s / temperature));
    let exps: Vec<f64> = sims.iter().map(|&s| (s / temperature - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Euclidean projection of `z` onto the probability simplex
/// (the sparse analogue of softmax).
///
/// Sort descending, find the largest support size `kappa` with
/// `1 + kappa * z_(kappa) > sum of the kappa largest`, subtract the
/// uniform threshold, clip at zero. Components far below the winners
/// come out exactly 0.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut kappa = 0usize;
    let mut support_sum = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumulative += v;
        if 1.0 + (j + 1) as f64 * v > cumulative {
            kappa = j + 1;
            support_sum = cumulative;
        }
    }
    // kappa >= 1 always: at j = 0 the test is 1 + z > z.
    let threshold = (support_sum - 1.0) / kappa as f64;
    z.iter().map(|&v| (v - threshold).max(0.0)).collect()
}

/// TSV dump of every token's top-k anchors:
/// `token<TAB>pos:sim,pos:sim,...` with positions into the anchor order.
pub fn dump_top_k(
    table: &EmbeddingTable,
    anchor_indices: &[usize],
    k: usize,
    exclude_self: bool,
) -> Result<String> {
    if k == 0 || k > anchor_indices.len() {
        return Err(Error::KOutOfRange {
            k,
            max: anchor_indices.len(),
        });
    }
    let anchors = AnchorRows::extract(table, anchor_indices)?;
    let self_pos = exclude_self.then(|| self_position_map(anchor_indices));

    let mut out = String::new();
    for i in 0..table.len() {
        let row = table.row(i);
        let sims = anchor_cosines(row, norm_f64(row), &anchors);
        let skip = self_pos.as_ref().and_then(|m| m.get(&i).copied());
        let topk = select_top_k(&sims, k, skip);

        out.push_str(table.vocab().token(i));
        out.push('\t');
        for (j, (pos, sim)) in topk.entries().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{pos}:{sim:.6}"));
        }
        out.push('\n');
    }
    Ok(out)
}
