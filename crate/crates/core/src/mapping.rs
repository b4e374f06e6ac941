//! Producing tables in the shared space.
//!
//! The anchor-mix route rewrites every token as a weighted sum of
//! *source* anchor embeddings: similarities are measured inside the
//! token's own table, but the vectors being mixed always come from the
//! source side. Mapping the source table and the target table therefore
//! yields rows in one space, and anything trained on the former can read
//! the latter.
//!
//! The least-squares route fits a single linear map `W` minimizing
//! `|A_t W - A_s|_F` over the anchor rows and projects the whole target
//! table through it. It needs no per-token weights and serves as the
//! baseline the anchor-mix methods are compared against.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::embeddings::{norm_f64, EmbeddingTable};
use crate::error::{Error, Result};
use crate::exec;
use crate::lexicon::{AnchorSet, Side};
use crate::relrep::{
    anchor_cosines, select_top_k, self_position_map, weights, AnchorRows, WeightKind,
    WeightingScheme,
};

/// How a mapped table was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum MapMethod {
    AnchorMix {
        kind: WeightKind,
        top_k: usize,
        temperature: f64,
        exclude_self: bool,
    },
    LeastSquares {
        residual: f64,
        rank: usize,
        ridge: f64,
    },
}

/// Enough metadata to tell whether two mapped tables are comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct MapProvenance {
    pub method: MapMethod,
    pub anchor_count: usize,
    /// Fingerprint of the anchor set used, when one was involved.
    pub anchor_checksum: Option<u64>,
    /// Width of the shared space (the source table's dimension).
    pub output_dim: usize,
}

/// A table re-expressed in the shared space, plus how it got there.
#[derive(Debug, Clone)]
pub struct MappedTable {
    pub table: EmbeddingTable,
    pub provenance: MapProvenance,
    /// Rows that came out exactly zero (kept in place, but worth knowing).
    pub zero_rows: usize,
}

/// Rewrites `input` into the source space: for each row, cosine row
/// against the `side` anchors within `input`, top-k, weights, then a
/// weighted sum of the corresponding *source* anchor rows.
///
/// `exclude_self` hides a token's own anchor slot from its top-k, so an
/// anchor token is described by its neighbours instead of itself.
pub fn map_table(
    input: &EmbeddingTable,
    anchors: &AnchorSet,
    side: Side,
    source: &EmbeddingTable,
    scheme: &WeightingScheme,
    exclude_self: bool,
) -> Result<MappedTable> {
    map_table_impl(input, anchors, side, source, scheme, exclude_self, false)
}

/// Single-threaded twin of [`map_table`]; bit-identical output.
pub fn map_table_seq(
    input: &EmbeddingTable,
    anchors: &AnchorSet,
    side: Side,
    source: &EmbeddingTable,
    scheme: &WeightingScheme,
    exclude_self: bool,
) -> Result<MappedTable> {
    map_table_impl(input, anchors, side, source, scheme, exclude_self, true)
}

#[allow(clippy::too_many_arguments)]
fn map_table_impl(
    input: &EmbeddingTable,
    anchors: &AnchorSet,
    side: Side,
    source: &EmbeddingTable,
    scheme: &WeightingScheme,
    exclude_self: bool,
    sequential: bool,
) -> Result<MappedTable> {
    scheme.validate()?;
    let k = scheme.top_k;
    // Self-exclusion shrinks an anchor token's candidate list by one, so
    // demand one spare anchor in that case.
    let max_k = anchors.len() - usize::from(exclude_self);
    if k > max_k {
        return Err(Error::KOutOfRange { k, max: max_k });
    }

    let sim_anchors = AnchorRows::extract(input, anchors.indices(side))?;
    let mix_anchors = AnchorRows::extract(source, anchors.source_indices())?;
    let self_pos: Option<HashMap<usize, usize>> =
        exclude_self.then(|| self_position_map(anchors.indices(side)));

    let out_dim = source.dim();
    let map_row = |i: usize| -> Vec<f32> {
        let row = input.row(i);
        let sims = anchor_cosines(row, norm_f64(row), &sim_anchors);
        let skip = self_pos.as_ref().and_then(|m| m.get(&i).copied());
        let topk = select_top_k(&sims, k, skip);
        let w = weights(&topk, scheme);

        let mut acc = vec![0.0f64; out_dim];
        for (&(pos, _), &wn) in topk.entries().iter().zip(&w) {
            let anchor_row = mix_anchors.row(pos);
            for (a, &e) in acc.iter_mut().zip(anchor_row) {
                *a += wn * f64::from(e);
            }
        }
        acc.into_iter().map(|v| v as f32).collect()
    };

    let rows = if sequential {
        exec::map_indexed_seq(input.len(), map_row)
    } else {
        exec::map_indexed(input.len(), map_row)
    };

    finish_mapped(
        input,
        rows,
        out_dim,
        MapProvenance {
            method: MapMethod::AnchorMix {
                kind: scheme.kind,
                top_k: k,
                temperature: scheme.temperature,
                exclude_self,
            },
            anchor_count: anchors.len(),
            anchor_checksum: Some(anchors.checksum(source.dim())),
            output_dim: out_dim,
        },
    )
}

fn finish_mapped(
    input: &EmbeddingTable,
    rows: Vec<Vec<f32>>,
    out_dim: usize,
    provenance: MapProvenance,
) -> Result<MappedTable> {
    let zero_rows = rows
        .iter()
        .filter(|r| r.iter().all(|&v| v == 0.0))
        .count();
    let mut matrix = Vec::with_capacity(rows.len() * out_dim);
    for row in rows {
        matrix.extend_from_slice(&row);
    }
    Ok(MappedTable {
        table: EmbeddingTable::new(input.vocab().clone(), matrix, out_dim)?,
        provenance,
        zero_rows,
    })
}

/// Linear map from the target space into the source space, with the fit
/// diagnostics callers need to judge it.
#[derive(Debug, Clone)]
pub struct LsTransform {
    /// Row-major `input_dim x output_dim`.
    matrix: Vec<f64>,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Frobenius norm of `A_t W - A_s` over the fitting rows.
    pub residual: f64,
    /// Numerical rank of `A_t`.
    pub rank: usize,
    pub anchor_count: usize,
    pub anchor_checksum: Option<u64>,
    pub ridge: f64,
}

impl LsTransform {
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// `row * W` with `f64` accumulation.
    pub fn apply_row(&self, row: &[f32]) -> Vec<f32> {
        debug_assert_eq!(row.len(), self.input_dim);
        let mut out = vec![0.0f64; self.output_dim];
        for (i, &x) in row.iter().enumerate() {
            let w_row = &self.matrix[i * self.output_dim..(i + 1) * self.output_dim];
            let x = f64::from(x);
            for (o, &w) in out.iter_mut().zip(w_row) {
                *o += x * w;
            }
        }
        out.into_iter().map(|v| v as f32).collect()
    }
}

/// Minimum-norm least-squares fit of `W` in `A W ~ B` from row-major
/// matrices (`rows x a_cols` and `rows x b_cols`). `ridge > 0` adds
/// Tikhonov damping. Rank deficiency is fine: directions below the
/// cutoff are dropped, which is what makes the solution minimum-norm.
pub fn ls_fit_matrices(
    a: &[f64],
    b: &[f64],
    rows: usize,
    a_cols: usize,
    b_cols: usize,
    ridge: f64,
) -> Result<LsTransform> {
    if rows == 0 || a_cols == 0 || b_cols == 0 {
        return Err(Error::InvalidConfig(
            "least-squares fit needs at least one row and column".into(),
        ));
    }
    if a.len() != rows * a_cols || b.len() != rows * b_cols {
        return Err(Error::InvalidConfig(format!(
            "matrix sizes {}/{} do not match {rows} rows x {a_cols}/{b_cols} cols",
            a.len(),
            b.len()
        )));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "least-squares input".into(),
        });
    }

    let am = DMatrix::from_row_slice(rows, a_cols, a);
    let bm = DMatrix::from_row_slice(rows, b_cols, b);

    let svd = am.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::SolveFailed("svd produced no U".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::SolveFailed("svd produced no V^T".into()))?;

    let sigma_max = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = f64::EPSILON * rows.max(a_cols) as f64 * sigma_max;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count();

    // W = V f(S) U^T B, where f(s) = s / (s^2 + ridge); at ridge = 0 this
    // is the pseudoinverse 1/s. Directions at or below the cutoff are
    // zeroed rather than amplified.
    let mut coeffs = u.transpose() * &bm;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let factor = if s <= cutoff { 0.0 } else { s / (s * s + ridge) };
        coeffs.row_mut(i).scale_mut(factor);
    }
    let w = v_t.transpose() * coeffs;

    let residual = (&am * &w - &bm).norm();
    if !residual.is_finite() {
        return Err(Error::NonFinite {
            context: "least-squares residual".into(),
        });
    }

    let mut matrix = Vec::with_capacity(a_cols * b_cols);
    for i in 0..a_cols {
        for j in 0..b_cols {
            matrix.push(w[(i, j)]);
        }
    }

    Ok(LsTransform {
        matrix,
        input_dim: a_cols,
        output_dim: b_cols,
        residual,
        rank,
        anchor_count: rows,
        anchor_checksum: None,
        ridge,
    })
}

/// Fits the target-to-source map over the anchor rows of two tables.
pub fn ls_fit(
    anchors: &AnchorSet,
    target: &EmbeddingTable,
    source: &EmbeddingTable,
    ridge: f64,
) -> Result<LsTransform> {
    let tgt_rows = AnchorRows::extract(target, anchors.target_indices())?;
    let src_rows = AnchorRows::extract(source, anchors.source_indices())?;

    let widen = |rows: &AnchorRows| -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * rows.dim());
        for i in 0..rows.len() {
            out.extend(rows.row(i).iter().map(|&v| f64::from(v)));
        }
        out
    };

    let mut fit = ls_fit_matrices(
        &widen(&tgt_rows),
        &widen(&src_rows),
        anchors.len(),
        target.dim(),
        source.dim(),
        ridge,
    )?;
    fit.anchor_checksum = Some(anchors.checksum(source.dim()));
    Ok(fit)
}

/// Projects every row of `table` through the transform.
pub fn ls_project(table: &EmbeddingTable, transform: &LsTransform) -> Result<MappedTable> {
    if table.dim() != transform.input_dim {
        return Err(Error::DimensionMismatch {
            expected: transform.input_dim,
            got: table.dim(),
        });
    }
    let rows = exec::map_indexed(table.len(), |i| transform.apply_row(table.row(i)));
    finish_mapped(
        table,
        rows,
        transform.output_dim,
        MapProvenance {
            method: MapMethod::LeastSquares {
                residual: transform.residual,
                rank: transform.rank,
                ridge: transform.ridge,
            },
            anchor_count: transform.anchor_count,
            anchor_checksum: transform.anchor_checksum,
            output_dim: transform.output_dim,
        },
    )
}

/// Line-oriented `key=value` sidecar describing a mapped table. Written
/// next to the `.vec` export so a table can never be mistaken for one
/// produced with different anchors or weights.
pub fn sidecar_text(mapped: &MappedTable) -> String {
    let p = &mapped.provenance;
    let mut out = String::new();
    match &p.method {
        MapMethod::AnchorMix {
            kind,
            top_k,
            temperature,
            exclude_self,
        } => {
            out.push_str("method=anchor-mix\n");
            out.push_str(&format!("scheme={kind}\n"));
            out.push_str(&format!("top_k={top_k}\n"));
            out.push_str(&format!("temperature={temperature}\n"));
            out.push_str(&format!("exclude_self={exclude_self}\n"));
        }
        MapMethod::LeastSquares {
            residual,
            rank,
            ridge,
        } => {
            out.push_str("method=least-squares\n");
            out.push_str(&format!("residual={residual}\n"));
            out.push_str(&format!("rank={rank}\n"));
            out.push_str(&format!("ridge={ridge}\n"));
        }
    }
    out.push_str(&format!("anchors={}\n", p.anchor_count));
    match p.anchor_checksum {
        Some(c) => out.push_str(&format!("anchor_checksum={c:016x}\n")),
        None => out.push_str("anchor_checksum=none\n"),
    }
    out.push_str(&format!("dim={}\n", p.output_dim));
    out.push_str(&format!("zero_rows={}\n", mapped.zero_rows));
    out
}
