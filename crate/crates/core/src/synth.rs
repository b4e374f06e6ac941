//! Synthetic table pairs with known ground truth.
//!
//! The source table is random unit vectors; the target table is the same
//! vectors pushed through a random rotation plus optional Gaussian noise,
//! with the first `anchor_count` rows paired as gold anchors. Rotations
//! preserve every pairwise angle, so at zero noise any angle-based
//! pipeline must behave identically on both tables — which turns the
//! whole stitching loop into something a test can pin down exactly, and
//! noise into a dial for how gracefully it degrades.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::classifier::{
    evaluate_macro_f1, stitch, train, LabeledDataset, TrainConfig,
};
use crate::embeddings::{cosine_with_norms, norm_f64, EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::lexicon::{AnchorSet, Side};
use crate::mapping::{ls_fit, ls_project, map_table};
use crate::relrep::WeightingScheme;
use crate::rng::substream;

/// Recipe for one synthetic source/target pair and its task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthScenario {
    pub vocab_size: usize,
    pub dim: usize,
    /// Stddev of the per-component Gaussian added to the rotated rows.
    pub noise_sigma: f64,
    pub anchor_count: usize,
    pub n_classes: usize,
    /// Number of labeled examples generated.
    pub examples: usize,
    pub seed: u64,
}

impl SynthScenario {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.dim == 0 || self.examples == 0 {
            return Err(Error::InvalidConfig(
                "vocab size, dim, and examples must be positive".into(),
            ));
        }
        if self.anchor_count == 0 || self.anchor_count > self.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "anchor count {} outside 1..={}",
                self.anchor_count, self.vocab_size
            )));
        }
        if self.n_classes < 2 || self.n_classes > self.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "class count {} outside 2..={}",
                self.n_classes, self.vocab_size
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Uniformly random rotation (special orthogonal when det fixes allow;
/// orthogonal in general): QR of a Gaussian matrix with the sign
/// ambiguity resolved from R's diagonal. Row-major `dim x dim`.
pub fn random_orthogonal(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, "synth/rotation");
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Without this, the factorization's column signs are arbitrary and
    // the distribution over Q is not uniform.
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            out.push(q[(i, j)]);
        }
    }
    out
}

/// Builds the pair: source rows are unit Gaussians (tokens `w0..`),
/// target rows are `source * Q + sigma * noise` (tokens `v0..`), and the
/// first `anchor_count` row indices are paired as gold anchors.
pub fn generate_pair(
    scenario: &SynthScenario,
) -> Result<(EmbeddingTable, EmbeddingTable, AnchorSet)> {
    scenario.validate()?;
    let v = scenario.vocab_size;
    let d = scenario.dim;

    let mut src_rng = substream(scenario.seed, "synth/source");
    let mut source_f64: Vec<f64> = Vec::with_capacity(v * d);
    for _ in 0..v {
        loop {
            let row: Vec<f64> = (0..d)
                .map(|_| src_rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                source_f64.extend(row.iter().map(|x| x / norm));
                break;
            }
        }
    }

    let q = random_orthogonal(d, scenario.seed);
    let mut noise_rng = substream(scenario.seed, "synth/noise");
    let sigma = scenario.noise_sigma;

    let mut source_matrix = Vec::with_capacity(v * d);
    let mut target_matrix = Vec::with_capacity(v * d);
    for r in 0..v {
        let row = &source_f64[r * d..(r + 1) * d];
        source_matrix.extend(row.iter().map(|&x| x as f32));
        for j in 0..d {
            let mut t: f64 = (0..d).map(|i| row[i] * q[i * d + j]).sum();
            if sigma > 0.0 {
                t += sigma * noise_rng.sample::<f64, _>(StandardNormal);
            }
            target_matrix.push(t as f32);
        }
    }

    let source = EmbeddingTable::new(
        Vocabulary::from_tokens((0..v).map(|i| format!("w{i}")))?,
        source_matrix,
        d,
    )?;
    let target = EmbeddingTable::new(
        Vocabulary::from_tokens((0..v).map(|i| format!("v{i}")))?,
        target_matrix,
        d,
    )?;
    let pairs: Vec<(usize, usize)> = (0..scenario.anchor_count).map(|i| (i, i)).collect();
    let anchors = AnchorSet::from_index_pairs(&source, &target, &pairs)?;
    Ok((source, target, anchors))
}

/// Tokens drawn per generated example.
const TOKENS_PER_EXAMPLE: usize = 12;

/// Builds a classification task over a table: pick `n_classes` spread-out
/// centroid rows (greedy farthest-point in cosine distance), pool the
/// tokens closest to each centroid, then sample token sequences from the
/// label's pool. Labels cycle round-robin, so classes stay balanced.
pub fn generate_task(
    table: &EmbeddingTable,
    n_classes: usize,
    examples: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let v = table.len();
    if n_classes < 2 || n_classes > v {
        return Err(Error::InvalidConfig(format!(
            "class count {n_classes} outside 2..={v}"
        )));
    }
    if examples == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut rng = substream(seed, "synth/task");
    let norms: Vec<f64> = (0..v).map(|i| norm_f64(table.row(i))).collect();
    let cos = |a: usize, b: usize| {
        cosine_with_norms(table.row(a), norms[a], table.row(b), norms[b])
    };

    // Greedy farthest-point centroids: start anywhere, then repeatedly
    // take the row whose nearest centroid is farthest (ties to the
    // smaller row index).
    let mut centroids = vec![rng.random_range(0..v)];
    while centroids.len() < n_classes {
        let mut best = usize::MAX;
        let mut best_dist = f64::NEG_INFINITY;
        for cand in 0..v {
            if centroids.contains(&cand) {
                continue;
            }
            let nearest = centroids
                .iter()
                .map(|&c| 1.0 - cos(cand, c))
                .fold(f64::INFINITY, f64::min);
            if nearest > best_dist {
                best_dist = nearest;
                best = cand;
            }
        }
        centroids.push(best);
    }

    // Pool per class: the rows most aligned with its centroid.
    let pool_size = (v / (2 * n_classes)).max(2);
    let pools: Vec<Vec<usize>> = centroids
        .iter()
        .map(|&c| {
            let mut order: Vec<usize> = (0..v).collect();
            order.sort_unstable_by(|&a, &b| {
                cos(b, c).total_cmp(&cos(a, c)).then_with(|| a.cmp(&b))
            });
            order.truncate(pool_size);
            order
        })
        .collect();

    let mut data = Vec::with_capacity(examples);
    for e in 0..examples {
        let label = e % n_classes;
        let pool = &pools[label];
        let tokens: Vec<String> = (0..TOKENS_PER_EXAMPLE)
            .map(|_| {
                let row = pool[rng.random_range(0..pool.len())];
                table.vocab().token(row).to_string()
            })
            .collect();
        data.push((tokens, label));
    }
    LabeledDataset::new(data, n_classes)
}

/// Re-expresses a dataset over the paired table: token `w{i}` in the
/// source vocabulary becomes the target token at the same row index.
pub fn mirror_dataset(
    dataset: &LabeledDataset,
    from: &EmbeddingTable,
    to: &EmbeddingTable,
) -> Result<LabeledDataset> {
    if from.len() != to.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot mirror across tables of {} vs {} rows",
            from.len(),
            to.len()
        )));
    }
    let mut mirrored = Vec::with_capacity(dataset.len());
    for (tokens, label) in dataset.examples() {
        let mapped: Result<Vec<String>> = tokens
            .iter()
            .map(|t| {
                from.vocab()
                    .lookup(t)
                    .map(|i| to.vocab().token(i).to_string())
                    .ok_or_else(|| Error::InvalidToken {
                        token: t.clone(),
                        detail: "not in the table being mirrored from".into(),
                    })
            })
            .collect();
        mirrored.push((mapped?, *label));
    }
    LabeledDataset::new(mirrored, dataset.n_classes())
}

/// One method's scores on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    /// `least-squares` or `anchor-mix`.
    pub method: String,
    pub scheme: Option<String>,
    pub top_k: Option<usize>,
    pub temperature: Option<f64>,
    pub sigma: f64,
    pub anchors: usize,
    /// Macro-F1 of the trained classifier on its own (source) data.
    pub source_f1: f64,
    /// Macro-F1 after stitching onto the target table, no retraining.
    pub zero_shot_f1: f64,
    pub seed: u64,
}

/// Fixed training recipe for the harness; the comparison is between
/// mapping methods, so the classifier stays constant.
pub fn harness_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.5,
        epochs: 150,
        l2: 1e-4,
        batch_size: 32,
        seed,
    }
}

/// Runs the full loop on one scenario: generate the pair, build the
/// task, then for the least-squares baseline and every given weighting
/// scheme train on the source side and score the stitched target side.
pub fn run_end_to_end(
    scenario: &SynthScenario,
    schemes: &[WeightingScheme],
) -> Result<Vec<MethodReport>> {
    let (source, target, anchors) = generate_pair(scenario)?;
    let source_ds = generate_task(&source, scenario.n_classes, scenario.examples, scenario.seed)?;
    let target_ds = mirror_dataset(&source_ds, &source, &target)?;
    let config = harness_train_config(scenario.seed);

    let mut reports = Vec::with_capacity(schemes.len() + 1);
    let base = |method: &str| MethodReport {
        method: method.into(),
        scheme: None,
        top_k: None,
        temperature: None,
        sigma: scenario.noise_sigma,
        anchors: anchors.len(),
        source_f1: 0.0,
        zero_shot_f1: 0.0,
        seed: scenario.seed,
    };

    // Least-squares baseline: train on the raw source table, project the
    // target table into the source space, rebind.
    {
        let transform = ls_fit(&anchors, &target, &source, 0.0)?;
        let projected = ls_project(&target, &transform)?;
        let clf = train(&source_ds, Arc::new(source.clone()), &config)?;
        let source_f1 = evaluate_macro_f1(&clf, &source_ds)?.macro_f1;
        let stitched = stitch(&clf, Arc::new(projected.table))?;
        let zero_shot_f1 = evaluate_macro_f1(&stitched, &target_ds)?.macro_f1;
        reports.push(MethodReport {
            source_f1,
            zero_shot_f1,
            ..base("least-squares")
        });
    }

    // Anchor-mix methods: both tables re-expressed over source anchors.
    for scheme in schemes {
        let mapped_src = map_table(&source, &anchors, Side::Source, &source, scheme, false)?;
        let mapped_tgt = map_table(&target, &anchors, Side::Target, &source, scheme, false)?;
        let clf = train(&source_ds, Arc::new(mapped_src.table), &config)?;
        let source_f1 = evaluate_macro_f1(&clf, &source_ds)?.macro_f1;
        let stitched = stitch(&clf, Arc::new(mapped_tgt.table))?;
        let zero_shot_f1 = evaluate_macro_f1(&stitched, &target_ds)?.macro_f1;
        reports.push(MethodReport {
            scheme: Some(scheme.kind.to_string()),
            top_k: Some(scheme.top_k),
            temperature: Some(scheme.temperature),
            source_f1,
            zero_shot_f1,
            ..base("anchor-mix")
        });
    }

    Ok(reports)
}

/// Report rows as TSV, one line per method, `-` for inapplicable cells.
pub fn report_tsv(reports: &[MethodReport]) -> String {
    let mut out =
        String::from("method\tscheme\tk\ttau\tsigma\tanchors\tsource_f1\tzero_shot_f1\tseed\n");
    for r in reports {
        let scheme = r.scheme.as_deref().unwrap_or("-");
        let k = r.top_k.map_or_else(|| "-".into(), |k| k.to_string());
        let tau = r.temperature.map_or_else(|| "-".into(), |t| t.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\n",
            r.method, scheme, k, tau, r.sigma, r.anchors, r.source_f1, r.zero_shot_f1, r.seed
        ));
    }
    out
}

pub fn report_json(reports: &[MethodReport]) -> String {
    // Serialization of plain structs with no maps cannot fail.
    serde_json::to_string_pretty(reports).expect("report serialization")
}
