//! Linear softmax classifier over mean-pooled embeddings.
//!
//! The head is deliberately table-agnostic: it sees only pooled vectors
//! of a fixed width. Training binds it to one table; [`stitch`] rebinds
//! the very same parameters to another table of the same width. If the
//! two tables live in the same space, predictions transfer without any
//! retraining — that transfer is the quantity the rest of the crate
//! exists to measure.
//!
//! Training is full-batch-deterministic: zero init (the objective is
//! convex, so the start point only affects the path), seeded shuffle,
//! fixed summation order. Same dataset, config, and seed give the same
//! parameters bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::substream;

/// Whitespace tokenization, optionally lowercased.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            if lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}

/// Token sequences with integer labels in `0..n_classes`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    examples: Vec<(Vec<String>, usize)>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(examples: Vec<(Vec<String>, usize)>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        for (tokens, label) in &examples {
            if tokens.is_empty() {
                return Err(Error::InvalidConfig(
                    "examples must have at least one token".into(),
                ));
            }
            if *label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: *label,
                    n_classes,
                });
            }
        }
        Ok(LabeledDataset {
            examples,
            n_classes,
        })
    }

    pub fn examples(&self) -> &[(Vec<String>, usize)] {
        &self.examples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Reads `label<TAB>text` lines. Structurally broken lines (no tab,
    /// empty text) are skipped and counted; unresolvable labels are
    /// errors, because silently dropping them would skew class balance.
    pub fn from_tsv(
        path: impl AsRef<Path>,
        options: &DatasetOptions,
    ) -> Result<(Self, DatasetLoadReport)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let name_to_index: Option<HashMap<&str, usize>> = options.label_map.as_ref().map(|m| {
            m.iter()
                .enumerate()
                .map(|(i, name)| (name.as_str(), i))
                .collect()
        });

        let mut examples = Vec::new();
        let mut skipped = 0usize;
        let mut max_label = 0usize;

        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let Some((label_field, text)) = line.split_once('\t') else {
                skipped += 1;
                continue;
            };
            let tokens = tokenize(text, options.lowercase);
            if tokens.is_empty() {
                skipped += 1;
                continue;
            }

            let label_field = label_field.trim();
            let parse_err = |detail: String| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                detail,
            };
            let label = if options.star_labels {
                let stars: u8 = label_field
                    .parse()
                    .map_err(|_| parse_err(format!("bad star rating {label_field:?}")))?;
                aggregate_star_labels(stars)?.class_index()
            } else if let Some(names) = &name_to_index {
                *names
                    .get(label_field)
                    .ok_or_else(|| parse_err(format!("label {label_field:?} not in label map")))?
            } else {
                label_field
                    .parse()
                    .map_err(|_| parse_err(format!("bad integer label {label_field:?}")))?
            };

            max_label = max_label.max(label);
            examples.push((tokens, label));
        }

        let n_classes = if options.star_labels {
            3
        } else if let Some(m) = &options.label_map {
            m.len()
        } else if let Some(c) = options.n_classes {
            c
        } else {
            (max_label + 1).max(2)
        };

        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok((
            LabeledDataset::new(examples, n_classes)?,
            DatasetLoadReport { skipped },
        ))
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetOptions {
    /// Class names in index order; labels in the file are looked up here.
    pub label_map: Option<Vec<String>>,
    /// Explicit class count when labels are plain integers.
    pub n_classes: Option<usize>,
    pub lowercase: bool,
    /// Labels are 1-5 star ratings to be collapsed into 3 sentiments.
    pub star_labels: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetLoadReport {
    pub skipped: usize,
}

/// Three-way sentiment from star ratings: 1-2 negative, 3 neutral,
/// 4-5 positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub fn class_index(self) -> usize {
        match self {
            Sentiment::Negative => 0,
            Sentiment::Neutral => 1,
            Sentiment::Positive => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

pub fn aggregate_star_labels(stars: u8) -> Result<Sentiment> {
    match stars {
        1 | 2 => Ok(Sentiment::Negative),
        3 => Ok(Sentiment::Neutral),
        4 | 5 => Ok(Sentiment::Positive),
        other => Err(Error::StarOutOfRange(other)),
    }
}

/// Mean of the in-vocabulary token embeddings.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub vector: Vec<f64>,
    /// Tokens that hit the vocabulary; zero means `vector` is all zeros.
    pub in_vocab: usize,
}

pub fn pool<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Pooled {
    let mut vector = vec![0.0f64; table.dim()];
    let mut in_vocab = 0usize;
    for token in tokens {
        if let Some(row) = table.get(token.as_ref()) {
            for (v, &e) in vector.iter_mut().zip(row) {
                *v += f64::from(e);
            }
            in_vocab += 1;
        }
    }
    if in_vocab > 0 {
        let inv = 1.0 / in_vocab as f64;
        for v in &mut vector {
            *v *= inv;
        }
    }
    Pooled { vector, in_vocab }
}

/// The table-independent part of a classifier: softmax over `W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub n_classes: usize,
    pub dim: usize,
    /// Row-major `n_classes x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Class names in index order, when known.
    pub label_map: Option<Vec<String>>,
}

impl ClassifierHead {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "head has {} classes, need at least 2",
                self.n_classes
            )));
        }
        if self.weights.len() != self.n_classes * self.dim || self.bias.len() != self.n_classes {
            return Err(Error::InvalidConfig(
                "head parameter shapes do not match n_classes x dim".into(),
            ));
        }
        if let Some(m) = &self.label_map {
            if m.len() != self.n_classes {
                return Err(Error::InvalidConfig(
                    "label map length does not match n_classes".into(),
                ));
            }
        }
        if self
            .weights
            .iter()
            .chain(&self.bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                context: "classifier parameters".into(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[c]
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let z = self.logits(x);
        let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Argmax class; ties go to the smaller index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0usize;
        for (c, &v) in z.iter().enumerate().skip(1) {
            if v > z[best] {
                best = c;
            }
        }
        best
    }

    /// Serializes as versioned JSON so stale model files are rejected
    /// instead of misread.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate()?;
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            head: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Model {
            path: path.into(),
            detail: e.to_string(),
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_slice(&bytes).map_err(|e| Error::Model {
            path: path.into(),
            detail: e.to_string(),
        })?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Model {
                path: path.into(),
                detail: format!(
                    "unsupported model file {}/{} (expected {MODEL_FORMAT}/{MODEL_VERSION})",
                    file.format, file.version
                ),
            });
        }
        file.head.validate()?;
        Ok(file.head)
    }
}

const MODEL_FORMAT: &str = "crosstitch-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    head: ClassifierHead,
}

/// A head bound to the table it reads embeddings from.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    head: ClassifierHead,
    table: Arc<EmbeddingTable>,
    final_loss: Option<f64>,
}

impl LinearClassifier {
    /// Binds an existing head to a table of matching width.
    pub fn bind(head: ClassifierHead, table: Arc<EmbeddingTable>) -> Result<Self> {
        head.validate()?;
        if head.dim != table.dim() {
            return Err(Error::DimensionMismatch {
                expected: head.dim,
                got: table.dim(),
            });
        }
        Ok(LinearClassifier {
            head,
            table,
            final_loss: None,
        })
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn table(&self) -> &Arc<EmbeddingTable> {
        &self.table
    }

    /// Mean training loss after the final epoch, when trained here.
    pub fn final_loss(&self) -> Option<f64> {
        self.final_loss
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        self.head.predict(&pool(tokens, &self.table).vector)
    }

    pub fn probabilities_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.head.probabilities(&pool(tokens, &self.table).vector)
    }
}

/// Rebinds the trained head — bit-identical parameters — to a new table
/// of the same width. This is the zero-shot step: no data, no updates.
pub fn stitch(classifier: &LinearClassifier, table: Arc<EmbeddingTable>) -> Result<LinearClassifier> {
    if table.dim() != classifier.head.dim {
        return Err(Error::DimensionMismatch {
            expected: classifier.head.dim,
            got: table.dim(),
        });
    }
    Ok(LinearClassifier {
        head: classifier.head.clone(),
        table,
        final_loss: classifier.final_loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of the `(l2/2) * |W|^2` penalty; bias is not penalized.
    pub l2: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 200,
            l2: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "l2 must be non-negative and finite, got {}",
                self.l2
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean cross-entropy plus `(l2/2) * |W|^2` and its exact gradient, over
/// the examples at `subset`. Shared by training and the gradient tests.
fn batch_loss_grad(
    weights: &[f64],
    bias: &[f64],
    n_classes: usize,
    dim: usize,
    inputs: &[Vec<f64>],
    labels: &[usize],
    subset: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mut grad_w = vec![0.0f64; n_classes * dim];
    let mut grad_b = vec![0.0f64; n_classes];
    let mut loss = 0.0f64;
    let inv = 1.0 / subset.len() as f64;

    for &i in subset {
        let x = &inputs[i];
        let y = labels[i];

        let mut z = vec![0.0f64; n_classes];
        for (c, zc) in z.iter_mut().enumerate() {
            let row = &weights[c * dim..(c + 1) * dim];
            *zc = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias[c];
        }
        let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();

        loss += (total.ln() + max - z[y]) * inv;

        for c in 0..n_classes {
            let delta = (exps[c] / total - f64::from(u8::from(c == y))) * inv;
            grad_b[c] += delta;
            let row = &mut grad_w[c * dim..(c + 1) * dim];
            for (g, &v) in row.iter_mut().zip(x) {
                *g += delta * v;
            }
        }
    }

    if l2 > 0.0 {
        loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
        for (g, &w) in grad_w.iter_mut().zip(weights) {
            *g += l2 * w;
        }
    }

    (loss, grad_w, grad_b)
}

/// Loss and gradient over all examples; the target of the finite-
/// difference checks.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: &[f64],
    n_classes: usize,
    dim: usize,
    inputs: &[Vec<f64>],
    labels: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let all: Vec<usize> = (0..inputs.len()).collect();
    batch_loss_grad(weights, bias, n_classes, dim, inputs, labels, &all, l2)
}

/// Mini-batch gradient descent from zero init. The objective is convex,
/// so zero init costs nothing, and it keeps runs reproducible: the only
/// randomness is the seeded shuffle.
pub fn train(
    dataset: &LabeledDataset,
    table: Arc<EmbeddingTable>,
    config: &TrainConfig,
) -> Result<LinearClassifier> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let n = dataset.len();
    let dim = table.dim();
    let n_classes = dataset.n_classes();

    let table_ref = &table;
    let inputs: Vec<Vec<f64>> = exec::map_indexed(n, |i| {
        pool(&dataset.examples()[i].0, table_ref).vector
    });
    let labels: Vec<usize> = dataset.examples().iter().map(|&(_, y)| y).collect();

    let mut weights = vec![0.0f64; n_classes * dim];
    let mut bias = vec![0.0f64; n_classes];
    let mut rng = substream(config.seed, "classifier/shuffle");
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grad_w, grad_b) = batch_loss_grad(
                &weights, &bias, n_classes, dim, &inputs, &labels, batch, config.l2,
            );
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in bias.iter_mut().zip(&grad_b) {
                *b -= config.learning_rate * g;
            }
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let (final_loss, _, _) = batch_loss_grad(
        &weights, &bias, n_classes, dim, &inputs, &labels, &all, config.l2,
    );
    if !final_loss.is_finite() || weights.iter().chain(&bias).any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            epoch: config.epochs,
            loss: final_loss,
        });
    }

    Ok(LinearClassifier {
        head: ClassifierHead {
            n_classes,
            dim,
            weights,
            bias,
            label_map: None,
        },
        table,
        final_loss: Some(final_loss),
    })
}

/// Precision/recall/F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold examples of this class.
    pub support: usize,
}

/// Per-class scores and their unweighted mean from a `C x C` confusion
/// matrix (`confusion[gold][predicted]`). A class with no predictions
/// and no gold examples contributes an F1 of 0 — macro-F1 averages over
/// all declared classes, present or not.
pub fn scores_from_confusion(confusion: &[Vec<usize>]) -> (Vec<ClassScore>, f64) {
    let c = confusion.len();
    let mut scores = Vec::with_capacity(c);
    let mut f1_sum = 0.0f64;
    for k in 0..c {
        let tp = confusion[k][k];
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[k]).sum();
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        scores.push(ClassScore {
            precision,
            recall,
            f1,
            support,
        });
    }
    (scores, f1_sum / c as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n_examples: usize,
    /// Sequences pooled to the zero vector (no token in vocabulary).
    pub oov_sequences: usize,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Class names in index order, when the head knows them.
    pub labels: Option<Vec<String>>,
}

/// Runs the classifier over a dataset and scores it. The dataset may
/// declare fewer classes than the head (a test split can miss a class)
/// but never more.
pub fn evaluate_macro_f1(
    classifier: &LinearClassifier,
    dataset: &LabeledDataset,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let c = classifier.head.n_classes;
    if dataset.n_classes() > c {
        return Err(Error::LabelOutOfRange {
            label: dataset.n_classes() - 1,
            n_classes: c,
        });
    }

    let table = &classifier.table;
    let head = &classifier.head;
    let outcomes: Vec<(usize, bool)> = exec::map_indexed(dataset.len(), |i| {
        let pooled = pool(&dataset.examples()[i].0, table);
        (head.predict(&pooled.vector), pooled.in_vocab == 0)
    });

    let mut confusion = vec![vec![0usize; c]; c];
    let mut oov_sequences = 0usize;
    for (i, &(pred, oov)) in outcomes.iter().enumerate() {
        let gold = dataset.examples()[i].1;
        confusion[gold][pred] += 1;
        oov_sequences += usize::from(oov);
    }

    let (per_class, macro_f1) = scores_from_confusion(&confusion);
    Ok(EvalReport {
        n_examples: dataset.len(),
        oov_sequences,
        macro_f1,
        per_class,
        confusion,
        labels: classifier.head.label_map.clone(),
    })
}

/// Long-form TSV twin of the JSON report: `metric<TAB>class<TAB>value`.
pub fn eval_report_tsv(report: &EvalReport) -> String {
    let mut out = String::from("metric\tclass\tvalue\n");
    let class_name = |k: usize| -> String {
        match &report.labels {
            Some(names) => names[k].clone(),
            None => k.to_string(),
        }
    };
    for (k, score) in report.per_class.iter().enumerate() {
        let name = class_name(k);
        out.push_str(&format!("precision\t{name}\t{:.6}\n", score.precision));
        out.push_str(&format!("recall\t{name}\t{:.6}\n", score.recall));
        out.push_str(&format!("f1\t{name}\t{:.6}\n", score.f1));
        out.push_str(&format!("support\t{name}\t{}\n", score.support));
    }
    out.push_str(&format!("macro_f1\t-\t{:.6}\n", report.macro_f1));
    out.push_str(&format!("examples\t-\t{}\n", report.n_examples));
    out.push_str(&format!("oov_sequences\t-\t{}\n", report.oov_sequences));
    for (gold, row) in report.confusion.iter().enumerate() {
        for (pred, &count) in row.iter().enumerate() {
            out.push_str(&format!(
                "confusion\t{}>{}\t{count}\n",
                class_name(gold),
                class_name(pred)
            ));
        }
    }
    out
}
