//! Cross-lingual embedding stitching.
//!
//! The pipeline re-expresses two independently trained embedding tables in
//! one shared space so that a classifier trained on one language's vectors
//! can score the other language's vectors without retraining:
//!
//! 1. [`embeddings`] loads and saves `.vec` tables and provides the cosine
//!    kernel everything else is built on.
//! 2. [`lexicon`] turns a bilingual word list plus the two vocabularies
//!    into an ordered anchor set.
//! 3. [`relrep`] computes anchor-cosine rows, top-k selection, and the
//!    mixing weights (plain normalization, softmax, sparsemax).
//! 4. [`mapping`] produces mapped tables — every token becomes a weighted
//!    mix of *source* anchor embeddings — and a least-squares projection
//!    baseline.
//! 5. [`classifier`] trains a linear softmax head over mean-pooled rows
//!    and evaluates macro-F1 after swapping the table underneath it.
//! 6. [`synth`] generates rotated-plus-noise table pairs with known
//!    ground truth and runs the whole loop end to end.
//!
//! All randomness flows from one caller-supplied seed through named
//! ChaCha substreams ([`rng::substream`]), and row-level parallelism
//! (the `parallel` feature, on by default) never changes results: outputs
//! are bit-identical whatever the worker count.

pub mod classifier;
pub mod embeddings;
pub mod error;
mod exec;
mod hash;
pub mod lexicon;
pub mod mapping;
pub mod relrep;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
