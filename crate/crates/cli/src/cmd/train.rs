use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use crosstitch_core::classifier::{
    train, DatasetOptions, LabeledDataset, Sentiment, TrainConfig,
};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Table the classifier reads (typically a mapped source table).
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    /// Labeled TSV: `label<TAB>text`, one example per line.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Output model JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Class names in index order, one per line; file labels must match.
    #[arg(long, value_name = "FILE")]
    pub label_map: Option<PathBuf>,
    /// Class count when labels are plain integers.
    #[arg(long, value_name = "N")]
    pub classes: Option<usize>,
    /// Treat labels as 1-5 star ratings collapsed to 3 sentiments.
    #[arg(long)]
    pub star_labels: bool,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let table = Arc::new(super::load_table(&args.table, None, g.lowercase)?);

    let label_map = match &args.label_map {
        Some(path) => Some(super::read_label_map(path)?),
        None => None,
    };
    let options = DatasetOptions {
        label_map: label_map.clone(),
        n_classes: args.classes,
        lowercase: g.lowercase,
        star_labels: args.star_labels,
    };
    let (dataset, report) = LabeledDataset::from_tsv(&args.dataset, &options)?;
    if report.skipped > 0 {
        eprintln!(
            "note: {}: skipped {} structurally broken lines",
            args.dataset.display(),
            report.skipped
        );
    }

    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        l2: args.l2,
        batch_size: args.batch_size,
        seed: g.seed,
    };
    let classifier = train(&dataset, Arc::clone(&table), &config)?;
    let final_loss = classifier.final_loss().expect("training reports a loss");

    // The saved head carries class names whenever the run knows them, so
    // downstream reports stay readable.
    let mut head = classifier.head().clone();
    head.label_map = if args.star_labels {
        Some(
            [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive]
                .iter()
                .map(|s| s.as_str().to_string())
                .collect(),
        )
    } else {
        label_map
    };

    let mut manifest = RunManifest::new("train", g.seed);
    manifest.input(&args.table)?;
    manifest.input(&args.dataset)?;
    if let Some(path) = &args.label_map {
        manifest.input(path)?;
    }
    manifest.param("learning_rate", args.lr);
    manifest.param("epochs", args.epochs);
    manifest.param("l2", args.l2);
    manifest.param("batch_size", args.batch_size);
    manifest.param("star_labels", args.star_labels);
    manifest.param("lowercase", g.lowercase);
    manifest.param("classes", head.n_classes);
    manifest.param("examples", dataset.len());
    manifest.param("lines_skipped", report.skipped);
    manifest.param("final_loss", final_loss);
    manifest.output(&args.out);

    let mut stage = Stage::new();
    stage.add_with(&args.out, |p| head.save(p).map_err(anyhow::Error::from))?;
    stage.add_text(super::manifest_path(&args.out), &manifest.to_json())?;
    stage.commit()?;

    println!(
        "train: {} examples, {} classes, final loss {:.6} -> {}",
        dataset.len(),
        head.n_classes,
        final_loss,
        args.out.display()
    );
    Ok(())
}
