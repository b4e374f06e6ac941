use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use crosstitch_core::classifier::{
    eval_report_tsv, evaluate_macro_f1, ClassifierHead, DatasetOptions, LabeledDataset,
    LinearClassifier,
};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Trained model JSON from `train`.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Table to bind the head to; must live in the training table's space.
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    /// Labeled TSV to score.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Output base: writes `<base>.tsv` and `<base>.json`.
    #[arg(long, value_name = "BASE")]
    pub out: PathBuf,
    /// Class names in index order, overriding the model's own names.
    #[arg(long, value_name = "FILE")]
    pub label_map: Option<PathBuf>,
    /// Read dataset labels as plain integers with this class count.
    #[arg(long, value_name = "N")]
    pub classes: Option<usize>,
    /// Treat labels as 1-5 star ratings collapsed to 3 sentiments.
    #[arg(long)]
    pub star_labels: bool,
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let head = ClassifierHead::load(&args.model)?;
    // Rejecting the table at load time beats a shape error mid-eval.
    let table = Arc::new(super::load_table(&args.table, Some(head.dim), g.lowercase)?);

    // Dataset labels resolve like `train`, except the model's own class
    // names fill in by default; `--classes` switches to integer labels.
    let label_map = if args.star_labels {
        None
    } else if let Some(path) = &args.label_map {
        Some(super::read_label_map(path)?)
    } else if args.classes.is_none() {
        head.label_map.clone()
    } else {
        None
    };
    let options = DatasetOptions {
        label_map,
        n_classes: args.classes.or(Some(head.n_classes)),
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

    let classifier = LinearClassifier::bind(head, Arc::clone(&table))?;
    let eval = evaluate_macro_f1(&classifier, &dataset)?;

    let tsv_path = super::with_suffix(&args.out, "tsv");
    let json_path = super::with_suffix(&args.out, "json");

    let mut manifest = RunManifest::new("stitch-eval", g.seed);
    manifest.input(&args.model)?;
    manifest.input(&args.table)?;
    manifest.input(&args.dataset)?;
    if let Some(path) = &args.label_map {
        manifest.input(path)?;
    }
    manifest.param("star_labels", args.star_labels);
    manifest.param("classes", args.classes);
    manifest.param("lowercase", g.lowercase);
    manifest.param("examples", eval.n_examples);
    manifest.param("oov_sequences", eval.oov_sequences);
    manifest.param("lines_skipped", report.skipped);
    manifest.param("macro_f1", eval.macro_f1);
    manifest.output(&tsv_path);
    manifest.output(&json_path);

    let mut json = serde_json::to_string_pretty(&eval)?;
    json.push('\n');

    let mut stage = Stage::new();
    stage.add_text(&tsv_path, &eval_report_tsv(&eval))?;
    stage.add_text(&json_path, &json)?;
    stage.add_text(super::manifest_path(&args.out), &manifest.to_json())?;
    stage.commit()?;

    println!(
        "stitch-eval: macro_f1 {:.6} over {} examples ({} out-of-vocabulary) -> {}",
        eval.macro_f1,
        eval.n_examples,
        eval.oov_sequences,
        tsv_path.display()
    );
    Ok(())
}
