use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use crosstitch_core::relrep::{WeightKind, WeightingScheme};
use crosstitch_core::synth::{report_json, report_tsv, run_end_to_end, SynthScenario};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Output base: writes `<base>.tsv` and `<base>.json`.
    #[arg(long, value_name = "BASE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 250)]
    pub anchors: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Labeled examples generated per language.
    #[arg(long, default_value_t = 600)]
    pub examples: usize,
    /// Per-component noise stddev applied after the hidden rotation.
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// Comma-separated weighting schemes to run alongside the
    /// least-squares baseline.
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = WeightKind::ALL,
        value_parser = WeightKind::from_str
    )]
    pub schemes: Vec<WeightKind>,
    #[arg(long, default_value_t = 50)]
    pub top_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let scenario = SynthScenario {
        vocab_size: args.vocab,
        dim: args.dim,
        noise_sigma: args.sigma,
        anchor_count: args.anchors,
        n_classes: args.classes,
        examples: args.examples,
        seed: g.seed,
    };
    let schemes = args
        .schemes
        .iter()
        .map(|&kind| WeightingScheme::new(kind, args.top_k, args.temperature))
        .collect::<crosstitch_core::Result<Vec<_>>>()?;

    let reports = run_end_to_end(&scenario, &schemes)?;
    let tsv = report_tsv(&reports);

    let tsv_path = super::with_suffix(&args.out, "tsv");
    let json_path = super::with_suffix(&args.out, "json");

    let mut manifest = RunManifest::new("synth", g.seed);
    manifest.param("scenario", scenario);
    manifest.param(
        "schemes",
        args.schemes.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
    );
    manifest.param("top_k", args.top_k);
    manifest.param("temperature", args.temperature);
    manifest.output(&tsv_path);
    manifest.output(&json_path);

    let mut json = report_json(&reports);
    json.push('\n');

    let mut stage = Stage::new();
    stage.add_text(&tsv_path, &tsv)?;
    stage.add_text(&json_path, &json)?;
    stage.add_text(super::manifest_path(&args.out), &manifest.to_json())?;
    stage.commit()?;

    print!("{tsv}");
    Ok(())
}
