use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use crosstitch_core::embeddings::save_vec_file;
use crosstitch_core::lexicon::{AnchorSet, Side};
use crosstitch_core::mapping::{map_table, sidecar_text, MappedTable};
use crosstitch_core::relrep::{dump_top_k, WeightKind, WeightingScheme};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Source-language `.vec` table (its space becomes the shared one).
    #[arg(long, value_name = "FILE")]
    pub src_vec: PathBuf,
    /// Target-language `.vec` table.
    #[arg(long, value_name = "FILE")]
    pub tgt_vec: PathBuf,
    /// Anchor TSV produced by `anchors`; re-validated against both tables.
    #[arg(long, value_name = "FILE")]
    pub anchors: PathBuf,
    /// Output `.vec` for the re-expressed source table.
    #[arg(long, value_name = "FILE")]
    pub out_src: PathBuf,
    /// Output `.vec` for the re-expressed target table.
    #[arg(long, value_name = "FILE")]
    pub out_tgt: PathBuf,
    /// Weighting scheme: standard, softmax, or sparsemax.
    #[arg(long, default_value = "standard", value_parser = WeightKind::from_str)]
    pub scheme: WeightKind,
    /// Anchors mixed per token.
    #[arg(long, default_value_t = 50)]
    pub top_k: usize,
    /// Softmax/sparsemax temperature.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Hide each anchor token's own slot from its top-k.
    #[arg(long)]
    pub exclude_self: bool,
    /// Optional TSV dump of per-token top-k anchors, source side.
    #[arg(long, value_name = "FILE")]
    pub dump_topk_src: Option<PathBuf>,
    /// Optional TSV dump of per-token top-k anchors, target side.
    #[arg(long, value_name = "FILE")]
    pub dump_topk_tgt: Option<PathBuf>,
}

/// Stages a mapped table as `.vec` plus a `key=value` sidecar.
fn stage_mapped(
    mapped: &MappedTable,
    out: &Path,
    stage: &mut Stage,
    manifest: &mut RunManifest,
) -> Result<()> {
    stage.add_with(out, |p| {
        save_vec_file(&mapped.table, p).map_err(anyhow::Error::from)
    })?;
    let meta = super::with_suffix(out, "meta");
    stage.add_text(&meta, &sidecar_text(mapped))?;
    manifest.output(out);
    manifest.output(&meta);
    Ok(())
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let source = super::load_table(&args.src_vec, None, g.lowercase)?;
    let target = super::load_table(&args.tgt_vec, None, g.lowercase)?;
    // Fails before any compute if the anchor file does not line up with
    // the tables it is being applied to.
    let anchors = AnchorSet::read_tsv(&args.anchors, &source, &target)?;
    let scheme = WeightingScheme::new(args.scheme, args.top_k, args.temperature)?;

    let mapped_src = map_table(
        &source,
        &anchors,
        Side::Source,
        &source,
        &scheme,
        args.exclude_self,
    )?;
    let mapped_tgt = map_table(
        &target,
        &anchors,
        Side::Target,
        &source,
        &scheme,
        args.exclude_self,
    )?;
    for (label, mapped) in [("source", &mapped_src), ("target", &mapped_tgt)] {
        if mapped.zero_rows > 0 {
            eprintln!(
                "note: {label}: {} rows mapped to the zero vector",
                mapped.zero_rows
            );
        }
    }

    let mut manifest = RunManifest::new("map", g.seed);
    manifest.input(&args.src_vec)?;
    manifest.input(&args.tgt_vec)?;
    manifest.input(&args.anchors)?;
    manifest.param("scheme", args.scheme.as_str());
    manifest.param("top_k", args.top_k);
    manifest.param("temperature", args.temperature);
    manifest.param("exclude_self", args.exclude_self);
    manifest.param("lowercase", g.lowercase);
    manifest.param("zero_rows_src", mapped_src.zero_rows);
    manifest.param("zero_rows_tgt", mapped_tgt.zero_rows);
    if let Some(c) = mapped_src.provenance.anchor_checksum {
        manifest.anchor_checksum(c);
    }

    let mut stage = Stage::new();
    stage_mapped(&mapped_src, &args.out_src, &mut stage, &mut manifest)?;
    stage_mapped(&mapped_tgt, &args.out_tgt, &mut stage, &mut manifest)?;

    for (path, table, indices) in [
        (
            &args.dump_topk_src,
            &source,
            anchors.source_indices(),
        ),
        (
            &args.dump_topk_tgt,
            &target,
            anchors.target_indices(),
        ),
    ] {
        if let Some(path) = path {
            let text = dump_top_k(table, indices, args.top_k, args.exclude_self)?;
            stage.add_text(path, &text)?;
            manifest.output(path);
        }
    }

    stage.add_text(super::manifest_path(&args.out_src), &manifest.to_json())?;
    stage.commit()?;

    println!(
        "map: {} source + {} target rows through {} anchors ({}, k={}) -> {}, {}",
        source.len(),
        target.len(),
        anchors.len(),
        args.scheme,
        args.top_k,
        args.out_src.display(),
        args.out_tgt.display()
    );
    Ok(())
}
