use std::path::PathBuf;

use anyhow::Result;
use crosstitch_core::embeddings::save_vec_file;
use crosstitch_core::lexicon::AnchorSet;
use crosstitch_core::mapping::{ls_fit, ls_project, sidecar_text};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Source-language `.vec` table (the space projected into).
    #[arg(long, value_name = "FILE")]
    pub src_vec: PathBuf,
    /// Target-language `.vec` table.
    #[arg(long, value_name = "FILE")]
    pub tgt_vec: PathBuf,
    /// Anchor TSV produced by `anchors`; re-validated against both tables.
    #[arg(long, value_name = "FILE")]
    pub anchors: PathBuf,
    /// Output `.vec` for the projected target table.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Ridge coefficient; 0 gives the plain pseudoinverse solution.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let source = super::load_table(&args.src_vec, None, g.lowercase)?;
    let target = super::load_table(&args.tgt_vec, None, g.lowercase)?;
    let anchors = AnchorSet::read_tsv(&args.anchors, &source, &target)?;

    let transform = ls_fit(&anchors, &target, &source, args.ridge)?;
    let projected = ls_project(&target, &transform)?;
    if projected.zero_rows > 0 {
        eprintln!(
            "note: {} rows projected to the zero vector",
            projected.zero_rows
        );
    }

    let mut manifest = RunManifest::new("ls", g.seed);
    manifest.input(&args.src_vec)?;
    manifest.input(&args.tgt_vec)?;
    manifest.input(&args.anchors)?;
    manifest.param("ridge", args.ridge);
    manifest.param("lowercase", g.lowercase);
    manifest.param("residual", transform.residual);
    manifest.param("rank", transform.rank);
    manifest.param("zero_rows", projected.zero_rows);
    if let Some(c) = transform.anchor_checksum {
        manifest.anchor_checksum(c);
    }

    let meta = super::with_suffix(&args.out, "meta");
    manifest.output(&args.out);
    manifest.output(&meta);

    let mut stage = Stage::new();
    stage.add_with(&args.out, |p| {
        save_vec_file(&projected.table, p).map_err(anyhow::Error::from)
    })?;
    stage.add_text(&meta, &sidecar_text(&projected))?;
    stage.add_text(super::manifest_path(&args.out), &manifest.to_json())?;
    stage.commit()?;

    println!(
        "ls: fit rank {} over {} anchors, residual {:.6e} -> {}",
        transform.rank,
        anchors.len(),
        transform.residual,
        args.out.display()
    );
    Ok(())
}
