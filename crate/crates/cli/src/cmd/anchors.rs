use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use crosstitch_core::lexicon::{
    build_anchor_set, filter_by_score, load_lexicon, load_stopwords, lowercase_entries,
    remove_stopwords, sample_anchors, StopwordSide,
};

use crate::manifest::RunManifest;
use crate::stage::Stage;
use crate::Global;

#[derive(clap::Args)]
pub struct Args {
    /// Source-language `.vec` table.
    #[arg(long, value_name = "FILE")]
    pub src_vec: PathBuf,
    /// Target-language `.vec` table.
    #[arg(long, value_name = "FILE")]
    pub tgt_vec: PathBuf,
    /// Bilingual lexicon: `src tgt` pairs, optionally `src<TAB>tgt<TAB>score`.
    #[arg(long, value_name = "FILE")]
    pub lexicon: PathBuf,
    /// Drop scored entries below this value; unscored entries stay.
    #[arg(long, value_name = "MIN")]
    pub score_threshold: Option<f64>,
    /// Stopword list, one token per line.
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Which side of an entry a stopword must match to drop it.
    #[arg(long, default_value = "both", value_parser = StopwordSide::from_str)]
    pub stopword_side: StopwordSide,
    /// Subsample the surviving anchors down to this many (seeded).
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
    /// Output anchor TSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn run(args: Args, g: &Global) -> Result<()> {
    let source = super::load_table(&args.src_vec, None, g.lowercase)?;
    let target = super::load_table(&args.tgt_vec, None, g.lowercase)?;

    let (mut entries, skipped) = load_lexicon(&args.lexicon)?;
    if skipped > 0 {
        eprintln!(
            "note: {}: skipped {} malformed lexicon lines",
            args.lexicon.display(),
            skipped
        );
    }
    if g.lowercase {
        entries = lowercase_entries(entries);
    }
    if let Some(min) = args.score_threshold {
        entries = filter_by_score(entries, min);
    }
    if let Some(path) = &args.stopwords {
        let stops = load_stopwords(path)?;
        entries = remove_stopwords(entries, &stops, args.stopword_side);
    }

    let built = build_anchor_set(&entries, &source, &target)?;
    let matched = built.len();
    let anchors = match args.sample {
        Some(n) => sample_anchors(&built, n, g.seed)?,
        None => built,
    };

    let mut manifest = RunManifest::new("anchors", g.seed);
    manifest.input(&args.src_vec)?;
    manifest.input(&args.tgt_vec)?;
    manifest.input(&args.lexicon)?;
    if let Some(path) = &args.stopwords {
        manifest.input(path)?;
    }
    manifest.param("lowercase", g.lowercase);
    manifest.param("score_threshold", args.score_threshold);
    manifest.param("stopword_side", args.stopword_side.as_str());
    manifest.param("sample", args.sample);
    manifest.param("lexicon_entries", entries.len());
    manifest.param("lexicon_skipped", skipped);
    manifest.param("anchors_matched", matched);
    manifest.param("anchors_kept", anchors.len());
    manifest.anchor_checksum(anchors.checksum(source.dim()));
    manifest.output(&args.out);

    let mut stage = Stage::new();
    stage.add_with(&args.out, |p| {
        anchors.write_tsv(p).map_err(anyhow::Error::from)
    })?;
    stage.add_text(super::manifest_path(&args.out), &manifest.to_json())?;
    stage.commit()?;

    println!(
        "anchors: kept {} of {} matched ({} lexicon entries) -> {}",
        anchors.len(),
        matched,
        entries.len(),
        args.out.display()
    );
    Ok(())
}
