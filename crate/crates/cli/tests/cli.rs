//! End-to-end tests of the `crosstitch` binary: every subcommand runs
//! as a subprocess against small fixture tables in a scratch directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_crosstitch"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_failure(out: &Output) {
    assert!(
        !out.status.success(),
        "command unexpectedly succeeded\nstdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
}

fn write_vec(path: &Path, dim: usize, rows: &[(&str, &[f32])]) {
    let mut text = format!("{} {}\n", rows.len(), dim);
    for (token, values) in rows {
        assert_eq!(values.len(), dim);
        text.push_str(token);
        for v in *values {
            text.push_str(&format!(" {v}"));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn read(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path))
        .unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

/// Five English/French-ish tokens per side, with a scored lexicon.
fn bilingual_fixture(dir: &Path) {
    write_vec(
        &dir.join("src.vec"),
        2,
        &[
            ("the", &[0.1, 0.9]),
            ("cat", &[1.0, 0.2]),
            ("dog", &[0.9, 0.4]),
            ("runs", &[-0.5, 0.8]),
            ("blue", &[-0.9, -0.3]),
        ],
    );
    write_vec(
        &dir.join("tgt.vec"),
        2,
        &[
            ("le", &[0.2, 0.8]),
            ("chat", &[0.9, 0.3]),
            ("chien", &[0.8, 0.5]),
            ("court", &[-0.4, 0.9]),
            ("bleu", &[-0.8, -0.4]),
        ],
    );
    fs::write(
        dir.join("lexicon.tsv"),
        "the\tle\t0.9\ncat\tchat\t0.95\ndog\tchien\t0.9\nruns\tcourt\t0.4\nblue\tbleu\t0.8\nghost\tfantome\t0.99\n",
    )
    .unwrap();
}

/// Six separable tokens in one table, used as both sides of a pair.
fn identity_fixture(dir: &Path) -> Vec<(&'static str, Vec<f32>)> {
    let rows: Vec<(&str, Vec<f32>)> = vec![
        ("w0", vec![1.0, 0.1, -0.2, 0.4]),
        ("w1", vec![0.8, -0.3, 0.5, 0.1]),
        ("w2", vec![-0.6, 0.9, 0.2, -0.5]),
        ("w3", vec![0.2, 0.7, -0.8, 0.3]),
        ("w4", vec![-0.4, -0.5, 0.6, 0.9]),
        ("w5", vec![0.3, -0.9, -0.1, -0.7]),
    ];
    let borrowed: Vec<(&str, &[f32])> = rows.iter().map(|(t, v)| (*t, v.as_slice())).collect();
    write_vec(&dir.join("src.vec"), 4, &borrowed);
    write_vec(&dir.join("tgt.vec"), 4, &borrowed);
    fs::write(
        dir.join("lexicon.tsv"),
        "w0\tw0\nw1\tw1\nw2\tw2\nw3\tw3\n",
    )
    .unwrap();
    rows
}

#[test]
fn help_lists_every_subcommand() {
    let out = Command::new(bin()).arg("--help").output().unwrap();
    assert_success(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["anchors", "map", "ls", "train", "stitch-eval", "synth"] {
        assert!(text.contains(name), "help is missing {name}");
    }
}

#[test]
fn anchors_filters_scores_and_stopwords() {
    let dir = tempfile::tempdir().unwrap();
    bilingual_fixture(dir.path());
    fs::write(dir.path().join("stop.txt"), "the\n").unwrap();

    let out = run_in(
        dir.path(),
        &[
            "anchors",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--lexicon", "lexicon.tsv",
            "--score-threshold", "0.5",
            "--stopwords", "stop.txt",
            "--stopword-side", "source",
            "--out", "anchors.tsv",
        ],
    );
    assert_success(&out);

    // "the" is a stopword, "runs" scores 0.4 < 0.5, "ghost" is OOV.
    let tsv = read(&dir.path().join("anchors.tsv"));
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "src_token\ttgt_token\tsrc_index\ttgt_index");
    assert_eq!(
        &lines[1..],
        &["cat\tchat\t1\t1", "dog\tchien\t2\t2", "blue\tbleu\t4\t4"]
    );

    let manifest = read_json(&dir.path().join("anchors.tsv.manifest.json"));
    assert_eq!(manifest["command"], "anchors");
    assert_eq!(manifest["parameters"]["anchors_kept"], 3);
    assert_eq!(manifest["parameters"]["stopword_side"], "source");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);
    assert!(manifest["anchor_checksum"].is_string());
    assert_eq!(manifest["outputs"][0], "anchors.tsv");
}

#[test]
fn anchor_sampling_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    bilingual_fixture(dir.path());

    let args = |out: &'static str| {
        vec![
            "anchors",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--lexicon", "lexicon.tsv",
            "--sample", "2",
            "--seed", "9",
            "--out", out,
        ]
    };
    assert_success(&run_in(dir.path(), &args("a.tsv")));
    assert_success(&run_in(dir.path(), &args("b.tsv")));
    let a = read(&dir.path().join("a.tsv"));
    assert_eq!(a, read(&dir.path().join("b.tsv")));
    assert_eq!(a.lines().count(), 3); // header + 2 sampled anchors
}

#[test]
fn map_on_identical_tables_reproduces_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    assert_success(&run_in(
        dir.path(),
        &[
            "anchors",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--lexicon", "lexicon.tsv",
            "--out", "anchors.tsv",
        ],
    ));

    let out = run_in(
        dir.path(),
        &[
            "map",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--anchors", "anchors.tsv",
            "--scheme", "standard",
            "--top-k", "3",
            "--out-src", "m_src.vec",
            "--out-tgt", "m_tgt.vec",
            "--dump-topk-src", "topk.tsv",
        ],
    );
    assert_success(&out);

    // Identical inputs must land on identical bytes on both sides.
    let src_bytes = fs::read(dir.path().join("m_src.vec")).unwrap();
    assert_eq!(src_bytes, fs::read(dir.path().join("m_tgt.vec")).unwrap());

    let meta = read(&dir.path().join("m_src.vec.meta"));
    for line in [
        "method=anchor-mix",
        "scheme=standard",
        "top_k=3",
        "exclude_self=false",
        "anchors=4",
        "zero_rows=0",
    ] {
        assert!(meta.contains(line), "sidecar is missing {line:?}:\n{meta}");
    }

    // Every token gets exactly k dump entries; an anchor token's own
    // slot scores 1 at the front.
    let dump = read(&dir.path().join("topk.tsv"));
    assert_eq!(dump.lines().count(), 6);
    let w0 = dump.lines().find(|l| l.starts_with("w0\t")).unwrap();
    assert!(w0.contains("0:1.000000"), "bad dump line: {w0}");
    assert_eq!(w0.split('\t').nth(1).unwrap().split(',').count(), 3);

    let manifest = read_json(&dir.path().join("m_src.vec.manifest.json"));
    assert_eq!(manifest["command"], "map");
    assert_eq!(manifest["parameters"]["zero_rows_src"], 0);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        outputs,
        ["m_src.vec", "m_src.vec.meta", "m_tgt.vec", "m_tgt.vec.meta", "topk.tsv"]
    );
}

#[test]
fn map_rejects_an_anchor_file_from_other_tables() {
    let dir = tempfile::tempdir().unwrap();
    let rows = identity_fixture(dir.path());
    assert_success(&run_in(
        dir.path(),
        &[
            "anchors",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--lexicon", "lexicon.tsv",
            "--out", "anchors.tsv",
        ],
    ));

    // Same tokens, shuffled order: every stored index is now stale.
    let mut shuffled: Vec<(&str, &[f32])> =
        rows.iter().map(|(t, v)| (*t, v.as_slice())).collect();
    shuffled.swap(0, 3);
    write_vec(&dir.path().join("src2.vec"), 4, &shuffled);

    let out = run_in(
        dir.path(),
        &[
            "map",
            "--src-vec", "src2.vec",
            "--tgt-vec", "tgt.vec",
            "--anchors", "anchors.tsv",
            "--out-src", "m_src.vec",
            "--out-tgt", "m_tgt.vec",
        ],
    );
    assert_failure(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("anchor"));
    // A failed run leaves nothing behind.
    for name in ["m_src.vec", "m_tgt.vec", "m_src.vec.meta", "m_src.vec.manifest.json"] {
        assert!(!dir.path().join(name).exists(), "{name} should not exist");
    }
}

#[test]
fn ls_recovers_a_plane_rotation() {
    let dir = tempfile::tempdir().unwrap();
    // Target is the source rotated by 90 degrees: (x, y) -> (-y, x).
    write_vec(
        &dir.path().join("src.vec"),
        2,
        &[
            ("a", &[1.0, 0.0]),
            ("b", &[0.0, 1.0]),
            ("c", &[0.7, 0.7]),
            ("d", &[-1.0, 0.5]),
        ],
    );
    write_vec(
        &dir.path().join("tgt.vec"),
        2,
        &[
            ("a", &[0.0, 1.0]),
            ("b", &[-1.0, 0.0]),
            ("c", &[-0.7, 0.7]),
            ("d", &[-0.5, -1.0]),
        ],
    );
    fs::write(dir.path().join("lexicon.tsv"), "a\ta\nb\tb\nc\tc\nd\td\n").unwrap();
    assert_success(&run_in(
        dir.path(),
        &[
            "anchors",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--lexicon", "lexicon.tsv",
            "--out", "anchors.tsv",
        ],
    ));

    let out = run_in(
        dir.path(),
        &[
            "ls",
            "--src-vec", "src.vec",
            "--tgt-vec", "tgt.vec",
            "--anchors", "anchors.tsv",
            "--out", "proj.vec",
        ],
    );
    assert_success(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("rank 2"));

    let meta = read(&dir.path().join("proj.vec.meta"));
    assert!(meta.contains("method=least-squares"));
    assert!(meta.contains("rank=2"));
    let residual: f64 = meta
        .lines()
        .find_map(|l| l.strip_prefix("residual="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-5, "residual {residual}");

    // The projected target lands back on the source rows.
    let expected: [&[f32]; 4] = [&[1.0, 0.0], &[0.0, 1.0], &[0.7, 0.7], &[-1.0, 0.5]];
    let proj = read(&dir.path().join("proj.vec"));
    for (line, want) in proj.lines().skip(1).zip(expected) {
        let got: Vec<f32> = line
            .split_whitespace()
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-4, "row {line:?} vs {want:?}");
        }
    }
}

/// Writes a four-cluster table and a linearly separable dataset over it.
fn classifier_fixture(dir: &Path) {
    write_vec(
        &dir.join("table.vec"),
        4,
        &[
            ("p0", &[1.0, 0.0, 0.0, 0.0]),
            ("p1", &[0.9, 0.1, 0.0, 0.0]),
            ("n0", &[-1.0, 0.0, 0.0, 0.0]),
            ("n1", &[-0.9, 0.1, 0.0, 0.0]),
        ],
    );
    fs::copy(dir.join("table.vec"), dir.join("table2.vec")).unwrap();
    fs::write(
        dir.join("train.tsv"),
        "1\tp0 p1\n0\tn0 n1\n1\tp0 p0 p1\n0\tn1 n0\n1\tp1\n0\tn0\n1\tp0 p1 p1\n0\tn0 n1 n1\n",
    )
    .unwrap();
}

#[test]
fn train_then_stitch_eval_transfers_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    classifier_fixture(dir.path());

    let out = run_in(
        dir.path(),
        &[
            "train",
            "--table", "table.vec",
            "--dataset", "train.tsv",
            "--classes", "2",
            "--epochs", "300",
            "--batch-size", "4",
            "--out", "model.json",
        ],
    );
    assert_success(&out);

    let model = read_json(&dir.path().join("model.json"));
    assert_eq!(model["format"], "crosstitch-model");
    assert_eq!(model["head"]["n_classes"], 2);
    assert_eq!(model["head"]["dim"], 4);
    let manifest = read_json(&dir.path().join("model.json.manifest.json"));
    assert!(manifest["parameters"]["final_loss"].as_f64().unwrap() < 0.2);

    // Rebinding to a byte-identical table must preserve every call.
    let out = run_in(
        dir.path(),
        &[
            "stitch-eval",
            "--model", "model.json",
            "--table", "table2.vec",
            "--dataset", "train.tsv",
            "--classes", "2",
            "--out", "eval",
        ],
    );
    assert_success(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("macro_f1 1.000000"));

    let report = read_json(&dir.path().join("eval.json"));
    assert_eq!(report["macro_f1"], 1.0);
    assert_eq!(report["n_examples"], 8);
    assert_eq!(report["confusion"][0][0], 4);
    assert_eq!(report["confusion"][1][1], 4);
    assert_eq!(report["confusion"][0][1], 0);
    let tsv = read(&dir.path().join("eval.tsv"));
    assert!(tsv.contains("macro_f1"));
}

#[test]
fn stitch_eval_reads_class_names_from_the_model() {
    let dir = tempfile::tempdir().unwrap();
    classifier_fixture(dir.path());
    fs::write(dir.path().join("labels.txt"), "neg\npos\n").unwrap();
    fs::write(
        dir.path().join("named.tsv"),
        "pos\tp0 p1\nneg\tn0 n1\npos\tp0\nneg\tn1\n",
    )
    .unwrap();

    assert_success(&run_in(
        dir.path(),
        &[
            "train",
            "--table", "table.vec",
            "--dataset", "named.tsv",
            "--label-map", "labels.txt",
            "--epochs", "300",
            "--batch-size", "2",
            "--out", "model.json",
        ],
    ));
    let model = read_json(&dir.path().join("model.json"));
    assert_eq!(model["head"]["label_map"][0], "neg");
    assert_eq!(model["head"]["label_map"][1], "pos");

    // No label flags here: the names stored in the model resolve them.
    let out = run_in(
        dir.path(),
        &[
            "stitch-eval",
            "--model", "model.json",
            "--table", "table2.vec",
            "--dataset", "named.tsv",
            "--out", "eval",
        ],
    );
    assert_success(&out);
    let report = read_json(&dir.path().join("eval.json"));
    assert_eq!(report["macro_f1"], 1.0);
    assert_eq!(report["labels"][0], "neg");
    assert_eq!(report["labels"][1], "pos");
}

#[test]
fn star_ratings_collapse_to_three_classes() {
    let dir = tempfile::tempdir().unwrap();
    write_vec(
        &dir.path().join("table.vec"),
        4,
        &[
            ("p0", &[1.0, 0.0, 0.0, 0.0]),
            ("p1", &[0.9, 0.05, 0.0, 0.0]),
            ("n0", &[-1.0, 0.0, 0.0, 0.0]),
            ("n1", &[-0.9, 0.05, 0.0, 0.0]),
            ("z0", &[0.0, 1.0, 0.0, 0.0]),
            ("z1", &[0.05, 0.9, 0.0, 0.0]),
        ],
    );
    fs::write(
        dir.path().join("stars.tsv"),
        "4\tp0 p1\n5\tp0 p0\n5\tp1\n1\tn0 n1\n2\tn0\n1\tn1\n3\tz0 z1\n3\tz0\n3\tz1 z1\n",
    )
    .unwrap();

    assert_success(&run_in(
        dir.path(),
        &[
            "train",
            "--table", "table.vec",
            "--dataset", "stars.tsv",
            "--star-labels",
            "--epochs", "400",
            "--batch-size", "3",
            "--out", "model.json",
        ],
    ));
    let model = read_json(&dir.path().join("model.json"));
    assert_eq!(model["head"]["n_classes"], 3);
    assert_eq!(model["head"]["label_map"][0], "negative");
    assert_eq!(model["head"]["label_map"][2], "positive");

    let out = run_in(
        dir.path(),
        &[
            "stitch-eval",
            "--model", "model.json",
            "--table", "table.vec",
            "--dataset", "stars.tsv",
            "--star-labels",
            "--out", "eval",
        ],
    );
    assert_success(&out);
    let report = read_json(&dir.path().join("eval.json"));
    assert_eq!(report["macro_f1"], 1.0);
    assert_eq!(report["labels"][1], "neutral");
}

#[test]
fn failing_run_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    classifier_fixture(dir.path());
    // Label 7 cannot fit a 2-class head: the run must die cleanly.
    fs::write(dir.path().join("bad.tsv"), "1\tp0 p1\n7\tn0 n1\n").unwrap();
    let before = fs::read_dir(dir.path()).unwrap().count();

    let out = run_in(
        dir.path(),
        &[
            "train",
            "--table", "table.vec",
            "--dataset", "bad.tsv",
            "--classes", "2",
            "--out", "model.json",
        ],
    );
    assert_failure(&out);
    assert!(!dir.path().join("model.json").exists());
    assert!(!dir.path().join("model.json.manifest.json").exists());
    // No stray staging files either.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), before);
}

#[test]
fn synth_reports_are_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "synth",
            "--vocab", "60",
            "--dim", "8",
            "--anchors", "30",
            "--classes", "3",
            "--examples", "45",
            "--sigma", "0.2",
            "--top-k", "8",
            "--seed", "11",
            "--out", out,
        ]
    };
    let out = run_in(dir.path(), &args("run1"));
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with(
        "method\tscheme\tk\ttau\tsigma\tanchors\tsource_f1\tzero_shot_f1\tseed"
    ));

    let tsv = read(&dir.path().join("run1.tsv"));
    assert_eq!(tsv.lines().count(), 5); // header + ls + three schemes
    assert!(tsv.contains("least-squares"));
    for scheme in ["standard", "softmax", "sparsemax"] {
        assert!(tsv.contains(scheme), "missing {scheme} row");
    }
    let reports = read_json(&dir.path().join("run1.json"));
    assert_eq!(reports.as_array().unwrap().len(), 4);

    assert_success(&run_in(dir.path(), &args("run2")));
    assert_eq!(tsv, read(&dir.path().join("run2.tsv")));
}
