//! Property tests for the numerical kernels: invariances that must hold
//! for *any* input, checked against independently coded oracles where
//! one exists.

use proptest::prelude::*;

use crosstitch_core::classifier::scores_from_confusion;
use crosstitch_core::embeddings::{
    cosine_similarity, load_vec_file, save_vec_file, EmbeddingTable, Vocabulary,
};
use crosstitch_core::relrep::{
    relative_representation, sparsemax, top_k, weights, RelRepRow, WeightKind, WeightingScheme,
};
use crosstitch_core::synth::{generate_pair, SynthScenario};

/// Simplex projection computed a different way: projected-gradient
/// iterations on the dual threshold `t`, step `1/d`. The residual
/// `sum(max(z - t, 0)) - 1` is piecewise linear and non-increasing in
/// `t` with slope at most -1, so the fixed-point iteration contracts by
/// at least `1 - 1/d` per step.
fn sparsemax_oracle(z: &[f64]) -> Vec<f64> {
    let d = z.len() as f64;
    let mut t = (z.iter().sum::<f64>() - 1.0) / d;
    for _ in 0..600 {
        let residual: f64 = z.iter().map(|&v| (v - t).max(0.0)).sum::<f64>() - 1.0;
        t += residual / d;
    }
    z.iter().map(|&v| (v - t).max(0.0)).collect()
}

fn table_from_rows(rows: &[Vec<f32>]) -> EmbeddingTable {
    let dim = rows[0].len();
    let vocab = Vocabulary::from_tokens((0..rows.len()).map(|i| format!("t{i}"))).unwrap();
    let matrix: Vec<f32> = rows.iter().flatten().copied().collect();
    EmbeddingTable::new(vocab, matrix, dim).unwrap()
}

fn sim_row() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2..=40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sparsemax_agrees_with_dual_projection(z in prop::collection::vec(-5.0..5.0f64, 2..=10)) {
        let fast = sparsemax(&z);
        let slow = sparsemax_oracle(&z);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-9, "{fast:?} vs {slow:?}");
        }
    }

    #[test]
    fn sparsemax_lands_on_the_simplex(z in prop::collection::vec(-5.0..5.0f64, 1..=12)) {
        let p = sparsemax(&z);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn sparsemax_shift_invariance(
        z in prop::collection::vec(-5.0..5.0f64, 2..=10),
        c in -10.0..10.0f64,
    ) {
        let base = sparsemax(&z);
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (a, b) in sparsemax(&shifted).iter().zip(&base) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn sparsemax_permutation_equivariance(z in prop::collection::vec(-5.0..5.0f64, 2..=8)) {
        let base = sparsemax(&z);
        let mut reversed: Vec<f64> = z.clone();
        reversed.reverse();
        let mut back = sparsemax(&reversed);
        back.reverse();
        for (a, b) in back.iter().zip(&base) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_for_every_scheme(sims in sim_row(), k_frac in 0.0..1.0f64) {
        let row = RelRepRow::new(sims.clone());
        let k = 1 + ((sims.len() - 1) as f64 * k_frac) as usize;
        let topk = top_k(&row, k).unwrap();
        for kind in WeightKind::ALL {
            let scheme = WeightingScheme::new(kind, k, 0.5).unwrap();
            let w = weights(&topk, &scheme);
            prop_assert_eq!(w.len(), k);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{} {:?}", kind, w);
            if kind == WeightKind::Softmax {
                prop_assert!(w.iter().all(|&v| v > 0.0));
            }
            if kind == WeightKind::Sparsemax {
                prop_assert!(w.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn top_k_matches_full_sort(sims in sim_row(), k_frac in 0.0..1.0f64) {
        let row = RelRepRow::new(sims.clone());
        let k = 1 + ((sims.len() - 1) as f64 * k_frac) as usize;
        let got = top_k(&row, k).unwrap();

        // Oracle: full stable sort by (sim desc, index asc).
        let mut order: Vec<usize> = (0..sims.len()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        let expect: Vec<(usize, f64)> = order[..k].iter().map(|&i| (i, sims[i])).collect();
        prop_assert_eq!(got.entries(), expect.as_slice());

        // Non-increasing similarities, distinct indices.
        prop_assert!(got.entries().windows(2).all(|w| w[0].1 >= w[1].1));
        let mut idx: Vec<usize> = got.entries().iter().map(|&(i, _)| i).collect();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), k);
    }

    #[test]
    fn cosine_symmetry_scale_and_range(
        u in prop::collection::vec(-10.0..10.0f32, 1..=16),
        scale in 0.1..100.0f32,
    ) {
        let v: Vec<f32> = u.iter().rev().copied().collect();
        let uv = cosine_similarity(&u, &v).unwrap();
        let vu = cosine_similarity(&v, &u).unwrap();
        prop_assert_eq!(uv, vu);
        prop_assert!((-1.0..=1.0).contains(&uv));

        let scaled: Vec<f32> = u.iter().map(|&x| x * scale).collect();
        let su = cosine_similarity(&scaled, &v).unwrap();
        prop_assert!((su - uv).abs() <= 1e-6);
    }

    #[test]
    fn vec_files_round_trip(
        rows in prop::collection::vec(prop::collection::vec(-100.0..100.0f32, 3), 1..=12),
    ) {
        let table = table_from_rows(&rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.vec");
        save_vec_file(&table, &path).unwrap();
        let (reloaded, _) = load_vec_file(&path, Some(table.dim())).unwrap();
        prop_assert_eq!(reloaded.len(), table.len());
        for i in 0..table.len() {
            for (a, b) in table.row(i).iter().zip(reloaded.row(i)) {
                prop_assert!((f64::from(*a) - f64::from(*b)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn macro_f1_ignores_class_order_of_examples(
        golds in prop::collection::vec(0usize..3, 9),
        preds in prop::collection::vec(0usize..3, 9),
    ) {
        // Build the confusion twice with examples in different orders;
        // the scores must not notice.
        let mut forward = vec![vec![0usize; 3]; 3];
        for (&g, &p) in golds.iter().zip(&preds) {
            forward[g][p] += 1;
        }
        let mut backward = vec![vec![0usize; 3]; 3];
        for (&g, &p) in golds.iter().zip(&preds).rev() {
            backward[g][p] += 1;
        }
        let (_, f_fwd) = scores_from_confusion(&forward);
        let (_, f_bwd) = scores_from_confusion(&backward);
        prop_assert_eq!(f_fwd, f_bwd);
    }

    #[test]
    fn anchor_rows_survive_rotation(seed in any::<u64>()) {
        // Zero-noise pair: the target is an exact rotation of the source,
        // so each token's anchor-cosine row must match across tables.
        let scenario = SynthScenario {
            vocab_size: 30,
            dim: 6,
            noise_sigma: 0.0,
            anchor_count: 12,
            n_classes: 2,
            examples: 4,
            seed,
        };
        let (source, target, anchors) = generate_pair(&scenario).unwrap();
        let src_idx = anchors.source_indices();
        let tgt_idx = anchors.target_indices();
        for token in [0usize, 7, 15, 29] {
            let rs = relative_representation(&source, src_idx, token).unwrap();
            let rt = relative_representation(&target, tgt_idx, token).unwrap();
            for (a, b) in rs.sims().iter().zip(rt.sims()) {
                prop_assert!((a - b).abs() <= 1e-5, "token {token}: {a} vs {b}");
            }
        }
    }
}

/// Non-proptest spot check: the oracle itself reproduces a hand case, so
/// a bug cannot hide in both implementations being wrong the same way.
#[test]
fn oracle_sanity() {
    let p = sparsemax_oracle(&[1.2, 0.8]);
    assert!((p[0] - 0.7).abs() < 1e-9);
    assert!((p[1] - 0.3).abs() < 1e-9);
    let p = sparsemax_oracle(&[3.0, 1.0, 0.2]);
    assert!((p[0] - 1.0).abs() < 1e-9);
    assert!(p[1].abs() < 1e-9);
}
