use std::collections::BTreeMap;

use proptest::prelude::*;
use vsloc::cost::{cost_model, CostParams};
use vsloc::triplet::{
    knn_negatives, mean_class_embeddings, predict_labels, sample_negatives, triplet_loss, EmbeddingMap, NegativeMining,
    PrototypeBank, TripletConfig,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

fn gaussianish(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len).prop_filter("non-zero rows", |v| v.iter().any(|x| x.abs() > 1e-3))
}

/// Label map and raw embeddings / prototypes with no zero rows.
fn instance() -> impl Strategy<Value = (usize, usize, usize, usize, Vec<u32>, Vec<f64>, Vec<f64>)> {
    (1usize..6, 1usize..6, 2usize..6, 3usize..9)
        .prop_flat_map(|(h, w, dim, count)| {
            (
                Just(h),
                Just(w),
                Just(dim),
                Just(count),
                prop::collection::vec(0u32..=count as u32, h * w),
                gaussianish(h * w * dim),
                gaussianish(count * dim),
            )
        })
        .prop_filter("no zero vectors", |(_, _, dim, _, _, e, p)| {
            e.chunks(*dim).chain(p.chunks(*dim)).all(|c| dot(c, c) > 1e-12)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_a_full_argsort((h, w, dim, count, seg, e, p) in instance(), k_frac in 0.0f64..1.0) {
        let emb = EmbeddingMap::new(h, w, dim, e).unwrap();
        let bank = PrototypeBank::new(count, dim, p).unwrap();
        let k = 1 + ((count - 2) as f64 * k_frac) as usize;
        let means = mean_class_embeddings(&emb, &seg).unwrap();
        let got = knn_negatives(&means, &bank, k).unwrap();
        for (&label, mean) in &means {
            let mut all: Vec<(f64, u32)> = (0..count)
                .map(|r| (dot(&unit(mean), &unit(bank.row(r))), r as u32 + 1))
                .filter(|&(_, l)| l != label)
                .collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<u32> = all.iter().take(k).map(|x| x.1).collect();
            prop_assert_eq!(&got[&label], &expect);
            prop_assert!(!got[&label].contains(&label));
        }
    }

    #[test]
    fn class_means_match_brute_force((h, w, dim, _count, seg, e, _p) in instance()) {
        let emb = EmbeddingMap::new(h, w, dim, e.clone()).unwrap();
        let means = mean_class_embeddings(&emb, &seg).unwrap();
        let mut expect: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (i, &l) in seg.iter().enumerate() {
            if l == 0 { continue; }
            let px = unit(&e[i * dim..(i + 1) * dim]);
            let acc = expect.entry(l).or_insert_with(|| vec![0.0; dim]);
            for d in 0..dim { acc[d] += px[d]; }
        }
        prop_assert_eq!(means.len(), expect.len());
        for (l, v) in expect {
            let v = if dot(&v, &v) > 0.0 { unit(&v) } else { v };
            for (a, b) in means[&l].iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prediction_matches_brute_force((h, w, dim, count, _seg, e, p) in instance()) {
        let emb = EmbeddingMap::new(h, w, dim, e.clone()).unwrap();
        let bank = PrototypeBank::new(count, dim, p.clone()).unwrap();
        let pred = predict_labels(&emb, &bank);
        for (i, &got) in pred.iter().enumerate() {
            let px = unit(&e[i * dim..(i + 1) * dim]);
            let scores: Vec<f64> = (0..count).map(|r| dot(&px, &unit(&p[r * dim..(r + 1) * dim]))).collect();
            let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let chosen = scores[got as usize - 1];
            prop_assert!(best - chosen < 1e-12);
            // No strictly lower label within rounding of the best score.
            prop_assert!(scores[..got as usize - 1].iter().all(|&s| s < best - 1e-12 || (s - chosen).abs() < 1e-12));
        }
    }

    #[test]
    fn prediction_is_scale_invariant((h, w, dim, count, _seg, e, p) in instance(), c in 1e-3f64..1e3) {
        let emb = EmbeddingMap::new(h, w, dim, e.clone()).unwrap();
        let scaled = EmbeddingMap::new(h, w, dim, e.iter().map(|x| x * c).collect()).unwrap();
        let bank = PrototypeBank::new(count, dim, p).unwrap();
        prop_assert_eq!(predict_labels(&emb, &bank), predict_labels(&scaled, &bank));
    }

    #[test]
    fn hinge_loss_is_non_negative_and_zero_means_satisfied(
        (h, w, dim, count, seg, e, p) in instance(),
        margin in 0.0f64..0.8,
        seed in any::<u64>(),
        knn in any::<bool>(),
    ) {
        let emb = EmbeddingMap::new(h, w, dim, e.clone()).unwrap();
        let bank = PrototypeBank::new(count, dim, p.clone()).unwrap();
        let cfg = TripletConfig {
            margin,
            knn_k: 1,
            seed,
            mining: if knn { NegativeMining::Knn } else { NegativeMining::Uniform },
            ..Default::default()
        };
        let out = triplet_loss(&emb, &seg, &bank, &cfg).unwrap();
        prop_assert!(out.loss >= 0.0);
        if out.loss == 0.0 {
            for (i, &l) in seg.iter().enumerate() {
                if l == 0 { continue; }
                let px = unit(&e[i * dim..(i + 1) * dim]);
                let row = |lab: u32| unit(&p[(lab as usize - 1) * dim..lab as usize * dim]);
                prop_assert!(dot(&px, &row(l)) >= dot(&px, &row(out.negatives[i])) + margin - 1e-12);
            }
        }
        for (&l, &n) in seg.iter().zip(&out.negatives) {
            prop_assert!(l == 0 || n != l);
        }
    }

    #[test]
    fn sampled_negatives_come_from_the_knn_set((h, w, dim, count, seg, e, p) in instance(), seed in any::<u64>()) {
        let emb = EmbeddingMap::new(h, w, dim, e).unwrap();
        let bank = PrototypeBank::new(count, dim, p).unwrap();
        let cfg = TripletConfig { knn_k: 2.min(count - 1), seed, ..Default::default() };
        let negs = sample_negatives(&emb, &seg, &bank, &cfg).unwrap();
        let knn = knn_negatives(&mean_class_embeddings(&emb, &seg).unwrap(), &bank, cfg.knn_k).unwrap();
        for (&l, &n) in seg.iter().zip(&negs) {
            if l == 0 {
                prop_assert_eq!(n, 0);
            } else {
                prop_assert!(knn[&l].contains(&n));
            }
        }
        prop_assert_eq!(negs, sample_negatives(&emb, &seg, &bank, &cfg).unwrap());
    }

    #[test]
    fn cost_scaling(h in 1u64..1000, w in 1u64..1000, c in 2u64..10_000, d in 1u64..64, a in 1u64..500) {
        let base = CostParams { height: h, width: w, classes: c, dim: d, active: a.min(c) };
        let doubled = CostParams { classes: 2 * c, ..base };
        let (ce1, t1) = cost_model(&base);
        let (ce2, t2) = cost_model(&doubled);
        prop_assert_eq!(ce2.flops, 2 * ce1.flops);
        prop_assert_eq!(t1.stage("triplet").unwrap().flops, t2.stage("triplet").unwrap().flops);
        prop_assert_eq!(t2.stage("kNN").unwrap().flops, 2 * t1.stage("kNN").unwrap().flops);
        let more_active = CostParams { active: 2 * base.active, classes: 2 * c, ..base };
        let (_, t3) = cost_model(&more_active);
        prop_assert_eq!(t3.stage("kNN").unwrap().flops, 2 * t2.stage("kNN").unwrap().flops);
    }
}
