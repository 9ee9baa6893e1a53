mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use crosschv::alignment::{solve_procrustes, AnchorSet, BilingualSpace};
use crosschv::evaluation::{random_baseline_rr, set_metrics, wilcoxon_signed_rank, GroundTruth};
use crosschv::expansion::{
    calibrate_dynamic_threshold, modularity, nearest_neighbors, CalibrationConfig,
    DynamicThresholdPolicy, LanguageFilter, Query,
};
use crosschv::linalg::dot;
use crosschv::space::{read_space, TextFormat};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bilingual(rng: &mut ChaCha8Rng, n: usize, d: usize) -> BilingualSpace {
    let mut rows = Vec::new();
    for lang in ["zh", "en"] {
        for i in 0..n {
            rows.push((lang.to_string(), format!("w{i}"), random_unit(rng, d)));
        }
    }
    BilingualSpace::from_tagged_rows("zh", "en", rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cosine_is_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| gaussian(&mut rng, d)).collect();
        let sp = space("en", "w", &rows).normalize().unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let (a, b) = (format!("w{i}"), format!("w{j}"));
                let c = sp.cosine(&a, &b).unwrap();
                prop_assert_eq!(c, sp.cosine(&b, &a).unwrap());
                prop_assert!(c.abs() <= 1.0 + 1e-6);
                // scalar-loop oracle on the raw rows
                let (x, y) = (&rows[i], &rows[j]);
                let mut xy = 0.0;
                let mut xx = 0.0;
                let mut yy = 0.0;
                for k in 0..d {
                    xy += x[k] * y[k];
                    xx += x[k] * x[k];
                    yy += y[k] * y[k];
                }
                prop_assert!((c - xy / (xx.sqrt() * yy.sqrt())).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn procrustes_is_orthogonal_and_order_invariant(seed in any::<u64>(), d in 2usize..24, extra in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=d) + extra;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, d)).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, d)).collect();
        let src = space("src", "s", &xs).normalize().unwrap();
        let tgt = space("tgt", "t", &ys).normalize().unwrap();
        let mut pairs: Vec<(String, String)> = (0..n).map(|i| (format!("s{i}"), format!("t{i}"))).collect();
        let l = solve_procrustes(&AnchorSet::new(pairs.clone(), "a"), &src, &tgt).unwrap();
        prop_assert!(l.orthogonality_defect() <= 1e-6 * d as f64);
        if n >= d {
            pairs.shuffle(&mut rng);
            let l2 = solve_procrustes(&AnchorSet::new(pairs, "b"), &src, &tgt).unwrap();
            prop_assert!(l.matrix.sub(&l2.matrix).frobenius_norm() <= 1e-10);
        }
    }

    #[test]
    fn text_round_trip_is_bit_identical(seed in any::<u64>(), n in 1usize..30, d in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
        let sp = space("en", "w", &rows);
        let mut buf = Vec::new();
        sp.write_text(&mut buf).unwrap();
        let back = read_space(buf.as_slice(), TextFormat::Word2Vec, "en").unwrap();
        prop_assert_eq!(back.words(), sp.words());
        let same = back.vectors().as_slice().iter().zip(sp.vectors().as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn wilcoxon_is_symmetric(seed in any::<u64>(), n in 6usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ab = wilcoxon_signed_rank(&a, &b).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn policy_routing_is_monotone(bounds in prop::collection::btree_set(0u32..1000, 1..6), m1 in 0.0f64..1.2, m2 in 0.0f64..1.2) {
        let b: Vec<f64> = bounds.iter().map(|x| *x as f64 / 1000.0).collect();
        let policy = DynamicThresholdPolicy {
            group_thresholds: vec![0.6; b.len()],
            group_boundaries: b,
            k: 10,
        };
        let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        prop_assert!(policy.group_of(lo) <= policy.group_of(hi));
        prop_assert!(policy.group_of(hi) < policy.n_groups());
    }
}

#[test]
fn nearest_neighbors_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (n, d) in [(50, 4), (400, 16), (5000, 8)] {
        let bi = random_bilingual(&mut rng, n, d);
        for _ in 0..20 {
            let row = rng.random_range(0..bi.len());
            let lang = bi.language_of(row).to_string();
            let other = bi.other_language(&lang).unwrap().to_string();
            let q = Query::new(bi.word(row), &lang, &other);
            for (filter, k) in [(LanguageFilter::Any, 7), (LanguageFilter::Only(&other), 25), (LanguageFilter::Only(&lang), 3)] {
                let got = nearest_neighbors(&bi, &q, k, filter).unwrap();
                let mut all: Vec<(f64, &str, &str)> = (0..bi.len())
                    .filter(|&r| r != row)
                    .filter(|&r| match filter {
                        LanguageFilter::Any => true,
                        LanguageFilter::Only(l) => bi.language_of(r) == l,
                    })
                    .map(|r| (dot(bi.row(row), bi.row(r)), bi.word(r), bi.language_of(r)))
                    .collect();
                all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(b.2)));
                let want: Vec<(f64, &str, &str)> = all.into_iter().take(k).collect();
                let got: Vec<(f64, &str, &str)> = got.iter().map(|c| (c.similarity, c.word.as_str(), c.language.as_str())).collect();
                assert_eq!(got, want);
            }
        }
    }
}

#[test]
fn set_metrics_match_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let mut truth = GroundTruth::new();
        let mut runs = BTreeMap::new();
        let mut labels = Vec::new();
        for q in 0..rng.random_range(1..8) {
            let key = format!("zh:q{q}");
            let pool = rng.random_range(1..20);
            for c in 0..pool {
                let rel = rng.random_bool(0.3);
                truth.insert(&key, &format!("c{c}"), rel).unwrap();
                labels.push((key.clone(), format!("c{c}"), rel));
            }
            // some candidates are unlabeled
            let list: Vec<String> = (0..rng.random_range(0..25)).map(|_| format!("c{}", rng.random_range(0..25))).collect();
            runs.insert(key, list);
        }
        let m = set_metrics(&runs, &truth).unwrap();

        let mut retrieved = 0;
        let mut hit = 0;
        for (q, list) in &runs {
            let uniq: BTreeSet<&String> = list.iter().collect();
            retrieved += uniq.len();
            hit += uniq
                .iter()
                .filter(|c| labels.iter().any(|(lq, lc, rel)| lq == q && lc == **c && *rel))
                .count();
        }
        let relevant = labels.iter().filter(|l| l.2).count();
        assert_eq!(m.counts.retrieved, retrieved);
        assert_eq!(m.counts.relevant_retrieved, hit);
        assert_eq!(m.counts.relevant_total, relevant);
        let p = if retrieved > 0 { hit as f64 / retrieved as f64 } else { 0.0 };
        assert_eq!(m.precision, p);
        assert_eq!(m.correct_ratio, p);
    }
}

#[test]
fn precision_never_drops_when_only_negatives_are_removed() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let mut truth = GroundTruth::new();
        let mut list = Vec::new();
        for c in 0..30 {
            let w = format!("c{c}");
            truth.insert("zh:q", &w, rng.random_bool(0.4)).unwrap();
            list.push(w);
        }
        let before = set_metrics(&BTreeMap::from([("zh:q".to_string(), list.clone())]), &truth).unwrap();
        let cut = rng.random_range(0..list.len());
        let mut shrunk = list[..cut].to_vec();
        shrunk.extend(list[cut..].iter().filter(|c| truth.is_relevant("zh:q", c) == Some(true)).cloned());
        let after = set_metrics(&BTreeMap::from([("zh:q".to_string(), shrunk)]), &truth).unwrap();
        assert!(after.precision >= before.precision);
        assert_eq!(after.recall, before.recall);
    }
}

#[test]
fn random_baseline_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for (pool, relevant) in [(10, 1), (20, 3), (7, 7), (50, 5)] {
        let mut items: Vec<bool> = (0..pool).map(|i| i < relevant).collect();
        let trials = 100_000;
        let mut total = 0.0;
        for _ in 0..trials {
            items.shuffle(&mut rng);
            let first = items.iter().position(|x| *x).unwrap() + 1;
            total += 1.0 / first as f64;
        }
        let mc = total / trials as f64;
        let exact = random_baseline_rr(pool, relevant);
        assert!((mc - exact).abs() < 0.005, "pool {pool} relevant {relevant}: {mc} vs {exact}");
    }
    assert_eq!(random_baseline_rr(10, 0), 0.0);
}

#[test]
fn low_modularity_group_gets_higher_threshold() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
        let fx = biased_region(&mut rng, 40, 128);
        // the shifted half is the high-modularity half
        let ms: Vec<f64> = fx.queries.iter().map(|q| modularity(&fx.space, q, 10).unwrap().m).collect();
        let mean = |b: bool| {
            let v: Vec<f64> = ms.iter().zip(&fx.biased).filter(|(_, x)| **x == b).map(|(m, _)| *m).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > mean(false));
        let config = CalibrationConfig {
            n_groups: 2,
            ..CalibrationConfig::default()
        };
        let policy = calibrate_dynamic_threshold(&fx.space, &fx.queries, &fx.truth, &config).unwrap();
        assert!(policy.group_thresholds[0] > policy.group_thresholds[1], "{policy:?}");
    }
}
