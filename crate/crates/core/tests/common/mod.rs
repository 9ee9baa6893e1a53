#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crosschv::evaluation::GroundTruth;
use crosschv::expansion::Query;
use crosschv::linalg::{dot, Matrix};
use crosschv::{BilingualSpace, EmbeddingSpace};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    unit(&gaussian(rng, d))
}

/// Random orthogonal matrix: Gram-Schmidt on the rows of a Gaussian matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v = gaussian(rng, d);
        for _ in 0..2 {
            for r in &rows {
                let p = dot(&v, r);
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            rows.push(v.iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_rows(&rows)
}

/// Unit vector whose cosine with the unit vector `q` is exactly `c`.
pub fn at_cosine(rng: &mut ChaCha8Rng, q: &[f64], c: f64) -> Vec<f64> {
    let mut u = gaussian(rng, q.len());
    let p = dot(&u, q);
    u.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
    let u = unit(&u);
    let s = (1.0 - c * c).sqrt();
    q.iter().zip(&u).map(|(a, b)| c * a + s * b).collect()
}

pub fn space(lang: &str, prefix: &str, rows: &[Vec<f64>]) -> EmbeddingSpace {
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("{prefix}{i}"), v.clone()))
        .collect();
    EmbeddingSpace::from_rows(lang, rows).unwrap()
}

/// Source words `s{i}` map to target words `t{i}` by `y = x·R`.
pub struct Planted {
    pub rotation: Matrix,
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
}

pub fn planted(rng: &mut ChaCha8Rng, n: usize, d: usize, noise: f64) -> Planted {
    let rotation = random_rotation(rng, d);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| random_unit(rng, d)).collect();
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut y = rotation.left_mul_vec(x);
            if noise > 0.0 {
                for v in y.iter_mut() {
                    *v += noise * Distribution::<f64>::sample(&StandardNormal, rng);
                }
            }
            unit(&y)
        })
        .collect();
    Planted {
        rotation,
        source: space("src", "s", &xs).normalize().unwrap(),
        target: space("tgt", "t", &ys).normalize().unwrap(),
    }
}

/// Queries whose cross-language similarities are shifted down in half the
/// population. Each query has 3 relevant translations, 12 distractors and 10
/// own-language neighbours.
pub struct Biased {
    pub space: BilingualSpace,
    pub queries: Vec<Query>,
    pub truth: GroundTruth,
    pub biased: Vec<bool>,
}

pub fn biased_region(rng: &mut ChaCha8Rng, n_queries: usize, d: usize) -> Biased {
    let mut rows = Vec::new();
    let mut queries = Vec::new();
    let mut truth = GroundTruth::new();
    let mut biased = Vec::new();
    for i in 0..n_queries {
        let q = random_unit(rng, d);
        let shift = if i % 2 == 1 { 0.15 } else { 0.0 };
        let key = format!("zh:q{i}");
        rows.push(("zh".to_string(), format!("q{i}"), q.clone()));
        for j in 0..10 {
            let c = rng.random_range(0.55..0.75);
            rows.push(("zh".to_string(), format!("q{i}n{j}"), at_cosine(rng, &q, c)));
        }
        for j in 0..3 {
            let c = rng.random_range(0.62..0.82) - shift;
            let w = format!("q{i}r{j}");
            rows.push(("en".to_string(), w.clone(), at_cosine(rng, &q, c)));
            truth.insert(&key, &w, true).unwrap();
        }
        for j in 0..12 {
            let c = rng.random_range(0.40..0.64) - shift;
            let w = format!("q{i}x{j}");
            rows.push(("en".to_string(), w.clone(), at_cosine(rng, &q, c)));
            truth.insert(&key, &w, false).unwrap();
        }
        queries.push(Query::new(&format!("q{i}"), "zh", "en"));
        biased.push(shift > 0.0);
    }
    Biased {
        space: BilingualSpace::from_tagged_rows("zh", "en", rows).unwrap(),
        queries,
        truth,
        biased,
    }
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn crosschv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosschv"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn crosschv_ok(args: &[&str]) -> Output {
    let out = crosschv(args);
    assert!(
        out.status.success(),
        "crosschv {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Files written by [`pipeline`], relative to its output directory.
pub const PIPELINE_OUTPUTS: &[&str] = &[
    "en.vec",
    "zh.vec",
    "align.mat",
    "bi.vec",
    "knn.tsv",
    "threshold.tsv",
    "policy.tsv",
    "dynamic.tsv",
    "report.txt",
    "table.txt",
];

/// train → align → expand → calibrate → eval on the shipped fixtures.
pub fn pipeline(out: &Path) {
    let f = fixtures();
    let p = |name: &str| out.join(name).to_string_lossy().into_owned();
    let fx = |name: &str| f.join(name).to_string_lossy().into_owned();
    let common = ["--dim", "24", "--epochs", "15", "--seed", "7", "--workers", "1"];

    let en_corpus = fx("corpus_en.txt");
    let en_stop = fx("stopwords_en.txt");
    let en_out = p("en.vec");
    let mut en = vec!["train", "--corpus", &en_corpus, "--lang", "en", "--stopwords", &en_stop];
    en.extend(["--learn-phrases", "--phrase-threshold", "50", "--out", &en_out]);
    en.extend(common);
    crosschv_ok(&en);

    let zh_corpus = fx("corpus_zh.txt");
    let zh_stop = fx("stopwords_zh.txt");
    let zh_out = p("zh.vec");
    let mut zh = vec!["train", "--corpus", &zh_corpus, "--lang", "zh", "--mode", "pretokenized", "--stopwords", &zh_stop, "--out", &zh_out];
    zh.extend(common);
    crosschv_ok(&zh);

    let (mat, bi) = (p("align.mat"), p("bi.vec"));
    crosschv_ok(&["align", "--source", &zh_out, "--target", &en_out, "--anchors", &fx("anchors.tsv"), "--out-matrix", &mat, "--out-space", &bi]);

    let queries = fx("queries.txt");
    let truth = fx("truth.tsv");
    let (knn, thr, pol, dynamic) = (p("knn.tsv"), p("threshold.tsv"), p("policy.tsv"), p("dynamic.tsv"));
    crosschv_ok(&["expand", "--space", &bi, "--queries", &queries, "--mode", "knn", "--k", "5", "--out", &knn]);
    crosschv_ok(&["expand", "--space", &bi, "--queries", &queries, "--mode", "threshold", "--delta", "0.6", "--out", &thr]);
    crosschv_ok(&["calibrate", "--space", &bi, "--queries", &queries, "--truth", &truth, "--groups", "2", "--out", &pol]);
    crosschv_ok(&["expand", "--space", &bi, "--queries", &queries, "--mode", "dynamic", "--policy", &pol, "--out", &dynamic]);

    let knn_run = format!("k-NN={knn}");
    let thr_run = format!("Single Threshold={thr}");
    let dyn_run = format!("Dynamic Threshold={dynamic}");
    crosschv_ok(&["eval", "--run", &knn_run, "--truth", &truth, "--queries", &queries, "--out", &p("report.txt")]);
    crosschv_ok(&["eval", "--run", &knn_run, "--run", &thr_run, "--run", &dyn_run, "--truth", &truth, "--queries", &queries, "--mode", "table", "--out", &p("table.txt")]);
}
