mod common;

use std::fs;
use std::path::Path;

use common::*;
use crosschv::alignment::{AlignmentMatrix, BilingualSpace};
use crosschv::space::{load_space, TextFormat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn train_small(corpus: &Path, lang: &str, out: &Path, extra: &[&str]) -> std::process::Output {
    let (c, o) = (s(corpus), s(out));
    let mut args = vec!["train", "--corpus", &c, "--lang", lang, "--out", &o, "--dim", "8", "--epochs", "1", "--seed", "3"];
    args.extend_from_slice(extra);
    crosschv(&args)
}

#[test]
fn train_writes_loadable_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en.vec");
    let r = train_small(&fixtures().join("corpus_en.txt"), "en", &out, &["--learn-phrases", "--phrase-threshold", "50"]);
    assert!(r.status.success(), "{}", stderr(&r));
    let space = load_space(&out, TextFormat::Word2Vec).unwrap();
    assert_eq!(space.language(), "en");
    assert_eq!(space.dim(), 8);
    assert!(space.is_normalized());
    assert!(space.contains("high_blood_pressure"));
}

#[test]
fn train_is_byte_stable_with_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.vec"), dir.path().join("b.vec"));
    for out in [&a, &b] {
        let r = train_small(&fixtures().join("corpus_zh.txt"), "zh", out, &["--mode", "pretokenized"]);
        assert!(r.status.success(), "{}", stderr(&r));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn train_missing_input_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let r = train_small(&missing, "en", &dir.path().join("x.vec"), &[]);
    assert!(!r.status.success());
    assert!(stderr(&r).contains(&s(&missing)), "{}", stderr(&r));
}

#[test]
fn train_rejects_bad_flags_before_reading() {
    let dir = tempfile::tempdir().unwrap();
    let r = train_small(&fixtures().join("corpus_en.txt"), "en", &dir.path().join("x.vec"), &["--window", "0"]);
    assert!(!r.status.success());
    assert!(!dir.path().join("x.vec").exists());
}

fn write_planted(dir: &Path, d: usize) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = planted(&mut rng, 300, d, 0.0);
    p.source.save(&dir.join("src.vec"), None).unwrap();
    p.target.save(&dir.join("tgt.vec"), None).unwrap();
    let anchors: String = (0..2 * d).map(|i| format!("s{i}\tt{i}\n")).collect();
    fs::write(dir.join("anchors.tsv"), anchors).unwrap();
    p
}

#[test]
fn align_recovers_planted_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let d = 16;
    let p = write_planted(dir.path(), d);
    let (mat, bi) = (dir.path().join("L.txt"), dir.path().join("bi.vec"));
    crosschv_ok(&[
        "align", "--source", &s(&dir.path().join("src.vec")), "--target", &s(&dir.path().join("tgt.vec")),
        "--anchors", &s(&dir.path().join("anchors.tsv")), "--out-matrix", &s(&mat), "--out-space", &s(&bi),
    ]);
    let l = AlignmentMatrix::load(&mat).unwrap();
    assert!(l.orthogonality_defect() <= 1e-6 * d as f64);
    assert!(l.matrix.sub(&p.rotation).frobenius_norm() < 1e-8);
    let space = BilingualSpace::load(&bi).unwrap();
    assert_eq!(space.len(), 600);
    assert_eq!(space.source_language(), "src");
}

#[test]
fn align_fails_on_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path(), 8);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let other = planted(&mut rng, 50, 12, 0.0);
    other.target.save(&dir.path().join("tgt12.vec"), None).unwrap();
    let r = crosschv(&[
        "align", "--source", &s(&dir.path().join("src.vec")), "--target", &s(&dir.path().join("tgt12.vec")),
        "--anchors", &s(&dir.path().join("anchors.tsv")), "--out-matrix", &s(&dir.path().join("L")),
        "--out-space", &s(&dir.path().join("bi")),
    ]);
    assert!(!r.status.success());
    assert!(stderr(&r).contains("dimension"), "{}", stderr(&r));
}

#[test]
fn align_fails_without_surviving_anchors() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path(), 8);
    fs::write(dir.path().join("bad.tsv"), "foo\tbar\nbaz\tt1\n").unwrap();
    let r = crosschv(&[
        "align", "--source", &s(&dir.path().join("src.vec")), "--target", &s(&dir.path().join("tgt.vec")),
        "--anchors", &s(&dir.path().join("bad.tsv")), "--out-matrix", &s(&dir.path().join("L")),
        "--out-space", &s(&dir.path().join("bi")),
    ]);
    assert!(!r.status.success());
    let msg = stderr(&r);
    assert!(msg.contains('2') && msg.contains("source"), "{msg}");
    assert!(!dir.path().join("L").exists());
}

/// Small bilingual space with a known neighborhood.
fn toy_space(dir: &Path) -> String {
    let rows = vec![
        ("zh", "高血壓", vec![1.0, 0.0, 0.0]),
        ("zh", "頭痛", vec![0.0, 1.0, 0.0]),
        ("en", "hypertension", vec![0.95, 0.1, 0.1]),
        ("en", "blood", vec![0.7, 0.5, 0.2]),
        ("en", "headache", vec![0.1, 0.95, 0.1]),
        ("en", "corn", vec![0.0, 0.1, 1.0]),
    ];
    let rows = rows
        .into_iter()
        .map(|(l, w, v)| (l.to_string(), w.to_string(), unit(&v)))
        .collect();
    let space = BilingualSpace::from_tagged_rows("zh", "en", rows).unwrap();
    let path = dir.join("bi.vec");
    space.save(&path).unwrap();
    s(&path)
}

#[test]
fn expand_threshold_respects_delta_and_rejects_oov() {
    let dir = tempfile::tempdir().unwrap();
    let space = toy_space(dir.path());
    let queries = dir.path().join("q.txt");
    fs::write(&queries, "zh:高血壓\nzh:頭痛\nzh:不存在\nfr:x\n").unwrap();
    let out = dir.path().join("out.tsv");
    crosschv_ok(&["expand", "--space", &space, "--queries", &s(&queries), "--mode", "threshold", "--delta", "0.6", "--out", &s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 5);
        assert_eq!(f[3], "en");
        assert!(f[4].parse::<f64>().unwrap() >= 0.6, "{line}");
    }
    assert!(text.starts_with("zh:高血壓\t1\thypertension\ten\t"));
    let rejects = fs::read_to_string(dir.path().join("out.tsv.rejects.tsv")).unwrap();
    assert!(rejects.contains("zh:不存在"));
    assert!(rejects.contains("fr:x"));
}

#[test]
fn expand_knn_returns_k_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let space = toy_space(dir.path());
    let queries = dir.path().join("q.txt");
    fs::write(&queries, "zh:頭痛\nen:corn\n").unwrap();
    let out = dir.path().join("out.tsv");
    crosschv_ok(&["expand", "--space", &space, "--queries", &s(&queries), "--mode", "knn", "--k", "2", "--out", &s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("zh:頭痛\t1\theadache\t"));
    assert!(lines[2].starts_with("en:corn\t1\t"));
    assert!(lines[2].contains("\tzh\t"));
}

#[test]
fn expand_dynamic_requires_policy() {
    let dir = tempfile::tempdir().unwrap();
    let space = toy_space(dir.path());
    let queries = dir.path().join("q.txt");
    fs::write(&queries, "zh:高血壓\n").unwrap();
    let out = dir.path().join("out.tsv");
    let r = crosschv(&["expand", "--space", &space, "--queries", &s(&queries), "--mode", "dynamic", "--out", &s(&out)]);
    assert!(!r.status.success());
    assert!(stderr(&r).contains("--policy"));
    assert!(!out.exists());
}

fn write_eval_fixture(dir: &Path) -> (String, String) {
    let mut truth = String::new();
    let mut run = String::new();
    for (q, first) in [("zh:a", 1), ("zh:b", 2), ("zh:c", 4)] {
        for r in 1..=5 {
            truth.push_str(&format!("{q}\t{q}{r}\t{}\n", u8::from(r == first)));
            run.push_str(&format!("{q}\t{r}\t{q}{r}\ten\t0.{}\n", 9 - r));
        }
    }
    let (t, e) = (dir.join("truth.tsv"), dir.join("run.tsv"));
    fs::write(&t, truth).unwrap();
    fs::write(&e, run).unwrap();
    (s(&t), s(&e))
}

#[test]
fn eval_reports_mrr() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, run) = write_eval_fixture(dir.path());
    let out = crosschv_ok(&["eval", "--run", &run, "--truth", &truth]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("mrr\t0.583333\n"), "{text}");
    assert!(text.contains("precision\t0.200000\n"), "{text}");
}

#[test]
fn eval_table_has_comparison_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, run) = write_eval_fixture(dir.path());
    let runs: Vec<String> = ["k-NN", "Single Threshold", "Dynamic Threshold"]
        .iter()
        .map(|n| format!("{n}={run}"))
        .collect();
    let mut args = vec!["eval", "--truth", &truth, "--mode", "table"];
    for r in &runs {
        args.extend(["--run", r]);
    }
    let text = String::from_utf8(crosschv_ok(&args).stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    for col in ["Query Method", "#Retrieved Items", "Correct Ratio", "F1"] {
        assert!(lines[0].contains(col), "{text}");
    }
    assert!(lines[1].starts_with("k-NN"));
    assert!(lines[2].starts_with("Single Threshold"));
    assert!(lines[3].starts_with("Dynamic Threshold"));
    assert!(lines[3].contains("15") && lines[3].contains("20.00%"));

    args.extend(["--format", "tsv"]);
    let tsv = String::from_utf8(crosschv_ok(&args).stdout).unwrap();
    assert!(tsv.starts_with("Query Method\t#Retrieved Items\tCorrect Ratio\tF1"));
}

#[test]
fn eval_fails_on_unlabeled_query() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, run) = write_eval_fixture(dir.path());
    let mut text = fs::read_to_string(&run).unwrap();
    text.push_str("zh:ghost\t1\tx\ten\t0.5\n");
    fs::write(&run, text).unwrap();
    let r = crosschv(&["eval", "--run", &run, "--truth", &truth]);
    assert!(!r.status.success());
    assert!(stderr(&r).contains("zh:ghost"), "{}", stderr(&r));
}

#[test]
fn eval_writes_rank_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, run) = write_eval_fixture(dir.path());
    let csv = dir.path().join("ranks.csv");
    crosschv_ok(&["eval", "--run", &format!("m={run}"), "--truth", &truth, "--ranks-csv", &s(&csv)]);
    assert_eq!(fs::read_to_string(&csv).unwrap(), "run,query,rank\nm,zh:a,1\nm,zh:b,2\nm,zh:c,4\n");
}

#[test]
fn modularity_and_calibrate_run_on_pipeline_space() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let bi = s(&dir.path().join("bi.vec"));
    let queries = s(&fixtures().join("queries.txt"));
    let out = crosschv_ok(&["modularity", "--space", &bi, "--queries", &queries, "--k", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.starts_with("query\tmodularity\teta_own\teta_other\n"));
    let policy = fs::read_to_string(dir.path().join("policy.tsv")).unwrap();
    assert!(policy.starts_with("k\t10\tn_groups\t2"), "{policy}");
    let table = fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn help_documents_flags_and_defaults() {
    let top = String::from_utf8(crosschv_ok(&["--help"]).stdout).unwrap();
    for sub in ["train", "phrases", "align", "expand", "modularity", "calibrate", "eval"] {
        assert!(top.contains(sub), "{sub} missing from --help");
    }
    let train = String::from_utf8(crosschv_ok(&["train", "--help"]).stdout).unwrap();
    for flag in ["--dim", "--window", "--negatives", "--min-count", "--epochs", "--lr", "--subsample", "--seed", "--workers"] {
        assert!(train.contains(flag), "{flag} missing");
    }
    assert!(train.contains("[default: 100]") && train.contains("[default: 0.025]"));
}

#[test]
fn phrases_subcommand_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let (model, merged) = (dir.path().join("phrases.tsv"), dir.path().join("merged.txt"));
    crosschv_ok(&[
        "phrases", "--corpus", &s(&fixtures().join("corpus_en.txt")), "--lang", "en",
        "--stopwords", &s(&fixtures().join("stopwords_en.txt")), "--phrase-threshold", "50",
        "--out", &s(&model), "--apply-out", &s(&merged),
    ]);
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("high_blood\tpressure") || text.contains("high\tblood_pressure"), "{text}");
    assert!(fs::read_to_string(&merged).unwrap().contains("high_blood_pressure"));
}
