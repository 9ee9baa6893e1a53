//! Subcommands of the `crosschv` binary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crosschv::alignment::{build_bilingual_space, filter_anchors, solve_procrustes, AnchorSet, BilingualSpace};
use crosschv::evaluation::{
    self, format_comparison_text, random_baseline_mrr, wilcoxon_signed_rank, write_comparison_tsv,
    ComparisonRow, GroundTruth,
};
use crosschv::expansion::{
    self, calibrate_dynamic_threshold, expand_dynamic, expand_knn, expand_threshold, modularities,
    read_query_tokens, CalibrationConfig, Candidate, DynamicThresholdPolicy, Query,
};
use crosschv::skipgram::{self, TrainConfig};
use crosschv::space::{load_space, TextFormat};
use crosschv::text::{
    apply_phrases, learn_phrases, tokenize_file, PhraseModel, PhraseParams, TokenizeMode,
    TokenizerConfig, ENGLISH_STOPWORDS,
};

#[derive(Debug, Parser)]
#[command(name = "crosschv", version, about = "Cross-lingual health vocabulary expansion with aligned word embeddings")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize a corpus, optionally merge phrases, train and normalize a space
    Train(TrainArgs),
    /// Learn a phrase model from a corpus
    Phrases(PhrasesArgs),
    /// Fit an orthogonal map on anchor pairs and write the bilingual space
    Align(AlignArgs),
    /// Expand seed queries into candidates of the other language
    Expand(ExpandArgs),
    /// Report the modularity score of each query
    Modularity(ModularityArgs),
    /// Fit a dynamic threshold policy on labeled queries
    Calibrate(CalibrateArgs),
    /// Score expansion runs against ground truth
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Whitespace split, lowercased, punctuation trimmed
    Whitespace,
    /// Tokens already segmented, kept verbatim
    Pretokenized,
}

impl From<ModeArg> for TokenizeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Whitespace => TokenizeMode::Whitespace,
            ModeArg::Pretokenized => TokenizeMode::PreTokenized,
        }
    }
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus file, UTF-8, one document per line
    #[arg(long)]
    corpus: PathBuf,
    /// Language tag of the corpus (e.g. en, zh)
    #[arg(long)]
    lang: String,
    #[arg(long, value_enum, default_value = "whitespace")]
    mode: ModeArg,
    /// Stopword file, one token per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Also drop the built-in minimal English stopword list
    #[arg(long)]
    english_stopwords: bool,
}

impl CorpusArgs {
    fn check(&self) -> Result<()> {
        require_file(&self.corpus)?;
        if let Some(p) = &self.stopwords {
            require_file(p)?;
        }
        ensure!(!self.lang.is_empty() && !self.lang.contains(':'), "--lang must be non-empty and contain no ':'");
        Ok(())
    }

    fn tokenizer(&self) -> Result<TokenizerConfig> {
        let mut cfg = TokenizerConfig::new(&self.lang, self.mode.into());
        if let Some(p) = &self.stopwords {
            cfg = cfg.load_stopwords(p)?;
        }
        if self.english_stopwords {
            cfg = cfg.with_stopwords(ENGLISH_STOPWORDS.iter().copied());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct PhraseArgs {
    /// Discount subtracted from bigram counts
    #[arg(long, default_value_t = 5.0)]
    phrase_delta: f64,
    /// Minimum score for a bigram to be merged
    #[arg(long, default_value_t = 10.0)]
    phrase_threshold: f64,
    /// Number of merge passes (phrases of up to 2^passes tokens)
    #[arg(long, default_value_t = 2)]
    phrase_passes: usize,
    /// Separator placed between merged tokens
    #[arg(long, default_value = "_")]
    joiner: String,
}

impl PhraseArgs {
    fn params(&self) -> PhraseParams {
        PhraseParams {
            delta: self.phrase_delta,
            threshold: self.phrase_threshold,
            passes: self.phrase_passes,
            joiner: self.joiner.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    phrase: PhraseArgs,
    /// Output space (word2vec text); a .meta.json sidecar is written next to it
    #[arg(long)]
    out: PathBuf,
    /// Apply an existing phrase model before training
    #[arg(long, conflicts_with = "learn_phrases")]
    phrases: Option<PathBuf>,
    /// Learn and apply a phrase model before training
    #[arg(long)]
    learn_phrases: bool,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Maximum context offset
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Frequent-word subsampling threshold (0 disables)
    #[arg(long, default_value_t = 1e-3)]
    subsample: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training threads; only 1 is reproducible
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Args)]
struct PhrasesArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    phrase: PhraseArgs,
    /// Output phrase model TSV
    #[arg(long)]
    out: PathBuf,
    /// Also write the merged corpus here
    #[arg(long)]
    apply_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// Source space, mapped into the target
    #[arg(long)]
    source: PathBuf,
    /// Target (reference) space
    #[arg(long)]
    target: PathBuf,
    /// Anchor pairs TSV: source_word<TAB>target_word
    #[arg(long)]
    anchors: PathBuf,
    /// Override the source language tag from the sidecar
    #[arg(long)]
    source_lang: Option<String>,
    /// Override the target language tag from the sidecar
    #[arg(long)]
    target_lang: Option<String>,
    #[arg(long)]
    out_matrix: PathBuf,
    #[arg(long)]
    out_space: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ExpandMode {
    Knn,
    Threshold,
    Dynamic,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    /// Bilingual space written by `align`
    #[arg(long)]
    space: PathBuf,
    /// Query file, one lang:word per line
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum)]
    mode: ExpandMode,
    /// Neighbors per query in knn mode
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Similarity cutoff in threshold mode
    #[arg(long, default_value_t = 0.6)]
    delta: f64,
    /// Neighbors scanned before thresholding
    #[arg(long, default_value_t = expansion::DEFAULT_MAX_K)]
    max_k: usize,
    /// Policy TSV from `calibrate` (dynamic mode)
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Output TSV: query, rank, candidate, language, similarity.
    /// Unresolved queries go to <out>.rejects.tsv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModularityArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Neighbors per language
    #[arg(long, default_value_t = expansion::DEFAULT_MODULARITY_K)]
    k: usize,
    /// Output TSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground truth TSV: query<TAB>candidate<TAB>0|1
    #[arg(long)]
    truth: PathBuf,
    /// Number of modularity quantile groups
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = expansion::DEFAULT_MODULARITY_K)]
    k: usize,
    /// Comma-separated threshold grid
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.55,0.6,0.65,0.7,0.75")]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = expansion::DEFAULT_MAX_K)]
    max_k: usize,
    /// Output policy TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum EvalMode {
    /// Full report per run
    Report,
    /// One comparison row per run
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OutputFormat {
    Text,
    Tsv,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Expansion TSV, optionally labeled as NAME=PATH; repeatable
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    #[arg(long)]
    truth: PathBuf,
    /// Query file; listed queries missing from a run count as empty lists
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "report")]
    mode: EvalMode,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    /// Write per-query first-relevant ranks as CSV (run,query,rank)
    #[arg(long)]
    ranks_csv: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Phrases(a) => cmd_phrases(a),
        Command::Align(a) => cmd_align(a),
        Command::Expand(a) => cmd_expand(a),
        Command::Modularity(a) => cmd_modularity(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    ensure!(path.is_file(), "input file not found: {}", path.display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    a.corpus.check()?;
    if let Some(p) = &a.phrases {
        require_file(p)?;
    }
    let config = TrainConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        min_count: a.min_count,
        epochs: a.epochs,
        initial_lr: a.lr,
        subsample_t: a.subsample,
        seed: a.seed,
        workers: a.workers,
    };
    config.validate()?;

    let tokenizer = a.corpus.tokenizer()?;
    let mut corpus = tokenize_file(&a.corpus.corpus, &tokenizer)
        .with_context(|| format!("tokenizing {}", a.corpus.corpus.display()))?;
    if let Some(p) = &a.phrases {
        let model = PhraseModel::read_tsv(open(p)?)?;
        corpus = apply_phrases(&corpus, &model);
    } else if a.learn_phrases {
        let model = learn_phrases(&corpus, &a.phrase.params())?;
        eprintln!("learned {} phrases", model.len());
        corpus = apply_phrases(&corpus, &model);
    }
    eprintln!(
        "{} documents, {} tokens, {} types",
        corpus.documents().len(),
        corpus.total_tokens(),
        corpus.token_counts().len()
    );

    let space = skipgram::train(&corpus, &config)?;
    let space = skipgram::normalize(&space)?;
    space.save(&a.out, Some(serde_json::to_value(&config)?))?;
    eprintln!("wrote {} words x {} dims to {}", space.len(), space.dim(), a.out.display());
    Ok(())
}

fn cmd_phrases(a: PhrasesArgs) -> Result<()> {
    a.corpus.check()?;
    let params = a.phrase.params();
    ensure!(params.passes >= 1, "--phrase-passes must be at least 1");
    let corpus = tokenize_file(&a.corpus.corpus, &a.corpus.tokenizer()?)?;
    let model = learn_phrases(&corpus, &params)?;
    model.write_tsv(create(&a.out)?)?;
    if let Some(p) = &a.apply_out {
        apply_phrases(&corpus, &model).write(create(p)?)?;
    }
    eprintln!("learned {} phrases", model.len());
    Ok(())
}

fn cmd_align(a: AlignArgs) -> Result<()> {
    for p in [&a.source, &a.target, &a.anchors] {
        require_file(p)?;
    }
    let retag = |space: crosschv::EmbeddingSpace, lang: &Option<String>| -> Result<crosschv::EmbeddingSpace> {
        Ok(match lang {
            Some(l) => {
                let words = space.words().to_vec();
                let mut s = crosschv::EmbeddingSpace::new(l.clone(), words, space.dim(), space.vectors().as_slice().to_vec())?;
                if space.is_normalized() {
                    s = s.normalize()?;
                }
                s
            }
            None => space,
        })
    };
    let source = retag(load_space(&a.source, TextFormat::Word2Vec)?, &a.source_lang)?.normalize()?;
    let target = retag(load_space(&a.target, TextFormat::Word2Vec)?, &a.target_lang)?.normalize()?;
    ensure!(
        source.dim() == target.dim(),
        "dimension mismatch: source has {}, target has {}",
        source.dim(),
        target.dim()
    );
    let anchors = AnchorSet::load(&a.anchors)?;
    let (kept, report) = filter_anchors(&anchors, &source, &target)?;
    eprintln!(
        "anchors: {} given, {} kept ({} missing in source, {} missing in target)",
        report.total, report.kept, report.missing_source, report.missing_target
    );
    if kept.len() < source.dim() {
        eprintln!("warning: {} anchors for {} dimensions; the map is under-determined", kept.len(), source.dim());
    }
    let l = solve_procrustes(&kept, &source, &target)?;
    eprintln!("orthogonality defect {:.3e}", l.orthogonality_defect());
    let bi = build_bilingual_space(&source, &target, &l)?;
    l.save(&a.out_matrix)?;
    bi.save(&a.out_space)?;
    eprintln!("wrote {} rows to {}", bi.len(), a.out_space.display());
    Ok(())
}

fn rejects_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".rejects.tsv");
    PathBuf::from(s)
}

/// Resolves query tokens against the space; unresolved ones come back with
/// a reason.
fn resolve_queries(space: &BilingualSpace, tokens: &[String]) -> (Vec<Query>, Vec<(String, String)>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for t in tokens {
        match Query::parse(space, t) {
            Ok(q) if space.lookup(&q.language, &q.word).is_some() => ok.push(q),
            Ok(q) => rejected.push((t.clone(), format!("not in the {} vocabulary", q.language))),
            Err(e) => rejected.push((t.clone(), e.to_string())),
        }
    }
    (ok, rejected)
}

fn write_expansion<W: Write>(mut w: W, results: &[(Query, Vec<Candidate>)]) -> Result<()> {
    for (q, cands) in results {
        for (rank, c) in cands.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t{}\t{}", q.key(), rank + 1, c.word, c.language, c.similarity)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_expand(a: ExpandArgs) -> Result<()> {
    require_file(&a.space)?;
    require_file(&a.queries)?;
    ensure!(a.k >= 1, "--k must be at least 1");
    ensure!(a.max_k >= 1, "--max-k must be at least 1");
    ensure!((-1.0..=1.0).contains(&a.delta), "--delta must lie in [-1, 1]");
    let policy = match (a.mode, &a.policy) {
        (ExpandMode::Dynamic, None) => bail!("dynamic mode requires --policy"),
        (ExpandMode::Dynamic, Some(p)) => {
            require_file(p)?;
            Some(DynamicThresholdPolicy::read_tsv(open(p)?).with_context(|| format!("reading policy {}", p.display()))?)
        }
        _ => None,
    };

    let space = BilingualSpace::load(&a.space)?;
    let tokens = read_query_tokens(open(&a.queries)?)?;
    let (queries, mut rejected) = resolve_queries(&space, &tokens);

    let outcomes: Vec<Result<Vec<Candidate>, expansion::ExpandError>> = queries
        .par_iter()
        .map(|q| match a.mode {
            ExpandMode::Knn => expand_knn(&space, q, a.k),
            ExpandMode::Threshold => expand_threshold(&space, q, a.delta, a.max_k),
            ExpandMode::Dynamic => expand_dynamic(&space, q, policy.as_ref().expect("checked"), a.max_k),
        })
        .collect();
    let mut results = Vec::with_capacity(queries.len());
    for (q, r) in queries.into_iter().zip(outcomes) {
        match r {
            Ok(c) => results.push((q, c)),
            Err(e) => rejected.push((q.key(), e.to_string())),
        }
    }

    write_expansion(create(&a.out)?, &results)?;
    let mut rej = create(&rejects_path(&a.out))?;
    for (t, why) in &rejected {
        writeln!(rej, "{t}\t{why}")?;
    }
    rej.flush()?;
    eprintln!("expanded {} queries, {} rejected", results.len(), rejected.len());
    Ok(())
}

fn cmd_modularity(a: ModularityArgs) -> Result<()> {
    require_file(&a.space)?;
    require_file(&a.queries)?;
    ensure!(a.k >= 1, "--k must be at least 1");
    let space = BilingualSpace::load(&a.space)?;
    let (queries, rejected) = resolve_queries(&space, &read_query_tokens(open(&a.queries)?)?);
    for (t, why) in &rejected {
        eprintln!("skipping {t}: {why}");
    }
    let scores = modularities(&space, &queries, a.k)?;
    let mut w: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(w, "query\tmodularity\teta_own\teta_other")?;
    for s in scores {
        writeln!(w, "{}\t{}\t{}\t{}", s.query, s.m, s.eta_own, s.eta_other)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    for p in [&a.space, &a.queries, &a.truth] {
        require_file(p)?;
    }
    ensure!(!a.deltas.is_empty(), "--deltas must not be empty");
    let space = BilingualSpace::load(&a.space)?;
    let truth = GroundTruth::load(&a.truth)?;
    let (queries, rejected) = resolve_queries(&space, &read_query_tokens(open(&a.queries)?)?);
    for (t, why) in &rejected {
        eprintln!("skipping {t}: {why}");
    }
    let config = CalibrationConfig {
        n_groups: a.groups,
        k: a.k,
        delta_grid: a.deltas.clone(),
        max_k: a.max_k,
    };
    let policy = calibrate_dynamic_threshold(&space, &queries, &truth, &config)?;
    policy.write_tsv(create(&a.out)?)?;
    for (i, (b, d)) in policy.group_boundaries.iter().zip(&policy.group_thresholds).enumerate() {
        eprintln!("Q{}: modularity <= {b:.4} -> delta {d}", i + 1);
    }
    Ok(())
}

/// Ranked candidate lists keyed by query, read from an expansion TSV.
fn read_expansion(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut by_query: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        ensure!(f.len() == 5, "{}:{}: expected 5 tab-separated fields", path.display(), i + 1);
        let rank: usize = f[1]
            .parse()
            .with_context(|| format!("{}:{}: bad rank {:?}", path.display(), i + 1, f[1]))?;
        by_query.entry(f[0].to_string()).or_default().push((rank, f[2].to_string()));
    }
    Ok(by_query
        .into_iter()
        .map(|(q, mut v)| {
            v.sort();
            (q, v.into_iter().map(|(_, c)| c).collect())
        })
        .collect())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    require_file(&a.truth)?;
    let mut runs = Vec::new();
    for (i, arg) in a.runs.iter().enumerate() {
        let (name, path) = match arg.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => (format!("run{}", i + 1), PathBuf::from(arg)),
        };
        require_file(&path)?;
        runs.push((name, path));
    }
    if let Some(q) = &a.queries {
        require_file(q)?;
    }

    let truth = GroundTruth::load(&a.truth)?;
    let listed: Vec<String> = match &a.queries {
        Some(p) => read_query_tokens(open(p)?)?,
        None => Vec::new(),
    };

    let mut evaluated = Vec::new();
    for (name, path) in &runs {
        let mut lists = read_expansion(path)?;
        for q in &listed {
            lists.entry(q.clone()).or_default();
        }
        let report = evaluation::evaluate(&lists, &truth).with_context(|| format!("evaluating {}", path.display()))?;
        evaluated.push((name.clone(), report));
    }

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match a.mode {
        EvalMode::Report => {
            for (name, report) in &evaluated {
                writeln!(out, "run\t{name}")?;
                write!(out, "{report}")?;
            }
            if let Some(b) = random_baseline_mrr(&truth) {
                writeln!(out, "random_baseline_mrr\t{b:.6}")?;
            }
        }
        EvalMode::Table => {
            let rows: Vec<ComparisonRow> = evaluated
                .iter()
                .map(|(name, r)| ComparisonRow {
                    method: name.clone(),
                    setting: String::new(),
                    counts: r.sets.counts,
                })
                .collect();
            match a.format {
                OutputFormat::Tsv => write_comparison_tsv(&rows, &mut out)?,
                OutputFormat::Text => write!(out, "{}", format_comparison_text(&rows))?,
            }
        }
    }
    if evaluated.len() == 2 {
        let (ra, rb) = (&evaluated[0].1.ranking, &evaluated[1].1.ranking);
        let rr = |r: Option<usize>| r.map_or(0.0, |x| 1.0 / x as f64);
        let keys: Vec<&String> = ra.per_query_ranks.keys().filter(|k| rb.per_query_ranks.contains_key(*k)).collect();
        let xa: Vec<f64> = keys.iter().map(|k| rr(ra.per_query_ranks[*k])).collect();
        let xb: Vec<f64> = keys.iter().map(|k| rr(rb.per_query_ranks[*k])).collect();
        match wilcoxon_signed_rank(&xa, &xb) {
            Ok(w) => writeln!(out, "wilcoxon\t{}\tvs\t{}\tW={}\tz={:.4}\tp={:.6}", evaluated[0].0, evaluated[1].0, w.statistic, w.z, w.p_value)?,
            Err(e) => writeln!(out, "wilcoxon\tNA\t{e}")?,
        }
    }
    out.flush()?;

    if let Some(p) = &a.ranks_csv {
        let mut w = create(p)?;
        writeln!(w, "run,query,rank")?;
        for (name, r) in &evaluated {
            for (q, rank) in &r.ranking.per_query_ranks {
                let rank = rank.map_or(String::new(), |x| x.to_string());
                writeln!(w, "{name},{q},{rank}")?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
