//! Retrieval evaluation against labeled ground truth.

mod wilcoxon;

pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::alignment::BilingualSpace;
use crate::expansion::{
    best_threshold, expand_dynamic, expand_knn, Candidate, DynamicThresholdPolicy, ExpandError,
    Query,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no queries to evaluate")]
    EmptyQueries,
    #[error("query {0} has no ground-truth labels")]
    UnlabeledQuery(String),
    #[error("conflicting labels for ({query}, {candidate})")]
    ConflictingLabel { query: String, candidate: String },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all paired differences are zero")]
    Degenerate,
    #[error("only {0} non-zero paired differences; at least 6 are required")]
    TooFewPairs(usize),
    #[error("method {0} has an empty parameter grid")]
    EmptyGrid(&'static str),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

/// Relevance labels per `(query, candidate)`. Query keys are `lang:word`;
/// candidate keys are bare words of the target language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    labels: BTreeMap<String, BTreeMap<String, bool>>,
    relevant: BTreeMap<String, usize>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, candidate: &str, relevant: bool) -> Result<(), EvalError> {
        let pool = self.labels.entry(query.to_string()).or_default();
        let count = self.relevant.entry(query.to_string()).or_insert(0);
        match pool.get(candidate) {
            Some(&old) if old != relevant => Err(EvalError::ConflictingLabel {
                query: query.to_string(),
                candidate: candidate.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                pool.insert(candidate.to_string(), relevant);
                *count += usize::from(relevant);
                Ok(())
            }
        }
    }

    pub fn is_relevant(&self, query: &str, candidate: &str) -> Option<bool> {
        self.labels.get(query)?.get(candidate).copied()
    }

    /// Number of relevant items in the query's annotated pool.
    pub fn relevant_count(&self, query: &str) -> Option<usize> {
        self.relevant.get(query).copied()
    }

    pub fn contains_query(&self, query: &str) -> bool {
        self.labels.contains_key(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn pool_size(&self, query: &str) -> Option<usize> {
        self.labels.get(query).map(BTreeMap::len)
    }

    /// TSV: `query<TAB>candidate<TAB>0|1`; `#` and blank lines are skipped.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut truth = GroundTruth::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| EvalError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(EvalError::Parse {
                    line: lineno,
                    msg: "expected query<TAB>candidate<TAB>0|1".into(),
                });
            }
            let rel = match f[2].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(EvalError::Parse {
                        line: lineno,
                        msg: format!("label must be 0 or 1, got {other:?}"),
                    })
                }
            };
            truth.insert(f[0], f[1], rel)?;
        }
        Ok(truth)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let file = File::open(path).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::read_tsv(BufReader::new(file))
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (q, pool) in &self.labels {
            for (c, rel) in pool {
                writeln!(w, "{q}\t{c}\t{}", u8::from(*rel))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrrReport {
    /// Mean over all queries; queries without a relevant hit count as 0.
    pub mrr: f64,
    /// Mean over the queries that have at least one relevant labeled item.
    pub mrr_answerable: Option<f64>,
    pub answerable: usize,
    pub per_query_ranks: BTreeMap<String, Option<usize>>,
}

/// Mean reciprocal rank of the first relevant candidate per query.
pub fn mrr(
    ranked: &BTreeMap<String, Vec<String>>,
    truth: &GroundTruth,
) -> Result<MrrReport, EvalError> {
    if ranked.is_empty() {
        return Err(EvalError::EmptyQueries);
    }
    let mut per_query_ranks = BTreeMap::new();
    let mut total = 0.0;
    let mut answerable_total = 0.0;
    let mut answerable = 0;
    for (q, list) in ranked {
        if !truth.contains_query(q) {
            return Err(EvalError::UnlabeledQuery(q.clone()));
        }
        let rank = list
            .iter()
            .position(|c| truth.is_relevant(q, c) == Some(true))
            .map(|p| p + 1);
        let rr = rank.map_or(0.0, |r| 1.0 / r as f64);
        total += rr;
        if truth.relevant_count(q).unwrap_or(0) > 0 {
            answerable += 1;
            answerable_total += rr;
        }
        per_query_ranks.insert(q.clone(), rank);
    }
    Ok(MrrReport {
        mrr: total / ranked.len() as f64,
        mrr_answerable: (answerable > 0).then(|| answerable_total / answerable as f64),
        answerable,
        per_query_ranks,
    })
}

/// Expected reciprocal rank of the first relevant item when `relevant` of
/// `pool` items are placed uniformly at random.
pub fn random_baseline_rr(pool: usize, relevant: usize) -> f64 {
    if relevant == 0 || pool == 0 {
        return 0.0;
    }
    assert!(relevant <= pool, "more relevant items than pool entries");
    // P(first relevant at rank i) = (r/n) · Π_{j<i-1} (n−r−j)/(n−1−j)
    let (n, r) = (pool as f64, relevant as f64);
    let mut p_first = r / n;
    let mut expected = 0.0;
    for i in 1..=(pool - relevant + 1) {
        expected += p_first / i as f64;
        let j = (i - 1) as f64;
        p_first *= (n - r - j) / (n - 1.0 - j);
    }
    expected
}

/// Random-ordering MRR for every labeled query, using each query's own
/// annotated pool size.
pub fn random_baseline_mrr(truth: &GroundTruth) -> Option<f64> {
    let values: Vec<f64> = truth
        .queries()
        .map(|q| {
            random_baseline_rr(
                truth.pool_size(q).unwrap_or(0),
                truth.relevant_count(q).unwrap_or(0),
            )
        })
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Pooled (micro) retrieval counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PooledCounts {
    pub retrieved: usize,
    pub relevant_retrieved: usize,
    pub relevant_total: usize,
}

impl PooledCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.relevant_retrieved, self.retrieved)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.relevant_retrieved, self.relevant_total)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Relevant retrieved over retrieved; the same quantity as precision.
    pub correct_ratio: f64,
    pub counts: PooledCounts,
    /// False when nothing was retrieved (precision reported as 0).
    pub precision_defined: bool,
    /// False when the queries have no relevant items (recall reported as 0).
    pub recall_defined: bool,
}

impl SetMetrics {
    fn from_counts(counts: PooledCounts) -> Self {
        let precision = counts.precision();
        SetMetrics {
            precision,
            recall: counts.recall(),
            f1: counts.f1(),
            correct_ratio: precision,
            counts,
            precision_defined: counts.retrieved > 0,
            recall_defined: counts.relevant_total > 0,
        }
    }
}

/// Micro-averaged precision, recall and F1 of retrieved candidate sets.
/// Unlabeled candidates count as non-relevant.
pub fn set_metrics(
    retrieved: &BTreeMap<String, Vec<String>>,
    truth: &GroundTruth,
) -> Result<SetMetrics, EvalError> {
    let mut counts = PooledCounts::default();
    for (q, items) in retrieved {
        if !truth.contains_query(q) {
            return Err(EvalError::UnlabeledQuery(q.clone()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in items {
            if !seen.insert(c) {
                continue;
            }
            counts.retrieved += 1;
            if truth.is_relevant(q, c) == Some(true) {
                counts.relevant_retrieved += 1;
            }
        }
        counts.relevant_total += truth.relevant_count(q).unwrap_or(0);
    }
    Ok(SetMetrics::from_counts(counts))
}

/// Both views of one run: ranking quality and set quality.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ranking: MrrReport,
    pub sets: SetMetrics,
}

pub fn evaluate(
    ranked: &BTreeMap<String, Vec<String>>,
    truth: &GroundTruth,
) -> Result<EvalReport, EvalError> {
    Ok(EvalReport {
        ranking: mrr(ranked, truth)?,
        sets: set_metrics(ranked, truth)?,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.ranking;
        let s = &self.sets;
        writeln!(f, "queries\t{}", r.per_query_ranks.len())?;
        writeln!(f, "mrr\t{:.6}", r.mrr)?;
        match r.mrr_answerable {
            Some(v) => writeln!(f, "mrr_answerable\t{v:.6}\t({} queries)", r.answerable)?,
            None => writeln!(f, "mrr_answerable\tNA\t(0 queries)")?,
        }
        writeln!(f, "retrieved\t{}", s.counts.retrieved)?;
        writeln!(f, "relevant_retrieved\t{}", s.counts.relevant_retrieved)?;
        writeln!(f, "relevant_total\t{}", s.counts.relevant_total)?;
        let flag = |d: bool| if d { "" } else { "\t(undefined)" };
        writeln!(f, "precision\t{:.6}{}", s.precision, flag(s.precision_defined))?;
        writeln!(f, "recall\t{:.6}{}", s.recall, flag(s.recall_defined))?;
        writeln!(f, "f1\t{:.6}", s.f1)?;
        writeln!(f, "correct_ratio\t{:.6}", s.correct_ratio)
    }
}

/// One retrieval method and the grid it is tuned over.
#[derive(Debug, Clone)]
pub enum Method {
    Knn(Vec<usize>),
    SingleThreshold(Vec<f64>),
    Dynamic(DynamicThresholdPolicy),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Knn(_) => "k-NN",
            Method::SingleThreshold(_) => "Single Threshold",
            Method::Dynamic(_) => "Dynamic Threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    /// Selected grid point, e.g. `k=20` or `delta=0.6`.
    pub setting: String,
    pub counts: PooledCounts,
}

impl ComparisonRow {
    pub fn retrieved(&self) -> usize {
        self.counts.retrieved
    }

    pub fn correct_ratio(&self) -> f64 {
        self.counts.precision()
    }

    pub fn f1(&self) -> f64 {
        self.counts.f1()
    }
}

fn counts_for(lists: &[(&Query, Vec<Candidate>)], truth: &GroundTruth) -> PooledCounts {
    let mut c = PooledCounts::default();
    for (q, list) in lists {
        let key = q.key();
        c.retrieved += list.len();
        c.relevant_retrieved += list
            .iter()
            .filter(|x| truth.is_relevant(&key, &x.word) == Some(true))
            .count();
        c.relevant_total += truth.relevant_count(&key).unwrap_or(0);
    }
    c
}

/// Evaluates each method at its best grid point by pooled F1 (ties go to the
/// smaller parameter).
pub fn compare_methods(
    space: &BilingualSpace,
    queries: &[Query],
    truth: &GroundTruth,
    methods: &[Method],
    max_k: usize,
) -> Result<Vec<ComparisonRow>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQueries);
    }
    if let Some(q) = queries.iter().find(|q| !truth.contains_query(&q.key())) {
        return Err(EvalError::UnlabeledQuery(q.key()));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let (setting, counts) = match method {
            Method::Knn(ks) => {
                let mut ks = ks.clone();
                ks.sort_unstable();
                let largest = *ks.last().ok_or(EvalError::EmptyGrid("k-NN"))?;
                let pools: Vec<(&Query, Vec<Candidate>)> = queries
                    .iter()
                    .map(|q| Ok((q, expand_knn(space, q, largest)?)))
                    .collect::<Result<_, ExpandError>>()?;
                let mut best: Option<(usize, PooledCounts)> = None;
                for k in ks {
                    let cut: Vec<(&Query, Vec<Candidate>)> = pools
                        .iter()
                        .map(|(q, l)| (*q, l.iter().take(k).cloned().collect()))
                        .collect();
                    let c = counts_for(&cut, truth);
                    if best.as_ref().is_none_or(|(_, b)| c.f1() > b.f1()) {
                        best = Some((k, c));
                    }
                }
                let (k, c) = best.expect("non-empty grid");
                (format!("k={k}"), c)
            }
            Method::SingleThreshold(grid) => {
                if grid.is_empty() {
                    return Err(EvalError::EmptyGrid("single threshold"));
                }
                let pools: Vec<(&Query, Vec<Candidate>)> = queries
                    .iter()
                    .map(|q| Ok((q, expand_knn(space, q, max_k)?)))
                    .collect::<Result<_, ExpandError>>()?;
                let refs: Vec<(&Query, &[Candidate])> =
                    pools.iter().map(|(q, l)| (*q, l.as_slice())).collect();
                let (delta, c) = best_threshold(&refs, grid, truth);
                (format!("delta={delta}"), c)
            }
            Method::Dynamic(policy) => {
                let lists: Vec<(&Query, Vec<Candidate>)> = queries
                    .iter()
                    .map(|q| Ok((q, expand_dynamic(space, q, policy, max_k)?)))
                    .collect::<Result<_, ExpandError>>()?;
                let deltas: Vec<String> =
                    policy.group_thresholds.iter().map(|d| d.to_string()).collect();
                (format!("groups={} deltas={}", policy.n_groups(), deltas.join(",")), counts_for(&lists, truth))
            }
        };
        rows.push(ComparisonRow {
            method: method.name().to_string(),
            setting,
            counts,
        });
    }
    Ok(rows)
}

pub const COMPARISON_HEADER: [&str; 4] = ["Query Method", "#Retrieved Items", "Correct Ratio", "F1"];

/// TSV comparison table with fractional ratios.
pub fn write_comparison_tsv<W: Write>(rows: &[ComparisonRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{}\tSetting", COMPARISON_HEADER.join("\t"))?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{:.6}\t{}",
            r.method,
            r.retrieved(),
            r.correct_ratio(),
            r.f1(),
            r.setting
        )?;
    }
    Ok(())
}

/// Aligned plain-text table with percentages.
pub fn format_comparison_text(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<20} {:>17} {:>14} {:>8}\n",
        COMPARISON_HEADER[0], COMPARISON_HEADER[1], COMPARISON_HEADER[2], COMPARISON_HEADER[3]
    );
    for r in rows {
        out.push_str(&format!(
            "{:<20} {:>17} {:>13.2}% {:>7.2}%\n",
            r.method,
            r.retrieved(),
            100.0 * r.correct_ratio(),
            100.0 * r.f1()
        ));
    }
    out
}
