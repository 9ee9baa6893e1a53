//! Cross-lingual synonym expansion over a bilingual space.
//!
//! All retrieval is an exact brute-force cosine scan. Candidate lists are
//! ordered by descending similarity with ties broken by word, then language.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, BufRead, BufWriter, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::alignment::BilingualSpace;
use crate::evaluation::{GroundTruth, PooledCounts};
use crate::linalg::dot;

pub const DEFAULT_MAX_K: usize = 100;
pub const DEFAULT_MODULARITY_K: usize = 10;
pub const DEFAULT_DELTA_GRID: [f64; 6] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75];
pub const DEFAULT_KNN_GRID: [usize; 10] = [5, 10, 15, 20, 25, 30, 35, 40, 45, 50];

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("query {word:?} is not in the {language} vocabulary")]
    OutOfVocabulary { word: String, language: String },
    #[error("language {0:?} is not part of this bilingual space")]
    UnknownLanguage(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("threshold {0} is outside [-1, 1]")]
    BadThreshold(f64),
    #[error("modularity needs {k} neighbors but language {language} only has {available}")]
    TooFewWords {
        k: usize,
        language: String,
        available: usize,
    },
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("policy was calibrated with k={policy_k}, but k={k} was requested")]
    PolicyMismatch { policy_k: usize, k: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// A seed word and the language it should be expanded into.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    pub word: String,
    pub language: String,
    pub target_language: String,
}

impl Query {
    pub fn new(word: &str, language: &str, target_language: &str) -> Self {
        Query {
            word: word.to_string(),
            language: language.to_string(),
            target_language: target_language.to_string(),
        }
    }

    /// A query expanded into the other language of `space`.
    pub fn cross(space: &BilingualSpace, language: &str, word: &str) -> Result<Self, ExpandError> {
        let target = space
            .other_language(language)
            .ok_or_else(|| ExpandError::UnknownLanguage(language.to_string()))?;
        Ok(Query::new(word, language, target))
    }

    /// Parses `lang:word`.
    pub fn parse(space: &BilingualSpace, token: &str) -> Result<Self, ExpandError> {
        let (lang, word) = token.split_once(':').ok_or_else(|| ExpandError::Parse {
            line: 0,
            msg: format!("query {token:?} is not of the form lang:word"),
        })?;
        Query::cross(space, lang, word)
    }

    /// `lang:word`, the key used in query and ground-truth files.
    pub fn key(&self) -> String {
        format!("{}:{}", self.language, self.word)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.language, self.word)
    }
}

/// Reads a query file: one `lang:word` per line, blank lines and `#` lines
/// skipped. Returns the raw tokens so callers can report unresolved ones.
pub fn read_query_tokens<R: BufRead>(reader: R) -> Result<Vec<String>, ExpandError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !t.contains(':') {
            return Err(ExpandError::Parse {
                line: i + 1,
                msg: format!("query {t:?} is not of the form lang:word"),
            });
        }
        out.push(t.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub word: String,
    pub language: String,
    pub similarity: f64,
}

fn rank_order(a: &(f64, usize), b: &(f64, usize), space: &BilingualSpace) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| space.word(a.1).cmp(space.word(b.1)))
        .then_with(|| space.language_of(a.1).cmp(space.language_of(b.1)))
}

fn resolve(space: &BilingualSpace, q: &Query) -> Result<usize, ExpandError> {
    if space.other_language(&q.language).is_none() {
        return Err(ExpandError::UnknownLanguage(q.language.clone()));
    }
    space
        .lookup(&q.language, &q.word)
        .ok_or_else(|| ExpandError::OutOfVocabulary {
            word: q.word.clone(),
            language: q.language.clone(),
        })
}

/// Which rows a neighbor search may return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LanguageFilter<'a> {
    Any,
    Only(&'a str),
}

/// Top-`k` neighbors of `row` as `(similarity, row)` pairs, excluding the
/// row itself, sorted by [`rank_order`].
fn top_rows(
    space: &BilingualSpace,
    row: usize,
    k: usize,
    filter: LanguageFilter<'_>,
) -> Vec<(f64, usize)> {
    let q = space.row(row);
    let mut scored: Vec<(f64, usize)> = (0..space.len())
        .filter(|&r| r != row)
        .filter(|&r| match filter {
            LanguageFilter::Any => true,
            LanguageFilter::Only(lang) => space.language_of(r) == lang,
        })
        .map(|r| (dot(q, space.row(r)), r))
        .collect();
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, |a, b| rank_order(a, b, space));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| rank_order(a, b, space));
    scored
}

fn to_candidates(space: &BilingualSpace, rows: &[(f64, usize)]) -> Vec<Candidate> {
    rows.iter()
        .map(|&(s, r)| Candidate {
            word: space.word(r).to_string(),
            language: space.language_of(r).to_string(),
            similarity: s,
        })
        .collect()
}

/// Exact top-`k` neighbors of a query restricted by language.
pub fn nearest_neighbors(
    space: &BilingualSpace,
    q: &Query,
    k: usize,
    filter: LanguageFilter<'_>,
) -> Result<Vec<Candidate>, ExpandError> {
    if k == 0 {
        return Err(ExpandError::ZeroK);
    }
    let row = resolve(space, q)?;
    if let LanguageFilter::Only(lang) = filter {
        if space.other_language(lang).is_none() {
            return Err(ExpandError::UnknownLanguage(lang.to_string()));
        }
    }
    Ok(to_candidates(space, &top_rows(space, row, k, filter)))
}

/// k-NN expansion into the query's target language.
pub fn expand_knn(space: &BilingualSpace, q: &Query, k: usize) -> Result<Vec<Candidate>, ExpandError> {
    nearest_neighbors(space, q, k, LanguageFilter::Only(&q.target_language))
}

/// Candidates among the top `max_k` target-language neighbors whose
/// similarity is at least `delta`.
pub fn expand_threshold(
    space: &BilingualSpace,
    q: &Query,
    delta: f64,
    max_k: usize,
) -> Result<Vec<Candidate>, ExpandError> {
    if !(-1.0..=1.0).contains(&delta) {
        return Err(ExpandError::BadThreshold(delta));
    }
    let mut c = expand_knn(space, q, max_k)?;
    c.retain(|c| c.similarity >= delta);
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularityScore {
    pub query: String,
    /// `|eta_own − eta_other|`.
    pub m: f64,
    /// Mean similarity of the top-`k` neighbors in the query's own language
    /// (the query itself excluded).
    pub eta_own: f64,
    /// Mean similarity of the top-`k` neighbors in the other language.
    pub eta_other: f64,
    pub k: usize,
}

fn mean_in_rank_order(rows: &[(f64, usize)]) -> f64 {
    let mut acc = 0.0;
    for (s, _) in rows {
        acc += s;
    }
    acc / rows.len() as f64
}

/// Language bias of a query: the gap between the mean top-`k` similarity of
/// its own-language neighborhood and of its other-language neighborhood.
pub fn modularity(space: &BilingualSpace, q: &Query, k: usize) -> Result<ModularityScore, ExpandError> {
    if k == 0 {
        return Err(ExpandError::ZeroK);
    }
    let row = resolve(space, q)?;
    let other = space
        .other_language(&q.language)
        .expect("resolved query has a known language");
    let own_available = space.count_language(&q.language) - 1;
    let other_available = space.count_language(other);
    for (lang, available) in [(q.language.as_str(), own_available), (other, other_available)] {
        if available < k {
            return Err(ExpandError::TooFewWords {
                k,
                language: lang.to_string(),
                available,
            });
        }
    }
    let own = top_rows(space, row, k, LanguageFilter::Only(&q.language));
    let cross = top_rows(space, row, k, LanguageFilter::Only(other));
    let eta_own = mean_in_rank_order(&own);
    let eta_other = mean_in_rank_order(&cross);
    Ok(ModularityScore {
        query: q.key(),
        m: (eta_own - eta_other).abs(),
        eta_own,
        eta_other,
        k,
    })
}

/// Per-modularity-group thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicThresholdPolicy {
    /// Upper modularity bound of each group, strictly increasing.
    pub group_boundaries: Vec<f64>,
    pub group_thresholds: Vec<f64>,
    pub k: usize,
}

impl DynamicThresholdPolicy {
    pub fn single(delta: f64, k: usize) -> Self {
        DynamicThresholdPolicy {
            group_boundaries: vec![f64::INFINITY],
            group_thresholds: vec![delta],
            k,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.group_thresholds.len()
    }

    /// Group of a modularity value: the first group whose upper bound is not
    /// below it, or the last group.
    pub fn group_of(&self, m: f64) -> usize {
        self.group_boundaries
            .iter()
            .position(|&b| m <= b)
            .unwrap_or(self.n_groups() - 1)
    }

    pub fn threshold_for(&self, m: f64) -> f64 {
        self.group_thresholds[self.group_of(m)]
    }

    fn validate(&self) -> Result<(), ExpandError> {
        let bad = |m: &str| Err(ExpandError::Calibration(m.to_string()));
        if self.group_thresholds.is_empty() {
            return bad("policy has no groups");
        }
        if self.group_boundaries.len() != self.group_thresholds.len() {
            return bad("boundary and threshold counts differ");
        }
        if self.group_boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("group boundaries must be strictly increasing");
        }
        if self.group_thresholds.iter().any(|d| !(-1.0..=1.0).contains(d)) {
            return bad("thresholds must lie in [-1, 1]");
        }
        Ok(())
    }

    /// TSV: a header `k<TAB>K<TAB>n_groups<TAB>N`, then one
    /// `boundary_upper<TAB>delta` line per group.
    pub fn write_tsv<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "k\t{}\tn_groups\t{}", self.k, self.n_groups())?;
        for (b, d) in self.group_boundaries.iter().zip(&self.group_thresholds) {
            writeln!(w, "{b}\t{d}")?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, ExpandError> {
        let mut lines = reader.lines();
        let bad = |line: usize, msg: &str| ExpandError::Parse {
            line,
            msg: msg.to_string(),
        };
        let header = lines.next().ok_or_else(|| bad(1, "empty policy file"))??;
        let h: Vec<&str> = header.split('\t').collect();
        if h.len() != 4 || h[0] != "k" || h[2] != "n_groups" {
            return Err(bad(1, "header must be k<TAB>K<TAB>n_groups<TAB>N"));
        }
        let k: usize = h[1].parse().map_err(|_| bad(1, "bad k"))?;
        let n: usize = h[3].parse().map_err(|_| bad(1, "bad n_groups"))?;
        let mut policy = DynamicThresholdPolicy {
            group_boundaries: Vec::with_capacity(n),
            group_thresholds: Vec::with_capacity(n),
            k,
        };
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 2 {
                return Err(bad(i + 2, "expected boundary<TAB>delta"));
            }
            policy
                .group_boundaries
                .push(f[0].parse().map_err(|_| bad(i + 2, "bad boundary"))?);
            policy
                .group_thresholds
                .push(f[1].parse().map_err(|_| bad(i + 2, "bad delta"))?);
        }
        if policy.n_groups() != n {
            return Err(bad(1, "n_groups does not match the number of rows"));
        }
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub n_groups: usize,
    pub k: usize,
    pub delta_grid: Vec<f64>,
    pub max_k: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            n_groups: 4,
            k: DEFAULT_MODULARITY_K,
            delta_grid: DEFAULT_DELTA_GRID.to_vec(),
            max_k: DEFAULT_MAX_K,
        }
    }
}

/// Splits `n` items into `groups` contiguous sizes, extras to the earliest
/// groups.
pub fn group_sizes(n: usize, groups: usize) -> Vec<usize> {
    let base = n / groups;
    let extra = n % groups;
    (0..groups).map(|g| base + usize::from(g < extra)).collect()
}

/// Micro-averaged counts of a thresholded retrieval over a set of queries.
fn pooled_counts(
    pools: &[(&Query, &[Candidate])],
    delta: f64,
    truth: &GroundTruth,
) -> PooledCounts {
    let mut c = PooledCounts::default();
    for (q, pool) in pools {
        let key = q.key();
        for cand in pool.iter().take_while(|c| c.similarity >= delta) {
            c.retrieved += 1;
            if truth.is_relevant(&key, &cand.word) == Some(true) {
                c.relevant_retrieved += 1;
            }
        }
        c.relevant_total += truth.relevant_count(&key).unwrap_or(0);
    }
    c
}

/// δ from `grid` with the best pooled F1 over `pools`; ties go to the
/// smallest δ.
pub fn best_threshold(
    pools: &[(&Query, &[Candidate])],
    grid: &[f64],
    truth: &GroundTruth,
) -> (f64, PooledCounts) {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, PooledCounts)> = None;
    for &d in &sorted {
        let c = pooled_counts(pools, d, truth);
        if best.as_ref().is_none_or(|(_, b)| c.f1() > b.f1()) {
            best = Some((d, c));
        }
    }
    best.expect("grid is non-empty")
}

/// Modularity of each query, computed in parallel, in input order.
pub fn modularities(
    space: &BilingualSpace,
    queries: &[Query],
    k: usize,
) -> Result<Vec<ModularityScore>, ExpandError> {
    queries
        .par_iter()
        .map(|q| modularity(space, q, k))
        .collect()
}

/// Fits a dynamic threshold policy: queries are sorted by modularity,
/// split into equal-size quantile groups, and each group gets the grid δ
/// with the best pooled F1.
pub fn calibrate_dynamic_threshold(
    space: &BilingualSpace,
    queries: &[Query],
    truth: &GroundTruth,
    config: &CalibrationConfig,
) -> Result<DynamicThresholdPolicy, ExpandError> {
    if config.delta_grid.is_empty() {
        return Err(ExpandError::Calibration("empty threshold grid".into()));
    }
    if config.delta_grid.iter().any(|d| !(-1.0..=1.0).contains(d)) {
        return Err(ExpandError::Calibration("grid thresholds must lie in [-1, 1]".into()));
    }
    if config.n_groups == 0 {
        return Err(ExpandError::Calibration("n_groups must be at least 1".into()));
    }
    if queries.len() < config.n_groups {
        return Err(ExpandError::Calibration(format!(
            "{} queries cannot fill {} groups",
            queries.len(),
            config.n_groups
        )));
    }
    if let Some(q) = queries.iter().find(|q| !truth.contains_query(&q.key())) {
        return Err(ExpandError::Calibration(format!("query {} has no labels", q.key())));
    }

    let scores = modularities(space, queries, config.k)?;
    let pools: Vec<Vec<Candidate>> = queries
        .par_iter()
        .map(|q| expand_knn(space, q, config.max_k))
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .m
            .total_cmp(&scores[b].m)
            .then_with(|| queries[a].cmp(&queries[b]))
    });

    let mut boundaries = Vec::with_capacity(config.n_groups);
    let mut thresholds = Vec::with_capacity(config.n_groups);
    let mut start = 0;
    for size in group_sizes(queries.len(), config.n_groups) {
        let members = &order[start..start + size];
        start += size;
        let group: Vec<(&Query, &[Candidate])> = members
            .iter()
            .map(|&i| (&queries[i], pools[i].as_slice()))
            .collect();
        let (delta, _) = best_threshold(&group, &config.delta_grid, truth);
        let upper = scores[*members.last().expect("groups are non-empty")].m;
        if let Some(&prev) = boundaries.last() {
            if !(upper > prev) {
                return Err(ExpandError::Calibration(format!(
                    "tied modularity {upper} straddles a group boundary; use fewer groups"
                )));
            }
        }
        boundaries.push(upper);
        thresholds.push(delta);
    }
    let policy = DynamicThresholdPolicy {
        group_boundaries: boundaries,
        group_thresholds: thresholds,
        k: config.k,
    };
    policy.validate()?;
    Ok(policy)
}

/// Threshold expansion with the δ of the query's modularity group.
pub fn expand_dynamic(
    space: &BilingualSpace,
    q: &Query,
    policy: &DynamicThresholdPolicy,
    max_k: usize,
) -> Result<Vec<Candidate>, ExpandError> {
    policy.validate()?;
    let m = modularity(space, q, policy.k)?;
    expand_threshold(space, q, policy.threshold_for(m.m), max_k)
}
