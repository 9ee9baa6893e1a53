//! Corpus cleaning: tokenization, stopword filtering and multiword phrase
//! detection by discounted bigram scoring.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("read error: {0}")]
    Read(#[from] io::Error),
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Decoding { offset: usize },
    #[error("corpus has no tokens; cannot learn phrases")]
    EmptyCorpus,
    #[error("invalid phrase parameters: {0}")]
    InvalidParams(String),
    #[error("phrase model line {line}: {msg}")]
    ModelParse { line: usize, msg: String },
}

/// How raw lines are split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenizeMode {
    /// Split on whitespace, lowercase, trim surrounding punctuation.
    #[default]
    Whitespace,
    /// Lines were segmented upstream; tokens are kept verbatim.
    PreTokenized,
}

/// Small English stopword list, available on request. The tokenizer's
/// default list is empty.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "if", "in", "into",
    "is", "it", "its", "of", "on", "or", "so", "such", "that", "the", "their", "then", "there",
    "these", "they", "this", "to", "was", "were", "will", "with",
];

#[derive(Debug, Clone, Default)]
pub struct TokenizerConfig {
    pub mode: TokenizeMode,
    pub language: String,
    pub stopwords: HashSet<String>,
}

impl TokenizerConfig {
    pub fn new(language: impl Into<String>, mode: TokenizeMode) -> Self {
        TokenizerConfig {
            mode,
            language: language.into(),
            stopwords: HashSet::new(),
        }
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords.extend(words.into_iter().map(Into::into));
        self
    }

    /// Reads a stopword file, one token per line.
    pub fn load_stopwords(mut self, path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|e| TextError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.stopwords.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        );
        Ok(self)
    }

    fn is_kept(&self, token: &str) -> bool {
        token.chars().any(char::is_alphanumeric) && !self.stopwords.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedCorpus {
    language: String,
    documents: Vec<Vec<String>>,
    token_counts: HashMap<String, u64>,
}

impl TokenizedCorpus {
    pub fn new(language: impl Into<String>, documents: Vec<Vec<String>>) -> Self {
        let mut token_counts = HashMap::new();
        for doc in &documents {
            for t in doc {
                *token_counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
        TokenizedCorpus {
            language: language.into(),
            documents,
            token_counts,
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }

    pub fn token_counts(&self) -> &HashMap<String, u64> {
        &self.token_counts
    }

    pub fn count(&self, token: &str) -> u64 {
        self.token_counts.get(token).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.documents.iter().map(|d| d.len() as u64).sum()
    }

    /// Writes one document per line with space-separated tokens.
    pub fn write<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        for doc in &self.documents {
            writeln!(w, "{}", doc.join(" "))?;
        }
        w.flush()
    }
}

fn tokenize_line(line: &str, config: &TokenizerConfig) -> Vec<String> {
    match config.mode {
        TokenizeMode::Whitespace => line
            .split_whitespace()
            .map(|unit| {
                unit.to_lowercase()
                    .trim_matches(|c: char| !c.is_alphanumeric())
                    .to_string()
            })
            .filter(|t| config.is_kept(t))
            .collect(),
        TokenizeMode::PreTokenized => line
            .split_whitespace()
            .filter(|t| config.is_kept(t))
            .map(String::from)
            .collect(),
    }
}

/// Drops stopwords and tokens without any letter or digit.
pub fn filter_tokens(tokens: &[String], config: &TokenizerConfig) -> Vec<String> {
    tokens.iter().filter(|t| config.is_kept(t)).cloned().collect()
}

/// Tokenizes an in-memory text, one document per line.
pub fn tokenize_str(text: &str, config: &TokenizerConfig) -> TokenizedCorpus {
    let lines: Vec<&str> = text.lines().collect();
    let documents = lines
        .par_iter()
        .map(|l| tokenize_line(l, config))
        .collect();
    TokenizedCorpus::new(config.language.clone(), documents)
}

/// Tokenizes a byte stream, one document per line. Invalid UTF-8 is reported
/// with the absolute byte offset of the first bad byte.
pub fn tokenize_reader<R: BufRead>(
    mut reader: R,
    config: &TokenizerConfig,
) -> Result<TokenizedCorpus, TextError> {
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    let mut offset = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|e| TextError::Decoding {
            offset: offset + e.valid_up_to(),
        })?;
        lines.push(line.trim_end_matches(['\n', '\r']).to_string());
        offset += n;
    }
    let documents = lines
        .par_iter()
        .map(|l| tokenize_line(l, config))
        .collect();
    Ok(TokenizedCorpus::new(config.language.clone(), documents))
}

pub fn tokenize_file(path: &Path, config: &TokenizerConfig) -> Result<TokenizedCorpus, TextError> {
    let file = File::open(path).map_err(|e| TextError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    tokenize_reader(BufReader::new(file), config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseParams {
    pub delta: f64,
    pub threshold: f64,
    pub passes: usize,
    pub joiner: String,
}

impl Default for PhraseParams {
    fn default() -> Self {
        PhraseParams {
            delta: 5.0,
            threshold: 10.0,
            passes: 2,
            joiner: "_".into(),
        }
    }
}

/// Bigrams selected for merging, with the score they had when selected.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseModel {
    bigrams: HashMap<(String, String), f64>,
    pub delta: f64,
    pub threshold: f64,
    pub joiner: String,
}

impl PhraseModel {
    pub fn empty(params: &PhraseParams) -> Self {
        PhraseModel {
            bigrams: HashMap::new(),
            delta: params.delta,
            threshold: params.threshold,
            joiner: params.joiner.clone(),
        }
    }

    pub fn score(&self, a: &str, b: &str) -> Option<f64> {
        self.bigrams.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.score(a, b).is_some()
    }

    pub fn len(&self) -> usize {
        self.bigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty()
    }

    /// Bigrams in lexicographic order.
    pub fn bigrams(&self) -> Vec<(&str, &str, f64)> {
        let mut v: Vec<_> = self
            .bigrams
            .iter()
            .map(|((a, b), s)| (a.as_str(), b.as_str(), *s))
            .collect();
        v.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        v
    }

    /// TSV: `token_a<TAB>token_b<TAB>score`, preceded by `#` parameter lines.
    pub fn write_tsv<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "# delta\t{}", self.delta)?;
        writeln!(w, "# threshold\t{}", self.threshold)?;
        writeln!(w, "# joiner\t{}", self.joiner)?;
        for (a, b, s) in self.bigrams() {
            writeln!(w, "{a}\t{b}\t{s}")?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, TextError> {
        let mut model = PhraseModel::empty(&PhraseParams::default());
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |msg: &str| TextError::ModelParse {
                line: lineno,
                msg: msg.to_string(),
            };
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.trim_start().splitn(2, '\t');
                let key = parts.next().unwrap_or("");
                let value = parts.next().unwrap_or("");
                match key {
                    "delta" => model.delta = value.parse().map_err(|_| bad("bad delta"))?,
                    "threshold" => {
                        model.threshold = value.parse().map_err(|_| bad("bad threshold"))?
                    }
                    "joiner" => model.joiner = value.to_string(),
                    _ => {}
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected three tab-separated fields"));
            }
            let score: f64 = fields[2].parse().map_err(|_| bad("bad score"))?;
            model
                .bigrams
                .insert((fields[0].to_string(), fields[1].to_string()), score);
        }
        Ok(model)
    }
}

/// Discounted bigram score: `(count(ab) − delta) / (count(a)·count(b)) · total`.
pub fn phrase_score(count_ab: u64, count_a: u64, count_b: u64, total: u64, delta: f64) -> f64 {
    (count_ab as f64 - delta) / (count_a as f64 * count_b as f64) * total as f64
}

/// Learns frequent multiword expressions. Each pass scores the bigrams of the
/// current corpus, keeps those scoring above the threshold and merges them
/// before the next pass, so `passes` passes can build phrases of up to
/// `2^passes` tokens.
pub fn learn_phrases(corpus: &TokenizedCorpus, params: &PhraseParams) -> Result<PhraseModel, TextError> {
    if params.passes == 0 {
        return Err(TextError::InvalidParams("passes must be at least 1".into()));
    }
    if !(params.delta >= 0.0) {
        return Err(TextError::InvalidParams("delta must be non-negative".into()));
    }
    if params.joiner.is_empty() || params.joiner.chars().any(char::is_whitespace) {
        return Err(TextError::InvalidParams(
            "joiner must be non-empty and contain no whitespace".into(),
        ));
    }
    if corpus.total_tokens() == 0 {
        return Err(TextError::EmptyCorpus);
    }

    let mut model = PhraseModel::empty(params);
    let mut current = corpus.clone();
    for _ in 0..params.passes {
        let total = current.total_tokens();
        let mut bigram_counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for doc in current.documents() {
            for pair in doc.windows(2) {
                *bigram_counts.entry((&pair[0], &pair[1])).or_insert(0) += 1;
            }
        }
        let mut pass = PhraseModel::empty(params);
        for ((a, b), n) in bigram_counts {
            let s = phrase_score(n, current.count(a), current.count(b), total, params.delta);
            if s > params.threshold && s.is_finite() {
                pass.bigrams.insert((a.to_string(), b.to_string()), s);
            }
        }
        if pass.is_empty() {
            break;
        }
        let next = merge_once(&current, &pass);
        for (k, v) in pass.bigrams {
            model.bigrams.entry(k).or_insert(v);
        }
        current = next;
    }
    Ok(model)
}

fn merge_once(corpus: &TokenizedCorpus, model: &PhraseModel) -> TokenizedCorpus {
    let documents = corpus
        .documents()
        .iter()
        .map(|doc| merge_tokens(doc, model))
        .collect();
    TokenizedCorpus::new(corpus.language().to_string(), documents)
}

fn merge_tokens(doc: &[String], model: &PhraseModel) -> Vec<String> {
    let mut out = Vec::with_capacity(doc.len());
    let mut i = 0;
    while i < doc.len() {
        if i + 1 < doc.len() && model.contains(&doc[i], &doc[i + 1]) {
            out.push(format!("{}{}{}", doc[i], model.joiner, doc[i + 1]));
            i += 2;
        } else {
            out.push(doc[i].clone());
            i += 1;
        }
    }
    out
}

/// Greedy left-to-right merging, repeated until no bigram of the model
/// applies, so multi-pass phrases are rebuilt from their parts.
pub fn apply_phrases(corpus: &TokenizedCorpus, model: &PhraseModel) -> TokenizedCorpus {
    if model.is_empty() {
        return corpus.clone();
    }
    let documents = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut cur = doc.clone();
            loop {
                let next = merge_tokens(&cur, model);
                if next.len() == cur.len() {
                    break cur;
                }
                cur = next;
            }
        })
        .collect();
    TokenizedCorpus::new(corpus.language().to_string(), documents)
}
