//! Supervised alignment of two monolingual spaces.
//!
//! Anchor translation pairs are looked up in both spaces and stacked into two
//! `|P| × d` matrices `X` (source) and `Y` (target). The orthogonal map
//! minimizing `‖XL − Y‖_F` is `L = U Vᵀ` where `U Σ Vᵀ` is the SVD of the
//! `d × d` matrix `XᵀY`. The source space is then rotated by `L` and stacked
//! with the target space into one bilingual space.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::linalg::{dot, svd, Matrix};
use crate::space::{
    read_word2vec, sidecar_path, write_word2vec, EmbeddingSpace, SpaceError, SpaceMeta, TextFormat,
    WordIndex,
};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no anchor pair survived filtering ({total} pairs given, {missing_source} missing on the source side, {missing_target} missing on the target side)")]
    NoAnchors {
        total: usize,
        missing_source: usize,
        missing_target: usize,
    },
    #[error("dimension mismatch: source has {source_dim}, target has {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("{0} space is not normalized")]
    NotNormalized(String),
    #[error("source and target spaces share the language tag {0:?}")]
    SameLanguage(String),
    #[error("anchor word {word:?} not found in the {side} space")]
    MissingAnchorWord { word: String, side: &'static str },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Ordered translation pairs `(source_word, target_word)` used as
/// alignment supervision. Exact duplicate pairs are dropped on construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnchorSet {
    pairs: Vec<(String, String)>,
    pub provenance: String,
}

impl AnchorSet {
    pub fn new(pairs: Vec<(String, String)>, provenance: impl Into<String>) -> Self {
        let mut seen = HashSet::new();
        let pairs = pairs
            .into_iter()
            .filter(|p| seen.insert(p.clone()))
            .collect();
        AnchorSet {
            pairs,
            provenance: provenance.into(),
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads `source<TAB>target` lines; `#` lines and blank lines are skipped.
    pub fn read_tsv<R: BufRead>(reader: R, provenance: &str) -> Result<Self, AlignError> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AlignError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(t), None) if !s.is_empty() && !t.is_empty() => {
                    pairs.push((s.to_string(), t.to_string()))
                }
                _ => {
                    return Err(AlignError::Parse {
                        line: i + 1,
                        msg: "expected source<TAB>target".into(),
                    })
                }
            }
        }
        Ok(AnchorSet::new(pairs, provenance))
    }

    pub fn load(path: &Path) -> Result<Self, AlignError> {
        let file = File::open(path).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::read_tsv(BufReader::new(file), &path.display().to_string())
    }
}

/// Outcome of [`filter_anchors`], kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterReport {
    pub total: usize,
    pub kept: usize,
    pub missing_source: usize,
    pub missing_target: usize,
}

/// Keeps the pairs whose words exist in both spaces, preserving order.
pub fn filter_anchors(
    anchors: &AnchorSet,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
) -> Result<(AnchorSet, FilterReport), AlignError> {
    let mut missing_source = 0;
    let mut missing_target = 0;
    let mut kept = Vec::new();
    for (s, t) in anchors.pairs() {
        let has_s = source.contains(s);
        let has_t = target.contains(t);
        missing_source += usize::from(!has_s);
        missing_target += usize::from(!has_t);
        if has_s && has_t {
            kept.push((s.clone(), t.clone()));
        }
    }
    let report = FilterReport {
        total: anchors.len(),
        kept: kept.len(),
        missing_source,
        missing_target,
    };
    if kept.is_empty() {
        return Err(AlignError::NoAnchors {
            total: report.total,
            missing_source,
            missing_target,
        });
    }
    Ok((AnchorSet::new(kept, anchors.provenance.clone()), report))
}

/// Orthogonal map from the source space into the target space.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    pub matrix: Matrix,
    pub source_language: String,
    pub target_language: String,
    pub anchor_count: usize,
}

impl AlignmentMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn orthogonality_defect(&self) -> f64 {
        self.matrix.orthogonality_defect()
    }

    /// Maps one source row vector: `v · L`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.left_mul_vec(v)
    }

    /// Text form: a line with `d`, then `d` rows of `d` floats.
    pub fn write_text<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        let d = self.dim();
        writeln!(w, "{d}")?;
        for row in self.matrix.iter_rows() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, AlignError> {
        let mut lines = reader.lines();
        let bad = |line: usize, msg: String| AlignError::Parse { line, msg };
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "missing dimension line".into()))?
            .map_err(|e| bad(1, e.to_string()))?;
        let d: usize = header
            .trim()
            .parse()
            .map_err(|_| bad(1, format!("bad dimension {header:?}")))?;
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            let line = lines
                .next()
                .ok_or_else(|| bad(i + 2, "missing matrix row".into()))?
                .map_err(|e| bad(i + 2, e.to_string()))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(i + 2, format!("bad value {t:?}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != d {
                return Err(bad(i + 2, format!("row has {} values, expected {d}", row.len())));
            }
            data.extend(row);
        }
        Ok(AlignmentMatrix {
            matrix: Matrix::from_vec(d, d, data),
            source_language: "und".into(),
            target_language: "und".into(),
            anchor_count: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AlignError> {
        let file = File::create(path).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_text(file).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AlignError> {
        let file = File::open(path).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::read_text(BufReader::new(file))
    }
}

fn check_pair(source: &EmbeddingSpace, target: &EmbeddingSpace) -> Result<(), AlignError> {
    if source.dim() != target.dim() {
        return Err(AlignError::DimensionMismatch {
            source_dim: source.dim(),
            target_dim: target.dim(),
        });
    }
    if !source.is_normalized() {
        return Err(AlignError::NotNormalized("source".into()));
    }
    if !target.is_normalized() {
        return Err(AlignError::NotNormalized("target".into()));
    }
    Ok(())
}

/// Solves the orthogonal Procrustes problem over the anchor pairs.
///
/// Every pair contributes one row to each stacked subspace, so a source word
/// with several translations is counted once per pair.
pub fn solve_procrustes(
    anchors: &AnchorSet,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
) -> Result<AlignmentMatrix, AlignError> {
    check_pair(source, target)?;
    if anchors.is_empty() {
        return Err(AlignError::NoAnchors {
            total: 0,
            missing_source: 0,
            missing_target: 0,
        });
    }
    let d = source.dim();

    // M = Xᵀ Y accumulated pair by pair.
    let mut m = Matrix::zeros(d, d);
    for (s, t) in anchors.pairs() {
        let x = source.vector(s).ok_or_else(|| AlignError::MissingAnchorWord {
            word: s.clone(),
            side: "source",
        })?;
        let y = target.vector(t).ok_or_else(|| AlignError::MissingAnchorWord {
            word: t.clone(),
            side: "target",
        })?;
        for i in 0..d {
            let xi = x[i];
            let row = m.row_mut(i);
            for j in 0..d {
                row[j] += xi * y[j];
            }
        }
    }

    let dec = svd(&m);
    let matrix = dec.u.matmul(&dec.v.transpose());
    Ok(AlignmentMatrix {
        matrix,
        source_language: source.language().to_string(),
        target_language: target.language().to_string(),
        anchor_count: anchors.len(),
    })
}

/// Union of the mapped source space and the target space. Rows are the
/// source words (in source order) followed by the target words; each row
/// carries its language tag.
#[derive(Debug, Clone)]
pub struct BilingualSpace {
    source_language: String,
    target_language: String,
    index: WordIndex,
    vectors: Matrix,
}

impl BilingualSpace {
    pub fn source_language(&self) -> &str {
        &self.source_language
    }

    pub fn target_language(&self) -> &str {
        &self.target_language
    }

    pub fn languages(&self) -> [&str; 2] {
        [&self.source_language, &self.target_language]
    }

    /// The language that is not `language`, if `language` is one of the two.
    pub fn other_language(&self, language: &str) -> Option<&str> {
        if language == self.source_language {
            Some(&self.target_language)
        } else if language == self.target_language {
            Some(&self.source_language)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn index(&self) -> &WordIndex {
        &self.index
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn lookup(&self, language: &str, word: &str) -> Option<usize> {
        self.index.get(language, word)
    }

    pub fn word(&self, row: usize) -> &str {
        self.index.word(row)
    }

    pub fn language_of(&self, row: usize) -> &str {
        self.index.language(row)
    }

    /// Number of rows tagged with `language`.
    pub fn count_language(&self, language: &str) -> usize {
        (0..self.len()).filter(|&r| self.language_of(r) == language).count()
    }

    /// Cosine of two tagged words (rows are unit length).
    pub fn cosine(&self, a: (&str, &str), b: (&str, &str)) -> Result<f64, SpaceError> {
        let oov = |(lang, word): (&str, &str)| SpaceError::OutOfVocabulary {
            word: word.to_string(),
            language: lang.to_string(),
        };
        let ia = self.lookup(a.0, a.1).ok_or_else(|| oov(a))?;
        let ib = self.lookup(b.0, b.1).ok_or_else(|| oov(b))?;
        Ok(dot(self.row(ia), self.row(ib)))
    }

    /// Builds a bilingual space from already-aligned rows. Used by loaders
    /// and by synthetic fixtures.
    pub fn from_tagged_rows(
        source_language: &str,
        target_language: &str,
        rows: Vec<(String, String, Vec<f64>)>,
    ) -> Result<Self, AlignError> {
        if source_language == target_language {
            return Err(AlignError::SameLanguage(source_language.to_string()));
        }
        let dim = rows.first().map_or(0, |r| r.2.len());
        let mut index = WordIndex::new();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (lang, word, v) in rows {
            if v.len() != dim {
                return Err(SpaceError::Shape {
                    expected: dim,
                    got: v.len(),
                }
                .into());
            }
            index.push(&lang, &word)?;
            data.extend(v);
        }
        let n = index.len();
        Ok(BilingualSpace {
            source_language: source_language.to_string(),
            target_language: target_language.to_string(),
            index,
            vectors: Matrix::from_vec(n, dim, data),
        })
    }

    /// word2vec text with `tag:word` tokens.
    pub fn write_text<W: Write>(&self, writer: W) -> io::Result<()> {
        let rows = (0..self.len()).map(|i| {
            (
                format!("{}:{}", self.language_of(i), self.word(i)),
                self.row(i),
            )
        });
        write_word2vec(writer, self.dim(), self.len(), rows)
    }

    pub fn save(&self, path: &Path) -> Result<(), AlignError> {
        let file = File::create(path).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_text(file).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        SpaceMeta {
            language: format!("{}+{}", self.source_language, self.target_language),
            normalized: true,
            config: None,
        }
        .write(&sidecar_path(path))?;
        Ok(())
    }

    /// Reads a bilingual space. The first tag seen is the source language,
    /// the other one the target.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, AlignError> {
        let raw = read_word2vec(reader, TextFormat::Word2Vec)?;
        let mut languages: Vec<String> = Vec::new();
        let mut rows = Vec::with_capacity(raw.words.len());
        for (i, token) in raw.words.into_iter().enumerate() {
            let (lang, word) = token.split_once(':').ok_or_else(|| AlignError::Parse {
                line: i + 2,
                msg: format!("token {token:?} has no language prefix"),
            })?;
            if !languages.iter().any(|l| l == lang) {
                languages.push(lang.to_string());
            }
            let v = raw.data[i * raw.dim..(i + 1) * raw.dim].to_vec();
            rows.push((lang.to_string(), word.to_string(), v));
        }
        if languages.len() != 2 {
            return Err(AlignError::Parse {
                line: 1,
                msg: format!("expected exactly two languages, found {}", languages.len()),
            });
        }
        Self::from_tagged_rows(&languages[0], &languages[1], rows)
    }

    pub fn load(path: &Path) -> Result<Self, AlignError> {
        let file = File::open(path).map_err(|e| AlignError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::read_text(BufReader::new(file))
    }
}

/// Applies `L` to every source row and stacks the result with the target.
pub fn build_bilingual_space(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    alignment: &AlignmentMatrix,
) -> Result<BilingualSpace, AlignError> {
    check_pair(source, target)?;
    if alignment.dim() != source.dim() {
        return Err(AlignError::DimensionMismatch {
            source_dim: source.dim(),
            target_dim: alignment.dim(),
        });
    }
    if source.language() == target.language() {
        return Err(AlignError::SameLanguage(source.language().to_string()));
    }
    let mut rows = Vec::with_capacity(source.len() + target.len());
    for (i, w) in source.words().iter().enumerate() {
        rows.push((
            source.language().to_string(),
            w.clone(),
            alignment.apply(source.row(i)),
        ));
    }
    for (i, w) in target.words().iter().enumerate() {
        rows.push((target.language().to_string(), w.clone(), target.row(i).to_vec()));
    }
    BilingualSpace::from_tagged_rows(source.language(), target.language(), rows)
}
