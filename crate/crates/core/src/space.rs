//! Storage, indexing and text serialization for word embedding spaces.
//!
//! The canonical on-disk form is the word2vec text format: a header line
//! `<vocab_count> <dim>` followed by one line per word, `word v1 ... vd`.
//! Spaces written by this crate also get a JSON sidecar (`<path>.meta.json`)
//! carrying the language tag, the normalization flag and the training config.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm, Matrix};

/// Tolerance for treating a row as unit length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate word {word:?} (language {language})")]
    DuplicateWord { word: String, language: String },
    #[error("word {word:?} is not in the {language} vocabulary")]
    OutOfVocabulary { word: String, language: String },
    #[error("row for word {0:?} has zero norm")]
    ZeroNorm(String),
    #[error("vector data has {got} values, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("bad metadata sidecar {path}: {msg}")]
    Metadata { path: PathBuf, msg: String },
}

impl SpaceError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        SpaceError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Bidirectional word ↔ row mapping, keyed by `(language, word)` so identical
/// surface forms from different languages stay distinct.
#[derive(Debug, Clone, Default)]
pub struct WordIndex {
    languages: Vec<String>,
    words: Vec<String>,
    language_of: Vec<u16>,
    forward: Vec<HashMap<String, usize>>,
}

impl WordIndex {
    pub fn new() -> Self {
        Self::default()
    }

    fn language_id(&mut self, language: &str) -> u16 {
        match self.languages.iter().position(|l| l == language) {
            Some(i) => i as u16,
            None => {
                self.languages.push(language.to_string());
                self.forward.push(HashMap::new());
                (self.languages.len() - 1) as u16
            }
        }
    }

    /// Appends a word and returns its row id.
    pub fn push(&mut self, language: &str, word: &str) -> Result<usize, SpaceError> {
        let lang = self.language_id(language);
        let row = self.words.len();
        let map = &mut self.forward[lang as usize];
        if map.contains_key(word) {
            return Err(SpaceError::DuplicateWord {
                word: word.to_string(),
                language: language.to_string(),
            });
        }
        map.insert(word.to_string(), row);
        self.words.push(word.to_string());
        self.language_of.push(lang);
        Ok(row)
    }

    pub fn get(&self, language: &str, word: &str) -> Option<usize> {
        let lang = self.languages.iter().position(|l| l == language)?;
        self.forward[lang].get(word).copied()
    }

    pub fn word(&self, row: usize) -> &str {
        &self.words[row]
    }

    pub fn language(&self, row: usize) -> &str {
        &self.languages[self.language_of[row] as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A monolingual word embedding space.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    language: String,
    index: WordIndex,
    vectors: Matrix,
    normalized: bool,
}

impl EmbeddingSpace {
    /// Builds a space from a vocabulary and row-major vector data.
    pub fn new(
        language: impl Into<String>,
        words: Vec<String>,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self, SpaceError> {
        let language = language.into();
        if data.len() != words.len() * dim {
            return Err(SpaceError::Shape {
                expected: words.len() * dim,
                got: data.len(),
            });
        }
        let mut index = WordIndex::new();
        for w in &words {
            index.push(&language, w)?;
        }
        Ok(EmbeddingSpace {
            language,
            index,
            vectors: Matrix::from_vec(words.len(), dim, data),
            normalized: false,
        })
    }

    pub fn from_rows(
        language: impl Into<String>,
        rows: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, SpaceError> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut words = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            if v.len() != dim {
                return Err(SpaceError::Shape {
                    expected: dim,
                    got: v.len(),
                });
            }
            words.push(w);
            data.extend(v);
        }
        Self::new(language, words, dim, data)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn words(&self) -> &[String] {
        self.index.words()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(&self.language, word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index_of(word).is_some()
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vectors.row(i))
    }

    fn require(&self, word: &str) -> Result<usize, SpaceError> {
        self.index_of(word)
            .ok_or_else(|| SpaceError::OutOfVocabulary {
                word: word.to_string(),
                language: self.language.clone(),
            })
    }

    /// Divides every row by its Euclidean norm. A space that is already
    /// flagged as normalized is returned unchanged.
    pub fn normalize(&self) -> Result<EmbeddingSpace, SpaceError> {
        if self.normalized {
            return Ok(self.clone());
        }
        let mut vectors = self.vectors.clone();
        for i in 0..vectors.rows() {
            let row = vectors.row_mut(i);
            let n = norm(row);
            if n == 0.0 || !n.is_finite() {
                return Err(SpaceError::ZeroNorm(self.index.word(i).to_string()));
            }
            row.iter_mut().for_each(|x| *x /= n);
        }
        Ok(EmbeddingSpace {
            language: self.language.clone(),
            index: self.index.clone(),
            vectors,
            normalized: true,
        })
    }

    /// Cosine similarity of two words. For normalized spaces this is the
    /// plain dot product of the rows.
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64, SpaceError> {
        let (ia, ib) = (self.require(a)?, self.require(b)?);
        let (va, vb) = (self.row(ia), self.row(ib));
        if self.normalized {
            Ok(dot(va, vb))
        } else {
            Ok(dot(va, vb) / (norm(va) * norm(vb)))
        }
    }

    /// Marks the space as normalized without touching the data, after
    /// checking that every row is unit length.
    fn with_normalized_flag(mut self) -> Self {
        self.normalized = self
            .vectors
            .iter_rows()
            .all(|r| (norm(r) - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        self
    }

    pub fn write_text<W: Write>(&self, writer: W) -> io::Result<()> {
        let rows = (0..self.len()).map(|i| (self.index.word(i).to_string(), self.row(i)));
        write_word2vec(writer, self.dim(), self.len(), rows)
    }

    /// Writes the space in word2vec text format plus the metadata sidecar.
    pub fn save(&self, path: &Path, config: Option<serde_json::Value>) -> Result<(), SpaceError> {
        let file = File::create(path).map_err(|e| SpaceError::io(path, e))?;
        self.write_text(BufWriter::new(file))
            .map_err(|e| SpaceError::io(path, e))?;
        let meta = SpaceMeta {
            language: self.language.clone(),
            normalized: self.normalized,
            config,
        };
        meta.write(&sidecar_path(path))
    }
}

/// Input layout accepted by [`load_space`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextFormat {
    /// Header line with counts, as written by word2vec.
    #[default]
    Word2Vec,
    /// No header; every line is a word followed by its vector (GloVe).
    Headerless,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceMeta {
    pub language: String,
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl SpaceMeta {
    pub fn write(&self, path: &Path) -> Result<(), SpaceError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SpaceError::Metadata {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text + "\n").map_err(|e| SpaceError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Option<SpaceMeta>, SpaceError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|e| SpaceError::io(path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| SpaceError::Metadata {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub(crate) fn write_word2vec<'a, W: Write>(
    writer: W,
    dim: usize,
    count: usize,
    rows: impl Iterator<Item = (String, &'a [f64])>,
) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{count} {dim}")?;
    for (word, v) in rows {
        w.write_all(word.as_bytes())?;
        for x in v {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Raw rows of a word2vec-style text file.
pub(crate) struct RawVectors {
    pub words: Vec<String>,
    pub dim: usize,
    pub data: Vec<f64>,
}

pub(crate) fn read_word2vec<R: BufRead>(reader: R, format: TextFormat) -> Result<RawVectors, SpaceError> {
    let mut lines = reader.lines().enumerate();
    let mut expected: Option<(usize, usize)> = None;

    if format == TextFormat::Word2Vec {
        let (_, header) = lines.next().ok_or(SpaceError::Parse {
            line: 1,
            msg: "missing header line".into(),
        })?;
        let header = header.map_err(|e| SpaceError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let mut parts = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize, SpaceError> {
            parts
                .next()
                .ok_or_else(|| SpaceError::Parse {
                    line: 1,
                    msg: format!("header is missing the {name}"),
                })?
                .parse::<usize>()
                .map_err(|e| SpaceError::Parse {
                    line: 1,
                    msg: format!("bad {name} in header: {e}"),
                })
        };
        let count = field("vocabulary count")?;
        let dim = field("dimension")?;
        if parts.next().is_some() {
            return Err(SpaceError::Parse {
                line: 1,
                msg: "header must have exactly two fields".into(),
            });
        }
        expected = Some((count, dim));
    }

    let mut words = Vec::new();
    let mut data = Vec::new();
    let mut dim = expected.map(|(_, d)| d);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| SpaceError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line");
        let before = data.len();
        for p in parts {
            let x: f64 = p.parse().map_err(|_| SpaceError::Parse {
                line: lineno,
                msg: format!("cannot parse {p:?} as a number"),
            })?;
            data.push(x);
        }
        let got = data.len() - before;
        match dim {
            Some(d) if d != got => {
                return Err(SpaceError::Parse {
                    line: lineno,
                    msg: format!("row for {word:?} has {got} values, expected {d}"),
                })
            }
            Some(_) => {}
            None => dim = Some(got),
        }
        words.push(word.to_string());
    }

    if let Some((count, _)) = expected {
        if count != words.len() {
            return Err(SpaceError::Parse {
                line: 1,
                msg: format!("header announces {count} words, file has {}", words.len()),
            });
        }
    }
    Ok(RawVectors {
        words,
        dim: dim.unwrap_or(0),
        data,
    })
}

/// Loads a monolingual space. The language tag and normalization flag come
/// from the sidecar when present; otherwise the language is `und` and the
/// flag is set only if every row is unit length.
pub fn load_space(path: &Path, format: TextFormat) -> Result<EmbeddingSpace, SpaceError> {
    let file = File::open(path).map_err(|e| SpaceError::io(path, e))?;
    let raw = read_word2vec(BufReader::new(file), format)?;
    let meta = SpaceMeta::read(&sidecar_path(path))?;
    let language = meta.as_ref().map_or("und", |m| m.language.as_str());
    let space = EmbeddingSpace::new(language, raw.words, raw.dim, raw.data)?;
    Ok(match meta {
        Some(m) if m.normalized => space.with_normalized_flag(),
        Some(_) => space,
        None => space.with_normalized_flag(),
    })
}

/// Parses a space from an in-memory reader (no sidecar).
pub fn read_space<R: BufRead>(
    reader: R,
    format: TextFormat,
    language: &str,
) -> Result<EmbeddingSpace, SpaceError> {
    let raw = read_word2vec(reader, format)?;
    Ok(EmbeddingSpace::new(language, raw.words, raw.dim, raw.data)?.with_normalized_flag())
}
