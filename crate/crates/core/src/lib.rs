//! Cross-lingual consumer health vocabulary expansion.
//!
//! The pipeline learns one skip-gram space per language, aligns the two with
//! an orthogonal map fitted on anchor translations, and expands seed terms
//! into ranked candidates of the other language.
//!
//! * [`text`]: tokenization, stopwords and phrase merging
//! * [`skipgram`]: skip-gram negative-sampling training
//! * [`space`]: embedding storage, word2vec text IO and cosine
//! * [`alignment`]: anchors, Procrustes solution and bilingual space
//! * [`expansion`]: k-NN, threshold and dynamic-threshold retrieval
//! * [`evaluation`]: MRR, precision/recall/F1, Wilcoxon, method comparison

pub mod alignment;
pub mod evaluation;
pub mod expansion;
pub mod linalg;
pub mod skipgram;
pub mod space;
pub mod text;

pub use alignment::{
    build_bilingual_space, filter_anchors, solve_procrustes, AlignmentMatrix, AnchorSet,
    BilingualSpace,
};
pub use evaluation::{GroundTruth, Method};
pub use expansion::{Candidate, DynamicThresholdPolicy, Query};
pub use skipgram::TrainConfig;
pub use space::{load_space, EmbeddingSpace, TextFormat};
pub use text::{TokenizedCorpus, TokenizerConfig};
