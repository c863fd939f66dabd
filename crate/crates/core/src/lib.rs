//! Measures how strongly a cross-lingual word embedding clusters by language.
//!
//! Words become nodes of a k-nearest-neighbor lexical graph whose edges carry
//! clamped cosine similarities; the language labels of the nodes define the
//! groups of a weighted Newman modularity. Low modularity means translations
//! and related words sit next to each other regardless of language.
//!
//! Around that metric the crate provides the pieces needed to use it:
//!
//! * [`embedding`] and [`lexicon`]: text-format vector files and bilingual
//!   dictionaries.
//! * [`ann`]: a random-projection forest for approximate neighbor search.
//! * [`graph`] and [`modularity`]: the lexical graph and the metric itself.
//! * [`csls`]: CSLS retrieval, precision@1 lexicon induction and seed-word
//!   expansion.
//! * [`mapping`]: least-squares and orthogonal Procrustes mappings, and the
//!   refinement loop with metric-driven model selection.
//! * [`stats`]: correlation coefficients, the standardized regression
//!   ablation and the hyperparameter sweep.

pub mod ann;
pub mod csls;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod lexicon;
pub mod mapping;
pub mod modularity;
pub mod stats;
pub mod vector;

pub use ann::{exact_knn, Neighbor, RpForest};
pub use csls::{BliResult, CslsContext, CslsOptions};
pub use embedding::{EmbeddingSpace, Lang, PreprocessStep};
pub use error::{Error, Result};
pub use graph::{GraphOptions, KnnMethod, LexicalGraph, Symmetrization};
pub use lexicon::Lexicon;
pub use mapping::{MappingMatrix, RefinementTrace, ValidationMetric};
pub use modularity::{modularity, ModularityReport};

/// Neighbors per node in the lexical graph.
pub const DEFAULT_K: usize = 3;
/// Trees in the random-projection forest.
pub const DEFAULT_TREES: usize = 450;
/// Maximum number of points stored in a forest leaf.
pub const DEFAULT_LEAF_CAPACITY: usize = 32;
/// Cross-lingual neighborhood size for the CSLS penalty terms.
pub const DEFAULT_CSLS_KAPPA: usize = 10;
/// Per-language frequency cut-off for the validation metrics.
pub const DEFAULT_FREQUENCY_LIMIT: usize = 10_000;
