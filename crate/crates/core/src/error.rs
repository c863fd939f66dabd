use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error")]
    Stream(#[from] std::io::Error),

    #[error("line {line}: malformed header {found:?}, expected \"<count> <dim>\"")]
    MalformedHeader { line: usize, found: String },

    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: cannot parse {token:?} as a number")]
    InvalidNumber { line: usize, token: String },

    #[error("line {line}: non-finite value for {word:?}")]
    NonFinite { line: usize, word: String },

    #[error("header declares {declared} entries but {found} were read")]
    CountMismatch { declared: usize, found: usize },

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("zero-norm vector for {word:?}")]
    ZeroNorm { word: String },

    #[error("vector for {word:?} is not unit length (norm {norm})")]
    NonUnitVector { word: String, norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("language {0:?} appears in more than one space")]
    DuplicateLanguage(String),

    #[error("duplicate entry ({lang}, {word:?})")]
    DuplicateWord { lang: String, word: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("k = {k} must be smaller than the node count {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("modularity is undefined for a graph whose edge weight belongs to a single language")]
    SingleLanguage,

    #[error("word {word:?} is not in the {lang} vocabulary")]
    OutOfVocabulary { lang: String, word: String },

    #[error("lexicon languages {found} do not match {expected}")]
    LanguageMismatch { expected: String, found: String },

    #[error("no evaluable test pairs")]
    NoEvaluablePairs,

    #[error("every seed word is out of vocabulary")]
    AllSeedsOutOfVocabulary,

    #[error("no lexicon pair has both words in vocabulary")]
    NoPairs,

    #[error("cross-covariance matrix is zero")]
    DegenerateCovariance,

    #[error("dictionary induction produced no pairs")]
    EmptyDictionary,

    #[error("unknown validation metric {0:?} (expected csls10k or mod10k)")]
    UnknownMetric(String),

    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least {required} observations, found {found}")]
    TooFewObservations { required: usize, found: usize },

    #[error("input is constant, correlation is undefined")]
    ConstantInput,

    #[error("feature {0:?} has zero variance")]
    ZeroVariance(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("k = {k}, t = {t}: {source}")]
    Sweep {
        k: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True when the inputs were well formed but the requested quantity is
    /// undefined on them (single language, nothing to evaluate, constant
    /// columns, empty induced dictionary).
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::EmptyGraph
            | Error::SingleLanguage
            | Error::NoEvaluablePairs
            | Error::AllSeedsOutOfVocabulary
            | Error::NoPairs
            | Error::DegenerateCovariance
            | Error::EmptyDictionary
            | Error::ConstantInput
            | Error::ZeroVariance(_) => true,
            Error::Sweep { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }
}
