use std::path::PathBuf;

use clap::{Args, ValueEnum};
use langmod::{GraphOptions, KnnMethod, Symmetrization};
use serde::Serialize;

/// `lang=path` pair naming an embedding file and its language code.
#[derive(Clone, Debug, Serialize)]
pub struct EmbSpec {
    pub lang: String,
    pub path: PathBuf,
}

pub fn parse_emb_spec(s: &str) -> Result<EmbSpec, String> {
    let (lang, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected lang=path, got {s:?}"))?;
    if lang.is_empty() || path.is_empty() {
        return Err(format!("expected lang=path, got {s:?}"));
    }
    Ok(EmbSpec {
        lang: lang.to_owned(),
        path: PathBuf::from(path),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnChoice {
    Exact,
    Forest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetrizeChoice {
    Union,
    Mutual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityChoice {
    Csls,
    Cosine,
}

/// Loading and preprocessing of embedding files.
#[derive(Args, Clone, Debug, Serialize)]
pub struct InputArgs {
    /// Comma-separated preprocessing chain applied to each language
    /// separately (`unit`, `center`; `none` disables it).
    #[arg(long, default_value = "unit,center,unit")]
    pub preprocess: String,

    /// Lowercase vocabulary and lexicon words (first occurrence wins on
    /// collisions).
    #[arg(long)]
    pub lowercase: bool,
}

/// Random-projection forest parameters.
#[derive(Args, Clone, Debug, Serialize)]
pub struct ForestArgs {
    #[arg(long, default_value_t = langmod::DEFAULT_TREES)]
    pub trees: usize,

    #[arg(long = "leaf-size", default_value_t = langmod::DEFAULT_LEAF_CAPACITY)]
    pub leaf_size: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct GraphArgs {
    /// Neighbors per word in the lexical graph.
    #[arg(long, default_value_t = langmod::DEFAULT_K)]
    pub k: usize,

    #[arg(long, value_enum, default_value_t = KnnChoice::Forest)]
    pub knn: KnnChoice,

    #[arg(long, value_enum, default_value_t = SymmetrizeChoice::Union)]
    pub symmetrize: SymmetrizeChoice,

    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
}

impl GraphArgs {
    pub fn options(&self) -> GraphOptions {
        GraphOptions {
            k: self.k,
            knn: match self.knn {
                KnnChoice::Exact => KnnMethod::Exact,
                KnnChoice::Forest => KnnMethod::Forest {
                    trees: self.forest.trees,
                    leaf_capacity: self.forest.leaf_size,
                    seed: self.forest.seed,
                },
            },
            symmetrization: match self.symmetrize {
                SymmetrizeChoice::Union => Symmetrization::Union,
                SymmetrizeChoice::Mutual => Symmetrization::Mutual,
            },
        }
    }
}

/// Words per language kept for graph and metric construction; 0 keeps all.
#[derive(Args, Clone, Debug, Serialize)]
pub struct LimitArgs {
    #[arg(long, default_value_t = langmod::DEFAULT_FREQUENCY_LIMIT)]
    pub limit: usize,
}

impl LimitArgs {
    pub fn get(&self) -> Option<usize> {
        (self.limit > 0).then_some(self.limit)
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ModularityArgs {
    /// Embedding file as lang=path; repeat once per language.
    #[arg(long, value_parser = parse_emb_spec, required = true)]
    pub emb: Vec<EmbSpec>,

    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub limit: LimitArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    /// Report path (JSON); stdout when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,

    /// Also write the graph's edge list (TSV) here.
    #[arg(long)]
    #[serde(skip)]
    pub edges: Option<PathBuf>,
}

/// Source and target embeddings plus an optional mapping.
#[derive(Args, Clone, Debug, Serialize)]
pub struct PairArgs {
    #[arg(long, value_parser = parse_emb_spec)]
    pub src: EmbSpec,

    #[arg(long, value_parser = parse_emb_spec)]
    pub tgt: EmbSpec,

    /// Mapping matrix applied to source vectors.
    #[arg(long)]
    pub mapping: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct CslsArgs {
    /// Neighborhood size of the CSLS penalty.
    #[arg(long = "csls-k", default_value_t = langmod::DEFAULT_CSLS_KAPPA)]
    pub csls_k: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
}

impl CslsArgs {
    pub fn options(&self) -> langmod::CslsOptions {
        langmod::CslsOptions {
            kappa: self.csls_k,
            trees: self.forest.trees,
            leaf_capacity: self.forest.leaf_size,
            seed: self.forest.seed,
            ..Default::default()
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BliArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: PairArgs,

    /// Test dictionary, one `source target` pair per line.
    #[arg(long)]
    pub lexicon: PathBuf,

    /// Pairs to drop from the test dictionary (e.g. the training seeds).
    #[arg(long)]
    pub exclude: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub csls: CslsArgs,

    /// Per-word results (TSV). A summary goes to `<out>.summary.json`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct RefineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: PairArgs,

    /// Seed dictionary for a Procrustes initialization, used when no
    /// mapping is given. Without either, refinement starts from identity.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,

    /// Validation metric: csls10k or mod10k.
    #[arg(long, default_value = "csls10k")]
    pub metric: String,

    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Cap on induced dictionary pairs per epoch.
    #[arg(long = "dict-size", default_value_t = 10_000)]
    pub dict_size: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub limit: LimitArgs,

    #[arg(long, default_value_t = langmod::DEFAULT_K)]
    pub k: usize,

    #[arg(long, value_enum, default_value_t = KnnChoice::Forest)]
    pub knn: KnnChoice,

    #[arg(long, value_enum, default_value_t = SymmetrizeChoice::Union)]
    pub symmetrize: SymmetrizeChoice,

    #[command(flatten)]
    #[serde(flatten)]
    pub csls: CslsArgs,

    /// Best mapping is written here; the trace to `<out>.trace.tsv`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl RefineArgs {
    pub fn graph_options(&self) -> GraphOptions {
        GraphArgs {
            k: self.k,
            knn: self.knn,
            symmetrize: self.symmetrize,
            forest: self.csls.forest.clone(),
        }
        .options()
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ExpandArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: PairArgs,

    /// File with one seed word per line.
    #[arg(long)]
    pub seeds: PathBuf,

    /// Neighbors per seed.
    #[arg(long, default_value_t = 10)]
    pub n: usize,

    #[arg(long, value_enum, default_value_t = SimilarityChoice::Csls)]
    pub similarity: SimilarityChoice,

    #[command(flatten)]
    #[serde(flatten)]
    pub csls: CslsArgs,

    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct TableArgs {
    /// Tab-separated table with a header row. Non-numeric columns are
    /// treated as row labels.
    #[arg(long)]
    pub table: PathBuf,

    /// Name of the target column.
    #[arg(long)]
    pub target: String,

    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SweepArgs {
    /// Lines of `name<TAB>score<TAB>lang=path<TAB>lang=path...`; relative
    /// paths resolve against the manifest's directory.
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long = "k-values", value_delimiter = ',', default_value = "1,3,5,10,50,100,150,200")]
    pub k_values: Vec<usize>,

    #[arg(
        long = "tree-values",
        value_delimiter = ',',
        default_value = "50,100,150,200,250,300,350,400,450,500"
    )]
    pub tree_values: Vec<usize>,

    #[arg(long = "leaf-size", default_value_t = langmod::DEFAULT_LEAF_CAPACITY)]
    pub leaf_size: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = SymmetrizeChoice::Union)]
    pub symmetrize: SymmetrizeChoice,

    #[command(flatten)]
    #[serde(flatten)]
    pub limit: LimitArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}
