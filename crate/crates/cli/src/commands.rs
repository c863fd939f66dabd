use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use langmod::csls::Similarity;
use langmod::embedding::{load_embeddings_with, merge_spaces, LoadOptions};
use langmod::graph::{build_graph, top_frequent_subgraph};
use langmod::lexicon::{filter_lexicon, load_lexicon};
use langmod::mapping::{fit_procrustes, refine, MetricOptions, RefineOptions};
use langmod::stats::{ablation_regression, pearson, spearman, sweep, FeatureTable, SweepOptions};
use langmod::{modularity, CslsContext, EmbeddingSpace, Error, Lexicon, MappingMatrix, PreprocessStep, ValidationMetric};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    parse_emb_spec, BliArgs, EmbSpec, ExpandArgs, InputArgs, ModularityArgs, RefineArgs, SimilarityChoice,
    SweepArgs, SymmetrizeChoice, TableArgs,
};

/// Resolved configuration: subcommand name plus every flag except output
/// paths and thread count, which never change results.
pub fn config<T: Serialize>(subcommand: &str, args: &T) -> Value {
    let mut value = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(map) = &mut value {
        map.insert("subcommand".into(), subcommand.into());
    }
    value
}

/// `path` with `suffix` appended to its file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_config(out: &Path, config: &Value) -> Result<()> {
    write_json(Some(&sibling(out, ".config.json")), config)
}

fn real(x: f64) -> String {
    format!("{x:.6}")
}

fn optional_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_else(|| "NA".to_owned())
}

fn load_space(spec: &EmbSpec, input: &InputArgs) -> Result<EmbeddingSpace> {
    let steps = PreprocessStep::parse_chain(&input.preprocess)?;
    let loaded = load_embeddings_with(
        &spec.path,
        spec.lang.as_str(),
        LoadOptions {
            lowercase: input.lowercase,
        },
    )?;
    if loaded.duplicates > 0 {
        log::warn!("{}: {} duplicate words ignored", spec.path.display(), loaded.duplicates);
    }
    log::info!(
        "loaded {} words of dimension {} for {}",
        loaded.space.len(),
        loaded.space.dim(),
        spec.lang
    );
    Ok(loaded.space.preprocess(&steps)?)
}

fn read_mapping(path: &Path) -> Result<MappingMatrix> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(MappingMatrix::read(BufReader::new(file))?)
}

fn read_lexicon(path: &Path, src: &str, tgt: &str, lowercase: bool) -> Result<Lexicon> {
    let lex = load_lexicon(path, src, tgt)?;
    Ok(if lowercase { lex.lowercased() } else { lex })
}

pub fn modularity_cmd(args: &ModularityArgs) -> Result<()> {
    let config = config("modularity", args);
    log::info!("config: {config}");
    let spaces = args
        .emb
        .iter()
        .map(|spec| load_space(spec, &args.input))
        .collect::<Result<Vec<_>>>()?;
    if spaces.len() < 2 {
        return Err(Error::SingleLanguage).context("modularity needs embeddings for at least two languages");
    }
    let joint = merge_spaces(&spaces)?;
    let options = args.graph.options();
    let graph = match args.limit.get() {
        Some(limit) => top_frequent_subgraph(&joint, limit, &options)?,
        None => build_graph(&joint, &options)?,
    };
    log::info!("graph: {} nodes, {} edges", graph.node_count(), graph.edge_count());
    if let Some(path) = &args.edges {
        let mut out = create(path)?;
        graph.write_edges_tsv(&mut out)?;
        write_config(path, &config)?;
    }
    let report = modularity(&graph)?;

    #[derive(Serialize)]
    struct Output<'a> {
        #[serde(flatten)]
        report: &'a langmod::ModularityReport,
        config: &'a Value,
    }
    write_json(
        args.out.as_deref(),
        &Output {
            report: &report,
            config: &config,
        },
    )?;
    log::info!("q_norm = {}", report.q_norm);
    Ok(())
}

/// Loads the source/target pair and builds the CSLS context under the
/// optional mapping.
fn pair_context(pair: &crate::args::PairArgs, csls: &crate::args::CslsArgs) -> Result<CslsContext> {
    let src = load_space(&pair.src, &pair.input)?;
    let tgt = load_space(&pair.tgt, &pair.input)?;
    let mapping = pair.mapping.as_deref().map(read_mapping).transpose()?;
    Ok(CslsContext::new(&src, &tgt, mapping.as_ref(), &csls.options())?)
}

pub fn bli_cmd(args: &BliArgs) -> Result<()> {
    let config = config("bli", args);
    log::info!("config: {config}");
    let (src, tgt) = (args.pair.src.lang.as_str(), args.pair.tgt.lang.as_str());
    let mut lex = read_lexicon(&args.lexicon, src, tgt, args.pair.input.lowercase)?;
    if let Some(path) = &args.exclude {
        let exclude = read_lexicon(path, src, tgt, args.pair.input.lowercase)?;
        lex = filter_lexicon(&lex, &exclude);
        log::info!("{} test pairs left after exclusion", lex.len());
    }
    let ctx = pair_context(&args.pair, &args.csls)?;
    let result = ctx.bli_p_at_1(&lex)?;

    let mut out = create(&args.out)?;
    writeln!(out, "source\tgold\tpredicted\tcorrect\tscore")?;
    for row in &result.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            row.source,
            row.gold.join("|"),
            row.predicted,
            u8::from(row.correct),
            real(row.score)
        )?;
    }
    out.flush()?;
    write_json(
        Some(&sibling(&args.out, ".summary.json")),
        &json!({
            "p_at_1": result.p_at_1,
            "evaluated": result.evaluated,
            "correct": result.correct,
            "skipped_oov": result.skipped_oov,
            "config": config,
        }),
    )?;
    write_config(&args.out, &config)?;
    log::info!("P@1 = {} over {} words", result.p_at_1, result.evaluated);
    Ok(())
}

pub fn refine_cmd(args: &RefineArgs) -> Result<()> {
    let config = config("refine", args);
    log::info!("config: {config}");
    let metric: ValidationMetric = args.metric.parse()?;
    let src = load_space(&args.pair.src, &args.pair.input)?;
    let tgt = load_space(&args.pair.tgt, &args.pair.input)?;
    let w0 = if let Some(path) = &args.pair.mapping {
        read_mapping(path)?
    } else if let Some(path) = &args.lexicon {
        let seeds = read_lexicon(path, &args.pair.src.lang, &args.pair.tgt.lang, args.pair.input.lowercase)?;
        fit_procrustes(&src, &tgt, &seeds)?
    } else {
        MappingMatrix::identity(src.dim())
    };
    let options = RefineOptions {
        epochs: args.epochs,
        metric,
        metric_options: MetricOptions {
            frequency_limit: args.limit.get().unwrap_or(usize::MAX),
            csls: args.csls.options(),
            graph: args.graph_options(),
        },
        dictionary_size: args.dict_size,
        mutual: true,
    };
    let trace_path = sibling(&args.out, ".trace.tsv");
    write_config(&args.out, &config)?;
    let (w, trace) = match refine(&src, &tgt, &w0, &options) {
        Ok(done) => done,
        Err(failure) => {
            failure.trace.write_tsv(create(&trace_path)?)?;
            return Err(failure.into());
        }
    };
    trace.write_tsv(create(&trace_path)?)?;
    w.write(create(&args.out)?)?;
    let best = trace.rows[trace.best_epoch];
    write_json(
        Some(&sibling(&args.out, ".summary.json")),
        &json!({
            "metric": trace.metric_name(),
            "best_epoch": trace.best_epoch,
            "best_score": best.score,
            "initial_score": trace.rows[0].score,
            "config": config,
        }),
    )?;
    log::info!("best epoch {} with {} = {}", trace.best_epoch, trace.metric_name(), best.score);
    Ok(())
}

pub fn expand_cmd(args: &ExpandArgs) -> Result<()> {
    let config = config("expand", args);
    log::info!("config: {config}");
    let file = File::open(&args.seeds).with_context(|| format!("cannot open {}", args.seeds.display()))?;
    let mut seeds = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() {
            seeds.push(if args.pair.input.lowercase {
                word.to_lowercase()
            } else {
                word.to_owned()
            });
        }
    }
    let ctx = pair_context(&args.pair, &args.csls)?;
    let similarity = match args.similarity {
        SimilarityChoice::Csls => Similarity::Csls,
        SimilarityChoice::Cosine => Similarity::Cosine,
    };
    let expansion = ctx.expand_lexicon(&seeds, args.n, similarity)?;
    for word in &expansion.out_of_vocabulary {
        log::warn!("seed {word:?} is not in the source vocabulary");
    }
    let mut out = create(&args.out)?;
    writeln!(out, "seed\trank\ttarget\tscore")?;
    for (seed, ranked) in &expansion.entries {
        for (rank, (word, score)) in ranked.iter().enumerate() {
            writeln!(out, "{seed}\t{}\t{word}\t{}", rank + 1, real(*score))?;
        }
    }
    out.flush()?;
    write_config(&args.out, &config)?;
    Ok(())
}

fn load_table(args: &TableArgs) -> Result<FeatureTable> {
    let file = File::open(&args.table).with_context(|| format!("cannot open {}", args.table.display()))?;
    Ok(FeatureTable::from_tsv(BufReader::new(file), &args.target)?)
}

/// Undefined correlations (constant columns) become `None`.
fn defined(r: langmod::Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ConstantInput) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn correlate_cmd(args: &TableArgs) -> Result<()> {
    let config = config("correlate", args);
    log::info!("config: {config}");
    let table = load_table(args)?;
    let mut out = create(&args.out)?;
    writeln!(out, "feature\ttarget\tn\tpearson\tspearman")?;
    for name in table.names() {
        let column = table.column(name).expect("listed column");
        let p = defined(pearson(column, table.target()))?;
        let s = defined(spearman(column, table.target()))?;
        if p.is_none() {
            log::warn!("correlation with constant column {name:?} is undefined");
        }
        writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}",
            table.target_name(),
            table.rows(),
            optional_real(p),
            optional_real(s)
        )?;
    }
    out.flush()?;
    write_config(&args.out, &config)?;
    Ok(())
}

pub fn ablate_cmd(args: &TableArgs) -> Result<()> {
    let config = config("ablate", args);
    log::info!("config: {config}");
    let table = load_table(args)?;
    let full = ablation_regression(&table, None)?;
    let mut fits = vec![("none".to_owned(), full.clone())];
    if table.names().len() > 1 {
        for name in table.names() {
            fits.push((name.clone(), ablation_regression(&table, Some(name))?));
        }
    }
    let mut out = create(&args.out)?;
    write!(out, "ablated\tr_squared\tdelta_r_squared\tintercept")?;
    for name in table.names() {
        write!(out, "\tcoef_{name}")?;
    }
    writeln!(out)?;
    for (ablated, fit) in &fits {
        write!(
            out,
            "{ablated}\t{}\t{}\t{}",
            real(fit.r_squared),
            real(full.r_squared - fit.r_squared),
            real(fit.intercept)
        )?;
        for name in table.names() {
            let coef = fit.features.iter().position(|f| f == name).map(|i| fit.coefficients[i]);
            write!(out, "\t{}", optional_real(coef))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    write_config(&args.out, &config)?;
    log::info!("R^2 with all features = {}", full.r_squared);
    Ok(())
}

struct ManifestRow {
    name: String,
    score: f64,
    embeddings: Vec<EmbSpec>,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 3 {
            bail!("{}:{}: expected name, score and at least one lang=path", path.display(), i + 1);
        }
        let score: f64 = fields[1]
            .parse()
            .with_context(|| format!("{}:{}: invalid score {:?}", path.display(), i + 1, fields[1]))?;
        let embeddings = fields[2..]
            .iter()
            .map(|f| {
                let mut spec = parse_emb_spec(f).map_err(anyhow::Error::msg)?;
                if spec.path.is_relative() {
                    spec.path = base.join(&spec.path);
                }
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ManifestRow {
            name: fields[0].to_owned(),
            score,
            embeddings,
        });
    }
    if rows.is_empty() {
        bail!("{}: no entries", path.display());
    }
    Ok(rows)
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let config = config("sweep", args);
    log::info!("config: {config}");
    let manifest = read_manifest(&args.manifest)?;
    let spaces = manifest
        .iter()
        .map(|row| {
            let parts = row
                .embeddings
                .iter()
                .map(|spec| load_space(spec, &args.input))
                .collect::<Result<Vec<_>>>()?;
            Ok(merge_spaces(&parts)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = manifest.iter().map(|row| row.score).collect();
    let options = SweepOptions {
        leaf_capacity: args.leaf_size,
        seed: args.seed,
        frequency_limit: args.limit.get(),
        symmetrization: match args.symmetrize {
            SymmetrizeChoice::Union => langmod::Symmetrization::Union,
            SymmetrizeChoice::Mutual => langmod::Symmetrization::Mutual,
        },
    };
    let cells = sweep(&spaces, &scores, &args.k_values, &args.tree_values, &options)?;
    let mut out = create(&args.out)?;
    write!(out, "k\ttrees\tpearson\tspearman")?;
    for row in &manifest {
        write!(out, "\tq_norm_{}", row.name)?;
    }
    writeln!(out)?;
    for cell in &cells {
        write!(
            out,
            "{}\t{}\t{}\t{}",
            cell.k,
            cell.trees,
            optional_real(cell.pearson),
            optional_real(cell.spearman)
        )?;
        for q in &cell.modularity {
            write!(out, "\t{}", real(*q))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    write_config(&args.out, &config)?;
    Ok(())
}
