//! Linear maps from a source space into a target space.
//!
//! Vectors are rows, so a source vector `x` maps to `x W`. Two supervised
//! fits are provided (unconstrained least squares and orthogonal
//! Procrustes), plus the self-learning refinement loop that alternates
//! CSLS dictionary induction with Procrustes and keeps the mapping that
//! scores best under a validation metric.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::csls::{CslsContext, CslsOptions};
use crate::embedding::{merge_spaces, EmbeddingSpace, PreprocessStep};
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphOptions};
use crate::lexicon::Lexicon;
use crate::modularity::{modularity, ModularityReport};
use crate::vector::dot;

/// Tolerance on `max |W^T W - I|` for matrices flagged orthogonal.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MappingMatrix {
    w: DMatrix<f64>,
    orthogonal: bool,
}

impl MappingMatrix {
    /// Square `w`. When `orthogonal` is claimed it is checked.
    pub fn new(w: DMatrix<f64>, orthogonal: bool) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                found: w.ncols(),
            });
        }
        let m = MappingMatrix { w, orthogonal };
        if orthogonal && m.orthogonality_error() > ORTHOGONALITY_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "matrix is not orthogonal (max |W^T W - I| = {:e})",
                m.orthogonality_error()
            )));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        MappingMatrix {
            w: DMatrix::identity(dim, dim),
            orthogonal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// `max |W^T W - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.w.transpose() * &self.w;
        (gram - DMatrix::<f64>::identity(self.dim(), self.dim())).amax()
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let cols = self.w.as_slice();
        (0..d).map(|j| dot(x, &cols[j * d..(j + 1) * d])).collect()
    }

    /// Maps every vector of `space`.
    pub fn apply(&self, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
        if space.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: space.dim(),
            });
        }
        let data: Vec<f64> = space
            .data()
            .par_chunks_exact(space.dim())
            .flat_map_iter(|row| self.apply_row(row))
            .collect();
        space.with_data(self.dim(), data)
    }

    /// `d d` header, then one row per line with 17 significant digits.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        writeln!(out, "{d} {d}")?;
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| format!("{:.16e}", self.w[(i, j)])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format of [`MappingMatrix::write`]. The orthogonal flag is
    /// set when the matrix passes the orthogonality check.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MalformedHeader {
                line: 1,
                found: header.clone(),
            })?;
        let d = match dims.as_slice() {
            [r, c] if r == c && *r > 0 => *r,
            _ => {
                return Err(Error::MalformedHeader {
                    line: 1,
                    found: header,
                })
            }
        };
        let mut values = Vec::with_capacity(d * d);
        let mut rows = 0;
        for (offset, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = offset + 2;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != d {
                return Err(Error::Arity {
                    line: line_no,
                    expected: d,
                    found: tokens.len(),
                });
            }
            for token in tokens {
                let v: f64 = token.parse().map_err(|_| Error::InvalidNumber {
                    line: line_no,
                    token: token.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        line: line_no,
                        word: token.to_owned(),
                    });
                }
                values.push(v);
            }
            rows += 1;
        }
        if rows != d {
            return Err(Error::CountMismatch {
                declared: d,
                found: rows,
            });
        }
        let w = DMatrix::from_row_slice(d, d, &values);
        let mut m = MappingMatrix { w, orthogonal: false };
        m.orthogonal = m.orthogonality_error() <= ORTHOGONALITY_TOLERANCE;
        Ok(m)
    }
}

/// Row-aligned source and target matrices for the in-vocabulary pairs of `lex`.
fn paired_rows(src: &EmbeddingSpace, tgt: &EmbeddingSpace, lex: &Lexicon) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    let pairs: Vec<(usize, usize)> = lex
        .pairs()
        .iter()
        .filter_map(|(s, t)| Some((src.find(lex.source_language(), s)?, tgt.find(lex.target_language(), t)?)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let d = src.dim();
    if pairs.len() < d {
        log::warn!("only {} lexicon pairs for dimension {d}", pairs.len());
    }
    let x = DMatrix::from_fn(pairs.len(), d, |r, c| src.vector(pairs[r].0)[c]);
    let y = DMatrix::from_fn(pairs.len(), d, |r, c| tgt.vector(pairs[r].1)[c]);
    Ok((x, y))
}

/// Least-squares map `argmin ||XW - Y||_F` over the in-vocabulary pairs.
/// A rank-deficient `X` is logged and gets the minimum-norm solution.
pub fn fit_mse(src: &EmbeddingSpace, tgt: &EmbeddingSpace, lex: &Lexicon) -> Result<MappingMatrix> {
    let (x, y) = paired_rows(src, tgt, lex)?;
    let svd = x.svd(true, true);
    let largest = svd.singular_values.max();
    let eps = largest * (svd.singular_values.len().max(y.nrows()) as f64) * f64::EPSILON;
    let rank = svd.rank(eps);
    if rank < src.dim() {
        log::warn!("source matrix has rank {rank} < {}; using minimum-norm solution", src.dim());
    }
    let w = svd.solve(&y, eps).map_err(|e| Error::InvalidParameter(e.to_owned()))?;
    MappingMatrix::new(w, false)
}

/// Orthogonal Procrustes: `W = U V^T` where `U S V^T = X^T Y`.
pub fn fit_procrustes(src: &EmbeddingSpace, tgt: &EmbeddingSpace, lex: &Lexicon) -> Result<MappingMatrix> {
    let (x, y) = paired_rows(src, tgt, lex)?;
    let cross = x.transpose() * y;
    if cross.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateCovariance);
    };
    MappingMatrix::new(u * v_t, true)
}

/// Pairs each source word with its CSLS-nearest target. With `mutual`, only
/// pairs that are each other's nearest neighbor survive. The best `size`
/// pairs by CSLS are kept.
pub fn induce_dictionary(ctx: &CslsContext, size: usize, mutual: bool) -> Result<Lexicon> {
    if size == 0 {
        return Err(Error::InvalidParameter("dictionary size must be at least 1".into()));
    }
    let forward: Vec<(usize, f64)> = (0..ctx.source().len())
        .into_par_iter()
        .map(|s| ctx.nearest_target(s))
        .collect();
    let backward: Option<Vec<usize>> = mutual.then(|| {
        (0..ctx.target().len())
            .into_par_iter()
            .map(|t| ctx.nearest_source(t).0)
            .collect()
    });
    let mut pairs: Vec<(usize, usize, f64)> = forward
        .into_iter()
        .enumerate()
        .filter(|&(s, (t, _))| backward.as_ref().is_none_or(|b| b[t] == s))
        .map(|(s, (t, score))| (s, t, score))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    pairs.truncate(size);
    Ok(Lexicon::new(
        ctx.source_language().clone(),
        ctx.target_language().clone(),
        pairs
            .into_iter()
            .map(|(s, t, _)| (ctx.source().word(s), ctx.target().word(t))),
    ))
}

/// Model-selection criterion. Both are "higher is better".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationMetric {
    /// Mean top-1 CSLS over the most frequent source words.
    Csls10k,
    /// Negated normalized modularity of the joint lexical graph of the most
    /// frequent words.
    Mod10k,
}

impl ValidationMetric {
    pub fn name(self) -> &'static str {
        match self {
            ValidationMetric::Csls10k => "csls10k",
            ValidationMetric::Mod10k => "mod10k",
        }
    }
}

impl fmt::Display for ValidationMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValidationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csls10k" => Ok(ValidationMetric::Csls10k),
            "mod10k" => Ok(ValidationMetric::Mod10k),
            other => Err(Error::UnknownMetric(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricOptions {
    /// Words per language entering either metric.
    pub frequency_limit: usize,
    pub csls: CslsOptions,
    pub graph: GraphOptions,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            frequency_limit: crate::DEFAULT_FREQUENCY_LIMIT,
            csls: CslsOptions::default(),
            graph: GraphOptions::default(),
        }
    }
}

/// Modularity of the joint graph of the mapped source and the target,
/// each restricted to its most frequent words and unit-normalized.
pub fn mapped_modularity(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w: &MappingMatrix,
    options: &MetricOptions,
) -> Result<ModularityReport> {
    let unit = [PreprocessStep::Unit];
    let mapped = w
        .apply(&src.truncate_per_language(options.frequency_limit)?)?
        .preprocess(&unit)?;
    let target = tgt.truncate_per_language(options.frequency_limit)?.preprocess(&unit)?;
    let joint = merge_spaces(&[mapped, target])?;
    modularity(&build_graph(&joint, &options.graph)?)
}

pub fn evaluate_metric(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w: &MappingMatrix,
    metric: ValidationMetric,
    options: &MetricOptions,
) -> Result<f64> {
    match metric {
        ValidationMetric::Csls10k => {
            CslsContext::restricted(src, tgt, Some(w), options.frequency_limit, &options.csls)?.csls_10k()
        }
        ValidationMetric::Mod10k => Ok(-mapped_modularity(src, tgt, w, options)?.q_norm),
    }
}

/// Index of the best-scoring candidate (lowest index on ties) and all scores.
pub fn select_mapping_with<F>(candidates: &[MappingMatrix], mut score: F) -> Result<(usize, Vec<f64>)>
where
    F: FnMut(&MappingMatrix) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate mappings".into()));
    }
    let scores = candidates.iter().map(&mut score).collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

pub fn select_mapping(
    candidates: &[MappingMatrix],
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    metric: ValidationMetric,
    options: &MetricOptions,
) -> Result<(usize, Vec<f64>)> {
    select_mapping_with(candidates, |w| evaluate_metric(src, tgt, w, metric, options))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    /// 0 is the initial mapping.
    pub epoch: usize,
    pub score: f64,
    pub dictionary_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementTrace {
    pub metric: ValidationMetric,
    pub rows: Vec<TraceRow>,
    pub best_epoch: usize,
}

impl RefinementTrace {
    pub fn metric_name(&self) -> &'static str {
        self.metric.name()
    }

    /// `epoch metric score dict_size`, tab separated, with a header row.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch\tmetric\tscore\tdict_size")?;
        for row in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{}",
                row.epoch,
                self.metric_name(),
                row.score,
                row.dictionary_size
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefineOptions {
    pub epochs: usize,
    pub metric: ValidationMetric,
    pub metric_options: MetricOptions,
    /// Cap on induced dictionary pairs per epoch.
    pub dictionary_size: usize,
    pub mutual: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            epochs: 5,
            metric: ValidationMetric::Csls10k,
            metric_options: MetricOptions::default(),
            dictionary_size: crate::DEFAULT_FREQUENCY_LIMIT,
            mutual: true,
        }
    }
}

/// A refinement run that stopped early, with the epochs completed so far.
#[derive(Debug)]
pub struct RefineFailure {
    pub trace: RefinementTrace,
    pub error: Error,
}

impl fmt::Display for RefineFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "refinement stopped after {} rows: {}", self.trace.rows.len(), self.error)
    }
}

impl std::error::Error for RefineFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Alternates dictionary induction under the current mapping with a
/// Procrustes fit on that dictionary, scoring every epoch. Returns the
/// best-scoring mapping over all epochs, `w0` included; ties keep the
/// earlier epoch.
pub fn refine(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w0: &MappingMatrix,
    options: &RefineOptions,
) -> std::result::Result<(MappingMatrix, RefinementTrace), RefineFailure> {
    let mut trace = RefinementTrace {
        metric: options.metric,
        rows: Vec::new(),
        best_epoch: 0,
    };
    let fail = |trace: &RefinementTrace, error: Error| RefineFailure {
        trace: trace.clone(),
        error,
    };
    if options.epochs == 0 {
        return Err(fail(&trace, Error::InvalidParameter("epochs must be at least 1".into())));
    }
    let metric = &options.metric_options;
    let context = |w: &MappingMatrix| CslsContext::restricted(src, tgt, Some(w), metric.frequency_limit, &metric.csls);
    let score = |w: &MappingMatrix, ctx: &CslsContext| match options.metric {
        ValidationMetric::Csls10k => ctx.csls_10k(),
        ValidationMetric::Mod10k => Ok(-mapped_modularity(src, tgt, w, metric)?.q_norm),
    };

    let mut ctx = context(w0).map_err(|e| fail(&trace, e))?;
    let initial = score(w0, &ctx).map_err(|e| fail(&trace, e))?;
    trace.rows.push(TraceRow {
        epoch: 0,
        score: initial,
        dictionary_size: 0,
    });
    let mut best = (initial, w0.clone());

    for epoch in 1..=options.epochs {
        let step = || -> Result<(MappingMatrix, CslsContext, f64, usize)> {
            let dictionary = induce_dictionary(&ctx, options.dictionary_size, options.mutual)?;
            let w = fit_procrustes(src, tgt, &dictionary)?;
            let next = context(&w)?;
            let s = score(&w, &next)?;
            Ok((w, next, s, dictionary.len()))
        };
        let (w, next, s, size) = step().map_err(|e| fail(&trace, e))?;
        log::info!("epoch {epoch}: {} = {s:.6} ({size} pairs)", options.metric);
        trace.rows.push(TraceRow {
            epoch,
            score: s,
            dictionary_size: size,
        });
        if s > best.0 {
            best = (s, w);
            trace.best_epoch = epoch;
        }
        ctx = next;
    }
    Ok((best.1, trace))
}
