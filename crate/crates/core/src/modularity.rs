//! Weighted modularity of a lexical graph with languages as the groups.
//!
//! For each language `l`:
//!
//! * `a_l  = (1/2m) sum_i d_i [g_i = l]`, the share of weighted degree;
//! * `e_ll = (1/2m) sum_ij A_ij [g_i = l][g_j = l]`, the observed share of
//!   edge weight inside `l` (ordered pairs, so each edge counts twice).
//!
//! `Q = sum_l (e_ll - a_l^2)`, `Q_max = 1 - sum_l a_l^2` and
//! `Q_norm = Q / Q_max`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::embedding::{EmbeddingSpace, Lang};
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphOptions, LexicalGraph};
use crate::vector::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LanguageTerms {
    pub e_ll: f64,
    pub a_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModularityReport {
    pub q: f64,
    pub q_max: f64,
    pub q_norm: f64,
    pub k: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub per_language: BTreeMap<String, LanguageTerms>,
}

/// Per-language degree sums and intra-language ordered-pair sums.
fn language_sums(graph: &LexicalGraph) -> (Vec<f64>, Vec<f64>) {
    let languages = graph.languages().len();
    let mut degree_terms = vec![Vec::new(); languages];
    let mut intra_terms = vec![Vec::new(); languages];
    for (i, &label) in graph.labels().iter().enumerate() {
        degree_terms[label].push(graph.degree(i));
    }
    for e in graph.edges() {
        let l = graph.labels()[e.i];
        if l == graph.labels()[e.j] {
            intra_terms[l].push(2.0 * e.weight);
        }
    }
    (
        degree_terms.iter().map(|t| pairwise_sum(t)).collect(),
        intra_terms.iter().map(|t| pairwise_sum(t)).collect(),
    )
}

fn two_m(graph: &LexicalGraph) -> Result<f64> {
    let total = graph.total_weight();
    if total > 0.0 {
        Ok(total)
    } else {
        Err(Error::EmptyGraph)
    }
}

fn language_index(graph: &LexicalGraph, language: &Lang) -> Option<usize> {
    graph.languages().iter().position(|l| l == language)
}

/// `a_l`. Languages absent from the graph give 0.
pub fn expected_fraction(graph: &LexicalGraph, language: &Lang) -> Result<f64> {
    let total = two_m(graph)?;
    Ok(match language_index(graph, language) {
        Some(l) => language_sums(graph).0[l] / total,
        None => 0.0,
    })
}

/// `e_ll`. Languages absent from the graph give 0.
pub fn intra_fraction(graph: &LexicalGraph, language: &Lang) -> Result<f64> {
    let total = two_m(graph)?;
    Ok(match language_index(graph, language) {
        Some(l) => language_sums(graph).1[l] / total,
        None => 0.0,
    })
}

/// Sums per-language terms in value order, so the result does not depend on
/// how languages are named or numbered.
fn sum_terms(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    pairwise_sum(&terms)
}

/// Full report. Fails on graphs without edges and on graphs whose edge
/// weight sits in a single language, where `Q_max = 0`.
pub fn modularity(graph: &LexicalGraph) -> Result<ModularityReport> {
    let total = two_m(graph)?;
    let (degree_sums, intra_sums) = language_sums(graph);
    let a: Vec<f64> = degree_sums.iter().map(|s| s / total).collect();
    let e: Vec<f64> = intra_sums.iter().map(|s| s / total).collect();

    let q = sum_terms(e.iter().zip(&a).map(|(e, a)| e - a * a).collect());
    let q_max = 1.0 - sum_terms(a.iter().map(|a| a * a).collect());
    if q_max <= 0.0 {
        return Err(Error::SingleLanguage);
    }

    let per_language = graph
        .languages()
        .iter()
        .enumerate()
        .map(|(l, lang)| (lang.to_string(), LanguageTerms { e_ll: e[l], a_l: a[l] }))
        .collect();
    Ok(ModularityReport {
        q,
        q_max,
        q_norm: q / q_max,
        k: graph.k(),
        n_nodes: graph.node_count(),
        n_edges: graph.edge_count(),
        per_language,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModularityOptions {
    pub graph: GraphOptions,
    /// Restrict each language to its most frequent words first.
    pub frequency_limit: Option<usize>,
}

/// Builds the lexical graph of `space` and evaluates its modularity.
pub fn modularity_from_space(space: &EmbeddingSpace, options: &ModularityOptions) -> Result<ModularityReport> {
    if space.languages().len() < 2 {
        return Err(Error::SingleLanguage);
    }
    let graph = match options.frequency_limit {
        Some(limit) => build_graph(&space.truncate_per_language(limit)?, &options.graph)?,
        None => build_graph(space, &options.graph)?,
    };
    modularity(&graph)
}
