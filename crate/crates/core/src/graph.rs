//! The language-labeled kNN lexical graph.
//!
//! Each node selects its `k` most cosine-similar other nodes; the selections
//! are symmetrized and every surviving edge carries `max(0, cos)` as weight.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;

use crate::ann::{Neighbor, Points, RpForest};
use crate::embedding::{EmbeddingSpace, Lang};
use crate::error::{Error, Result};
use crate::vector::{cosine_with_norms, norm, pairwise_sum};

/// Neighbor search backend for graph construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnnMethod {
    Exact,
    Forest {
        trees: usize,
        leaf_capacity: usize,
        seed: u64,
    },
}

impl Default for KnnMethod {
    fn default() -> Self {
        KnnMethod::Forest {
            trees: crate::DEFAULT_TREES,
            leaf_capacity: crate::DEFAULT_LEAF_CAPACITY,
            seed: 0,
        }
    }
}

/// How per-node neighbor selections become undirected edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Symmetrization {
    /// Edge if either endpoint selected the other.
    #[default]
    Union,
    /// Edge only if both endpoints selected each other.
    Mutual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphOptions {
    pub k: usize,
    pub knn: KnnMethod,
    pub symmetrization: Symmetrization,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            k: crate::DEFAULT_K,
            knn: KnnMethod::default(),
            symmetrization: Symmetrization::Union,
        }
    }
}

/// Undirected edge with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Symmetric, non-negatively weighted sparse graph without self-loops.
#[derive(Clone, Debug)]
pub struct LexicalGraph {
    words: Vec<String>,
    labels: Vec<usize>,
    languages: Vec<Lang>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adjacency: Vec<(usize, f64)>,
    degree: Vec<f64>,
    total_weight: f64,
    k: usize,
}

impl LexicalGraph {
    /// Builds a graph from explicit undirected edges. `labels[i]` indexes
    /// `languages`. Zero-weight edges are dropped; negative, non-finite,
    /// self-loop and repeated edges are rejected.
    pub fn from_edges<I>(labels: Vec<usize>, languages: Vec<Lang>, edges: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let words = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::assemble(words, labels, languages, edges, k)
    }

    fn assemble<I>(words: Vec<String>, labels: Vec<usize>, languages: Vec<Lang>, edges: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = labels.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= languages.len()) {
            return Err(Error::InvalidParameter(format!("language label {bad} out of range")));
        }
        let mut list = Vec::new();
        let mut seen = HashSet::new();
        for (a, b, weight) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidParameter(format!("invalid weight {weight} on ({a}, {b})")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if !seen.insert((i, j)) {
                return Err(Error::InvalidParameter(format!("repeated edge ({i}, {j})")));
            }
            if weight > 0.0 {
                list.push(Edge { i, j, weight });
            }
        }
        list.sort_unstable_by_key(|e| (e.i, e.j));

        let mut counts = vec![0usize; n + 1];
        for e in &list {
            counts[e.i + 1] += 1;
            counts[e.j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0, 0.0); offsets[n]];
        for e in &list {
            adjacency[fill[e.i]] = (e.j, e.weight);
            fill[e.i] += 1;
            adjacency[fill[e.j]] = (e.i, e.weight);
            fill[e.j] += 1;
        }
        for i in 0..n {
            adjacency[offsets[i]..offsets[i + 1]].sort_unstable_by_key(|&(j, _)| j);
        }
        let degree: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = adjacency[offsets[i]..offsets[i + 1]].iter().map(|&(_, w)| w).collect();
                pairwise_sum(&row)
            })
            .collect();
        let total_weight = pairwise_sum(&degree);
        Ok(LexicalGraph {
            words,
            labels,
            languages,
            edges: list,
            offsets,
            adjacency,
            degree,
            total_weight,
            k,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn lang(&self, i: usize) -> &Lang {
        &self.languages[self.labels[i]]
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    /// `(neighbor, weight)` pairs of node `i`, by neighbor id.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `A_ij`; zero when there is no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = self.neighbors(i);
        row.binary_search_by_key(&j, |&(n, _)| n).map_or(0.0, |at| row[at].1)
    }

    /// Weighted degree `d_i = sum_j A_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// `2m = sum_ij A_ij`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Same topology with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::assemble(
            self.words.clone(),
            self.labels.clone(),
            self.languages.clone(),
            self.edges.iter().map(|e| (e.i, e.j, e.weight * factor)),
            self.k,
        )
    }

    /// Tab-separated `word_i lang_i word_j lang_j weight`, one line per edge.
    pub fn write_edges_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "word_i\tlang_i\tword_j\tlang_j\tweight")?;
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.6}",
                self.words[e.i],
                self.lang(e.i),
                self.words[e.j],
                self.lang(e.j),
                e.weight
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

const UNIT_TOLERANCE: f64 = 1e-6;

/// Builds the kNN lexical graph of a unit-normalized space.
pub fn build_graph(space: &EmbeddingSpace, options: &GraphOptions) -> Result<LexicalGraph> {
    let n = space.len();
    let k = options.k;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, found {n}")));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let points = Points::new(space.data(), space.dim());
    for i in 0..n {
        let len = norm(space.vector(i));
        if (len - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitVector {
                word: space.word(i).to_owned(),
                norm: len,
            });
        }
    }

    let selections: Vec<Vec<Neighbor>> = match options.knn {
        KnnMethod::Exact => (0..n)
            .into_par_iter()
            .map(|i| points.exact_knn(space.vector(i), k, Some(i)))
            .collect::<Result<_>>()?,
        KnnMethod::Forest {
            trees,
            leaf_capacity,
            seed,
        } => {
            let forest = RpForest::from_data(space.data(), space.dim(), trees, leaf_capacity, seed)?;
            (0..n)
                .into_par_iter()
                .map(|i| forest.knn(space.vector(i), k, Some(i)))
                .collect::<Result<_>>()?
        }
    };

    let selected: HashSet<(usize, usize)> = selections
        .iter()
        .enumerate()
        .flat_map(|(i, hits)| hits.iter().map(move |h| (i, h.id)))
        .collect();
    let mut pairs: Vec<(usize, usize)> = selected
        .iter()
        .filter(|&&(i, j)| match options.symmetrization {
            Symmetrization::Union => true,
            Symmetrization::Mutual => selected.contains(&(j, i)),
        })
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    let norms: Vec<f64> = (0..n).map(|i| norm(space.vector(i))).collect();
    let edges = pairs.into_iter().map(|(i, j)| {
        let cos = cosine_with_norms(space.vector(i), norms[i], space.vector(j), norms[j]);
        (i, j, cos.clamp(0.0, 1.0))
    });
    LexicalGraph::assemble(
        space.words().to_vec(),
        space.lang_ids().to_vec(),
        space.languages().to_vec(),
        edges,
        k,
    )
}

/// [`build_graph`] over the `per_language_limit` most frequent words of each
/// language.
pub fn top_frequent_subgraph(
    space: &EmbeddingSpace,
    per_language_limit: usize,
    options: &GraphOptions,
) -> Result<LexicalGraph> {
    build_graph(&space.truncate_per_language(per_language_limit)?, options)
}
