//! Approximate nearest neighbors with a forest of random-projection trees.
//!
//! Every internal node splits its points by the hyperplane bisecting two
//! randomly sampled member points. A query descends each tree to a single
//! leaf; the union of those leaves is rescored with exact cosine similarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::vector::{cosine_with_norms, norm, top_k};

/// A retrieved node and its cosine similarity to the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub similarity: f64,
}

/// Row-major points with cached norms.
#[derive(Clone, Debug)]
pub(crate) struct Points<'a> {
    data: &'a [f64],
    dim: usize,
    norms: Vec<f64>,
}

impl<'a> Points<'a> {
    pub(crate) fn new(data: &'a [f64], dim: usize) -> Self {
        let norms = data.par_chunks_exact(dim).map(norm).collect();
        Points { data, dim, norms }
    }

    pub(crate) fn len(&self) -> usize {
        self.norms.len()
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn check_query(&self, query: &[f64], k: usize) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }

    fn rank<I>(&self, query: &[f64], candidates: I, k: usize, exclude: Option<usize>) -> Vec<Neighbor>
    where
        I: Iterator<Item = usize>,
    {
        let query_norm = norm(query);
        let scored = candidates
            .filter(|&id| Some(id) != exclude)
            .map(|id| (cosine_with_norms(query, query_norm, self.row(id), self.norms[id]), id))
            .collect();
        top_k(scored, k)
            .into_iter()
            .map(|(similarity, id)| Neighbor { id, similarity })
            .collect()
    }

    /// Exhaustive top-k.
    pub(crate) fn exact_knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        self.check_query(query, k)?;
        Ok(self.rank(query, 0..self.len(), k, exclude))
    }
}

/// Exact top-k by cosine over the whole space. Ties go to the lower node id.
pub fn exact_knn(space: &EmbeddingSpace, query: &[f64], k: usize, exclude_self: Option<usize>) -> Result<Vec<Neighbor>> {
    Points::new(space.data(), space.dim()).exact_knn(query, k, exclude_self)
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    /// Points with positive margin against the bisector of `p` and `q` go left.
    Split {
        p: u32,
        q: u32,
        offset: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        start: u32,
        len: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
    items: Vec<u32>,
}

const SPLIT_ATTEMPTS: usize = 8;

/// Forest of random-projection trees over a borrowed point set.
///
/// Construction is deterministic in `(points, trees, leaf_capacity, seed)`;
/// tree `t` draws from its own ChaCha stream, so building in parallel does
/// not change the result.
#[derive(Clone, Debug)]
pub struct RpForest<'a> {
    points: Points<'a>,
    trees: Vec<Tree>,
    leaf_capacity: usize,
    seed: u64,
}

impl<'a> RpForest<'a> {
    pub fn build(space: &'a EmbeddingSpace, trees: usize, leaf_capacity: usize, seed: u64) -> Result<Self> {
        Self::from_data(space.data(), space.dim(), trees, leaf_capacity, seed)
    }

    /// Indexes row-major `data` of dimension `dim`.
    pub fn from_data(data: &'a [f64], dim: usize, trees: usize, leaf_capacity: usize, seed: u64) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if trees == 0 {
            return Err(Error::InvalidParameter("trees must be at least 1".into()));
        }
        if leaf_capacity == 0 {
            return Err(Error::InvalidParameter("leaf capacity must be at least 1".into()));
        }
        let points = Points::new(data, dim);
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| build_tree(&points, leaf_capacity, seed, t as u64))
            .collect();
        Ok(RpForest {
            points,
            trees,
            leaf_capacity,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.dim
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Leaves of tree `t`, left to right.
    pub fn leaves(&self, t: usize) -> impl Iterator<Item = &[u32]> + '_ {
        let tree = &self.trees[t];
        tree.nodes.iter().filter_map(move |node| match *node {
            Node::Leaf { start, len } => Some(&tree.items[start as usize..(start + len) as usize]),
            Node::Split { .. } => None,
        })
    }

    /// Same trees, split for split.
    pub fn same_structure(&self, other: &RpForest<'_>) -> bool {
        self.trees == other.trees
    }

    /// Up to `k` neighbors of `query` among the leaves it reaches, best first.
    pub fn knn(&self, query: &[f64], k: usize, exclude_self: Option<usize>) -> Result<Vec<Neighbor>> {
        self.points.check_query(query, k)?;
        let mut candidates = Vec::new();
        for tree in &self.trees {
            candidates.extend_from_slice(self.leaf_for(tree, query));
        }
        candidates.sort_unstable();
        candidates.dedup();
        Ok(self
            .points
            .rank(query, candidates.into_iter().map(|c| c as usize), k, exclude_self))
    }

    fn leaf_for<'t>(&self, tree: &'t Tree, query: &[f64]) -> &'t [u32] {
        let mut at = 0;
        loop {
            match tree.nodes[at] {
                Node::Split {
                    p,
                    q,
                    offset,
                    left,
                    right,
                } => {
                    let m = margin(query, self.points.row(p as usize), self.points.row(q as usize), offset);
                    at = if m > 0.0 { left } else { right } as usize;
                }
                Node::Leaf { start, len } => return &tree.items[start as usize..(start + len) as usize],
            }
        }
    }
}

/// Alias of [`RpForest::build`].
pub fn build_forest(space: &EmbeddingSpace, trees: usize, leaf_capacity: usize, seed: u64) -> Result<RpForest<'_>> {
    RpForest::build(space, trees, leaf_capacity, seed)
}

#[inline]
fn margin(x: &[f64], p: &[f64], q: &[f64], offset: f64) -> f64 {
    x.iter().zip(p.iter().zip(q)).map(|(x, (p, q))| x * (p - q)).sum::<f64>() - offset
}

fn bisector_offset(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(p, q)| (0.5 * (p + q)) * (p - q)).sum()
}

fn build_tree(points: &Points<'_>, leaf_capacity: usize, seed: u64, stream: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let n = points.len();
    let mut items: Vec<u32> = (0..n as u32).collect();
    let mut nodes = vec![Node::Leaf { start: 0, len: 0 }];
    let mut stack = vec![(0usize, 0usize, n)];

    while let Some((id, lo, hi)) = stack.pop() {
        let leaf = Node::Leaf {
            start: lo as u32,
            len: (hi - lo) as u32,
        };
        if hi - lo <= leaf_capacity {
            nodes[id] = leaf;
            continue;
        }
        let mut split = None;
        for _ in 0..SPLIT_ATTEMPTS {
            let a = rng.random_range(lo..hi);
            let mut b = rng.random_range(lo..hi - 1);
            if b >= a {
                b += 1;
            }
            let (p, q) = (items[a], items[b]);
            let (pv, qv) = (points.row(p as usize), points.row(q as usize));
            if pv == qv {
                continue;
            }
            let offset = bisector_offset(pv, qv);
            let mid = partition(&mut items[lo..hi], |i| margin(points.row(i as usize), pv, qv, offset) > 0.0) + lo;
            if mid > lo && mid < hi {
                split = Some((p, q, offset, mid));
                break;
            }
        }
        match split {
            Some((p, q, offset, mid)) => {
                let left = nodes.len();
                nodes.push(Node::Leaf { start: 0, len: 0 });
                nodes.push(Node::Leaf { start: 0, len: 0 });
                nodes[id] = Node::Split {
                    p,
                    q,
                    offset,
                    left: left as u32,
                    right: left as u32 + 1,
                };
                stack.push((left + 1, mid, hi));
                stack.push((left, lo, mid));
            }
            // All sampled pairs coincide; keep the points together.
            None => nodes[id] = leaf,
        }
    }
    Tree { nodes, items }
}

/// Moves items satisfying `pred` to the front; returns their count.
fn partition(items: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut front = 0;
    for i in 0..items.len() {
        if pred(items[i]) {
            items.swap(front, i);
            front += 1;
        }
    }
    front
}
