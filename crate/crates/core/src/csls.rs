//! Cross-domain similarity local scaling and the retrieval tasks built on it.
//!
//! `CSLS(Ws, t) = 2 cos(Ws, t) - r(Ws) - r(t)`, where `r(x)` is the mean
//! cosine of the `kappa` nearest cross-lingual neighbors of `x`. The penalty
//! pulls down hubs that are close to everything.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::ann::RpForest;
use crate::embedding::{EmbeddingSpace, Lang};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::mapping::MappingMatrix;
use crate::vector::{by_score_then_id, cosine_with_norms, norm, pairwise_sum, top_k};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CslsOptions {
    /// Neighborhood size of the `r` penalty.
    pub kappa: usize,
    /// Largest side (in words) for which `r` is computed exhaustively; larger
    /// vocabularies use a random-projection forest.
    pub exact_limit: usize,
    pub trees: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
}

impl Default for CslsOptions {
    fn default() -> Self {
        CslsOptions {
            kappa: crate::DEFAULT_CSLS_KAPPA,
            exact_limit: 20_000,
            trees: crate::DEFAULT_TREES,
            leaf_capacity: crate::DEFAULT_LEAF_CAPACITY,
            seed: 0,
        }
    }
}

/// Mapped source space, target space and their cached `r` penalties.
#[derive(Clone, Debug)]
pub struct CslsContext {
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    source_lang: Lang,
    target_lang: Lang,
    source_norms: Vec<f64>,
    target_norms: Vec<f64>,
    r_source: Vec<f64>,
    r_target: Vec<f64>,
    kappa: usize,
}

impl CslsContext {
    /// `source` and `target` must each hold one language. `mapping` (identity
    /// when `None`) is applied to the source vectors.
    pub fn new(
        source: &EmbeddingSpace,
        target: &EmbeddingSpace,
        mapping: Option<&MappingMatrix>,
        options: &CslsOptions,
    ) -> Result<Self> {
        let single = |space: &EmbeddingSpace| {
            space.single_language().cloned().ok_or_else(|| {
                Error::InvalidParameter("CSLS spaces must each contain exactly one language".into())
            })
        };
        let source_lang = single(source)?;
        let target_lang = single(target)?;
        if options.kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be at least 1".into()));
        }
        let source = match mapping {
            Some(w) => w.apply(source)?,
            None => source.clone(),
        };
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: source.dim(),
            });
        }
        let norms = |space: &EmbeddingSpace| -> Vec<f64> { (0..space.len()).map(|i| norm(space.vector(i))).collect() };
        let source_norms = norms(&source);
        let target_norms = norms(target);

        let exact = source.len().max(target.len()) <= options.exact_limit;
        let r_source = mean_top_similarity(&source, &source_norms, target, &target_norms, options, exact)?;
        let r_target = mean_top_similarity(target, &target_norms, &source, &source_norms, options, exact)?;
        Ok(CslsContext {
            source,
            target: target.clone(),
            source_lang,
            target_lang,
            source_norms,
            target_norms,
            r_source,
            r_target,
            kappa: options.kappa,
        })
    }

    /// Context over the `limit` most frequent words of each side.
    pub fn restricted(
        source: &EmbeddingSpace,
        target: &EmbeddingSpace,
        mapping: Option<&MappingMatrix>,
        limit: usize,
        options: &CslsOptions,
    ) -> Result<Self> {
        Self::new(
            &source.truncate_per_language(limit)?,
            &target.truncate_per_language(limit)?,
            mapping,
            options,
        )
    }

    /// Replaces the cached penalties. Meant for diagnostics that need to
    /// probe how the penalty terms steer retrieval.
    pub fn with_caches(mut self, r_source: Vec<f64>, r_target: Vec<f64>) -> Result<Self> {
        if r_source.len() != self.source.len() {
            return Err(Error::LengthMismatch(r_source.len(), self.source.len()));
        }
        if r_target.len() != self.target.len() {
            return Err(Error::LengthMismatch(r_target.len(), self.target.len()));
        }
        self.r_source = r_source;
        self.r_target = r_target;
        Ok(self)
    }

    /// The source space after mapping.
    pub fn source(&self) -> &EmbeddingSpace {
        &self.source
    }

    pub fn target(&self) -> &EmbeddingSpace {
        &self.target
    }

    pub fn source_language(&self) -> &Lang {
        &self.source_lang
    }

    pub fn target_language(&self) -> &Lang {
        &self.target_lang
    }

    pub fn r_source(&self) -> &[f64] {
        &self.r_source
    }

    pub fn r_target(&self) -> &[f64] {
        &self.r_target
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn source_index(&self, word: &str) -> Result<usize> {
        self.source.find(&self.source_lang, word).ok_or_else(|| Error::OutOfVocabulary {
            lang: self.source_lang.to_string(),
            word: word.to_owned(),
        })
    }

    pub fn target_index(&self, word: &str) -> Result<usize> {
        self.target.find(&self.target_lang, word).ok_or_else(|| Error::OutOfVocabulary {
            lang: self.target_lang.to_string(),
            word: word.to_owned(),
        })
    }

    /// `cos(Ws, t)` by index.
    pub fn cosine(&self, s: usize, t: usize) -> f64 {
        cosine_with_norms(
            self.source.vector(s),
            self.source_norms[s],
            self.target.vector(t),
            self.target_norms[t],
        )
    }

    /// CSLS by index.
    pub fn score(&self, s: usize, t: usize) -> f64 {
        2.0 * self.cosine(s, t) - self.r_source[s] - self.r_target[t]
    }

    pub fn csls(&self, source_word: &str, target_word: &str) -> Result<f64> {
        Ok(self.score(self.source_index(source_word)?, self.target_index(target_word)?))
    }

    /// Top `n` targets of source `s` by CSLS; ties go to the lower target id.
    pub fn retrieve_index(&self, s: usize, n: usize) -> Vec<(usize, f64)> {
        let scored = (0..self.target.len()).map(|t| (self.score(s, t), t)).collect();
        top_k(scored, n).into_iter().map(|(score, t)| (t, score)).collect()
    }

    pub fn csls_retrieve(&self, source_word: &str, n: usize) -> Result<Vec<(String, f64)>> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let s = self.source_index(source_word)?;
        Ok(self
            .retrieve_index(s, n)
            .into_iter()
            .map(|(t, score)| (self.target.word(t).to_owned(), score))
            .collect())
    }

    /// CSLS-nearest target of source `s`.
    pub fn nearest_target(&self, s: usize) -> (usize, f64) {
        best((0..self.target.len()).map(|t| (self.score(s, t), t)))
    }

    /// CSLS-nearest source of target `t`.
    pub fn nearest_source(&self, t: usize) -> (usize, f64) {
        best((0..self.source.len()).map(|s| (self.score(s, t), s)))
    }

    /// Precision@1 of CSLS retrieval against a test dictionary.
    ///
    /// Each distinct source word is evaluated once against the set of its
    /// in-vocabulary gold translations. Pairs whose source word is out of
    /// vocabulary, or whose source word has no in-vocabulary translation,
    /// are counted in `skipped_oov`.
    pub fn bli_p_at_1(&self, test: &Lexicon) -> Result<BliResult> {
        self.check_languages(test)?;
        let mut order: Vec<&str> = Vec::new();
        let mut golds: HashMap<&str, Vec<&str>> = HashMap::new();
        for (s, t) in test.pairs() {
            golds
                .entry(s.as_str())
                .or_insert_with(|| {
                    order.push(s.as_str());
                    Vec::new()
                })
                .push(t.as_str());
        }

        let mut skipped_oov = 0;
        let mut queries = Vec::new();
        for s in order {
            let targets = &golds[s];
            let Some(s_idx) = self.source.find(&self.source_lang, s) else {
                skipped_oov += targets.len();
                continue;
            };
            let gold: Vec<usize> = targets
                .iter()
                .filter_map(|t| self.target.find(&self.target_lang, t))
                .collect();
            if gold.is_empty() {
                skipped_oov += targets.len();
                continue;
            }
            queries.push((s_idx, gold));
        }
        if queries.is_empty() {
            return Err(Error::NoEvaluablePairs);
        }

        let rows: Vec<BliRow> = queries
            .par_iter()
            .map(|(s, gold)| {
                let (predicted, score) = self.nearest_target(*s);
                BliRow {
                    source: self.source.word(*s).to_owned(),
                    gold: gold.iter().map(|&t| self.target.word(t).to_owned()).collect(),
                    predicted: self.target.word(predicted).to_owned(),
                    correct: gold.contains(&predicted),
                    score,
                }
            })
            .collect();
        let correct = rows.iter().filter(|r| r.correct).count();
        Ok(BliResult {
            p_at_1: correct as f64 / rows.len() as f64,
            evaluated: rows.len(),
            correct,
            skipped_oov,
            rows,
        })
    }

    /// The `n` nearest targets of each seed word. Out-of-vocabulary seeds are
    /// reported and skipped.
    pub fn expand_lexicon<S: AsRef<str>>(&self, seeds: &[S], n: usize, similarity: Similarity) -> Result<Expansion> {
        if seeds.is_empty() {
            return Err(Error::InvalidParameter("no seed words".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let mut expansion = Expansion::default();
        for seed in seeds {
            let seed = seed.as_ref();
            let Some(s) = self.source.find(&self.source_lang, seed) else {
                expansion.out_of_vocabulary.push(seed.to_owned());
                continue;
            };
            let ranked = match similarity {
                Similarity::Csls => self.retrieve_index(s, n),
                Similarity::Cosine => {
                    let scored = (0..self.target.len()).map(|t| (self.cosine(s, t), t)).collect();
                    top_k(scored, n).into_iter().map(|(c, t)| (t, c)).collect()
                }
            };
            let ranked = ranked
                .into_iter()
                .map(|(t, score)| (self.target.word(t).to_owned(), score))
                .collect();
            expansion.entries.push((seed.to_owned(), ranked));
        }
        if expansion.entries.is_empty() {
            return Err(Error::AllSeedsOutOfVocabulary);
        }
        Ok(expansion)
    }

    /// Mean `cos(Ws, t)` over the in-vocabulary pairs of `lex`.
    pub fn mean_translation_cosine(&self, lex: &Lexicon) -> Result<f64> {
        self.check_languages(lex)?;
        let cosines: Vec<f64> = lex
            .pairs()
            .iter()
            .filter_map(|(s, t)| {
                let s = self.source.find(&self.source_lang, s)?;
                let t = self.target.find(&self.target_lang, t)?;
                Some(self.cosine(s, t))
            })
            .collect();
        if cosines.is_empty() {
            return Err(Error::NoPairs);
        }
        Ok(pairwise_sum(&cosines) / cosines.len() as f64)
    }

    /// Mean top-1 CSLS score over every source word of the context. Build the
    /// context with [`CslsContext::restricted`] to get the 10K-word variant.
    pub fn csls_10k(&self) -> Result<f64> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let best: Vec<f64> = (0..self.source.len())
            .into_par_iter()
            .map(|s| self.nearest_target(s).1)
            .collect();
        Ok(pairwise_sum(&best) / best.len() as f64)
    }

    fn check_languages(&self, lex: &Lexicon) -> Result<()> {
        if lex.source_language() != &self.source_lang || lex.target_language() != &self.target_lang {
            return Err(Error::LanguageMismatch {
                expected: format!("{}-{}", self.source_lang, self.target_lang),
                found: format!("{}-{}", lex.source_language(), lex.target_language()),
            });
        }
        Ok(())
    }
}

fn best(scored: impl Iterator<Item = (f64, usize)>) -> (usize, f64) {
    let (score, id) = scored
        .reduce(|a, b| if by_score_then_id(b, a).is_lt() { b } else { a })
        .expect("non-empty space");
    (id, score)
}

/// Mean cosine of each query row's `kappa` most similar rows of `other`
/// (fewer if `other` is smaller).
fn mean_top_similarity(
    queries: &EmbeddingSpace,
    query_norms: &[f64],
    other: &EmbeddingSpace,
    other_norms: &[f64],
    options: &CslsOptions,
    exact: bool,
) -> Result<Vec<f64>> {
    if queries.is_empty() || other.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mean = |sims: Vec<f64>| sims.iter().sum::<f64>() / sims.len() as f64;
    if exact {
        Ok((0..queries.len())
            .into_par_iter()
            .map(|i| {
                let q = queries.vector(i);
                let scored = (0..other.len())
                    .map(|j| (cosine_with_norms(q, query_norms[i], other.vector(j), other_norms[j]), j))
                    .collect();
                mean(top_k(scored, options.kappa).into_iter().map(|(c, _)| c).collect())
            })
            .collect())
    } else {
        let forest = RpForest::from_data(other.data(), other.dim(), options.trees, options.leaf_capacity, options.seed)?;
        (0..queries.len())
            .into_par_iter()
            .map(|i| {
                let hits = forest.knn(queries.vector(i), options.kappa, None)?;
                Ok(mean(hits.into_iter().map(|h| h.similarity).collect()))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Similarity {
    #[default]
    Csls,
    Cosine,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expansion {
    /// Seed word and its ranked `(target word, score)` list.
    pub entries: Vec<(String, Vec<(String, f64)>)>,
    pub out_of_vocabulary: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BliRow {
    pub source: String,
    pub gold: Vec<String>,
    pub predicted: String,
    pub correct: bool,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BliResult {
    pub p_at_1: f64,
    pub evaluated: usize,
    pub correct: usize,
    pub skipped_oov: usize,
    pub rows: Vec<BliRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(lang: &str, rows: &[(&str, [f64; 2])]) -> EmbeddingSpace {
        EmbeddingSpace::from_rows(lang, rows.iter().map(|(w, v)| (*w, v.to_vec()))).unwrap()
    }

    fn ctx(src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> CslsContext {
        CslsContext::new(src, tgt, None, &CslsOptions::default()).unwrap()
    }

    #[test]
    fn single_pair_scores_zero() {
        let c = ctx(&space("en", &[("a", [1.0, 0.0])]), &space("ja", &[("b", [1.0, 0.0])]));
        assert_eq!(c.r_source(), &[1.0]);
        assert_eq!(c.r_target(), &[1.0]);
        assert_eq!(c.csls("a", "b").unwrap(), 0.0);
    }

    #[test]
    fn antipodal_pair_scores_zero() {
        let c = ctx(&space("en", &[("a", [1.0, 0.0])]), &space("ja", &[("b", [-1.0, 0.0])]));
        assert_eq!(c.r_source(), &[-1.0]);
        assert_eq!(c.csls("a", "b").unwrap(), 0.0);
    }

    #[test]
    fn formula_with_injected_caches() {
        // cos = 0.8
        let c = ctx(&space("en", &[("a", [1.0, 0.0])]), &space("ja", &[("b", [0.8, 0.6])]))
            .with_caches(vec![0.5], vec![0.3])
            .unwrap();
        assert!((c.csls("a", "b").unwrap() - 0.8).abs() < 1e-12);
        assert!(ctx(&space("en", &[("a", [1.0, 0.0])]), &space("ja", &[("b", [0.8, 0.6])]))
            .with_caches(vec![], vec![0.3])
            .is_err());
    }

    #[test]
    fn oov_and_language_checks() {
        let c = ctx(&space("en", &[("a", [1.0, 0.0])]), &space("ja", &[("b", [1.0, 0.0])]));
        assert!(matches!(c.csls("zz", "b"), Err(Error::OutOfVocabulary { .. })));
        let wrong = Lexicon::new("en", "fr", [("a", "b")]);
        assert!(matches!(c.bli_p_at_1(&wrong), Err(Error::LanguageMismatch { .. })));
        let oov = Lexicon::new("en", "ja", [("x", "b"), ("a", "y")]);
        assert!(matches!(c.bli_p_at_1(&oov), Err(Error::NoEvaluablePairs)));
        assert!(matches!(c.mean_translation_cosine(&oov), Err(Error::NoPairs)));
        assert!(matches!(c.expand_lexicon(&["x"], 1, Similarity::Csls), Err(Error::AllSeedsOutOfVocabulary)));
    }

    #[test]
    fn retrieve_caps_at_vocabulary() {
        let t = space("ja", &[("x", [1.0, 0.0]), ("y", [0.0, 1.0])]);
        let c = ctx(&space("en", &[("a", [1.0, 0.0])]), &t);
        assert_eq!(c.csls_retrieve("a", 10).unwrap().len(), 2);
        assert_eq!(c.csls_retrieve("a", 1).unwrap()[0].0, "x");
    }

    #[test]
    fn mean_cosine_of_mixed_pairs() {
        let s = space("en", &[("a", [1.0, 0.0]), ("b", [0.0, 1.0])]);
        let t = space("ja", &[("a", [1.0, 0.0]), ("c", [1.0, 0.0])]);
        let c = ctx(&s, &t);
        let lex = Lexicon::new("en", "ja", [("a", "a"), ("b", "c"), ("b", "missing")]);
        assert_eq!(c.mean_translation_cosine(&lex).unwrap(), 0.5);
    }

    #[test]
    fn partial_oov_targets_still_evaluate() {
        let s = space("en", &[("a", [1.0, 0.0]), ("b", [0.0, 1.0])]);
        let t = space("ja", &[("x", [1.0, 0.0]), ("y", [0.0, 1.0])]);
        let c = ctx(&s, &t);
        let lex = Lexicon::new("en", "ja", [("a", "x"), ("a", "gone"), ("b", "gone"), ("q", "y")]);
        let r = c.bli_p_at_1(&lex).unwrap();
        assert_eq!((r.evaluated, r.correct, r.skipped_oov), (1, 1, 2));
        assert_eq!(r.p_at_1, 1.0);
    }
}
