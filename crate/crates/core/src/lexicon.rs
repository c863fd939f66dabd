//! Bilingual dictionaries: two whitespace-separated words per line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::embedding::Lang;
use crate::error::{Error, Result};

/// Ordered, de-duplicated (source, target) pairs. One source word may have
/// several translations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    source_language: Lang,
    target_language: Lang,
    pairs: Vec<(String, String)>,
}

impl Lexicon {
    /// Duplicate pairs are dropped, keeping the first occurrence.
    pub fn new<I, S, T>(source_language: impl Into<Lang>, target_language: impl Into<Lang>, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut seen = HashSet::new();
        let pairs = pairs
            .into_iter()
            .map(|(s, t)| (s.into(), t.into()))
            .filter(|pair| seen.insert(pair.clone()))
            .collect();
        Lexicon {
            source_language: source_language.into(),
            target_language: target_language.into(),
            pairs,
        }
    }

    pub fn source_language(&self) -> &Lang {
        &self.source_language
    }

    pub fn target_language(&self) -> &Lang {
        &self.target_language
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs of `self` that do not occur in `exclude`.
    pub fn filter(&self, exclude: &Lexicon) -> Lexicon {
        let drop: HashSet<&(String, String)> = exclude.pairs.iter().collect();
        Lexicon {
            source_language: self.source_language.clone(),
            target_language: self.target_language.clone(),
            pairs: self.pairs.iter().filter(|p| !drop.contains(p)).cloned().collect(),
        }
    }

    pub fn lowercased(&self) -> Lexicon {
        Lexicon::new(
            self.source_language.clone(),
            self.target_language.clone(),
            self.pairs.iter().map(|(s, t)| (s.to_lowercase(), t.to_lowercase())),
        )
    }
}

/// Same as [`Lexicon::filter`].
pub fn filter_lexicon(lex: &Lexicon, exclude: &Lexicon) -> Lexicon {
    lex.filter(exclude)
}

pub fn load_lexicon(path: impl AsRef<Path>, src: impl Into<Lang>, tgt: impl Into<Lang>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lexicon(BufReader::new(file), src, tgt)
}

pub fn read_lexicon<R: BufRead>(reader: R, src: impl Into<Lang>, tgt: impl Into<Lang>) -> Result<Lexicon> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            [s, t] => pairs.push((s.to_string(), t.to_string())),
            _ => {
                return Err(Error::Arity {
                    line: i + 1,
                    expected: 2,
                    found: tokens.len(),
                })
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    Ok(Lexicon::new(src, tgt, pairs))
}
