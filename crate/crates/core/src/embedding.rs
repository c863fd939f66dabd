//! Language-labeled embedding spaces and the word2vec text format.
//!
//! A node is identified by the pair (language, surface string), so homographs
//! from different languages stay distinct. Each entry also remembers its
//! frequency rank, which is its 0-based position among the kept lines of the
//! source file.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::norm;

/// ISO-639-1 style language code.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Lang(String);

impl Lang {
    pub fn new(code: impl Into<String>) -> Self {
        Lang(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Lang {
    fn from(code: &str) -> Self {
        Lang(code.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreprocessStep {
    /// Divide every vector by its Euclidean norm.
    Unit,
    /// Subtract the per-dimension mean over the whole space.
    Center,
}

impl PreprocessStep {
    /// unit, center, unit
    pub const DEFAULT_CHAIN: [PreprocessStep; 3] = [
        PreprocessStep::Unit,
        PreprocessStep::Center,
        PreprocessStep::Unit,
    ];

    /// Parses a comma-separated chain such as `unit,center,unit`. The empty
    /// string and `none` give the empty chain.
    pub fn parse_chain(s: &str) -> Result<Vec<PreprocessStep>> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(Vec::new());
        }
        s.split(',').map(|step| step.trim().parse()).collect()
    }
}

impl FromStr for PreprocessStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(PreprocessStep::Unit),
            "center" => Ok(PreprocessStep::Center),
            other => Err(Error::InvalidParameter(format!(
                "unknown preprocessing step {other:?} (expected unit or center)"
            ))),
        }
    }
}

impl fmt::Display for PreprocessStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreprocessStep::Unit => "unit",
            PreprocessStep::Center => "center",
        })
    }
}

/// Words, their language labels and their vectors, stored row-major.
///
/// Immutable after construction; every transformation returns a new space.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    dim: usize,
    words: Vec<String>,
    lang_ids: Vec<usize>,
    ranks: Vec<usize>,
    data: Vec<f64>,
    languages: Vec<Lang>,
    lookup: Vec<HashMap<String, usize>>,
}

impl EmbeddingSpace {
    /// Builds a single-language space; ranks follow iteration order.
    pub fn from_rows<I, W>(lang: impl Into<Lang>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (W, Vec<f64>)>,
        W: Into<String>,
    {
        let lang = lang.into();
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        let mut lookup = HashMap::new();
        for (word, vector) in rows {
            let word = word.into();
            let d = *dim.get_or_insert(vector.len());
            if vector.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: vector.len(),
                });
            }
            if lookup.insert(word.clone(), words.len()).is_some() {
                return Err(Error::DuplicateWord {
                    lang: lang.to_string(),
                    word,
                });
            }
            words.push(word);
            data.extend_from_slice(&vector);
        }
        let dim = match dim {
            Some(0) => return Err(Error::InvalidParameter("dimension must be at least 1".into())),
            Some(d) => d,
            None => return Err(Error::EmptyVocabulary),
        };
        let n = words.len();
        Ok(EmbeddingSpace {
            dim,
            words,
            lang_ids: vec![0; n],
            ranks: (0..n).collect(),
            data,
            languages: vec![lang],
            lookup: vec![lookup],
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn lang(&self, i: usize) -> &Lang {
        &self.languages[self.lang_ids[i]]
    }

    /// Index of the node's language in [`languages`](Self::languages).
    pub fn lang_id(&self, i: usize) -> usize {
        self.lang_ids[i]
    }

    pub fn lang_ids(&self) -> &[usize] {
        &self.lang_ids
    }

    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major vector storage, `len() * dim()` values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn language_id(&self, lang: &Lang) -> Option<usize> {
        self.languages.iter().position(|l| l == lang)
    }

    pub fn find(&self, lang: &Lang, word: &str) -> Option<usize> {
        let id = self.language_id(lang)?;
        self.lookup[id].get(word).copied()
    }

    /// The only language of the space, if there is exactly one.
    pub fn single_language(&self) -> Option<&Lang> {
        match self.languages.as_slice() {
            [lang] => Some(lang),
            _ => None,
        }
    }

    /// Same entries with replacement vectors of dimension `dim`.
    pub fn with_data(&self, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != self.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: self.len() * dim.max(1),
                found: data.len(),
            });
        }
        Ok(EmbeddingSpace {
            dim,
            data,
            ..self.clone()
        })
    }

    /// Applies `steps` in order.
    pub fn preprocess(&self, steps: &[PreprocessStep]) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut data = self.data.clone();
        for step in steps {
            match step {
                PreprocessStep::Unit => {
                    for (i, row) in data.chunks_exact_mut(self.dim).enumerate() {
                        let len = norm(row);
                        if len == 0.0 || !len.is_finite() {
                            return Err(Error::ZeroNorm {
                                word: self.words[i].clone(),
                            });
                        }
                        row.iter_mut().for_each(|x| *x /= len);
                    }
                }
                PreprocessStep::Center => {
                    let mut mean = vec![0.0; self.dim];
                    for row in data.chunks_exact(self.dim) {
                        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
                    }
                    let n = self.len() as f64;
                    mean.iter_mut().for_each(|m| *m /= n);
                    for row in data.chunks_exact_mut(self.dim) {
                        row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
                    }
                }
            }
        }
        Ok(EmbeddingSpace {
            data,
            ..self.clone()
        })
    }

    /// Keeps, for each language, the `limit` entries of lowest rank.
    pub fn truncate_per_language(&self, limit: usize) -> Result<Self> {
        if limit == 0 {
            return Err(Error::InvalidParameter("frequency limit must be at least 1".into()));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.ranks[i] < limit).collect();
        Ok(self.select(&keep))
    }

    /// The entries of one language as a single-language space.
    pub fn language_subset(&self, lang: &Lang) -> Option<Self> {
        let id = self.language_id(lang)?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.lang_ids[i] == id).collect();
        let mut sub = self.select(&keep);
        sub.languages = vec![lang.clone()];
        sub.lookup = vec![std::mem::take(&mut sub.lookup[id])];
        sub.lang_ids.iter_mut().for_each(|l| *l = 0);
        Some(sub)
    }

    /// Entries at `keep` (increasing indices whose per-language ranks form a
    /// prefix, so ranks stay contiguous).
    fn select(&self, keep: &[usize]) -> Self {
        let mut lookup = vec![HashMap::new(); self.languages.len()];
        let mut data = Vec::with_capacity(keep.len() * self.dim);
        for (new, &old) in keep.iter().enumerate() {
            lookup[self.lang_ids[old]].insert(self.words[old].clone(), new);
            data.extend_from_slice(self.vector(old));
        }
        EmbeddingSpace {
            dim: self.dim,
            words: keep.iter().map(|&i| self.words[i].clone()).collect(),
            lang_ids: keep.iter().map(|&i| self.lang_ids[i]).collect(),
            ranks: keep.iter().map(|&i| self.ranks[i]).collect(),
            data,
            languages: self.languages.clone(),
            lookup,
        }
    }
}

/// Disjoint union of spaces with pairwise distinct languages.
///
/// Spaces are concatenated in order of their smallest language code, so the
/// result does not depend on the order of `spaces`.
pub fn merge_spaces(spaces: &[EmbeddingSpace]) -> Result<EmbeddingSpace> {
    let first = spaces.first().ok_or(Error::EmptyVocabulary)?;
    let dim = first.dim;
    let mut seen: Vec<&Lang> = Vec::new();
    for space in spaces {
        if space.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: space.dim,
            });
        }
        for lang in &space.languages {
            if seen.contains(&lang) {
                return Err(Error::DuplicateLanguage(lang.to_string()));
            }
            seen.push(lang);
        }
    }
    let mut ordered: Vec<&EmbeddingSpace> = spaces.iter().collect();
    ordered.sort_by(|a, b| a.languages.iter().min().cmp(&b.languages.iter().min()));

    let total: usize = spaces.iter().map(EmbeddingSpace::len).sum();
    let mut merged = EmbeddingSpace {
        dim,
        words: Vec::with_capacity(total),
        lang_ids: Vec::with_capacity(total),
        ranks: Vec::with_capacity(total),
        data: Vec::with_capacity(total * dim),
        languages: Vec::new(),
        lookup: Vec::new(),
    };
    for space in ordered {
        let lang_offset = merged.languages.len();
        let node_offset = merged.words.len();
        merged.languages.extend(space.languages.iter().cloned());
        merged.lookup.extend(space.lookup.iter().map(|table| {
            table
                .iter()
                .map(|(w, &i)| (w.clone(), i + node_offset))
                .collect::<HashMap<_, _>>()
        }));
        merged.words.extend(space.words.iter().cloned());
        merged.lang_ids.extend(space.lang_ids.iter().map(|l| l + lang_offset));
        merged.ranks.extend_from_slice(&space.ranks);
        merged.data.extend_from_slice(&space.data);
    }
    Ok(merged)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Lowercase every word before de-duplication.
    pub lowercase: bool,
}

#[derive(Clone, Debug)]
pub struct LoadedEmbeddings {
    pub space: EmbeddingSpace,
    /// Repeated words that were dropped (first occurrence wins).
    pub duplicates: usize,
}

pub fn load_embeddings(path: impl AsRef<Path>, lang: impl Into<Lang>) -> Result<LoadedEmbeddings> {
    load_embeddings_with(path, lang, LoadOptions::default())
}

pub fn load_embeddings_with(
    path: impl AsRef<Path>,
    lang: impl Into<Lang>,
    options: LoadOptions,
) -> Result<LoadedEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let loaded = read_embeddings(BufReader::new(file), lang, options)?;
    if loaded.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate words ignored",
            path.display(),
            loaded.duplicates
        );
    }
    Ok(loaded)
}

/// Reads the word2vec text format: a `count dim` header followed by one
/// `word v_1 .. v_dim` line per entry.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    lang: impl Into<Lang>,
    options: LoadOptions,
) -> Result<LoadedEmbeddings> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let (declared, dim) = parse_header(&header)?;
    if declared == 0 {
        return Err(Error::EmptyVocabulary);
    }

    let mut words = Vec::with_capacity(declared);
    let mut data = Vec::with_capacity(declared * dim);
    let mut lookup = HashMap::with_capacity(declared);
    let mut found = 0;
    let mut duplicates = 0;
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != dim + 1 {
            return Err(Error::Arity {
                line: line_no,
                expected: dim + 1,
                found: tokens.len(),
            });
        }
        found += 1;
        let word = if options.lowercase {
            tokens[0].to_lowercase()
        } else {
            tokens[0].to_owned()
        };
        let start = data.len();
        for token in &tokens[1..] {
            let value: f64 = token.parse().map_err(|_| Error::InvalidNumber {
                line: line_no,
                token: (*token).to_owned(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    line: line_no,
                    word,
                });
            }
            data.push(value);
        }
        if lookup.contains_key(&word) {
            duplicates += 1;
            data.truncate(start);
            continue;
        }
        lookup.insert(word.clone(), words.len());
        words.push(word);
    }
    if found != declared {
        return Err(Error::CountMismatch { declared, found });
    }

    let n = words.len();
    Ok(LoadedEmbeddings {
        space: EmbeddingSpace {
            dim,
            words,
            lang_ids: vec![0; n],
            ranks: (0..n).collect(),
            data,
            languages: vec![lang.into()],
            lookup: vec![lookup],
        },
        duplicates,
    })
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let malformed = || Error::MalformedHeader {
        line: 1,
        found: line.to_owned(),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [count, dim] = fields.as_slice() else {
        return Err(malformed());
    };
    let count = count.parse().map_err(|_| malformed())?;
    let dim: usize = dim.parse().map_err(|_| malformed())?;
    if dim == 0 {
        return Err(malformed());
    }
    Ok((count, dim))
}

/// Writes the `count dim` header and one line per entry with 6-decimal
/// fixed-point values.
pub fn write_embeddings<W: Write>(space: &EmbeddingSpace, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", space.len(), space.dim())?;
    for i in 0..space.len() {
        out.write_all(space.word(i).as_bytes())?;
        for x in space.vector(i) {
            write!(out, " {x:.6}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_embeddings(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(space, BufWriter::new(file))
}
