//! Embedding spaces: validated vocabulary + dense vector matrix, text-format
//! loading and saving, vocabulary intersection and meta-embedding averaging.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// On-disk text layouts understood by [`load_space`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceFormat {
    /// `<count> <dim>` header followed by one `word v1 .. vd` row per word.
    Word2VecText,
    /// Same rows as word2vec text, no header; the dimension comes from the first row.
    GloveText,
}

impl SpaceFormat {
    pub fn name(self) -> &'static str {
        match self {
            SpaceFormat::Word2VecText => "word2vec-text",
            SpaceFormat::GloveText => "glove-text",
        }
    }

    /// Guess the layout from the first non-blank line: two integer fields mean
    /// a word2vec header.
    pub fn detect(first_line: &str) -> SpaceFormat {
        let fields: Vec<&str> = first_line.split_whitespace().collect();
        if fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            SpaceFormat::Word2VecText
        } else {
            SpaceFormat::GloveText
        }
    }
}

impl fmt::Display for SpaceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec-text" | "word2vec" => Ok(SpaceFormat::Word2VecText),
            "glove-text" | "glove" => Ok(SpaceFormat::GloveText),
            other => Err(Error::Invalid(format!("unknown space format `{other}`"))),
        }
    }
}

/// Provenance of a space built by [`average_spaces`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetaEmbeddingInfo {
    pub source_count: usize,
    /// Shared words whose averaged vector cancelled to zero and were removed.
    pub dropped_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceMetadata {
    pub method_name: String,
    pub seed: Option<u64>,
    pub dimensions: usize,
    pub epochs: Option<u32>,
    pub window: Option<u32>,
    pub source_label: String,
    pub meta_embedding: Option<MetaEmbeddingInfo>,
}

impl SpaceMetadata {
    pub fn new(source_label: impl Into<String>, dimensions: usize) -> Self {
        SpaceMetadata {
            method_name: "unknown".to_string(),
            seed: None,
            dimensions,
            epochs: None,
            window: None,
            source_label: source_label.into(),
            meta_embedding: None,
        }
    }
}

/// A vocabulary with one dense, finite, nonzero vector per word.
///
/// Vectors are stored row-major in double precision. The space is immutable
/// once built, so it can be shared read-only across threads.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    metadata: SpaceMetadata,
    vocabulary: Vec<String>,
    vectors: Vec<f64>,
    word_index: HashMap<String, usize>,
}

impl EmbeddingSpace {
    /// Build a space from a flat row-major matrix whose width is
    /// `metadata.dimensions`.
    pub fn new(metadata: SpaceMetadata, vocabulary: Vec<String>, vectors: Vec<f64>) -> Result<Self> {
        let dim = metadata.dimensions;
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        if vocabulary.len() < 2 {
            return Err(Error::Invalid(format!(
                "an embedding space needs at least 2 words, got {}",
                vocabulary.len()
            )));
        }
        if vectors.len() != vocabulary.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocabulary.len() * dim,
                found: vectors.len(),
            });
        }
        let mut word_index = HashMap::with_capacity(vocabulary.len());
        for (i, word) in vocabulary.iter().enumerate() {
            if word_index.insert(word.clone(), i).is_some() {
                return Err(Error::DuplicateWord(word.clone()));
            }
            validate_row(word, &vectors[i * dim..(i + 1) * dim])?;
        }
        Ok(EmbeddingSpace {
            metadata,
            vocabulary,
            vectors,
            word_index,
        })
    }

    /// Convenience constructor from `(word, vector)` rows.
    pub fn from_rows<S: Into<String>>(source_label: &str, rows: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map(|(_, v)| v.len()).unwrap_or(0);
        let mut vocabulary = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (word, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            vocabulary.push(word.into());
            vectors.extend(v);
        }
        EmbeddingSpace::new(SpaceMetadata::new(source_label, dim), vocabulary, vectors)
    }

    pub fn metadata(&self) -> &SpaceMetadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut SpaceMetadata {
        &mut self.metadata
    }

    /// Identifier used in reports; the source label.
    pub fn id(&self) -> &str {
        &self.metadata.source_label
    }

    pub fn dim(&self) -> usize {
        self.metadata.dimensions
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_index.contains_key(word)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.vectors[i * d..(i + 1) * d]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn matrix(&self) -> &[f64] {
        &self.vectors
    }

    /// SHA-256 over words and vector bit patterns, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim() as u64).to_le_bytes());
        for (i, word) in self.vocabulary.iter().enumerate() {
            hasher.update(word.as_bytes());
            hasher.update([0u8]);
            for x in self.row(i) {
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A copy of this space with every row replaced.
    pub(crate) fn with_vectors(&self, vectors: Vec<f64>) -> EmbeddingSpace {
        debug_assert_eq!(vectors.len(), self.vectors.len());
        EmbeddingSpace {
            metadata: self.metadata.clone(),
            vocabulary: self.vocabulary.clone(),
            vectors,
            word_index: self.word_index.clone(),
        }
    }
}

fn validate_row(word: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            word: word.to_string(),
        });
    }
    if row.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroNorm {
            word: word.to_string(),
        });
    }
    Ok(())
}

/// Load a space from a text file. The source label is the file path.
pub fn load_space(path: impl AsRef<Path>, format: SpaceFormat) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_space(BufReader::new(file), format, &path.display().to_string())
}

/// Load a space, detecting the layout from the first line.
pub fn load_space_auto(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    loop {
        first.clear();
        let n = reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        if n == 0 || !first.trim().is_empty() {
            break;
        }
    }
    let format = SpaceFormat::detect(&first);
    drop(reader);
    load_space(path, format)
}

/// Load with an explicit layout, or detect it when `format` is `None`.
pub fn open_space(path: impl AsRef<Path>, format: Option<SpaceFormat>) -> Result<EmbeddingSpace> {
    match format {
        Some(f) => load_space(path, f),
        None => load_space_auto(path),
    }
}

/// Read a word list, one word per line, ignoring blank lines.
pub fn load_word_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Parse a space from any buffered reader.
pub fn read_space<R: BufRead>(reader: R, format: SpaceFormat, label: &str) -> Result<EmbeddingSpace> {
    let mut declared: Option<(usize, usize)> = None;
    let mut dim: Option<usize> = None;
    let mut vocabulary = Vec::new();
    let mut vectors = Vec::new();
    let mut seen = HashSet::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if format == SpaceFormat::Word2VecText && declared.is_none() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Vec<usize> = fields.iter().filter_map(|f| f.parse().ok()).collect();
            if fields.len() != 2 || parsed.len() != 2 {
                return Err(Error::parse(label, lineno, format!("malformed header `{}`", line.trim())));
            }
            if parsed[1] == 0 {
                return Err(Error::parse(label, lineno, "header declares zero dimensions"));
            }
            declared = Some((parsed[0], parsed[1]));
            dim = Some(parsed[1]);
            continue;
        }

        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a field");
        let start = vectors.len();
        for field in fields {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::parse(label, lineno, format!("bad number `{field}`")))?;
            vectors.push(x);
        }
        let width = vectors.len() - start;
        match dim {
            None => {
                if width == 0 {
                    return Err(Error::parse(label, lineno, format!("word `{word}` has no values")));
                }
                dim = Some(width);
            }
            Some(d) if d != width => {
                return Err(Error::parse(
                    label,
                    lineno,
                    format!("row width {width} does not match dimension {d}"),
                ));
            }
            Some(_) => {}
        }
        if !seen.insert(word.to_string()) {
            return Err(Error::DuplicateWord(word.to_string()));
        }
        validate_row(word, &vectors[start..])?;
        vocabulary.push(word.to_string());
    }

    if vocabulary.is_empty() {
        return Err(Error::Empty(format!("no embedding rows in {label}")));
    }
    if let Some((count, _)) = declared {
        if count != vocabulary.len() {
            return Err(Error::parse(
                label,
                1,
                format!("header declares {count} words but {} rows follow", vocabulary.len()),
            ));
        }
    }
    let dim = dim.expect("at least one row was read");
    EmbeddingSpace::new(SpaceMetadata::new(label, dim), vocabulary, vectors)
}

/// Write a space in word2vec text layout. Values are printed with the
/// shortest representation that parses back to the same `f64`.
pub fn save_space(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_space(space, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_space<W: Write>(space: &EmbeddingSpace, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{} {}", space.len(), space.dim())?;
    for (i, word) in space.vocabulary().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        for x in space.row(i) {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Words present in every space, sorted lexicographically.
pub fn intersect_vocab(spaces: &[&EmbeddingSpace]) -> Result<Vec<String>> {
    if spaces.len() < 2 {
        return Err(Error::Invalid(format!(
            "vocabulary intersection needs at least 2 spaces, got {}",
            spaces.len()
        )));
    }
    let smallest = spaces.iter().min_by_key(|s| s.len()).expect("non-empty");
    let mut shared: Vec<String> = smallest
        .vocabulary()
        .iter()
        .filter(|w| spaces.iter().all(|s| s.contains(w)))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    shared.sort_unstable();
    Ok(shared)
}

/// Element-wise mean of each shared word's vectors across all spaces.
///
/// The output vocabulary is the sorted intersection. Coordinates are summed
/// in sorted value order so the result does not depend on argument order.
/// Words whose mean vector is exactly zero are dropped and listed in
/// `metadata().meta_embedding`.
pub fn average_spaces(spaces: &[&EmbeddingSpace]) -> Result<EmbeddingSpace> {
    let shared = intersect_vocab(spaces)?;
    let dim = spaces[0].dim();
    for s in spaces {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }

    let p = spaces.len() as f64;
    let mut vocabulary = Vec::with_capacity(shared.len());
    let mut vectors = Vec::with_capacity(shared.len() * dim);
    let mut dropped = Vec::new();
    let mut column = vec![0.0f64; spaces.len()];
    let mut mean = vec![0.0f64; dim];

    for word in shared {
        let rows: Vec<&[f64]> = spaces
            .iter()
            .map(|s| s.vector(&word).expect("word is shared"))
            .collect();
        for (j, m) in mean.iter_mut().enumerate() {
            for (c, row) in column.iter_mut().zip(&rows) {
                *c = row[j];
            }
            column.sort_by(f64::total_cmp);
            *m = column.iter().sum::<f64>() / p;
        }
        if mean.iter().all(|&x| x == 0.0) {
            dropped.push(word);
            continue;
        }
        vocabulary.push(word);
        vectors.extend_from_slice(&mean);
    }

    let mut methods: Vec<&str> = spaces.iter().map(|s| s.metadata().method_name.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut metadata = SpaceMetadata::new(format!("mean of {} spaces", spaces.len()), dim);
    metadata.method_name = format!("meta-embedding({})", methods.join("+"));
    metadata.meta_embedding = Some(MetaEmbeddingInfo {
        source_count: spaces.len(),
        dropped_words: dropped,
    });
    EmbeddingSpace::new(metadata, vocabulary, vectors)
}
