//! Corpus cleaning ahead of external embedding training: lowercase, drop
//! tokens with non-alphabetic characters, drop stopwords, drop rare words.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusStats {
    /// Distinct words in the output corpus.
    pub vocab_size: u64,
    /// Tokens in the output corpus.
    pub token_count: u64,
    /// Distinct words removed for falling below the minimum count.
    pub dropped_rare_words: u64,
    /// Stopword tokens removed.
    pub dropped_stopwords: u64,
}

/// A cleaned corpus held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub sentences: Vec<String>,
    pub stats: CorpusStats,
    pub frequencies: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::parse(&text))
    }

    /// The bundled English list (the NLTK stopwords).
    pub fn english() -> Self {
        Stopwords::parse(include_str!("../data/stopwords_en.txt"))
    }

    fn parse(text: &str) -> Self {
        Stopwords::new(text.lines().map(str::trim).filter(|l| !l.starts_with('#')))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tokens of one sentence surviving case folding, the alphabetic filter and
/// the stopword filter. Returns the number of stopword tokens removed.
fn clean_sentence(line: &str, stopwords: &Stopwords, out: &mut Vec<String>) -> u64 {
    out.clear();
    let mut stopped = 0;
    for raw in line.split_whitespace() {
        let token = raw.to_lowercase();
        if !token.chars().all(char::is_alphabetic) {
            continue;
        }
        if stopwords.contains(&token) {
            stopped += 1;
            continue;
        }
        out.push(token);
    }
    stopped
}

struct Counts {
    raw: HashMap<String, u64>,
    stopped: u64,
}

fn count_tokens<R: BufRead>(reader: R, stopwords: &Stopwords, label: &str) -> Result<Counts> {
    let mut raw: HashMap<String, u64> = HashMap::new();
    let mut stopped = 0;
    let mut tokens = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(label, e))?;
        stopped += clean_sentence(&line, stopwords, &mut tokens);
        for t in tokens.drain(..) {
            *raw.entry(t).or_default() += 1;
        }
    }
    Ok(Counts { raw, stopped })
}

fn finish_counts(counts: Counts, min_count: u64) -> Result<(CorpusStats, BTreeMap<String, u64>)> {
    let mut stats = CorpusStats {
        dropped_stopwords: counts.stopped,
        ..CorpusStats::default()
    };
    let mut kept = BTreeMap::new();
    for (word, n) in counts.raw {
        if n < min_count {
            stats.dropped_rare_words += 1;
        } else {
            stats.token_count += n;
            kept.insert(word, n);
        }
    }
    stats.vocab_size = kept.len() as u64;
    if stats.token_count == 0 {
        return Err(Error::Empty("preprocessed corpus has no tokens".into()));
    }
    Ok((stats, kept))
}

/// Emit the kept tokens of each sentence; sentences left empty are skipped.
fn emit_sentences<R, F>(reader: R, stopwords: &Stopwords, kept: &BTreeMap<String, u64>, label: &str, mut emit: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(&str) -> Result<()>,
{
    let mut tokens = Vec::new();
    let mut sentence = String::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(label, e))?;
        clean_sentence(&line, stopwords, &mut tokens);
        sentence.clear();
        for t in tokens.iter().filter(|t| kept.contains_key(t.as_str())) {
            if !sentence.is_empty() {
                sentence.push(' ');
            }
            sentence.push_str(t);
        }
        if !sentence.is_empty() {
            emit(&sentence)?;
        }
    }
    Ok(())
}

fn check_min_count(min_count: u64) -> Result<()> {
    if min_count == 0 {
        return Err(Error::Invalid("min_count must be at least 1".into()));
    }
    Ok(())
}

/// Clean an in-memory text, one sentence per line.
pub fn preprocess_text(text: &str, stopwords: &Stopwords, min_count: u64) -> Result<Preprocessed> {
    check_min_count(min_count)?;
    let counts = count_tokens(text.as_bytes(), stopwords, "<text>")?;
    let (stats, frequencies) = finish_counts(counts, min_count)?;
    let mut sentences = Vec::new();
    emit_sentences(text.as_bytes(), stopwords, &frequencies, "<text>", |s| {
        sentences.push(s.to_string());
        Ok(())
    })?;
    Ok(Preprocessed {
        sentences,
        stats,
        frequencies,
    })
}

/// Clean `input` into `output` in two streaming passes (count, then write).
/// Returns the corpus statistics and the surviving word frequencies.
pub fn corpus_preprocess(
    input: impl AsRef<Path>,
    stopwords: &Stopwords,
    min_count: u64,
    output: impl AsRef<Path>,
) -> Result<(CorpusStats, BTreeMap<String, u64>)> {
    check_min_count(min_count)?;
    let input = input.as_ref();
    let output = output.as_ref();
    let label = input.display().to_string();
    let open = || -> Result<BufReader<File>> {
        Ok(BufReader::new(File::open(input).map_err(|e| Error::io(input, e))?))
    };

    let counts = count_tokens(open()?, stopwords, &label)?;
    let (stats, frequencies) = finish_counts(counts, min_count)?;

    let file = File::create(output).map_err(|e| Error::io(output, e))?;
    let mut out = BufWriter::new(file);
    emit_sentences(open()?, stopwords, &frequencies, &label, |s| {
        writeln!(out, "{s}").map_err(|e| Error::io(output, e))
    })?;
    out.flush().map_err(|e| Error::io(output, e))?;
    Ok((stats, frequencies))
}

/// Write `word<TAB>count` lines in word order.
pub fn save_frequencies(freqs: &BTreeMap<String, u64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (w, n) in freqs {
        writeln!(out, "{w}\t{n}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a `word<TAB>count` file.
pub fn load_frequencies(path: impl AsRef<Path>) -> Result<HashMap<String, u64>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut freqs = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (word, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(&label, i + 1, "expected `word<TAB>count`"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::parse(&label, i + 1, format!("bad count `{count}`")))?;
        if freqs.insert(word.to_string(), count).is_some() {
            return Err(Error::DuplicateWord(word.to_string()));
        }
    }
    Ok(freqs)
}
