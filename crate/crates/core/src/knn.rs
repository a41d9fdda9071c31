//! Exact top-k cosine neighbor search.
//!
//! Neighbor lists are ordered by similarity (descending) and then by word
//! (lexicographic ascending), so results are fully deterministic. The query
//! word never appears in its own list.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::EmbeddingSpace;

/// Queries scored together against one pass over the candidate rows.
const QUERY_BLOCK: usize = 8;

/// L2 norm accumulated in double precision.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm {
            word: "<vector>".into(),
        });
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Scale every row to unit length.
pub fn normalize(space: &EmbeddingSpace) -> EmbeddingSpace {
    let d = space.dim();
    let mut out = Vec::with_capacity(space.matrix().len());
    for i in 0..space.len() {
        let row = space.row(i);
        let n = norm(row);
        out.extend(row.iter().map(|x| x / n));
    }
    debug_assert_eq!(out.len(), space.len() * d);
    space.with_vectors(out)
}

/// Ranked top-k neighbor lists for every word of a restricted vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    space_id: String,
    k: usize,
    vocabulary: Vec<String>,
    index: HashMap<String, u32>,
    /// Row-major `len × k` neighbor ids into `vocabulary`.
    neighbors: Vec<u32>,
}

impl NeighborTable {
    /// Build a table from explicit neighbor word lists (one per vocabulary word).
    pub fn from_lists<S: AsRef<str>>(
        space_id: impl Into<String>,
        vocabulary: Vec<String>,
        k: usize,
        lists: &[Vec<S>],
    ) -> Result<Self> {
        let index = build_index(&vocabulary)?;
        check_k(k, vocabulary.len())?;
        if lists.len() != vocabulary.len() {
            return Err(Error::VocabMismatch(format!(
                "{} neighbor lists for {} words",
                lists.len(),
                vocabulary.len()
            )));
        }
        let mut neighbors = Vec::with_capacity(vocabulary.len() * k);
        let mut seen = HashSet::with_capacity(k);
        for (i, list) in lists.iter().enumerate() {
            let query = &vocabulary[i];
            if list.len() != k {
                return Err(Error::Invalid(format!(
                    "neighbor list of `{query}` has {} entries, expected {k}",
                    list.len()
                )));
            }
            seen.clear();
            for w in list {
                let w = w.as_ref();
                let id = *index.get(w).ok_or_else(|| Error::MissingWord(w.to_string()))?;
                if id as usize == i {
                    return Err(Error::Invalid(format!("`{query}` lists itself as a neighbor")));
                }
                if !seen.insert(id) {
                    return Err(Error::Invalid(format!("`{query}` lists `{w}` twice")));
                }
                neighbors.push(id);
            }
        }
        Ok(NeighborTable {
            space_id: space_id.into(),
            k,
            vocabulary,
            index,
            neighbors,
        })
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    /// Neighbor ids (indices into `vocabulary()`) of the `i`-th word.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    pub fn neighbors_of(&self, word: &str) -> Option<&[u32]> {
        self.index_of(word).map(|i| self.neighbors(i))
    }

    pub fn neighbor_words(&self, word: &str) -> Option<Vec<&str>> {
        self.neighbors_of(word)
            .map(|ids| ids.iter().map(|&j| self.vocabulary[j as usize].as_str()).collect())
    }

    /// The same table cut down to the first `k` neighbors of each word. Because
    /// lists follow a total order, this equals a fresh search at the smaller `k`.
    pub fn truncate(&self, k: usize) -> Result<NeighborTable> {
        if k == 0 || k > self.k {
            return Err(Error::KOutOfRange {
                k,
                vocab: self.len(),
            });
        }
        let neighbors = self.neighbors.chunks(self.k).flat_map(|c| &c[..k]).copied().collect();
        Ok(NeighborTable {
            space_id: self.space_id.clone(),
            k,
            vocabulary: self.vocabulary.clone(),
            index: self.index.clone(),
            neighbors,
        })
    }
}

fn build_index(vocabulary: &[String]) -> Result<HashMap<String, u32>> {
    let mut index = HashMap::with_capacity(vocabulary.len());
    for (i, w) in vocabulary.iter().enumerate() {
        if index.insert(w.clone(), i as u32).is_some() {
            return Err(Error::DuplicateWord(w.clone()));
        }
    }
    Ok(index)
}

fn check_k(k: usize, vocab: usize) -> Result<()> {
    if k == 0 || k + 1 > vocab {
        return Err(Error::KOutOfRange { k, vocab });
    }
    Ok(())
}

/// Exact top-k cosine neighbors of every word in `restricted_vocab`, searched
/// among `restricted_vocab` only.
///
/// Runs on the current rayon pool, parallel over query words. Output does not
/// depend on the number of workers.
pub fn top_k_all(space: &EmbeddingSpace, restricted_vocab: &[String], k: usize) -> Result<NeighborTable> {
    let index = build_index(restricted_vocab)?;
    check_k(k, restricted_vocab.len())?;
    let n = restricted_vocab.len();
    let d = space.dim();

    let mut unit = Vec::with_capacity(n * d);
    for w in restricted_vocab {
        let row = space.vector(w).ok_or_else(|| Error::MissingWord(w.clone()))?;
        let nr = norm(row);
        unit.extend(row.iter().map(|x| x / nr));
    }

    let mut by_word: Vec<u32> = (0..n as u32).collect();
    by_word.sort_unstable_by(|&a, &b| restricted_vocab[a as usize].cmp(&restricted_vocab[b as usize]));
    let mut lex_rank = vec![0u32; n];
    for (rank, &i) in by_word.iter().enumerate() {
        lex_rank[i as usize] = rank as u32;
    }

    let rank_order = |a: &(f64, u32), b: &(f64, u32)| -> Ordering {
        b.0.total_cmp(&a.0)
            .then_with(|| lex_rank[a.1 as usize].cmp(&lex_rank[b.1 as usize]))
    };

    let mut neighbors = vec![0u32; n * k];
    neighbors
        .par_chunks_mut(k * QUERY_BLOCK)
        .enumerate()
        .for_each_init(
            || (vec![0.0f64; QUERY_BLOCK * n], Vec::<(f64, u32)>::with_capacity(n)),
            |(sims, scored), (block, out)| {
                let first = block * QUERY_BLOCK;
                let queries = out.len() / k;
                for j in 0..n {
                    let cand = &unit[j * d..(j + 1) * d];
                    for q in 0..queries {
                        let qi = first + q;
                        // +0.0 folds -0.0 so exact zeros tie on word order.
                        sims[q * n + j] = dot(&unit[qi * d..(qi + 1) * d], cand) + 0.0;
                    }
                }
                for q in 0..queries {
                    let qi = first + q;
                    scored.clear();
                    scored.extend(
                        (0..n)
                            .filter(|&j| j != qi)
                            .map(|j| (sims[q * n + j], j as u32)),
                    );
                    if scored.len() > k {
                        scored.select_nth_unstable_by(k - 1, rank_order);
                        scored.truncate(k);
                    }
                    scored.sort_unstable_by(rank_order);
                    for (slot, &(_, j)) in out[q * k..(q + 1) * k].iter_mut().zip(scored.iter()) {
                        *slot = j;
                    }
                }
            },
        );

    Ok(NeighborTable {
        space_id: space.id().to_string(),
        k,
        vocabulary: restricted_vocab.to_vec(),
        index,
        neighbors,
    })
}

/// Write a neighbor-table cache file tagged with the source space's digest.
pub fn save_neighbor_cache(table: &NeighborTable, digest: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(w) = table.vocabulary.iter().find(|w| w.contains(',') || w.contains('\t')) {
        return Err(Error::Invalid(format!(
            "word `{w}` contains a separator and cannot be written to a neighbor cache"
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "k {} vocab {} digest {}", table.k, table.len(), digest).map_err(io)?;
    for (i, w) in table.vocabulary.iter().enumerate() {
        write!(out, "{w}\t").map_err(io)?;
        for (pos, &j) in table.neighbors(i).iter().enumerate() {
            if pos > 0 {
                out.write_all(b",").map_err(io)?;
            }
            out.write_all(table.vocabulary[j as usize].as_bytes()).map_err(io)?;
        }
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Read a cache file written for `space`. Returns `Ok(None)` when the recorded
/// digest does not match the space (the cache is stale).
pub fn load_neighbor_cache(path: impl AsRef<Path>, space: &EmbeddingSpace) -> Result<Option<NeighborTable>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Empty(format!("neighbor cache {label}"))),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (k, n, digest) = match fields.as_slice() {
        ["k", k, "vocab", n, "digest", digest] => {
            let k: usize = k.parse().map_err(|_| Error::parse(&label, 1, "bad k"))?;
            let n: usize = n.parse().map_err(|_| Error::parse(&label, 1, "bad vocab size"))?;
            (k, n, *digest)
        }
        _ => return Err(Error::parse(&label, 1, format!("malformed cache header `{header}`"))),
    };
    if digest != space.digest() {
        return Ok(None);
    }
    let mut vocabulary = Vec::with_capacity(n);
    let mut lists = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (word, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(&label, i + 2, "expected `word<TAB>neighbors`"))?;
        vocabulary.push(word.to_string());
        lists.push(rest.split(',').map(str::to_string).collect::<Vec<_>>());
    }
    if vocabulary.len() != n {
        return Err(Error::parse(&label, 1, format!("header declares {n} words, found {}", vocabulary.len())));
    }
    NeighborTable::from_lists(space.id(), vocabulary, k, &lists).map(Some)
}

/// [`top_k_all`] backed by a cache file. A valid cache over the same restricted
/// vocabulary with at least `k` neighbors is reused; otherwise the table is
/// computed and the cache rewritten.
pub fn top_k_all_cached(
    space: &EmbeddingSpace,
    restricted_vocab: &[String],
    k: usize,
    cache_path: impl AsRef<Path>,
) -> Result<NeighborTable> {
    let cache_path = cache_path.as_ref();
    if cache_path.exists() {
        if let Some(cached) = load_neighbor_cache(cache_path, space)? {
            if cached.vocabulary() == restricted_vocab && cached.k() >= k {
                return cached.truncate(k);
            }
        }
    }
    let table = top_k_all(space, restricted_vocab, k)?;
    save_neighbor_cache(&table, &space.digest(), cache_path)?;
    Ok(table)
}
