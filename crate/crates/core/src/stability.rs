//! Nearest-neighbor overlap stability.
//!
//! A word's stability between two spaces is `|KNN1(w) ∩ KNN2(w)| / k`; the
//! stability of a method is the mean over the compared vocabulary. With more
//! than two spaces every unordered pair is compared and the per-word values
//! are averaged.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::NeighborTable;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Space ids of every compared pair.
    pub space_pair_ids: Vec<(String, String)>,
    pub k: usize,
    pub shared_vocab_size: usize,
    pub per_word: BTreeMap<String, f64>,
    /// Mean of `per_word`, summed in word order. NaN for an empty report.
    pub aggregate: f64,
    /// Aggregate of each individual pair, aligned with `space_pair_ids`.
    pub pair_aggregates: Vec<f64>,
}

impl StabilityReport {
    pub fn new(
        space_pair_ids: Vec<(String, String)>,
        k: usize,
        per_word: BTreeMap<String, f64>,
        pair_aggregates: Vec<f64>,
    ) -> Self {
        let aggregate = mean(per_word.values().copied(), per_word.len());
        StabilityReport {
            space_pair_ids,
            k,
            shared_vocab_size: per_word.len(),
            per_word,
            aggregate,
            pair_aggregates,
        }
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    values.sum::<f64>() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiSpaceMode {
    /// Average over every unordered pair of spaces.
    AllPairs,
}

/// Maps ids of `t2` onto ids of `t1`; `None` when both tables share one order.
fn align(t1: &NeighborTable, t2: &NeighborTable) -> Result<Option<Vec<u32>>> {
    if t1.k() != t2.k() {
        return Err(Error::KMismatch(t1.k(), t2.k()));
    }
    if t1.vocabulary() == t2.vocabulary() {
        return Ok(None);
    }
    if t1.len() != t2.len() {
        return Err(Error::VocabMismatch(format!(
            "`{}` has {} words, `{}` has {}",
            t1.space_id(),
            t1.len(),
            t2.space_id(),
            t2.len()
        )));
    }
    t2.vocabulary()
        .iter()
        .map(|w| {
            t1.index_of(w).map(|i| i as u32).ok_or_else(|| {
                Error::VocabMismatch(format!("`{w}` is in `{}` but not `{}`", t2.space_id(), t1.space_id()))
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Size of the intersection of two id lists, using `buf` as scratch space.
fn overlap(a: &[u32], b: impl Iterator<Item = u32>, buf: &mut Vec<u32>) -> usize {
    buf.clear();
    buf.extend_from_slice(a);
    let split = buf.len();
    buf.extend(b);
    let (left, right) = buf.split_at_mut(split);
    left.sort_unstable();
    right.sort_unstable();
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        match left[i].cmp(&right[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

fn word_overlap(i1: usize, t1: &NeighborTable, t2: &NeighborTable, map: Option<&[u32]>, buf: &mut Vec<u32>) -> usize {
    let word = &t1.vocabulary()[i1];
    let list2 = t2.neighbors_of(word).expect("aligned tables share words");
    match map {
        None => overlap(t1.neighbors(i1), list2.iter().copied(), buf),
        Some(m) => overlap(t1.neighbors(i1), list2.iter().map(|&j| m[j as usize]), buf),
    }
}

/// Shared-neighbor count of every word of `t1`, in `t1` order.
fn pair_overlaps(t1: &NeighborTable, t2: &NeighborTable) -> Result<Vec<usize>> {
    let map = align(t1, t2)?;
    let map = map.as_deref();
    Ok((0..t1.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| word_overlap(i, t1, t2, map, buf))
        .collect())
}

/// Stability of one word between two tables.
pub fn word_stability(word: &str, t1: &NeighborTable, t2: &NeighborTable) -> Result<f64> {
    let map = align(t1, t2)?;
    let i = t1.index_of(word).ok_or_else(|| Error::MissingWord(word.to_string()))?;
    let count = word_overlap(i, t1, t2, map.as_deref(), &mut Vec::new());
    Ok(count as f64 / t1.k() as f64)
}

/// Per-word and aggregate stability between two tables.
pub fn pair_stability(t1: &NeighborTable, t2: &NeighborTable) -> Result<StabilityReport> {
    multi_space_stability(&[t1, t2], MultiSpaceMode::AllPairs)
}

/// Stability across several tables: each word's value is the mean of its
/// pairwise stabilities over all unordered pairs.
pub fn multi_space_stability(tables: &[&NeighborTable], mode: MultiSpaceMode) -> Result<StabilityReport> {
    let MultiSpaceMode::AllPairs = mode;
    if tables.len() < 2 {
        return Err(Error::Invalid(format!(
            "stability needs at least 2 neighbor tables, got {}",
            tables.len()
        )));
    }
    let base = tables[0];
    let k = base.k() as f64;
    let mut pair_ids = Vec::new();
    let mut counts = Vec::new();
    for a in 0..tables.len() {
        for b in a + 1..tables.len() {
            let raw = pair_overlaps(tables[a], tables[b])?;
            // Re-express in base order so pairs can be summed word by word.
            let in_base: Vec<usize> = if tables[a].vocabulary() == base.vocabulary() {
                raw
            } else {
                let map = align(base, tables[a])?.expect("vocabularies differ");
                let mut v = vec![0; base.len()];
                for (i, c) in raw.into_iter().enumerate() {
                    v[map[i] as usize] = c;
                }
                v
            };
            pair_ids.push((tables[a].space_id().to_string(), tables[b].space_id().to_string()));
            counts.push(in_base);
        }
    }

    let pairs = counts.len() as f64;
    let per_word: BTreeMap<String, f64> = base
        .vocabulary()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let total: f64 = counts.iter().map(|c| c[i] as f64 / k).sum();
            (w.clone(), total / pairs)
        })
        .collect();

    let pair_aggregates = counts
        .iter()
        .map(|c| {
            let by_word: BTreeMap<&str, f64> = base
                .vocabulary()
                .iter()
                .zip(c)
                .map(|(w, &n)| (w.as_str(), n as f64 / k))
                .collect();
            mean(by_word.values().copied(), by_word.len())
        })
        .collect();

    Ok(StabilityReport::new(pair_ids, base.k(), per_word, pair_aggregates))
}

/// Frequency quintiles, lowest to highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl Bucket {
    pub const ALL: [Bucket; 5] = [Bucket::VeryLow, Bucket::Low, Bucket::Medium, Bucket::High, Bucket::VeryHigh];

    pub fn label(self) -> &'static str {
        match self {
            Bucket::VeryLow => "VL",
            Bucket::Low => "L",
            Bucket::Medium => "M",
            Bucket::High => "H",
            Bucket::VeryHigh => "VH",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Boxplot-ready summary of a sample. Quartiles use linear interpolation
/// between order statistics; variance is the population variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptiveStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

impl DescriptiveStats {
    /// `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let quantile = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        let mean = v.iter().sum::<f64>() / n as f64;
        let variance = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Some(DescriptiveStats {
            count: n,
            min: v[0],
            q1: quantile(0.25),
            median: quantile(0.5),
            q3: quantile(0.75),
            max: v[n - 1],
            mean,
            variance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub bucket: Bucket,
    pub count: usize,
    pub stats: Option<DescriptiveStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBucketReport {
    pub assignment: BTreeMap<String, Bucket>,
    pub per_bucket: Vec<BucketSummary>,
}

impl FrequencyBucketReport {
    pub fn bucket_labels() -> [&'static str; 5] {
        Bucket::ALL.map(Bucket::label)
    }
}

/// Split the report's words into five frequency quintiles and summarize the
/// stability inside each. Words are ranked by (frequency, word); when the
/// count is not divisible by five the extra words go to the highest buckets.
pub fn frequency_buckets(freqs: &HashMap<String, u64>, report: &StabilityReport) -> Result<FrequencyBucketReport> {
    let mut ranked: Vec<(u64, &str, f64)> = report
        .per_word
        .iter()
        .map(|(w, &s)| {
            freqs
                .get(w)
                .map(|&f| (f, w.as_str(), s))
                .ok_or_else(|| Error::MissingWord(format!("{w} (no frequency entry)")))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let n = ranked.len();
    let (base, extra) = (n / 5, n % 5);
    let mut assignment = BTreeMap::new();
    let mut per_bucket = Vec::with_capacity(5);
    let mut start = 0;
    for (b, bucket) in Bucket::ALL.into_iter().enumerate() {
        let size = base + usize::from(b >= 5 - extra);
        let members = &ranked[start..start + size];
        start += size;
        let values: Vec<f64> = members.iter().map(|m| m.2).collect();
        for m in members {
            assignment.insert(m.1.to_string(), bucket);
        }
        per_bucket.push(BucketSummary {
            bucket,
            count: size,
            stats: DescriptiveStats::from_values(&values),
        });
    }
    Ok(FrequencyBucketReport {
        assignment,
        per_bucket,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestMethodShare {
    pub methods: Vec<String>,
    /// Fraction of words won by each method, aligned with `methods`.
    pub shares: Vec<f64>,
    /// Winning methods per word; more than one entry means a tie.
    pub per_word_best: BTreeMap<String, Vec<String>>,
}

impl BestMethodShare {
    pub fn share(&self, method: &str) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.shares[i])
    }
}

/// For each word, the method(s) with the highest stability. A tie among `m`
/// methods credits each with `1/m` of that word.
pub fn best_method_share(reports: &[(String, &StabilityReport)]) -> Result<BestMethodShare> {
    let (first_name, first) = reports
        .first()
        .ok_or_else(|| Error::Invalid("best-method share needs at least one report".into()))?;
    for (name, r) in reports {
        if r.k != first.k {
            return Err(Error::KMismatch(first.k, r.k));
        }
        if r.per_word.len() != first.per_word.len() || !r.per_word.keys().eq(first.per_word.keys()) {
            return Err(Error::VocabMismatch(format!("reports `{first_name}` and `{name}` cover different words")));
        }
    }
    let methods: Vec<String> = reports.iter().map(|(m, _)| m.clone()).collect();
    let mut wins = vec![0.0f64; methods.len()];
    let mut per_word_best = BTreeMap::new();
    let mut iters: Vec<_> = reports.iter().map(|(_, r)| r.per_word.values()).collect();
    for word in first.per_word.keys() {
        let values: Vec<f64> = iters.iter_mut().map(|it| *it.next().expect("same length")).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
        let credit = 1.0 / winners.len() as f64;
        for &i in &winners {
            wins[i] += credit;
        }
        per_word_best.insert(word.clone(), winners.iter().map(|&i| methods[i].clone()).collect());
    }
    let n = first.per_word.len() as f64;
    let shares = wins.iter().map(|w| if n > 0.0 { w / n } else { 0.0 }).collect();
    Ok(BestMethodShare {
        methods,
        shares,
        per_word_best,
    })
}
