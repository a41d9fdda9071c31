//! Parameter sweeps: aggregate stability as one training parameter varies.
//!
//! A sweep is described by a TOML file:
//!
//! ```toml
//! axis = "dimension"      # k | dimension | epoch | successive-epoch | window | cross-dimension
//! k = 10                  # neighbors for every non-k axis (default 10)
//! format = "glove-text"   # optional; detected per file when absent
//! output = "dim.csv"      # optional; relative paths resolve against this file
//! vocab = "words.txt"     # optional restriction of the compared vocabulary
//! baseline = 100          # cross-dimension only (default 100)
//!
//! [groups]
//! 50 = ["d50_s1.txt", "d50_s2.txt"]
//! 100 = ["d100_s1.txt", "d100_s2.txt"]
//! ```
//!
//! On the `k` axis the group key is the k value itself; `spaces` plus
//! `k_values` may be given instead of `[groups]` when every k uses the same
//! files.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::knn::{top_k_all, NeighborTable};
use crate::space::{intersect_vocab, load_word_list, open_space, EmbeddingSpace, SpaceFormat};
use crate::stability::{multi_space_stability, pair_stability, MultiSpaceMode};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_CROSS_DIMENSION_BASELINE: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    K,
    Dimension,
    Epoch,
    SuccessiveEpoch,
    Window,
    CrossDimension,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "k",
            Axis::Dimension => "dimension",
            Axis::Epoch => "epoch",
            Axis::SuccessiveEpoch => "successive-epoch",
            Axis::Window => "window",
            Axis::CrossDimension => "cross-dimension",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "k" => Axis::K,
            "dimension" => Axis::Dimension,
            "epoch" => Axis::Epoch,
            "successive-epoch" => Axis::SuccessiveEpoch,
            "window" => Axis::Window,
            "cross-dimension" => Axis::CrossDimension,
            other => return Err(Error::Invalid(format!("unknown sweep axis `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub space_groups: BTreeMap<u64, Vec<PathBuf>>,
    pub k: usize,
    pub output_path: Option<PathBuf>,
    /// `None` detects the layout per file.
    pub format: Option<SpaceFormat>,
    pub vocab: Option<PathBuf>,
    pub baseline: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: String,
    k: Option<usize>,
    format: Option<String>,
    output: Option<PathBuf>,
    vocab: Option<PathBuf>,
    baseline: Option<u64>,
    #[serde(default)]
    groups: BTreeMap<String, Vec<PathBuf>>,
    spaces: Option<Vec<PathBuf>>,
    k_values: Option<Vec<u64>>,
}

impl SweepSpec {
    pub fn new(axis: Axis, space_groups: BTreeMap<u64, Vec<PathBuf>>) -> Self {
        SweepSpec {
            axis,
            space_groups,
            k: DEFAULT_K,
            output_path: None,
            format: None,
            vocab: None,
            baseline: DEFAULT_CROSS_DIMENSION_BASELINE,
        }
    }

    /// Parse a sweep file; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let file: SweepFile =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("sweep config: {e}")))?;
        let axis: Axis = file.axis.parse()?;
        let resolve = |p: PathBuf| if p.is_relative() { base_dir.join(p) } else { p };

        let mut groups = BTreeMap::new();
        for (key, paths) in file.groups {
            let value: u64 = key
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("sweep group key `{key}` is not a non-negative integer")))?;
            groups.insert(value, paths.into_iter().map(resolve).collect());
        }
        match (file.spaces, file.k_values) {
            (Some(spaces), Some(ks)) if axis == Axis::K => {
                let spaces: Vec<PathBuf> = spaces.into_iter().map(resolve).collect();
                for k in ks {
                    groups.insert(k, spaces.clone());
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::Invalid(
                    "`spaces` and `k_values` must be given together and only on the k axis".into(),
                ))
            }
        }
        if groups.is_empty() {
            return Err(Error::Invalid("sweep config defines no groups".into()));
        }

        Ok(SweepSpec {
            axis,
            space_groups: groups,
            k: file.k.unwrap_or(DEFAULT_K),
            output_path: file.output.map(resolve),
            format: file.format.as_deref().map(str::parse).transpose()?,
            vocab: file.vocab.map(resolve),
            baseline: file.baseline.unwrap_or(DEFAULT_CROSS_DIMENSION_BASELINE),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SweepSpec::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: u64,
    pub stability: f64,
    /// `(space_a, space_b, aggregate)` for every compared pair.
    pub pairs: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

/// Loads each file once and memoizes neighbor tables per (file, vocabulary).
struct Workspace<'a> {
    spec: &'a SweepSpec,
    spaces: HashMap<PathBuf, Arc<EmbeddingSpace>>,
    tables: HashMap<(PathBuf, Vec<String>), Arc<NeighborTable>>,
    restriction: Option<Vec<String>>,
}

impl<'a> Workspace<'a> {
    fn new(spec: &'a SweepSpec) -> Result<Self> {
        let restriction = spec.vocab.as_ref().map(load_word_list).transpose()?;
        Ok(Workspace {
            spec,
            spaces: HashMap::new(),
            tables: HashMap::new(),
            restriction,
        })
    }

    fn space(&mut self, path: &Path) -> Result<Arc<EmbeddingSpace>> {
        if let Some(s) = self.spaces.get(path) {
            return Ok(s.clone());
        }
        let s = Arc::new(open_space(path, self.spec.format)?);
        self.spaces.insert(path.to_path_buf(), s.clone());
        Ok(s)
    }

    fn vocabulary(&mut self, paths: &[&PathBuf]) -> Result<Vec<String>> {
        let spaces: Vec<Arc<EmbeddingSpace>> = paths.iter().map(|p| self.space(p)).collect::<Result<_>>()?;
        let refs: Vec<&EmbeddingSpace> = spaces.iter().map(|s| s.as_ref()).collect();
        let mut shared = if refs.len() == 1 {
            let mut v = refs[0].vocabulary().to_vec();
            v.sort_unstable();
            v
        } else {
            intersect_vocab(&refs)?
        };
        if let Some(keep) = &self.restriction {
            let keep: std::collections::HashSet<&String> = keep.iter().collect();
            shared.retain(|w| keep.contains(w));
            if shared.is_empty() {
                return Err(Error::EmptyIntersection);
            }
        }
        Ok(shared)
    }

    /// Neighbor table at `k`, computed once at `max_k` and truncated.
    fn table(&mut self, path: &Path, vocab: &[String], k: usize, max_k: usize) -> Result<Arc<NeighborTable>> {
        let key = (path.to_path_buf(), vocab.to_vec());
        if let Some(t) = self.tables.get(&key) {
            if t.k() == k {
                return Ok(t.clone());
            }
            if t.k() > k {
                return Ok(Arc::new(t.truncate(k)?));
            }
        }
        let space = self.space(path)?;
        let build_k = max_k.max(k).min(vocab.len().saturating_sub(1)).max(k);
        let t = Arc::new(top_k_all(&space, vocab, build_k)?);
        self.tables.insert(key, t.clone());
        if build_k == k {
            Ok(t)
        } else {
            Ok(Arc::new(t.truncate(k)?))
        }
    }
}

fn pair_up<'p>(a: &'p [PathBuf], b: &'p [PathBuf]) -> Vec<(&'p PathBuf, &'p PathBuf)> {
    a.iter().zip(b.iter()).collect()
}

fn missing_group(value: u64, axis: Axis) -> Error {
    Error::Invalid(format!("{axis} sweep: no group for value {value}"))
}

/// Run a sweep; rows come back sorted by axis value.
///
/// Within-group axes (k, dimension, epoch, window) average all pairs inside
/// each group. Cross-dimension compares the baseline group with every other
/// group, and successive-epoch compares epoch `n` with epoch `n - 1`; in both
/// cases the i-th space of one group is paired with the i-th space of the other.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let mut ws = Workspace::new(spec)?;
    let mut rows = Vec::new();

    match spec.axis {
        Axis::K | Axis::Dimension | Axis::Epoch | Axis::Window => {
            let max_k = if spec.axis == Axis::K {
                *spec.space_groups.keys().max().expect("non-empty") as usize
            } else {
                spec.k
            };
            for (&value, paths) in &spec.space_groups {
                if paths.len() < 2 {
                    return Err(Error::Invalid(format!(
                        "{} sweep: group {value} needs at least 2 spaces, has {}",
                        spec.axis,
                        paths.len()
                    )));
                }
                let k = if spec.axis == Axis::K { value as usize } else { spec.k };
                let refs: Vec<&PathBuf> = paths.iter().collect();
                let vocab = ws.vocabulary(&refs)?;
                let tables: Vec<Arc<NeighborTable>> = paths
                    .iter()
                    .map(|p| ws.table(p, &vocab, k, max_k))
                    .collect::<Result<_>>()?;
                let trefs: Vec<&NeighborTable> = tables.iter().map(|t| t.as_ref()).collect();
                let report = multi_space_stability(&trefs, MultiSpaceMode::AllPairs)?;
                let pairs = report
                    .space_pair_ids
                    .iter()
                    .zip(&report.pair_aggregates)
                    .map(|((a, b), s)| (a.clone(), b.clone(), *s))
                    .collect();
                rows.push(SweepRow {
                    axis_value: value,
                    stability: report.aggregate,
                    pairs,
                });
            }
        }
        Axis::CrossDimension => {
            let base = spec
                .space_groups
                .get(&spec.baseline)
                .ok_or_else(|| missing_group(spec.baseline, spec.axis))?;
            for (&value, paths) in spec.space_groups.iter().filter(|(&v, _)| v != spec.baseline) {
                rows.push(paired_row(&mut ws, value, base, paths, spec.k)?);
            }
        }
        Axis::SuccessiveEpoch => {
            let first = *spec.space_groups.keys().next().expect("non-empty");
            for (&value, paths) in spec.space_groups.iter().filter(|(&v, _)| v != first) {
                let prev = spec
                    .space_groups
                    .get(&(value - 1))
                    .ok_or_else(|| Error::Invalid(format!("successive-epoch sweep: epoch {value} has no epoch {}", value - 1)))?;
                rows.push(paired_row(&mut ws, value, prev, paths, spec.k)?);
            }
        }
    }

    Ok(SweepTable { axis: spec.axis, rows })
}

fn paired_row(ws: &mut Workspace<'_>, value: u64, reference: &[PathBuf], other: &[PathBuf], k: usize) -> Result<SweepRow> {
    let pairs = pair_up(reference, other);
    if pairs.is_empty() {
        return Err(Error::Invalid(format!("sweep row {value}: nothing to pair")));
    }
    let involved: Vec<&PathBuf> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let vocab = ws.vocabulary(&involved)?;
    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let ta = ws.table(a, &vocab, k, k)?;
        let tb = ws.table(b, &vocab, k, k)?;
        let r = pair_stability(&ta, &tb)?;
        out.push((ta.space_id().to_string(), tb.space_id().to_string(), r.aggregate));
    }
    let stability = out.iter().map(|p| p.2).sum::<f64>() / out.len() as f64;
    Ok(SweepRow {
        axis_value: value,
        stability,
        pairs: out,
    })
}
