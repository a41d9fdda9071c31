//! Shared-nearest-neighbor density clustering (SNND).
//!
//! Words are vertices; two words are linked when their k-NN lists share at
//! least `sim_threshold` members. Vertices with degree at least
//! `degree_threshold` are cores, cores linked to each other form one cluster,
//! other vertices join the cluster of their strongest core link or become
//! noise when they have none.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::NeighborTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnndParams {
    pub knn_size: usize,
    pub sim_threshold: usize,
    pub degree_threshold: usize,
    /// Compare with `>` instead of `>=` for both thresholds.
    pub strict: bool,
}

impl Default for SnndParams {
    fn default() -> Self {
        SnndParams {
            knn_size: 20,
            sim_threshold: 6,
            degree_threshold: 10,
            strict: false,
        }
    }
}

impl SnndParams {
    pub fn new(knn_size: usize, sim_threshold: usize, degree_threshold: usize) -> Result<Self> {
        if knn_size == 0 {
            return Err(Error::Invalid("knn_size must be at least 1".into()));
        }
        Ok(SnndParams {
            knn_size,
            sim_threshold,
            degree_threshold,
            strict: false,
        })
    }

    fn min_weight(&self) -> usize {
        self.sim_threshold + usize::from(self.strict)
    }

    fn is_core(&self, degree: usize) -> bool {
        degree >= self.degree_threshold + usize::from(self.strict)
    }
}

/// Number of shared members between two words' neighbor lists.
pub fn snn_similarity(u: &str, v: &str, table: &NeighborTable) -> Result<usize> {
    let a = table.neighbors_of(u).ok_or_else(|| Error::MissingWord(u.to_string()))?;
    let b = table.neighbors_of(v).ok_or_else(|| Error::MissingWord(v.to_string()))?;
    let set: HashSet<u32> = a.iter().copied().collect();
    Ok(b.iter().filter(|x| set.contains(x)).count())
}

/// Undirected weighted graph over the words of a neighbor table.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnGraph {
    nodes: Vec<String>,
    /// Sorted `(neighbor, weight)` lists.
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl SnnGraph {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn adjacent(&self, i: usize) -> &[(u32, u32)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<u32> {
        self.adjacency[u]
            .binary_search_by_key(&(v as u32), |e| e.0)
            .ok()
            .map(|p| self.adjacency[u][p].1)
    }

    /// Each edge once as `(u, v, weight)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, adj)| {
            adj.iter()
                .filter(move |&&(v, _)| (v as usize) > u)
                .map(move |&(v, w)| (u, v as usize, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Link every pair of words whose shared-neighbor count clears the threshold.
///
/// Pairs sharing no neighbor are only enumerated when the threshold is zero;
/// otherwise candidates come from an inverted index (word → lists containing it).
pub fn build_snn_graph(table: &NeighborTable, params: &SnndParams) -> Result<SnnGraph> {
    if params.knn_size != table.k() {
        return Err(Error::Invalid(format!(
            "knn_size {} does not match neighbor table k = {}",
            params.knn_size,
            table.k()
        )));
    }
    let n = table.len();
    let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n];
    for u in 0..n {
        for &x in table.neighbors(u) {
            reverse[x as usize].push(u as u32);
        }
    }
    let min_weight = params.min_weight();

    let adjacency: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n], Vec::<u32>::new()),
            |(counts, touched), u| {
                for &x in table.neighbors(u) {
                    for &v in &reverse[x as usize] {
                        if counts[v as usize] == 0 {
                            touched.push(v);
                        }
                        counts[v as usize] += 1;
                    }
                }
                let mut adj: Vec<(u32, u32)> = if min_weight == 0 {
                    (0..n as u32)
                        .filter(|&v| v as usize != u)
                        .map(|v| (v, counts[v as usize]))
                        .collect()
                } else {
                    touched
                        .iter()
                        .filter(|&&v| v as usize != u && counts[v as usize] as usize >= min_weight)
                        .map(|&v| (v, counts[v as usize]))
                        .collect()
                };
                adj.sort_unstable();
                for &v in touched.iter() {
                    counts[v as usize] = 0;
                }
                touched.clear();
                adj
            },
        )
        .collect();

    Ok(SnnGraph {
        nodes: table.vocabulary().to_vec(),
        adjacency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Core,
    NonCore,
    Noise,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Core => "core",
            Role::NonCore => "non-core",
            Role::Noise => "noise",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core" => Ok(Role::Core),
            "non-core" => Ok(Role::NonCore),
            "noise" => Ok(Role::Noise),
            other => Err(Error::Invalid(format!("unknown role `{other}`"))),
        }
    }
}

/// Cluster id (or noise) and role of every word.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    words: Vec<String>,
    labels: Vec<Option<usize>>,
    roles: Vec<Role>,
    index: HashMap<String, usize>,
}

impl Clustering {
    /// Validates that noise words carry no label and all other words do.
    pub fn new(words: Vec<String>, labels: Vec<Option<usize>>, roles: Vec<Role>) -> Result<Self> {
        if words.len() != labels.len() || words.len() != roles.len() {
            return Err(Error::Invalid("words, labels and roles differ in length".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
            if (roles[i] == Role::Noise) != labels[i].is_none() {
                return Err(Error::Invalid(format!("word `{w}`: role {} with label {:?}", roles[i], labels[i])));
            }
        }
        Ok(Clustering {
            words,
            labels,
            roles,
            index,
        })
    }

    /// Build from labels only: labelled words become non-core members,
    /// unlabelled words noise.
    pub fn from_labels<S: Into<String>>(assignments: Vec<(S, Option<usize>)>) -> Result<Self> {
        let (words, labels): (Vec<String>, Vec<Option<usize>>) =
            assignments.into_iter().map(|(w, l)| (w.into(), l)).unzip();
        let roles = labels
            .iter()
            .map(|l| if l.is_some() { Role::NonCore } else { Role::Noise })
            .collect();
        Clustering::new(words, labels, roles)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// `None` when the word is unknown; `Some(None)` for noise.
    pub fn label(&self, word: &str) -> Option<Option<usize>> {
        self.index.get(word).map(|&i| self.labels[i])
    }

    pub fn role(&self, word: &str) -> Option<Role> {
        self.index.get(word).map(|&i| self.roles[i])
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().collect::<HashSet<_>>().len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Read a `word,cluster_id,role` file; id -1 marks noise.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "word,cluster_id,role")) => {}
            _ => return Err(Error::parse(&label, 1, "expected header `word,cluster_id,role`")),
        }
        let (mut words, mut labels, mut roles) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.rsplitn(3, ',').collect();
            let [role, id, word] = fields.as_slice() else {
                return Err(Error::parse(&label, i + 1, "expected 3 fields"));
            };
            let id: i64 = id
                .parse()
                .map_err(|_| Error::parse(&label, i + 1, format!("bad cluster id `{id}`")))?;
            words.push(crate::report::unquote(word).into_owned());
            labels.push(if id < 0 { None } else { Some(id as usize) });
            roles.push(role.parse().map_err(|e: Error| Error::parse(&label, i + 1, e.to_string()))?);
        }
        Clustering::new(words, labels, roles)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Run SNND on a prebuilt graph.
///
/// Cluster ids are numbered in lexicographic order of each cluster's smallest
/// core word, so the result does not depend on vocabulary order. A non-core
/// word with several equally strong core links joins the lowest id.
pub fn snnd_cluster(graph: &SnnGraph, params: &SnndParams) -> Clustering {
    let n = graph.len();
    let core: Vec<bool> = (0..n).map(|i| params.is_core(graph.degree(i))).collect();

    let mut sets = DisjointSet::new(n);
    for (u, v, _) in graph.edges() {
        if core[u] && core[v] {
            sets.union(u, v);
        }
    }

    let mut smallest: HashMap<usize, usize> = HashMap::new();
    for i in (0..n).filter(|&i| core[i]) {
        let root = sets.find(i);
        smallest
            .entry(root)
            .and_modify(|s| {
                if graph.nodes[i] < graph.nodes[*s] {
                    *s = i;
                }
            })
            .or_insert(i);
    }
    let mut roots: Vec<(usize, usize)> = smallest.into_iter().collect();
    roots.sort_by(|a, b| graph.nodes[a.1].cmp(&graph.nodes[b.1]));
    let cluster_of_root: HashMap<usize, usize> = roots.iter().enumerate().map(|(id, &(root, _))| (root, id)).collect();

    let mut labels = vec![None; n];
    let mut roles = vec![Role::Noise; n];
    for i in (0..n).filter(|&i| core[i]) {
        labels[i] = Some(cluster_of_root[&sets.find(i)]);
        roles[i] = Role::Core;
    }
    for i in (0..n).filter(|&i| !core[i]) {
        let best = graph
            .adjacent(i)
            .iter()
            .filter(|&&(v, _)| core[v as usize])
            .map(|&(v, w)| (w, labels[v as usize].expect("core has a label")))
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
        if let Some((_, id)) = best {
            labels[i] = Some(id);
            roles[i] = Role::NonCore;
        }
    }

    Clustering::new(graph.nodes.clone(), labels, roles).expect("labels are consistent with roles")
}

/// Fraction of the word pairs co-clustered in the first clustering that stay
/// co-clustered in every other one. Pairs touching noise in the first
/// clustering are not counted; a pair that becomes noise elsewhere is lost.
pub fn clustering_agreement(clusterings: &[&Clustering]) -> Result<f64> {
    let (baseline, rest) = clusterings
        .split_first()
        .ok_or_else(|| Error::Invalid("clustering agreement needs at least one clustering".into()))?;
    for c in rest {
        if c.len() != baseline.len() || baseline.words.iter().any(|w| !c.index.contains_key(w)) {
            return Err(Error::VocabMismatch("clusterings cover different words".into()));
        }
    }

    let mut sizes: HashMap<usize, u64> = HashMap::new();
    let mut groups: HashMap<Vec<usize>, u64> = HashMap::new();
    'words: for (w, label) in baseline.words.iter().zip(&baseline.labels) {
        let Some(id) = *label else { continue };
        *sizes.entry(id).or_default() += 1;
        let mut key = Vec::with_capacity(clusterings.len());
        key.push(id);
        for c in rest {
            match c.labels[c.index[w]] {
                Some(l) => key.push(l),
                None => continue 'words,
            }
        }
        *groups.entry(key).or_default() += 1;
    }

    let pairs = |m: u64| m * m.saturating_sub(1) / 2;
    let total: u64 = sizes.values().map(|&m| pairs(m)).sum();
    if total == 0 {
        return Err(Error::UndefinedAgreement);
    }
    let preserved: u64 = groups.values().map(|&m| pairs(m)).sum();
    Ok(preserved as f64 / total as f64)
}

/// Agreement of the first `p` clusterings for every `p` from 1 to the total.
pub fn agreement_curve(clusterings: &[&Clustering]) -> Result<Vec<f64>> {
    (1..=clusterings.len())
        .map(|p| clustering_agreement(&clusterings[..p]))
        .collect()
}
