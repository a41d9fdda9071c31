//! Word Embedding Association Test effect sizes and their spread across spaces.
//!
//! `s(w, A, B) = mean_a cos(w, a) - mean_b cos(w, b)` and
//! `d = (mean_x s(x) - mean_y s(y)) / std_{w ∈ X ∪ Y} s(w)` with the population
//! standard deviation. Query words missing from a space are dropped and the
//! surviving fraction is reported as coverage. Means use a correctly rounded
//! sum, so swapping X/Y or A/B negates `d` exactly.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::{cosine, norm};
use crate::numeric::{exact_mean as mean, exact_sum};
use crate::space::EmbeddingSpace;

/// Pooled standard deviations at or below this are treated as zero.
const STD_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeatQuery {
    pub name: String,
    pub targets_x: Vec<String>,
    pub targets_y: Vec<String>,
    pub attributes_a: Vec<String>,
    pub attributes_b: Vec<String>,
}

fn fold(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect()
}

impl WeatQuery {
    /// Words are case-folded. All four sets must be non-empty, and X/Y and
    /// A/B must be disjoint.
    pub fn new(name: impl Into<String>, x: &[&str], y: &[&str], a: &[&str], b: &[&str]) -> Result<Self> {
        let q = WeatQuery {
            name: name.into(),
            targets_x: fold(x),
            targets_y: fold(y),
            attributes_a: fold(a),
            attributes_b: fold(b),
        };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        for (label, set) in self.sets() {
            if set.is_empty() {
                return Err(Error::Invalid(format!("query `{}`: set {label} is empty", self.name)));
            }
        }
        for (l1, s1, l2, s2) in [
            ("X", &self.targets_x, "Y", &self.targets_y),
            ("A", &self.attributes_a, "B", &self.attributes_b),
        ] {
            let left: HashSet<&String> = s1.iter().collect();
            if let Some(w) = s2.iter().find(|w| left.contains(w)) {
                return Err(Error::Invalid(format!(
                    "query `{}`: `{w}` appears in both {l1} and {l2}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn sets(&self) -> [(&'static str, &Vec<String>); 4] {
        [
            ("X", &self.targets_x),
            ("Y", &self.targets_y),
            ("A", &self.attributes_a),
            ("B", &self.attributes_b),
        ]
    }

    /// Parse the word-list format: sections headed `X:`, `Y:`, `A:`, `B:`,
    /// one word per line. Blank lines and `#` comments are skipped.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let mut sets: [Vec<&str>; 4] = Default::default();
        let mut current: Option<usize> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let section = match line {
                "X:" | "x:" => Some(0),
                "Y:" | "y:" => Some(1),
                "A:" | "a:" => Some(2),
                "B:" | "b:" => Some(3),
                _ => None,
            };
            match (section, current) {
                (Some(s), _) => current = Some(s),
                (None, Some(s)) => sets[s].push(line),
                (None, None) => {
                    return Err(Error::parse(&name, i + 1, "word before any `X:`/`Y:`/`A:`/`B:` header"));
                }
            }
        }
        let [x, y, a, b] = sets;
        WeatQuery::new(name, &x, &y, &a, &b)
    }

    /// Load a word-list file; the query is named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        WeatQuery::parse(name, &text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatResult {
    pub query: String,
    pub space: String,
    pub effect_size: f64,
    /// `s(w, A, B)` for every surviving target word.
    pub per_word_association: BTreeMap<String, f64>,
    /// Fraction of all query words present in the space.
    pub coverage: f64,
    pub dropped_words: Vec<String>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn unit_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
}

fn association_units(w: &[f64], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let sa: Vec<f64> = a.iter().map(|v| unit_dot(w, v)).collect();
    let sb: Vec<f64> = b.iter().map(|v| unit_dot(w, v)).collect();
    mean(&sa) - mean(&sb)
}

/// `s(w, A, B)` over the words of `A` and `B` present in the space.
pub fn association<S: AsRef<str>>(w: &str, a: &[S], b: &[S], space: &EmbeddingSpace) -> Result<f64> {
    let wv = space.vector(w).ok_or_else(|| Error::MissingWord(w.to_string()))?;
    let side = |set: &[S], label: &str| -> Result<Vec<f64>> {
        let sims: Vec<f64> = set
            .iter()
            .filter_map(|x| space.vector(x.as_ref()))
            .map(|v| cosine(wv, v))
            .collect::<Result<_>>()?;
        if sims.is_empty() {
            return Err(Error::Invalid(format!("no word of attribute set {label} is in the space")));
        }
        Ok(sims)
    };
    Ok(mean(&side(a, "A")?) - mean(&side(b, "B")?))
}

/// Effect size of `query` in `space`.
pub fn effect_size(query: &WeatQuery, space: &EmbeddingSpace) -> Result<WeatResult> {
    let mut dropped = Vec::new();
    let mut total = 0usize;
    let mut present: Vec<Vec<(&str, Vec<f64>)>> = Vec::with_capacity(4);
    for (label, set) in query.sets() {
        let mut found = Vec::new();
        for w in set {
            total += 1;
            match space.vector(w) {
                Some(v) => found.push((w.as_str(), unit(v))),
                None => dropped.push(w.clone()),
            }
        }
        if found.is_empty() {
            return Err(Error::Invalid(format!(
                "query `{}`: no word of set {label} is in space `{}`",
                query.name,
                space.id()
            )));
        }
        present.push(found);
    }
    let attr = |i: usize| -> Vec<Vec<f64>> { present[i].iter().map(|(_, v)| v.clone()).collect() };
    let (a, b) = (attr(2), attr(3));

    let mut per_word = BTreeMap::new();
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    for (side, out) in [(0usize, &mut sx), (1, &mut sy)] {
        for (w, v) in &present[side] {
            let s = association_units(v, &a, &b);
            per_word.insert(w.to_string(), s);
            out.push(s);
        }
    }

    let pooled: Vec<f64> = sx.iter().chain(&sy).copied().collect();
    let m = mean(&pooled);
    let std = (exact_sum(pooled.iter().map(|s| (s - m) * (s - m))) / pooled.len() as f64).sqrt();
    if std <= STD_EPSILON {
        return Err(Error::UndefinedEffectSize(query.name.clone()));
    }
    Ok(WeatResult {
        query: query.name.clone(),
        space: space.id().to_string(),
        effect_size: (mean(&sx) - mean(&sy)) / std,
        per_word_association: per_word,
        coverage: (total - dropped.len()) as f64 / total as f64,
        dropped_words: dropped,
    })
}

/// Effect sizes of one query across several spaces, with their range.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatStability {
    pub query: String,
    pub max: f64,
    pub min: f64,
    /// `max - min`; larger means less stable.
    pub spread: f64,
    pub per_space: Vec<WeatResult>,
}

pub fn weat_stability(query: &WeatQuery, spaces: &[&EmbeddingSpace]) -> Result<WeatStability> {
    if spaces.len() < 2 {
        return Err(Error::Invalid(format!(
            "WEAT stability needs at least 2 spaces, got {}",
            spaces.len()
        )));
    }
    let per_space: Vec<WeatResult> = spaces
        .par_iter()
        .map(|s| effect_size(query, s).map_err(|e| Error::in_space(s.id(), e)))
        .collect::<Result<_>>()?;
    Ok(summarize(query, per_space))
}

pub(crate) fn summarize(query: &WeatQuery, per_space: Vec<WeatResult>) -> WeatStability {
    let max = per_space.iter().map(|r| r.effect_size).fold(f64::NEG_INFINITY, f64::max);
    let min = per_space.iter().map(|r| r.effect_size).fold(f64::INFINITY, f64::min);
    WeatStability {
        query: query.name.clone(),
        max,
        min,
        spread: max - min,
        per_space,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> EmbeddingSpace {
        EmbeddingSpace::from_rows(
            "toy",
            vec![
                ("x1", vec![1.0, 0.0]),
                ("x2", vec![0.8, 0.6]),
                ("y1", vec![0.0, 1.0]),
                ("y2", vec![0.6, 0.8]),
                ("a1", vec![1.0, 0.0]),
                ("b1", vec![0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    fn query() -> WeatQuery {
        WeatQuery::new("toy", &["x1", "x2"], &["y1", "y2"], &["a1"], &["b1"]).unwrap()
    }

    #[test]
    fn association_examples() {
        let s = space();
        assert_eq!(association("x1", &["a1"], &["b1"], &s).unwrap(), 1.0);
        assert_eq!(association("x1", &["a1", "b1"], &["b1", "a1"], &s).unwrap(), 0.0);
        assert!((association("x2", &["a1"], &["b1"], &s).unwrap() - 0.2).abs() < 1e-12);
        assert!(association("zz", &["a1"], &["b1"], &s).is_err());
        assert!(association("x1", &["q"], &["b1"], &s).is_err());
    }

    #[test]
    fn hand_computed_effect_size() {
        let r = effect_size(&query(), &space()).unwrap();
        // s = {1, 0.2, -1, -0.2}; popstd = sqrt(0.52)
        let expected = 1.2 / 0.52f64.sqrt();
        assert!((r.effect_size - expected).abs() < 1e-12);
        assert!((r.effect_size - 1.6641).abs() < 1e-3);
        assert_eq!(r.coverage, 1.0);
        assert!((r.per_word_association["y2"] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn swapping_targets_negates() {
        let q = query();
        let swapped = WeatQuery {
            targets_x: q.targets_y.clone(),
            targets_y: q.targets_x.clone(),
            ..q.clone()
        };
        let d = effect_size(&q, &space()).unwrap().effect_size;
        assert_eq!(effect_size(&swapped, &space()).unwrap().effect_size, -d);
    }

    #[test]
    fn identical_targets_are_undefined() {
        let s = EmbeddingSpace::from_rows(
            "same",
            vec![("x", vec![1.0, 0.3]), ("y", vec![1.0, 0.3]), ("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])],
        )
        .unwrap();
        let q = WeatQuery::new("same", &["x"], &["y"], &["a"], &["b"]).unwrap();
        assert!(matches!(effect_size(&q, &s), Err(Error::UndefinedEffectSize(_))));
    }

    #[test]
    fn missing_words_reduce_coverage() {
        let q = WeatQuery::new("toy", &["x1", "x2", "ghost"], &["y1", "y2"], &["a1"], &["b1", "phantom"]).unwrap();
        let r = effect_size(&q, &space()).unwrap();
        assert_eq!(r.dropped_words, vec!["ghost", "phantom"]);
        assert!((r.coverage - 6.0 / 8.0).abs() < 1e-15);
        assert!((r.effect_size - 1.6641).abs() < 1e-3);
        let q = WeatQuery::new("toy", &["x1"], &["y1"], &["a1"], &["nothing"]).unwrap();
        assert!(effect_size(&q, &space()).is_err());
    }

    #[test]
    fn query_validation_and_parsing() {
        assert!(WeatQuery::new("q", &[], &["y"], &["a"], &["b"]).is_err());
        assert!(WeatQuery::new("q", &["Cat"], &["cat"], &["a"], &["b"]).is_err());
        let q = WeatQuery::parse("flowers", "# comment\nX:\nRose\ntulip\n\nY:\nant\nA:\nlove\nB:\nhate\n").unwrap();
        assert_eq!(q.targets_x, vec!["rose", "tulip"]);
        assert_eq!(q.attributes_b, vec!["hate"]);
        assert!(WeatQuery::parse("bad", "rose\nX:\nx").is_err());
        assert!(WeatQuery::parse("bad", "X:\nx\nY:\ny\nA:\na\n").is_err());
    }

    #[test]
    fn stability_range() {
        let s = space();
        let st = weat_stability(&query(), &[&s, &s]).unwrap();
        assert_eq!(st.spread, 0.0);
        assert_eq!(st.per_space.len(), 2);
        let lacking = EmbeddingSpace::from_rows("lacking", vec![("x1", vec![1.0, 0.0]), ("y1", vec![0.0, 1.0]), ("a1", vec![1.0, 1.0])]).unwrap();
        match weat_stability(&query(), &[&s, &lacking]) {
            Err(Error::InSpace { space, .. }) => assert_eq!(space, "lacking"),
            other => panic!("expected an in-space error, got {other:?}"),
        }
        assert!(weat_stability(&query(), &[&s]).is_err());
    }

    #[test]
    fn range_follows_max_then_min() {
        let q = query();
        let mk = |d: f64| WeatResult {
            query: "q".into(),
            space: format!("{d}"),
            effect_size: d,
            per_word_association: BTreeMap::new(),
            coverage: 1.0,
            dropped_words: vec![],
        };
        let st = summarize(&q, vec![mk(1.16), mk(1.17), mk(1.15)]);
        assert_eq!((st.max, st.min), (1.17, 1.15));
        assert!((st.spread - 0.02).abs() < 1e-12);
    }
}
