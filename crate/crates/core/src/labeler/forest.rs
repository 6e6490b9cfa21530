//! Random forest of Gini decision trees over the classifier feature vector.
//!
//! Each tree is grown on a same-size bootstrap sample. At every node a random
//! subset of `max_features` features is searched for the best Gini split; if
//! none of them separates the node, the remaining features are tried in the
//! same random order. Growth stops at purity, at `max_depth`, or when no
//! feature varies. Prediction is a majority vote over trees with ties going to
//! the lower label code.
//!
//! Training is deterministic for a given seed: tree `i` draws from its own
//! ChaCha stream derived from `(seed, i)`, so trees can be grown in parallel.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FEATURE_VERSION;
use crate::layout::LayoutLabel;

pub const MODEL_FORMAT: &str = "dla-forest";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("no training samples")]
    Empty,
    #[error("{0} feature rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("sample {index} has {found} features, expected {expected}")]
    Width { index: usize, found: usize, expected: usize },
    #[error("model was trained on feature version {model:?}, current is {current:?}")]
    StaleModel { model: String, current: String },
    #[error("model expects {expected} features, got {found}")]
    InputWidth { expected: usize, found: usize },
    #[error("unsupported model format {0:?} version {1}")]
    Format(String, u32),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 1000, max_features: None, min_samples_split: 2, seed: 0 }
    }
}

impl ForestParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn features_per_split(&self, d: usize) -> usize {
        self.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: u16, threshold: f64, left: u32, right: u32 },
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left as usize } else { *right as usize };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Class index voted by this tree.
    pub fn vote(&self, x: &[f64]) -> usize {
        argmax_low(self.leaf_for(x))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }
}

/// First index of the maximum; ties go to the lower index.
fn argmax_low(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestMeta {
    pub format: String,
    pub format_version: u32,
    pub feature_version: String,
    pub n_features: usize,
    /// Class labels in ascending code order; leaf counts index into this.
    pub classes: Vec<LayoutLabel>,
    pub params: ForestParams,
    #[serde(default)]
    pub source_id: String,
    #[serde(default)]
    pub training_docs: Vec<String>,
    #[serde(default)]
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub meta: ForestMeta,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn with_provenance(mut self, source_id: &str, training_docs: Vec<String>) -> Self {
        self.meta.source_id = source_id.to_string();
        self.meta.training_docs = training_docs;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.meta.classes.len() == 1
    }

    /// Pretty JSON; identical input gives byte-identical output.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let m: ForestModel = serde_json::from_str(s)?;
        if m.meta.format != MODEL_FORMAT || m.meta.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::Format(m.meta.format, m.meta.format_version));
        }
        m.check_structure()?;
        Ok(m)
    }

    fn check_structure(&self) -> Result<(), ForestError> {
        let k = self.meta.classes.len();
        if k == 0 || self.trees.is_empty() {
            return Err(ForestError::Malformed("no classes or no trees".into()));
        }
        for (ti, t) in self.trees.iter().enumerate() {
            if t.nodes.is_empty() {
                return Err(ForestError::Malformed(format!("tree {ti} is empty")));
            }
            for n in &t.nodes {
                match n {
                    Node::Split { feature, left, right, .. } => {
                        if *feature as usize >= self.meta.n_features
                            || *left as usize >= t.nodes.len()
                            || *right as usize >= t.nodes.len()
                        {
                            return Err(ForestError::Malformed(format!("tree {ti} has a dangling split")));
                        }
                    }
                    Node::Leaf { counts } if counts.len() != k => {
                        return Err(ForestError::Malformed(format!("tree {ti} leaf has {} counts", counts.len())));
                    }
                    Node::Leaf { .. } => {}
                }
            }
        }
        Ok(())
    }

    /// Vote count per class for one input.
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.meta.classes.len()];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        votes
    }
}

/// Derives the seed of one tree from the forest seed (splitmix64 finalizer).
pub fn tree_seed(seed: u64, tree: u64) -> u64 {
    let mut z = seed ^ tree.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn train_forest(x: &[Vec<f64>], y: &[LayoutLabel], params: &ForestParams) -> Result<ForestModel, ForestError> {
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ForestError::Empty);
    }
    let d = x[0].len();
    if let Some((index, row)) = x.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(ForestError::Width { index, found: row.len(), expected: d });
    }
    let mut classes: Vec<LayoutLabel> = y.to_vec();
    classes.sort();
    classes.dedup();
    let class_idx: Vec<usize> = y.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    let meta = ForestMeta {
        format: MODEL_FORMAT.into(),
        format_version: MODEL_FORMAT_VERSION,
        feature_version: FEATURE_VERSION.into(),
        n_features: d,
        classes: classes.clone(),
        params: params.clone(),
        source_id: String::new(),
        training_docs: Vec::new(),
        n_samples: x.len(),
    };
    let n_trees = params.n_trees.max(1);
    if classes.len() == 1 {
        log::warn!("training data holds a single class ({}); fitting a constant model", classes[0]);
        let leaf = Tree { nodes: vec![Node::Leaf { counts: vec![x.len() as u32] }] };
        return Ok(ForestModel { meta, trees: vec![leaf; n_trees] });
    }
    let k = classes.len();
    let mtry = params.features_per_split(d);
    let trees = (0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let n = x.len();
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grow_tree(x, &class_idx, k, sample, params, mtry, &mut rng)
        })
        .collect();
    Ok(ForestModel { meta, trees })
}

fn class_counts(idx: &[usize], y: &[usize], k: usize) -> Vec<u32> {
    let mut c = vec![0u32; k];
    for &i in idx {
        c[y[i]] += 1;
    }
    c
}

fn gini_sum(counts: &[u32], n: f64) -> f64 {
    // n * gini = n - sum(c^2)/n
    if n == 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / n
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn best_split_on(x: &[Vec<f64>], y: &[usize], k: usize, idx: &mut [usize], f: usize, total: &[u32]) -> Option<SplitChoice> {
    idx.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]).then(a.cmp(b)));
    let n = idx.len();
    if x[idx[0]][f] == x[idx[n - 1]][f] {
        return None;
    }
    let mut left = vec![0u32; k];
    let mut right = total.to_vec();
    let mut best: Option<SplitChoice> = None;
    for pos in 0..n - 1 {
        let c = y[idx[pos]];
        left[c] += 1;
        right[c] -= 1;
        let a = x[idx[pos]][f];
        let b = x[idx[pos + 1]][f];
        if a == b {
            continue;
        }
        let nl = (pos + 1) as f64;
        let score = gini_sum(&left, nl) + gini_sum(&right, n as f64 - nl);
        if best.as_ref().is_none_or(|s| score < s.score) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(SplitChoice { feature: f, threshold, score });
        }
    }
    best
}

fn grow_tree(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    sample: Vec<usize>,
    params: &ForestParams,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let d = x[0].len();
    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    // (node slot, sample indices, depth)
    let mut stack = vec![(0usize, sample, 0usize)];
    let mut features: Vec<usize> = (0..d).collect();
    while let Some((slot, mut idx, depth)) = stack.pop() {
        let counts = class_counts(&idx, y, k);
        let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
        if pure || depth >= params.max_depth || idx.len() < params.min_samples_split {
            nodes[slot] = Node::Leaf { counts };
            continue;
        }
        features.shuffle(rng);
        let mut best: Option<SplitChoice> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            if let Some(s) = best_split_on(x, y, k, &mut idx, f, &counts) {
                if best.as_ref().is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        let li = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        let ri = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[slot] = Node::Split {
            feature: split.feature as u16,
            threshold: split.threshold,
            left: li as u32,
            right: ri as u32,
        };
        stack.push((ri, r, depth + 1));
        stack.push((li, l, depth + 1));
    }
    Tree { nodes }
}

/// Majority-vote label and the winning vote fraction.
pub fn predict(m: &ForestModel, v: &[f64]) -> Result<(LayoutLabel, f64), ForestError> {
    if m.meta.feature_version != FEATURE_VERSION {
        return Err(ForestError::StaleModel { model: m.meta.feature_version.clone(), current: FEATURE_VERSION.into() });
    }
    if v.len() != m.meta.n_features {
        return Err(ForestError::InputWidth { expected: m.meta.n_features, found: v.len() });
    }
    let votes = m.votes(v);
    let total: usize = votes.iter().sum();
    let counts: Vec<u32> = votes.iter().map(|v| *v as u32).collect();
    let best = argmax_low(&counts);
    Ok((m.meta.classes[best], votes[best] as f64 / total.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::N_FEATURES;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<LayoutLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let mut row: Vec<f64> = (0..N_FEATURES).map(|_| rng.gen_range(0.0..1.0)).collect();
            // class decided by feature 3 with a margin between 0.3 and 0.6
            let title = rng.gen_bool(0.5);
            row[3] = if title { rng.gen_range(0.6..1.0) } else { rng.gen_range(0.0..0.3) };
            y.push(if title { LayoutLabel::Title } else { LayoutLabel::Body });
            x.push(row);
        }
        (x, y)
    }

    /// Exhaustive single-stump search: best training accuracy achievable by one threshold.
    fn best_stump_accuracy(x: &[Vec<f64>], y: &[LayoutLabel]) -> f64 {
        let mut best = 0.0f64;
        for f in 0..x[0].len() {
            for row in x {
                let t = row[f];
                for flip in [false, true] {
                    let correct = x
                        .iter()
                        .zip(y)
                        .filter(|(r, l)| {
                            let left = r[f] <= t;
                            let pred = if left ^ flip { LayoutLabel::Body } else { LayoutLabel::Title };
                            pred == **l
                        })
                        .count();
                    best = best.max(correct as f64 / x.len() as f64);
                }
            }
        }
        best
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (x, y) = toy(200, 7);
        assert_eq!(best_stump_accuracy(&x, &y), 1.0);
        let m = train_forest(&x, &y, &ForestParams::default().with_seed(3)).unwrap();
        let mut correct = 0;
        for (row, label) in x.iter().zip(&y) {
            let (p, conf) = predict(&m, row).unwrap();
            correct += (p == *label) as usize;
            assert!(conf >= 0.9, "confidence {conf}");
        }
        assert_eq!(correct, 200);
        assert!(m.trees.iter().all(|t| t.depth() <= 1000));
    }

    #[test]
    fn deterministic_serialization() {
        let (x, y) = toy(120, 11);
        let p = ForestParams { n_trees: 20, ..ForestParams::default() }.with_seed(42);
        let a = train_forest(&x, &y, &p).unwrap().to_json();
        let b = train_forest(&x, &y, &p).unwrap().to_json();
        assert_eq!(a, b);
        let back = ForestModel::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }

    #[test]
    fn constant_model() {
        let x = vec![vec![0.0; 3], vec![1.0; 3]];
        let y = vec![LayoutLabel::Summary; 2];
        let m = train_forest(&x, &y, &ForestParams::default()).unwrap();
        assert!(m.is_constant());
        assert_eq!(predict(&m, &[5.0, 5.0, 5.0]).unwrap(), (LayoutLabel::Summary, 1.0));
    }

    #[test]
    fn empty_and_mismatched_input() {
        assert!(matches!(train_forest(&[], &[], &ForestParams::default()), Err(ForestError::Empty)));
        assert!(matches!(
            train_forest(&[vec![1.0]], &[], &ForestParams::default()),
            Err(ForestError::LengthMismatch(1, 0))
        ));
        assert!(matches!(
            train_forest(&[vec![1.0], vec![1.0, 2.0]], &[LayoutLabel::Body; 2], &ForestParams::default()),
            Err(ForestError::Width { index: 1, .. })
        ));
    }

    #[test]
    fn tie_goes_to_lower_code() {
        let leaf = |c: Vec<u32>| Tree { nodes: vec![Node::Leaf { counts: c }] };
        let meta = ForestMeta {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            feature_version: FEATURE_VERSION.into(),
            n_features: 1,
            classes: vec![LayoutLabel::Title, LayoutLabel::Body],
            params: ForestParams::default(),
            source_id: String::new(),
            training_docs: vec![],
            n_samples: 2,
        };
        let m = ForestModel { meta, trees: vec![leaf(vec![1, 0]), leaf(vec![0, 1])] };
        assert_eq!(predict(&m, &[0.0]).unwrap(), (LayoutLabel::Title, 0.5));
        let mut rev = m.clone();
        rev.trees.reverse();
        assert_eq!(predict(&rev, &[0.0]).unwrap(), (LayoutLabel::Title, 0.5));
    }

    #[test]
    fn stale_model_rejected() {
        let (x, y) = toy(30, 1);
        let mut m = train_forest(&x, &y, &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        m.meta.feature_version = "old".into();
        assert!(matches!(predict(&m, &x[0]), Err(ForestError::StaleModel { .. })));
        m.meta.feature_version = FEATURE_VERSION.into();
        assert!(matches!(predict(&m, &[1.0]), Err(ForestError::InputWidth { .. })));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ForestModel::from_json("{}").is_err());
        let (x, y) = toy(30, 1);
        let m = train_forest(&x, &y, &ForestParams { n_trees: 2, ..Default::default() }).unwrap();
        let mut bad = m.clone();
        bad.meta.format_version = 99;
        assert!(matches!(ForestModel::from_json(&bad.to_json()), Err(ForestError::Format(..))));
    }

    #[test]
    fn depth_limit_is_honored() {
        let (x, y) = toy(200, 5);
        let p = ForestParams { n_trees: 5, max_depth: 1, ..Default::default() };
        let m = train_forest(&x, &y, &p).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 1));
    }
}
