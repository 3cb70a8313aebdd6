//! CART-style binary classification trees with Gini impurity.
//!
//! Split candidates are midpoints between consecutive distinct values of a
//! feature, so binary features are tested as `feature <= 0.5`. Split quality
//! is compared in exact integer arithmetic; ties go to the lexicographically
//! smallest feature name, then to the smaller threshold.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::order_graph::dot_id;

/// Row-addressable numeric data with named columns.
pub trait DataView: Sync {
    fn n_rows(&self) -> usize;
    fn n_features(&self) -> usize;
    fn feature_name(&self, j: usize) -> &str;
    fn value(&self, i: usize, j: usize) -> f64;
}

impl DataView for FeatureMatrix {
    fn n_rows(&self) -> usize {
        self.values.len()
    }

    fn n_features(&self) -> usize {
        self.columns.len()
    }

    fn feature_name(&self, j: usize) -> &str {
        &self.columns[j]
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        f64::from(self.values[i][j])
    }
}

/// Plain row-major data, mostly for tests and foreign callers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseData {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataView for DenseData {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_features(&self) -> usize {
        self.names.len()
    }

    fn feature_name(&self, j: usize) -> &str {
        &self.names[j]
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// Named feature lookup used at prediction time.
pub trait FeatureSource {
    fn get(&self, name: &str) -> Option<f64>;
}

impl FeatureSource for BTreeMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        BTreeMap::get(self, name).copied()
    }
}

impl FeatureSource for HashMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        HashMap::get(self, name).copied()
    }
}

/// One row of a [`DataView`] viewed through a column index.
pub struct NamedRow<'a, D: DataView + ?Sized> {
    pub data: &'a D,
    pub row: usize,
    pub index: &'a HashMap<String, usize>,
}

impl<D: DataView + ?Sized> FeatureSource for NamedRow<'_, D> {
    fn get(&self, name: &str) -> Option<f64> {
        self.index.get(name).map(|&j| self.data.value(self.row, j))
    }
}

pub fn column_index<D: DataView + ?Sized>(data: &D) -> HashMap<String, usize> {
    (0..data.n_features()).map(|j| (data.feature_name(j).to_string(), j)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_depth: 5,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_leaf == 0 || self.min_samples_split == 0 {
            return Err(Error::Config(
                "max_depth, min_samples_leaf and min_samples_split must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `1 - Σ p²` over the class counts.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Computation("gini of an empty node".into()));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Sample-weighted Gini of the two children.
    pub weighted_gini: f64,
    pub gain: f64,
}

/// `Σ cL²/nL + Σ cR²/nR` as an exact fraction; larger is better.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn new(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Purity {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn sum_sq(counts: &[usize]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Best split of `rows`, or `None` when no feature offers a threshold that
/// leaves at least `min_samples_leaf` rows on both sides.
pub fn best_split<D: DataView + ?Sized>(
    data: &D,
    classes: &[usize],
    n_classes: usize,
    rows: &[usize],
    hp: &Hyperparams,
) -> Option<Split> {
    let n = rows.len();
    if n < 2 || n < 2 * hp.min_samples_leaf {
        return None;
    }
    let mut order: Vec<usize> = (0..data.n_features()).collect();
    order.sort_by(|&a, &b| data.feature_name(a).cmp(data.feature_name(b)));

    let mut total = vec![0usize; n_classes];
    for &r in rows {
        total[classes[r]] += 1;
    }

    let mut best: Option<(Purity, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    for j in order {
        column.clear();
        column.extend(rows.iter().map(|&r| (data.value(r, j), classes[r])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        if column[0].0 == column[n - 1].0 {
            continue;
        }
        let mut left = vec![0usize; n_classes];
        let mut right = total.clone();
        let mut sq_left: u128 = 0;
        let mut sq_right: u128 = sum_sq(&total);
        for i in 0..n - 1 {
            let c = column[i].1;
            sq_left += 2 * left[c] as u128 + 1;
            sq_right -= 2 * right[c] as u128 - 1;
            left[c] += 1;
            right[c] -= 1;
            let (v, next) = (column[i].0, column[i + 1].0);
            if v == next {
                continue;
            }
            let (n_left, n_right) = (i + 1, n - i - 1);
            if n_left < hp.min_samples_leaf || n_right < hp.min_samples_leaf {
                continue;
            }
            let purity = Purity::new(sq_left, n_left as u128, sq_right, n_right as u128);
            if best.as_ref().is_none_or(|(b, _, _)| purity.cmp(b) == Ordering::Greater) {
                best = Some((purity, j, v + (next - v) / 2.0));
            }
        }
    }

    best.map(|(purity, feature, threshold)| {
        let nf = n as f64;
        let weighted_gini = 1.0 - purity.num as f64 / purity.den as f64 / nf;
        let parent = 1.0 - sum_sq(&total) as f64 / (nf * nf);
        Split {
            feature,
            threshold,
            weighted_gini,
            gain: parent - weighted_gini,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class_counts: BTreeMap<String, usize>,
        predicted: String,
    },
    Split {
        feature: String,
        threshold: f64,
        class_counts: BTreeMap<String, usize>,
        /// Rows with `value <= threshold`.
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn class_counts(&self) -> &BTreeMap<String, usize> {
        match self {
            Node::Leaf { class_counts, .. } | Node::Split { class_counts, .. } => class_counts,
        }
    }

    pub fn samples(&self) -> usize {
        self.class_counts().values().sum()
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

/// Most frequent class; ties go to the lexicographically smallest name.
pub fn majority(counts: &BTreeMap<String, usize>) -> &str {
    let mut best: Option<(&str, usize)> = None;
    for (c, &n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c).unwrap_or("")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub classes: Vec<String>,
    pub hyperparams: Hyperparams,
    pub root: Node,
}

struct Builder<'a, D: DataView + ?Sized> {
    data: &'a D,
    classes: &'a [String],
    y: Vec<usize>,
    hp: Hyperparams,
}

impl<D: DataView + ?Sized> Builder<'_, D> {
    fn counts(&self, rows: &[usize]) -> (Vec<usize>, BTreeMap<String, usize>) {
        let mut counts = vec![0; self.classes.len()];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        let named = self.classes.iter().cloned().zip(counts.iter().copied()).collect();
        (counts, named)
    }

    fn grow(&self, rows: Vec<usize>, depth: usize) -> Node {
        let (counts, class_counts) = self.counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.hp.max_depth || rows.len() < self.hp.min_samples_split {
            None
        } else {
            best_split(self.data, &self.y, self.classes.len(), &rows, &self.hp)
        };
        match split {
            None => Node::Leaf {
                predicted: majority(&class_counts).to_string(),
                class_counts,
            },
            Some(s) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&r| self.data.value(r, s.feature) <= s.threshold);
                Node::Split {
                    feature: self.data.feature_name(s.feature).to_string(),
                    threshold: s.threshold,
                    class_counts,
                    left: Box::new(self.grow(left, depth + 1)),
                    right: Box::new(self.grow(right, depth + 1)),
                }
            }
        }
    }
}

impl DecisionTree {
    /// Fits on every row of `data`; `labels[i]` is the class of row `i`.
    pub fn fit<D: DataView + ?Sized>(data: &D, labels: &[String], hp: &Hyperparams) -> Result<DecisionTree> {
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        Self::fit_rows(data, labels, &rows, hp)
    }

    /// Fits on the listed rows only. Labels of other rows are never read.
    pub fn fit_rows<D: DataView + ?Sized>(
        data: &D,
        labels: &[String],
        rows: &[usize],
        hp: &Hyperparams,
    ) -> Result<DecisionTree> {
        hp.validate()?;
        if labels.len() != data.n_rows() {
            return Err(Error::Mismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.n_rows()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Computation("cannot fit a tree on zero rows".into()));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= data.n_rows()) {
            return Err(Error::Mismatch(format!("row {r} out of range")));
        }
        let mut classes: Vec<String> = rows.iter().map(|&r| labels[r].clone()).collect();
        classes.sort();
        classes.dedup();
        let class_index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut y = vec![0; data.n_rows()];
        for &r in rows {
            y[r] = class_index[labels[r].as_str()];
        }
        let builder = Builder {
            data,
            classes: &classes,
            y,
            hp: *hp,
        };
        let root = builder.grow(rows.to_vec(), 0);
        Ok(DecisionTree {
            classes,
            hyperparams: *hp,
            root,
        })
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    /// Leaf reached by `row`.
    pub fn route<S: FeatureSource + ?Sized>(&self, row: &S) -> Result<&Node> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { .. } => return Ok(node),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let v = row.get(feature).ok_or_else(|| Error::Lookup {
                        kind: "feature",
                        name: feature.clone(),
                    })?;
                    node = if v <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict<S: FeatureSource + ?Sized>(&self, row: &S) -> Result<&str> {
        match self.route(row)? {
            Node::Leaf { predicted, .. } => Ok(predicted),
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_rows<D: DataView + ?Sized>(&self, data: &D, rows: &[usize]) -> Result<Vec<String>> {
        let index = column_index(data);
        rows.iter()
            .map(|&row| {
                self.predict(&NamedRow {
                    data,
                    row,
                    index: &index,
                })
                .map(String::from)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graphviz rendering; the left edge of each split is the `<=` branch.
    pub fn to_dot(&self) -> String {
        fn walk(node: &Node, next_id: &mut usize, out: &mut String) -> usize {
            let id = *next_id;
            *next_id += 1;
            let counts: Vec<String> = node.class_counts().values().map(usize::to_string).collect();
            let stats = format!("samples = {}\\nvalue = [{}]", node.samples(), counts.join(", "));
            match node {
                Node::Leaf { predicted, .. } => {
                    writeln!(out, "  n{id} [label={}];", dot_id(&format!("{stats}\\nclass = {predicted}"))).unwrap();
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    writeln!(out, "  n{id} [label={}];", dot_id(&format!("{feature} <= {threshold}\\n{stats}")))
                        .unwrap();
                    let l = walk(left, next_id, out);
                    let r = walk(right, next_id, out);
                    writeln!(out, "  n{id} -> n{l} [label=\"True\"];").unwrap();
                    writeln!(out, "  n{id} -> n{r} [label=\"False\"];").unwrap();
                }
            }
            id
        }
        let mut out = String::from("digraph tree {\n  node [shape=box];\n");
        walk(&self.root, &mut 0, &mut out);
        out.push_str("}\n");
        out
    }
}
