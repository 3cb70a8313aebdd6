//! k-fold cross-validation with accuracy and per-class precision/recall.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision_tree::{DataView, DecisionTree, Hyperparams};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Test-row indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Rows outside fold `i`, ascending.
    pub fn train_rows(&self, i: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Shuffles each class with a seeded RNG and deals its rows round-robin onto
/// the folds, continuing where the previous class stopped.
pub fn stratified_kfold(labels: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need at least 2 folds")));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, rows)) = by_class.iter().find(|(_, rows)| rows.len() < k) {
        return Err(Error::Stratification {
            class: class.to_string(),
            count: rows.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Unstratified variant: one seeded shuffle of all rows, dealt round-robin.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::Config(format!("cannot split {n} rows into {k} folds")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, r) in rows.into_iter().enumerate() {
        folds[i % k].push(r);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Counts indexed `[truth][predicted]` over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion(predicted: &[String], truth: &[String], classes: &[String]) -> Result<Confusion> {
    if predicted.len() != truth.len() {
        return Err(Error::Mismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let pos = |c: &str| {
        classes.iter().position(|k| k == c).ok_or_else(|| Error::Lookup {
            kind: "class",
            name: c.to_string(),
        })
    };
    let mut counts = vec![vec![0; classes.len()]; classes.len()];
    for (p, t) in predicted.iter().zip(truth) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    Ok(Confusion {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `None` when the class was never predicted.
    pub precision: BTreeMap<String, Option<f64>>,
    /// `None` when the class does not occur in the truth.
    pub recall: BTreeMap<String, Option<f64>>,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn metrics(&self) -> Metrics {
        let k = self.classes.len();
        let total = self.total();
        let diag: usize = (0..k).map(|i| self.counts[i][i]).sum();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let mut precision = BTreeMap::new();
        let mut recall = BTreeMap::new();
        for (i, c) in self.classes.iter().enumerate() {
            let tp = self.counts[i][i];
            let predicted: usize = (0..k).map(|t| self.counts[t][i]).sum();
            let actual: usize = self.counts[i].iter().sum();
            precision.insert(c.clone(), ratio(tp, predicted));
            recall.insert(c.clone(), ratio(tp, actual));
        }
        Metrics {
            accuracy: if total == 0 { 0.0 } else { diag as f64 / total as f64 },
            precision,
            recall,
        }
    }
}

/// Mean and population standard deviation over the folds where a value is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub folds: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Summary> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            sd: var.sqrt(),
            folds: v.len(),
        })
    }

    /// Percentages rounded to integers, e.g. `68 ± 1`.
    pub fn percent(&self) -> String {
        format!("{} ± {}", (self.mean * 100.0).round(), (self.sd * 100.0).round())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub folds: Vec<Metrics>,
    pub confusions: Vec<Confusion>,
    pub accuracy: Summary,
    pub precision: BTreeMap<String, Option<Summary>>,
    pub recall: BTreeMap<String, Option<Summary>>,
}

impl MetricsReport {
    pub fn from_folds(classes: Vec<String>, confusions: Vec<Confusion>) -> Result<MetricsReport> {
        let folds: Vec<Metrics> = confusions.iter().map(Confusion::metrics).collect();
        let accuracy = Summary::of(folds.iter().map(|m| m.accuracy))
            .ok_or_else(|| Error::Computation("no folds to aggregate".into()))?;
        let per_class = |pick: fn(&Metrics) -> &BTreeMap<String, Option<f64>>| {
            classes
                .iter()
                .map(|c| (c.clone(), Summary::of(folds.iter().filter_map(|m| pick(m)[c]))))
                .collect()
        };
        Ok(MetricsReport {
            precision: per_class(|m| &m.precision),
            recall: per_class(|m| &m.recall),
            accuracy,
            classes,
            folds,
            confusions,
        })
    }

    fn rows(&self) -> Vec<(String, String, Option<Summary>)> {
        let mut rows = vec![("Accuracy".to_string(), String::new(), Some(self.accuracy))];
        for c in &self.classes {
            rows.push(("Precision".into(), c.clone(), self.precision[c]));
        }
        for c in &self.classes {
            rows.push(("Recall".into(), c.clone(), self.recall[c]));
        }
        rows
    }

    /// Aligned two-column table of `mean ± sd` percentages.
    pub fn to_table(&self, title: &str) -> String {
        let rows: Vec<(String, String)> = self
            .rows()
            .into_iter()
            .map(|(metric, class, s)| {
                let label = if class.is_empty() {
                    metric
                } else {
                    format!("{metric} ({class})")
                };
                (label, s.map(|s| s.percent()).unwrap_or_else(|| "n/a".into()))
            })
            .collect();
        let width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        writeln!(out, "{:width$}  {title}", "").unwrap();
        for (label, value) in rows {
            let pad = width - label.chars().count();
            writeln!(out, "{label}{}  {value}", " ".repeat(pad)).unwrap();
        }
        out
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["metric".to_string(), "class".into(), "mean".into(), "sd".into()];
        header.extend((0..self.folds.len()).map(|i| format!("fold_{i}")));
        w.write_record(&header)?;
        for (metric, class, s) in self.rows() {
            let per_fold: Vec<String> = self.folds.iter().map(|m| {
                let v = match metric.as_str() {
                    "Accuracy" => Some(m.accuracy),
                    "Precision" => m.precision[&class],
                    _ => m.recall[&class],
                };
                v.map(|v| v.to_string()).unwrap_or_default()
            }).collect();
            let (mean, sd) = s.map(|s| (s.mean.to_string(), s.sd.to_string())).unwrap_or_default();
            let record: Vec<String> = [metric.to_lowercase(), class, mean, sd].into_iter().chain(per_fold).collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: DEFAULT_K,
            seed: DEFAULT_SEED,
            stratified: true,
        }
    }
}

pub fn plan_folds(labels: &[String], opts: &CvOptions) -> Result<FoldPlan> {
    if opts.stratified {
        stratified_kfold(labels, opts.k, opts.seed)
    } else {
        kfold(labels.len(), opts.k, opts.seed)
    }
}

/// Trains one tree per fold on the other folds and scores it on the held-out fold.
pub fn cross_validate<D: DataView + ?Sized>(
    data: &D,
    labels: &[String],
    hp: &Hyperparams,
    opts: &CvOptions,
) -> Result<MetricsReport> {
    if labels.len() != data.n_rows() {
        return Err(Error::Mismatch(format!("{} labels for {} rows", labels.len(), data.n_rows())));
    }
    let plan = plan_folds(labels, opts)?;
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let confusions = (0..plan.k)
        .into_par_iter()
        .map(|i| {
            let tree = DecisionTree::fit_rows(data, labels, &plan.train_rows(i), hp)?;
            let test = &plan.folds[i];
            let predicted = tree.predict_rows(data, test)?;
            let truth: Vec<String> = test.iter().map(|&r| labels[r].clone()).collect();
            confusion(&predicted, &truth, &classes)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_folds(classes, confusions)
}
