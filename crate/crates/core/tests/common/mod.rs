//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use study_rules::decision_tree::{DenseData, Node};
use study_rules::event_log::StudyPath;
use study_rules::features::{extract, FeatureSelection};
use study_rules::order_graph::LevelledPartialOrder;
use study_rules::{DecisionTree, PoNode};

/// Courses 1, 2 in semester 1; 3 in 2; 1 again in 3; nothing in 4; 4, 5 in 5.
pub fn running_example() -> StudyPath {
    StudyPath::from_placements(
        "student-1",
        &[
            ("course-1", 1),
            ("course-2", 1),
            ("course-3", 2),
            ("course-1", 3),
            ("course-4", 5),
            ("course-5", 5),
        ],
    )
}

pub fn features_of(path: &StudyPath, selection: &str) -> BTreeMap<String, i32> {
    let sel: FeatureSelection = selection.parse().unwrap();
    extract(path, sel).into_iter().map(|(n, v)| (n.to_string(), v)).collect()
}

pub fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Random study path over `courses` courses and up to `semesters` semesters,
/// with gaps and retakes.
pub fn random_path(rng: &mut ChaCha8Rng, courses: usize, semesters: u32) -> StudyPath {
    let mut placements = Vec::new();
    for s in 1..=semesters {
        if rng.gen_bool(0.25) {
            continue;
        }
        for c in 0..courses {
            if rng.gen_bool(0.3) {
                placements.push((format!("course-{}", c + 1), s));
            }
        }
    }
    StudyPath::from_placements("student-r", &placements)
}

/// Shortest path length by breadth-first search over the edge set. Nodes
/// placed in the same semester count as parallel (0).
pub fn bfs_path_length(po: &LevelledPartialOrder, semester_of: &BTreeMap<PoNode, u32>, from: &PoNode, to: &PoNode) -> i64 {
    if semester_of[from] == semester_of[to] {
        return 0;
    }
    let mut adj: BTreeMap<&PoNode, Vec<&PoNode>> = BTreeMap::new();
    for (u, v) in &po.edges {
        adj.entry(u).or_default().push(v);
    }
    let mut dist: BTreeMap<&PoNode, i64> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    dist.insert(from, 0);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(v) {
                dist.insert(v, dist[u] + 1);
                queue.push_back(v);
            }
        }
    }
    dist.get(to).copied().unwrap_or(-1)
}

/// `Σ_side Σ_class c² / n_side` as an exact fraction `(num, den)`.
fn purity(left: &[usize], right: &[usize]) -> (u128, u128) {
    let sq = |c: &[usize]| c.iter().map(|&x| (x as u128).pow(2)).sum::<u128>();
    let (nl, nr) = (left.iter().sum::<usize>() as u128, right.iter().sum::<usize>() as u128);
    (sq(left) * nr + sq(right) * nl, nl * nr)
}

/// Exhaustive search: the largest purity (equivalently the smallest weighted
/// Gini) over every feature and every threshold between distinct values.
pub fn best_purity(data: &DenseData, y: &[usize], n_classes: usize, rows: &[usize]) -> Option<(u128, u128)> {
    let mut best: Option<(u128, u128)> = None;
    for j in 0..data.names.len() {
        let values: BTreeSet<u64> = rows.iter().map(|&r| data.rows[r][j].to_bits()).collect();
        let mut values: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
        values.sort_by(f64::total_cmp);
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut left = vec![0; n_classes];
            let mut right = vec![0; n_classes];
            for &r in rows {
                if data.rows[r][j] <= t {
                    left[y[r]] += 1;
                } else {
                    right[y[r]] += 1;
                }
            }
            let p = purity(&left, &right);
            if best.is_none_or(|b| p.0 * b.1 > b.0 * p.1) {
                best = Some(p);
            }
        }
    }
    best
}

/// Walks the fitted tree, checking each internal node's split against the
/// exhaustive oracle and each impure shallow leaf for a missed split.
/// Returns the number of internal nodes checked.
pub fn check_split_optimality(tree: &DecisionTree, data: &DenseData, labels: &[String]) -> Result<usize, String> {
    let classes: Vec<&String> = tree.classes.iter().collect();
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| *c == l).unwrap())
        .collect();
    let index: BTreeMap<&str, usize> = data.names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
    let mut checked = 0;
    let mut stack = vec![(&tree.root, (0..data.rows.len()).collect::<Vec<_>>(), 0usize)];
    while let Some((node, rows, depth)) = stack.pop() {
        match node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let j = index[feature.as_str()];
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.rows[i][j] <= *threshold);
                let count = |rs: &[usize]| {
                    let mut c = vec![0; classes.len()];
                    rs.iter().for_each(|&i| c[y[i]] += 1);
                    c
                };
                let chosen = purity(&count(&l), &count(&r));
                let best = best_purity(data, &y, classes.len(), &rows).ok_or("split where none is possible")?;
                if chosen.0 * best.1 != best.0 * chosen.1 {
                    return Err(format!("split on {feature} <= {threshold} is not optimal at depth {depth}"));
                }
                checked += 1;
                stack.push((left, l, depth + 1));
                stack.push((right, r, depth + 1));
            }
            Node::Leaf { .. } => {
                let distinct: BTreeSet<usize> = rows.iter().map(|&i| y[i]).collect();
                let can_split = best_purity(data, &y, classes.len(), &rows).is_some();
                if distinct.len() > 1 && depth < tree.hyperparams.max_depth && rows.len() >= tree.hyperparams.min_samples_split && can_split {
                    return Err(format!("impure leaf at depth {depth} with an available split"));
                }
            }
        }
    }
    Ok(checked)
}

/// Random binary dataset with labels that depend on a few features plus noise.
pub fn random_binary_dataset(rng: &mut ChaCha8Rng, n: usize, f: usize) -> (DenseData, Vec<String>) {
    let names: Vec<String> = (0..f).map(|j| format!("f{j:02}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..f).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            let signal = r[0] > 0.5 && (f < 2 || r[1] < 0.5);
            let flip = rng.gen_bool(0.2);
            if signal ^ flip { "pos" } else { "neg" }.to_string()
        })
        .collect();
    (DenseData { names, rows }, labels)
}

pub fn all_binary_vectors(names: &[String]) -> Vec<BTreeMap<String, f64>> {
    (0..1u32 << names.len())
        .map(|bits| {
            names
                .iter()
                .enumerate()
                .map(|(j, n)| (n.clone(), f64::from((bits >> j) & 1)))
                .collect()
        })
        .collect()
}

