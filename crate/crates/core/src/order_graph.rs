//! Directly-follows graphs and per-student levelled partial orders.
//!
//! A levelled partial order has one level per occupied semester. Courses in
//! the same level are concurrent, and every node of a level is connected to
//! every node of the next occupied level. Gap semesters are collapsed, so a
//! path across a break still counts one edge.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{EventLog, StudyPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IndexKind {
    Semester,
    Order,
    Distance,
}

impl IndexKind {
    pub const ALL: [IndexKind; 3] = [IndexKind::Semester, IndexKind::Order, IndexKind::Distance];

    pub fn letter(self) -> char {
        match self {
            IndexKind::Semester => 's',
            IndexKind::Order => 'o',
            IndexKind::Distance => 'd',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        IndexKind::ALL.into_iter().find(|k| k.letter() == c)
    }
}

/// Index value of every occupied semester of `path`, keyed by semester.
///
/// All attempts of one semester share its index.
pub fn semester_indices(path: &StudyPath, kind: IndexKind) -> BTreeMap<u32, u32> {
    let first = path.first_semester().unwrap_or(0);
    path.semesters
        .keys()
        .enumerate()
        .map(|(rank, &s)| {
            let idx = match kind {
                IndexKind::Semester => s,
                IndexKind::Order => rank as u32 + 1,
                IndexKind::Distance => s - first,
            };
            (s, idx)
        })
        .collect()
}

/// `(semester, course, index)` for every attempt, in path order.
pub fn annotate_index(path: &StudyPath, kind: IndexKind) -> Vec<(u32, &str, u32)> {
    let idx = semester_indices(path, kind);
    path.placements().map(|(s, c)| (s, c, idx[&s])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lifecycle {
    Atomic,
    Start,
    End,
}

/// A partial-order node. Start and End nodes carry index 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PoNode {
    pub course: String,
    pub index: u32,
    pub lifecycle: Lifecycle,
}

impl PoNode {
    pub fn atomic(course: impl Into<String>, index: u32) -> Self {
        PoNode {
            course: course.into(),
            index,
            lifecycle: Lifecycle::Atomic,
        }
    }

    pub fn start(course: impl Into<String>) -> Self {
        PoNode {
            course: course.into(),
            index: 0,
            lifecycle: Lifecycle::Start,
        }
    }

    pub fn end(course: impl Into<String>) -> Self {
        PoNode {
            course: course.into(),
            index: 0,
            lifecycle: Lifecycle::End,
        }
    }

    /// Parses `<course>-<index>`, `<course>-start` or `<course>-end`.
    pub fn parse(label: &str) -> Result<Self> {
        let (course, tail) = label
            .rsplit_once('-')
            .filter(|(c, t)| !c.is_empty() && !t.is_empty())
            .ok_or_else(|| Error::parse("partial-order node", label))?;
        match tail {
            "start" => Ok(PoNode::start(course)),
            "end" => Ok(PoNode::end(course)),
            _ if tail.bytes().all(|b| b.is_ascii_digit()) => tail
                .parse()
                .map(|i| PoNode::atomic(course, i))
                .map_err(|_| Error::parse("partial-order node", label)),
            _ => Err(Error::parse("partial-order node", label)),
        }
    }
}

impl fmt::Display for PoNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lifecycle {
            Lifecycle::Atomic => write!(f, "{}-{}", self.course, self.index),
            Lifecycle::Start => write!(f, "{}-start", self.course),
            Lifecycle::End => write!(f, "{}-end", self.course),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    /// Semester the level stands for.
    pub semester: u32,
    pub nodes: BTreeSet<PoNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelledPartialOrder {
    pub levels: Vec<Level>,
    pub edges: BTreeSet<(PoNode, PoNode)>,
    level_of: BTreeMap<PoNode, usize>,
}

impl LevelledPartialOrder {
    fn from_levels(levels: Vec<Level>) -> Self {
        let mut edges = BTreeSet::new();
        for pair in levels.windows(2) {
            for u in &pair[0].nodes {
                for v in &pair[1].nodes {
                    edges.insert((u.clone(), v.clone()));
                }
            }
        }
        let level_of = levels
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.nodes.iter().map(move |n| (n.clone(), i)))
            .collect();
        LevelledPartialOrder {
            levels,
            edges,
            level_of,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PoNode> {
        self.levels.iter().flat_map(|l| l.nodes.iter())
    }

    pub fn node_count(&self) -> usize {
        self.level_of.len()
    }

    pub fn level_of(&self, node: &PoNode) -> Option<usize> {
        self.level_of.get(node).copied()
    }

    pub fn has_edge(&self, from: &PoNode, to: &PoNode) -> bool {
        self.edges.contains(&(from.clone(), to.clone()))
    }

    /// Edges to traverse from `from` to `to`: 0 for concurrent nodes, -1 when unreachable.
    pub fn path_length(&self, from: &PoNode, to: &PoNode) -> Result<i64> {
        let lookup = |n: &PoNode| {
            self.level_of(n).ok_or_else(|| Error::Lookup {
                kind: "partial-order node",
                name: n.to_string(),
            })
        };
        let (a, b) = (lookup(from)?, lookup(to)?);
        Ok(match a.cmp(&b) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => (b - a) as i64,
            std::cmp::Ordering::Greater => -1,
        })
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        writeln!(out, "digraph {} {{", dot_id(name)).unwrap();
        out.push_str("  rankdir=LR;\n  node [shape=box];\n");
        for level in &self.levels {
            write!(out, "  {{ rank=same;").unwrap();
            for n in &level.nodes {
                write!(out, " {};", dot_id(&n.to_string())).unwrap();
            }
            out.push_str(" }\n");
        }
        for (u, v) in &self.edges {
            writeln!(out, "  {} -> {};", dot_id(&u.to_string()), dot_id(&v.to_string())).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Partial order whose nodes are `(course, index)` pairs for the chosen index kind.
pub fn build_partial_order(path: &StudyPath, kind: IndexKind) -> LevelledPartialOrder {
    let idx = semester_indices(path, kind);
    let levels = path
        .semesters
        .iter()
        .map(|(&s, attempts)| Level {
            semester: s,
            nodes: attempts
                .iter()
                .map(|a| PoNode::atomic(a.course_id.clone(), idx[&s]))
                .collect(),
        })
        .collect();
    LevelledPartialOrder::from_levels(levels)
}

/// Partial order over course life cycles: a Start node at the first attempt's
/// semester and an End node at the last attempt's semester.
pub fn build_lifecycle_partial_order(path: &StudyPath) -> LevelledPartialOrder {
    let mut by_semester: BTreeMap<u32, BTreeSet<PoNode>> = BTreeMap::new();
    for (course, (first, last)) in path.course_spans() {
        by_semester.entry(first).or_default().insert(PoNode::start(course));
        by_semester.entry(last).or_default().insert(PoNode::end(course));
    }
    let levels = by_semester
        .into_iter()
        .map(|(semester, nodes)| Level { semester, nodes })
        .collect();
    LevelledPartialOrder::from_levels(levels)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DfgNode {
    Start,
    Activity(String),
    End,
}

impl fmt::Display for DfgNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DfgNode::Start => f.write_str("▶"),
            DfgNode::Activity(a) => f.write_str(a),
            DfgNode::End => f.write_str("■"),
        }
    }
}

/// Directly-follows graph with artificial start and end nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dfg {
    pub activities: BTreeSet<String>,
    pub edges: BTreeMap<(DfgNode, DfgNode), usize>,
}

impl Dfg {
    pub fn from_sequences<I, S, A>(traces: I) -> Dfg
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[A]>,
        A: AsRef<str>,
    {
        let mut dfg = Dfg::default();
        for trace in traces {
            let trace = trace.as_ref();
            if trace.is_empty() {
                continue;
            }
            let mut prev = DfgNode::Start;
            for a in trace {
                let a = a.as_ref().to_string();
                dfg.activities.insert(a.clone());
                let next = DfgNode::Activity(a);
                *dfg.edges.entry((prev, next.clone())).or_default() += 1;
                prev = next;
            }
            *dfg.edges.entry((prev, DfgNode::End)).or_default() += 1;
        }
        dfg
    }

    pub fn count(&self, from: &DfgNode, to: &DfgNode) -> usize {
        self.edges.get(&(from.clone(), to.clone())).copied().unwrap_or(0)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfg {\n  rankdir=LR;\n");
        out.push_str("  \"__start\" [label=\"start\", shape=circle];\n");
        out.push_str("  \"__end\" [label=\"end\", shape=doublecircle];\n");
        for a in &self.activities {
            writeln!(out, "  {} [shape=box];", dot_id(a)).unwrap();
        }
        let id = |n: &DfgNode| match n {
            DfgNode::Start => "\"__start\"".to_string(),
            DfgNode::End => "\"__end\"".to_string(),
            DfgNode::Activity(a) => dot_id(a),
        };
        for ((u, v), count) in &self.edges {
            writeln!(out, "  {} -> {} [label=\"{count}\"];", id(u), id(v)).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Directly-follows graph over the traces of `log`.
pub fn discover_dfg(log: &EventLog) -> Dfg {
    let traces = log.traces();
    Dfg::from_sequences(traces.iter().map(|t| t.activities()))
}

pub(crate) fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}
