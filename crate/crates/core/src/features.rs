//! Order-related descriptive features and cohort-wide feature matrices.
//!
//! Six families are supported, each in an atomic variant (every exam attempt
//! is its own event) and a non-atomic variant (a course's life cycle from
//! first to last attempt). Feature names render to canonical strings such as
//! `a-cs-course-1-3`, `na-cs-e-course-1-3`, `a-df-s-course-1-1->course-3-2`
//! or `na-pl-course-1-start->course-3-end`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::StudyPath;
use crate::order_graph::{
    build_lifecycle_partial_order, build_partial_order, semester_indices, IndexKind, Lifecycle,
    LevelledPartialOrder, PoNode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    CourseSemester,
    CourseOrder,
    CourseDistance,
    PathLength,
    DirectlyFollows,
    EventuallyFollows,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::CourseSemester,
        Family::CourseOrder,
        Family::CourseDistance,
        Family::PathLength,
        Family::DirectlyFollows,
        Family::EventuallyFollows,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::CourseSemester => "cs",
            Family::CourseOrder => "co",
            Family::CourseDistance => "cd",
            Family::PathLength => "pl",
            Family::DirectlyFollows => "df",
            Family::EventuallyFollows => "ef",
        }
    }

    pub fn from_code(code: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.code() == code)
    }

    /// Placement families locate one course; the others relate two nodes of a partial order.
    pub fn is_placement(self) -> bool {
        self.placement_index().is_some()
    }

    fn placement_index(self) -> Option<IndexKind> {
        match self {
            Family::CourseSemester => Some(IndexKind::Semester),
            Family::CourseOrder => Some(IndexKind::Order),
            Family::CourseDistance => Some(IndexKind::Distance),
            _ => None,
        }
    }

    /// Value a student gets for a feature they do not exhibit.
    pub fn default_value(self) -> i32 {
        match self {
            Family::PathLength => -1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atomicity {
    Atomic,
    NonAtomic,
}

impl Atomicity {
    fn prefix(self) -> &'static str {
        match self {
            Atomicity::Atomic => "a",
            Atomicity::NonAtomic => "na",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Start,
    End,
}

/// Structured feature name. Construct through the associated functions, which
/// keep the field combination consistent with the family.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureName {
    pub family: Family,
    pub atomicity: Atomicity,
    pub index_kind: Option<IndexKind>,
    pub endpoint: Option<Endpoint>,
    pub subject: PoNode,
    pub object: Option<PoNode>,
}

impl FeatureName {
    pub fn placement(family: Family, course: &str, index: u32) -> Self {
        assert!(family.is_placement());
        FeatureName {
            family,
            atomicity: Atomicity::Atomic,
            index_kind: None,
            endpoint: None,
            subject: PoNode::atomic(course, index),
            object: None,
        }
    }

    pub fn lifecycle_placement(family: Family, endpoint: Endpoint, course: &str, index: u32) -> Self {
        assert!(family.is_placement());
        FeatureName {
            family,
            atomicity: Atomicity::NonAtomic,
            index_kind: None,
            endpoint: Some(endpoint),
            subject: PoNode::atomic(course, index),
            object: None,
        }
    }

    pub fn relation(family: Family, kind: Option<IndexKind>, from: PoNode, to: PoNode) -> Self {
        assert!(!family.is_placement());
        let atomicity = if kind.is_some() {
            Atomicity::Atomic
        } else {
            Atomicity::NonAtomic
        };
        FeatureName {
            family,
            atomicity,
            index_kind: kind,
            endpoint: None,
            subject: from,
            object: Some(to),
        }
    }

    /// The `(course, semester)` cell of an atomic or non-atomic course-semester feature.
    pub fn course_semester(&self) -> Option<(&str, u32)> {
        (self.family == Family::CourseSemester).then_some((self.subject.course.as_str(), self.subject.index))
    }

    /// Canonical prefix including the trailing dash, e.g. `a-cs-` or `na-pl-`.
    pub fn prefix(&self) -> String {
        let mut p = format!("{}-{}-", self.atomicity.prefix(), self.family.code());
        if let Some(k) = self.index_kind {
            p.push(k.letter());
            p.push('-');
        }
        if let Some(e) = self.endpoint {
            p.push_str(match e {
                Endpoint::Start => "s-",
                Endpoint::End => "e-",
            });
        }
        p
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.prefix(), self.subject)?;
        if let Some(o) = &self.object {
            write!(f, "->{o}")?;
        }
        Ok(())
    }
}

impl PartialOrd for FeatureName {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureName {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl FromStr for FeatureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("feature name", s);
        let (atomicity, rest) = if let Some(r) = s.strip_prefix("na-") {
            (Atomicity::NonAtomic, r)
        } else if let Some(r) = s.strip_prefix("a-") {
            (Atomicity::Atomic, r)
        } else {
            return Err(bad());
        };
        let (code, rest) = rest.split_once('-').ok_or_else(bad)?;
        let family = Family::from_code(code).ok_or_else(bad)?;

        if family.is_placement() {
            let (endpoint, rest) = match atomicity {
                Atomicity::Atomic => (None, rest),
                Atomicity::NonAtomic => {
                    let (e, r) = rest.split_once('-').ok_or_else(bad)?;
                    let e = match e {
                        "s" => Endpoint::Start,
                        "e" => Endpoint::End,
                        _ => return Err(bad()),
                    };
                    (Some(e), r)
                }
            };
            let node = PoNode::parse(rest)?;
            if node.lifecycle != Lifecycle::Atomic || rest.contains("->") {
                return Err(bad());
            }
            return Ok(match endpoint {
                None => FeatureName::placement(family, &node.course, node.index),
                Some(e) => FeatureName::lifecycle_placement(family, e, &node.course, node.index),
            });
        }

        let (kind, rest) = match atomicity {
            Atomicity::Atomic => {
                let (k, r) = rest.split_once('-').ok_or_else(bad)?;
                let mut chars = k.chars();
                let kind = match (chars.next(), chars.next()) {
                    (Some(c), None) => IndexKind::from_letter(c).ok_or_else(bad)?,
                    _ => return Err(bad()),
                };
                (Some(kind), r)
            }
            Atomicity::NonAtomic => (None, rest),
        };
        let (from, to) = rest.split_once("->").ok_or_else(bad)?;
        let (from, to) = (PoNode::parse(from)?, PoNode::parse(to)?);
        let atomic_nodes = |n: &PoNode| (n.lifecycle == Lifecycle::Atomic) == kind.is_some();
        if !atomic_nodes(&from) || !atomic_nodes(&to) || to.course.contains("->") {
            return Err(bad());
        }
        Ok(FeatureName::relation(family, kind, from, to))
    }
}

impl Serialize for FeatureName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One `(family, atomicity, index kind)` triple of a feature configuration.
///
/// Renders like the feature prefix it selects: `a-cs`, `na-co`, `a-pl-s`, `na-df`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureSelection {
    pub family: Family,
    pub atomicity: Atomicity,
    pub index_kind: Option<IndexKind>,
}

impl FeatureSelection {
    pub fn new(family: Family, atomicity: Atomicity, index_kind: Option<IndexKind>) -> Result<Self> {
        let needs_kind = !family.is_placement() && atomicity == Atomicity::Atomic;
        if needs_kind != index_kind.is_some() {
            return Err(Error::Config(format!(
                "{}-{}: {}",
                atomicity.prefix(),
                family.code(),
                if needs_kind {
                    "atomic relation features need an index kind (s, o or d)"
                } else {
                    "this family takes no index kind"
                }
            )));
        }
        Ok(FeatureSelection {
            family,
            atomicity,
            index_kind,
        })
    }

    /// Every valid selection: 3 placement families × 2, plus relation families × (3 atomic + 1 non-atomic).
    pub fn all() -> Vec<FeatureSelection> {
        let mut out = Vec::new();
        for family in Family::ALL {
            for atomicity in [Atomicity::Atomic, Atomicity::NonAtomic] {
                if family.is_placement() || atomicity == Atomicity::NonAtomic {
                    out.push(FeatureSelection::new(family, atomicity, None).unwrap());
                } else {
                    for k in IndexKind::ALL {
                        out.push(FeatureSelection::new(family, atomicity, Some(k)).unwrap());
                    }
                }
            }
        }
        out
    }

    pub fn parse_list(s: &str) -> Result<Vec<FeatureSelection>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for FeatureSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.atomicity.prefix(), self.family.code())?;
        if let Some(k) = self.index_kind {
            write!(f, "-{}", k.letter())?;
        }
        Ok(())
    }
}

impl FromStr for FeatureSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown feature selection {s:?}"));
        let parts: Vec<&str> = s.split('-').collect();
        let atomicity = match parts.first() {
            Some(&"a") => Atomicity::Atomic,
            Some(&"na") => Atomicity::NonAtomic,
            _ => return Err(bad()),
        };
        let family = parts.get(1).and_then(|c| Family::from_code(c)).ok_or_else(bad)?;
        let kind = match parts.get(2) {
            None => None,
            Some(k) if k.len() == 1 => Some(IndexKind::from_letter(k.chars().next().unwrap()).ok_or_else(bad)?),
            Some(_) => return Err(bad()),
        };
        if parts.len() > 3 {
            return Err(bad());
        }
        FeatureSelection::new(family, atomicity, kind)
    }
}

pub type FeatureValues = Vec<(FeatureName, i32)>;

fn placement_features(path: &StudyPath, family: Family, atomicity: Atomicity) -> FeatureValues {
    let kind = family.placement_index().expect("placement family");
    let idx = semester_indices(path, kind);
    let names: BTreeSet<FeatureName> = match atomicity {
        Atomicity::Atomic => path
            .placements()
            .map(|(s, c)| FeatureName::placement(family, c, idx[&s]))
            .collect(),
        Atomicity::NonAtomic => path
            .course_spans()
            .into_iter()
            .flat_map(|(c, (first, last))| {
                [
                    FeatureName::lifecycle_placement(family, Endpoint::Start, c, idx[&first]),
                    FeatureName::lifecycle_placement(family, Endpoint::End, c, idx[&last]),
                ]
            })
            .collect(),
    };
    names.into_iter().map(|n| (n, 1)).collect()
}

fn relation_features(po: &LevelledPartialOrder, family: Family, kind: Option<IndexKind>) -> FeatureValues {
    let name = |u: &PoNode, v: &PoNode| FeatureName::relation(family, kind, u.clone(), v.clone());
    match family {
        Family::DirectlyFollows => po.edges.iter().map(|(u, v)| (name(u, v), 1)).collect(),
        Family::EventuallyFollows | Family::PathLength => {
            let mut out = Vec::new();
            for (i, lu) in po.levels.iter().enumerate() {
                for (j, lv) in po.levels.iter().enumerate().skip(i) {
                    if family == Family::EventuallyFollows && j == i {
                        continue;
                    }
                    for u in &lu.nodes {
                        for v in lv.nodes.iter().filter(|v| *v != u) {
                            let value = match family {
                                Family::PathLength => (j - i) as i32,
                                _ => 1,
                            };
                            out.push((name(u, v), value));
                        }
                    }
                }
            }
            out
        }
        _ => unreachable!("placement family"),
    }
}

/// Features of one family for one student. Binary families list only true features.
pub fn extract(path: &StudyPath, selection: FeatureSelection) -> FeatureValues {
    if selection.family.is_placement() {
        return placement_features(path, selection.family, selection.atomicity);
    }
    let po = match selection.index_kind {
        Some(kind) => build_partial_order(path, kind),
        None => build_lifecycle_partial_order(path),
    };
    relation_features(&po, selection.family, selection.index_kind)
}

fn placement_selection(family: Family, atomicity: Atomicity) -> FeatureSelection {
    FeatureSelection::new(family, atomicity, None).unwrap()
}

fn relation_selection(family: Family, atomicity: Atomicity, kind: IndexKind) -> FeatureSelection {
    let kind = (atomicity == Atomicity::Atomic).then_some(kind);
    FeatureSelection::new(family, atomicity, kind).unwrap()
}

pub fn extract_course_semester(path: &StudyPath, atomicity: Atomicity) -> FeatureValues {
    extract(path, placement_selection(Family::CourseSemester, atomicity))
}

pub fn extract_course_order(path: &StudyPath, atomicity: Atomicity) -> FeatureValues {
    extract(path, placement_selection(Family::CourseOrder, atomicity))
}

pub fn extract_course_distance(path: &StudyPath, atomicity: Atomicity) -> FeatureValues {
    extract(path, placement_selection(Family::CourseDistance, atomicity))
}

/// `kind` is ignored for non-atomic features, which use the life-cycle partial order.
pub fn extract_path_length(path: &StudyPath, atomicity: Atomicity, kind: IndexKind) -> FeatureValues {
    extract(path, relation_selection(Family::PathLength, atomicity, kind))
}

pub fn extract_directly_follows(path: &StudyPath, atomicity: Atomicity, kind: IndexKind) -> FeatureValues {
    extract(path, relation_selection(Family::DirectlyFollows, atomicity, kind))
}

pub fn extract_eventually_follows(path: &StudyPath, atomicity: Atomicity, kind: IndexKind) -> FeatureValues {
    extract(path, relation_selection(Family::EventuallyFollows, atomicity, kind))
}

/// Students × features. Columns are sorted by canonical name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub students: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<i32>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.students.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    pub fn value(&self, student: &str, feature: &str) -> Option<i32> {
        let row = self.students.iter().position(|s| s == student)?;
        Some(self.values[row][self.column_index(feature)?])
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, students: &[String]) -> Result<FeatureMatrix> {
        let pos: HashMap<&str, usize> = self.students.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let values = students
            .iter()
            .map(|s| {
                pos.get(s.as_str())
                    .map(|&i| self.values[i].clone())
                    .ok_or_else(|| Error::Lookup {
                        kind: "student",
                        name: s.clone(),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            students: students.to_vec(),
            columns: self.columns.clone(),
            values,
        })
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(std::iter::once("student_id").chain(self.columns.iter().map(String::as_str)))?;
        for (s, row) in self.students.iter().zip(&self.values) {
            w.write_record(std::iter::once(s.clone()).chain(row.iter().map(i32::to_string)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(source);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("student_id") {
            return Err(Error::MissingColumn("student_id".into()));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        if columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parse("matrix header (columns must be sorted and unique)", headers.as_slice()));
        }
        let mut students = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::row(i + 1, e.to_string()))?;
            students.push(rec[0].to_string());
            values.push(
                rec.iter()
                    .skip(1)
                    .map(|v| v.parse::<i32>().map_err(|_| Error::row(i + 1, format!("not an integer: {v:?}"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(FeatureMatrix {
            students,
            columns,
            values,
        })
    }
}

/// Builds the cohort matrix over the union of features the students exhibit.
pub fn assemble_matrix(cohort: &[StudyPath], selection: &[FeatureSelection]) -> Result<FeatureMatrix> {
    if selection.is_empty() {
        return Err(Error::Config("no feature family selected".into()));
    }
    if cohort.is_empty() {
        return Err(Error::EmptyCohort("no study paths to extract features from".into()));
    }
    let per_student: Vec<BTreeMap<String, i32>> = cohort
        .par_iter()
        .map(|path| {
            selection
                .iter()
                .flat_map(|&sel| extract(path, sel))
                .map(|(n, v)| (n.to_string(), v))
                .collect()
        })
        .collect();

    let mut defaults: BTreeMap<&str, i32> = BTreeMap::new();
    for row in &per_student {
        for name in row.keys() {
            defaults.entry(name).or_insert_with(|| {
                let family = name.parse::<FeatureName>().map(|n| n.family).unwrap_or(Family::CourseSemester);
                family.default_value()
            });
        }
    }
    let columns: Vec<String> = defaults.keys().map(|s| s.to_string()).collect();
    let default_row: Vec<i32> = defaults.values().copied().collect();
    let index: HashMap<&str, usize> = columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let values = per_student
        .iter()
        .map(|feats| {
            let mut row = default_row.clone();
            for (name, &v) in feats {
                row[index[name.as_str()]] = v;
            }
            row
        })
        .collect();

    Ok(FeatureMatrix {
        students: cohort.iter().map(|p| p.student_id.clone()).collect(),
        columns,
        values,
    })
}
