//! IF/THEN study-planning rules read off decision-tree paths.
//!
//! Every root-to-leaf path becomes one rule, so the rules of a tree are
//! mutually exclusive and jointly cover the feature space. Rules are scored by
//! a relevancy measure that combines confidence with coverage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision_tree::{column_index, DataView, DecisionTree, FeatureSource, NamedRow, Node};
use crate::error::{Error, Result};
use crate::features::{Family, FeatureName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "≤",
            Comparator::Gt => ">",
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Le => value <= threshold,
            Comparator::Gt => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Condition {
    pub fn holds<S: FeatureSource + ?Sized>(&self, row: &S) -> Result<bool> {
        let v = row.get(&self.feature).ok_or_else(|| Error::Lookup {
            kind: "feature",
            name: self.feature.clone(),
        })?;
        Ok(self.comparator.holds(v, self.threshold))
    }
}

/// The textual part of a rule: conditions and consequent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleStatement {
    pub conditions: Vec<Condition>,
    pub target: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(flatten)]
    pub statement: RuleStatement,
    pub support: usize,
    pub correct: usize,
    pub confidence: f64,
    pub relevancy: f64,
}

impl Rule {
    pub fn matches<S: FeatureSource + ?Sized>(&self, row: &S) -> Result<bool> {
        for c in &self.statement.conditions {
            if !c.holds(row)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// How confidence and relative support combine into one score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Relevancy {
    /// `confidence × support / n`
    #[default]
    Product,
    HarmonicMean,
    /// Weighted harmonic blend; `beta > 1` favours coverage.
    FBlend { beta: f64 },
}

impl Relevancy {
    pub fn score(self, confidence: f64, support: usize, n: usize) -> f64 {
        let coverage = if n == 0 { 0.0 } else { support as f64 / n as f64 };
        let blend = |b2: f64| {
            let den = b2 * confidence + coverage;
            if den == 0.0 {
                0.0
            } else {
                (1.0 + b2) * confidence * coverage / den
            }
        };
        match self {
            Relevancy::Product => confidence * coverage,
            Relevancy::HarmonicMean => blend(1.0),
            Relevancy::FBlend { beta } => blend(beta * beta),
        }
    }
}

impl FromStr for Relevancy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "product" => Ok(Relevancy::Product),
            "harmonic" => Ok(Relevancy::HarmonicMean),
            other => other
                .strip_prefix("fblend:")
                .and_then(|b| b.parse::<f64>().ok())
                .filter(|b| *b > 0.0)
                .map(|beta| Relevancy::FBlend { beta })
                .ok_or_else(|| Error::Config(format!("unknown relevancy {s:?} (product, harmonic, fblend:<beta>)"))),
        }
    }
}

/// Score of a rule covering `n` rows in total.
pub fn relevancy(rule: &Rule, n: usize) -> f64 {
    Relevancy::Product.score(rule.confidence, rule.support, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub n: usize,
}

/// Rules in ranking order: relevancy descending, then support descending,
/// then rendered text ascending.
pub fn rank(mut rules: Vec<Rule>) -> Vec<Rule> {
    rules.sort_by(|a, b| {
        b.relevancy
            .total_cmp(&a.relevancy)
            .then(b.support.cmp(&a.support))
            .then_with(|| render_rule(&a.statement).cmp(&render_rule(&b.statement)))
    });
    rules
}

impl RuleSet {
    pub fn top_k(&self, k: usize) -> Result<&[Rule]> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(&self.rules[..k.min(self.rules.len())])
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The one rule whose conditions `row` satisfies.
    pub fn match_rules<S: FeatureSource + ?Sized>(&self, row: &S) -> Result<&Rule> {
        let mut found = None;
        for r in &self.rules {
            if r.matches(row)? {
                if found.is_some() {
                    return Err(Error::Computation("more than one rule matches".into()));
                }
                found = Some(r);
            }
        }
        found.ok_or_else(|| Error::Computation("no rule matches".into()))
    }

    pub fn render(&self) -> String {
        self.rules.iter().map(|r| render_rule(&r.statement) + "\n").collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<()> {
        for r in &self.rules {
            serde_json::to_writer(&mut sink, r)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(source: R) -> Result<RuleSet> {
        let rules: Vec<Rule> = serde_json::Deserializer::from_reader(source)
            .into_iter::<Rule>()
            .collect::<std::result::Result<_, _>>()?;
        let n = rules.iter().map(|r| r.support).sum();
        Ok(RuleSet { rules, n })
    }
}

fn leaf_paths(tree: &DecisionTree) -> Vec<(Vec<Condition>, &Node)> {
    fn walk<'t>(node: &'t Node, path: &mut Vec<Condition>, out: &mut Vec<(Vec<Condition>, &'t Node)>) {
        match node {
            Node::Leaf { .. } => out.push((path.clone(), node)),
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                for (cmp, child) in [(Comparator::Le, left), (Comparator::Gt, right)] {
                    path.push(Condition {
                        feature: feature.clone(),
                        comparator: cmp,
                        threshold: *threshold,
                    });
                    walk(child, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, &mut Vec::new(), &mut out);
    out
}

/// One rule per leaf, with support and confidence recomputed by routing
/// `data` (normally the training rows) through the tree.
pub fn extract_rules<D: DataView + ?Sized>(
    tree: &DecisionTree,
    data: &D,
    labels: &[String],
    target: &str,
    strategy: Relevancy,
) -> Result<RuleSet> {
    if labels.len() != data.n_rows() {
        return Err(Error::Mismatch(format!("{} labels for {} rows", labels.len(), data.n_rows())));
    }
    let leaves = leaf_paths(tree);
    let mut support = vec![0usize; leaves.len()];
    let mut correct = vec![0usize; leaves.len()];
    let index = column_index(data);
    for (row, label) in labels.iter().enumerate() {
        let leaf = tree.route(&NamedRow {
            data,
            row,
            index: &index,
        })?;
        let i = leaves
            .iter()
            .position(|(_, l)| std::ptr::eq(*l, leaf))
            .expect("routing ends in a leaf");
        support[i] += 1;
        if let Node::Leaf { predicted, .. } = leaf {
            if predicted == label {
                correct[i] += 1;
            }
        }
    }
    let n = labels.len();
    let rules = leaves
        .into_iter()
        .enumerate()
        .map(|(i, (conditions, leaf))| {
            let class = match leaf {
                Node::Leaf { predicted, .. } => predicted.clone(),
                Node::Split { .. } => unreachable!(),
            };
            let confidence = if support[i] == 0 {
                0.0
            } else {
                correct[i] as f64 / support[i] as f64
            };
            Rule {
                statement: RuleStatement {
                    conditions,
                    target: target.to_string(),
                    class,
                },
                support: support[i],
                correct: correct[i],
                confidence,
                relevancy: strategy.score(confidence, support[i], n),
            }
        })
        .collect();
    Ok(RuleSet { rules: rank(rules), n })
}

fn format_threshold(t: f64) -> String {
    t.to_string()
}

fn consequent(target: &str, class: &str) -> String {
    if class.starts_with('≤') || class.starts_with('>') || class.starts_with('<') {
        format!("{target} {class}")
    } else {
        format!("{target} = {class}")
    }
}

/// `IF <feat> <cmp> <thr> [AND ...]* THEN <target> <class>`.
pub fn render_rule(rule: &RuleStatement) -> String {
    render_rule_with(rule, false)
}

/// Like [`render_rule`], optionally dropping canonical prefixes such as `a-cs-` from feature names.
pub fn render_rule_with(rule: &RuleStatement, strip_prefix: bool) -> String {
    let conds: Vec<String> = rule
        .conditions
        .iter()
        .map(|c| {
            let name = if strip_prefix {
                c.feature
                    .parse::<FeatureName>()
                    .ok()
                    .and_then(|f| c.feature.strip_prefix(&f.prefix()).map(String::from))
                    .unwrap_or_else(|| c.feature.clone())
            } else {
                c.feature.clone()
            };
            format!("{name} {} {}", c.comparator.symbol(), format_threshold(c.threshold))
        })
        .collect();
    let antecedent = if conds.is_empty() {
        "TRUE".to_string()
    } else {
        conds.join(" AND ")
    };
    format!("IF {antecedent} THEN {}", consequent(&rule.target, &rule.class))
}

/// Inverse of [`render_rule`]. `prefix` is prepended to feature names, to
/// read rules rendered with stripped prefixes.
pub fn parse_rule(text: &str, prefix: Option<&str>) -> Result<RuleStatement> {
    let bad = || Error::parse("rule", text);
    let body = text.trim().strip_prefix("IF ").ok_or_else(bad)?;
    let (antecedent, then) = body.split_once(" THEN ").ok_or_else(bad)?;
    let conditions = if antecedent == "TRUE" {
        Vec::new()
    } else {
        antecedent
            .split(" AND ")
            .map(|c| {
                let mut parts = c.rsplitn(3, ' ');
                let (thr, cmp, feat) = (parts.next(), parts.next(), parts.next());
                let (Some(thr), Some(cmp), Some(feat)) = (thr, cmp, feat) else {
                    return Err(bad());
                };
                let comparator = match cmp {
                    "≤" | "<=" => Comparator::Le,
                    ">" => Comparator::Gt,
                    _ => return Err(bad()),
                };
                Ok(Condition {
                    feature: format!("{}{feat}", prefix.unwrap_or("")),
                    comparator,
                    threshold: thr.parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<_>>()?
    };
    let (target, class) = match then.split_once(" = ") {
        Some((t, c)) => (t, c),
        None => then.split_once(' ').ok_or_else(bad)?,
    };
    Ok(RuleStatement {
        conditions,
        target: target.to_string(),
        class: class.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Aligned,
    Deviating,
    Unconstrained,
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alignment::Aligned => "aligned",
            Alignment::Deviating => "deviating",
            Alignment::Unconstrained => "unconstrained",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCheck {
    pub condition: Condition,
    pub course: String,
    pub semester: u32,
    pub planned: Option<u32>,
    pub status: Alignment,
}

/// Recommended semester per course.
pub type StudyPlan = BTreeMap<String, u32>;

pub fn read_plan<R: Read>(source: R) -> Result<StudyPlan> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = r.headers()?.clone();
    for col in ["course_id", "recommended_semester"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    let ci = headers.iter().position(|h| h == "course_id").unwrap();
    let si = headers.iter().position(|h| h == "recommended_semester").unwrap();
    let mut plan = StudyPlan::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::row(i + 1, e.to_string()))?;
        let sem = rec[si]
            .parse()
            .map_err(|_| Error::row(i + 1, format!("recommended_semester is not a number: {:?}", &rec[si])))?;
        plan.insert(rec[ci].to_string(), sem);
    }
    Ok(plan)
}

/// Checks each condition of a course-semester rule against a recommended plan.
///
/// `course-c-s > 0.5` is aligned when the plan puts `c` in `s`; `<= 0.5`
/// excludes that cell and deviates when the plan puts `c` there. Courses the
/// plan does not mention are unconstrained.
pub fn compare_to_plan(rule: &RuleStatement, plan: &StudyPlan) -> Result<Vec<PlanCheck>> {
    rule.conditions
        .iter()
        .map(|c| {
            let name: FeatureName = c.feature.parse()?;
            if name.family != Family::CourseSemester {
                return Err(Error::UnsupportedComparison(format!(
                    "{} is not a course-semester feature",
                    c.feature
                )));
            }
            let (course, semester) = name.course_semester().expect("course-semester feature");
            let planned = plan.get(course).copied();
            let (at_one, at_zero) = (c.comparator.holds(1.0, c.threshold), c.comparator.holds(0.0, c.threshold));
            let status = match (planned, at_one, at_zero) {
                (Some(p), true, false) if p == semester => Alignment::Aligned,
                (Some(_), true, false) => Alignment::Deviating,
                (Some(p), false, true) if p == semester => Alignment::Deviating,
                (Some(_), false, true) => Alignment::Aligned,
                _ => Alignment::Unconstrained,
            };
            Ok(PlanCheck {
                condition: c.clone(),
                course: course.to_string(),
                semester,
                planned,
                status,
            })
        })
        .collect()
}

pub fn write_plan_checks<W: Write>(checks: &[(usize, Vec<PlanCheck>)], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["rule", "feature", "comparator", "course_id", "semester", "planned_semester", "status"])?;
    for (rank, list) in checks {
        for c in list {
            w.write_record([
                rank.to_string(),
                c.condition.feature.clone(),
                c.condition.comparator.symbol().to_string(),
                c.course.clone(),
                c.semester.to_string(),
                c.planned.map(|p| p.to_string()).unwrap_or_default(),
                c.status.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision_tree::{DenseData, Hyperparams};

    fn cond(feature: &str, comparator: Comparator) -> Condition {
        Condition {
            feature: feature.into(),
            comparator,
            threshold: 0.5,
        }
    }

    #[test]
    fn relevancy_values() {
        assert_eq!(Relevancy::Product.score(1.0, 10, 10), 1.0);
        assert!((Relevancy::Product.score(0.8, 50, 100) - 0.4).abs() < 1e-15);
        assert_eq!(Relevancy::HarmonicMean.score(1.0, 10, 10), 1.0);
        assert_eq!(Relevancy::FBlend { beta: 2.0 }.score(0.0, 0, 10), 0.0);
        assert!("fblend:0".parse::<Relevancy>().is_err());
    }

    #[test]
    fn unconditional_rule() {
        let d = DenseData {
            names: vec!["f".into()],
            rows: vec![vec![1.0]; 3],
        };
        let y = vec!["a".to_string(); 3];
        let t = DecisionTree::fit(&d, &y, &Hyperparams::default()).unwrap();
        let rs = extract_rules(&t, &d, &y, "GPA", Relevancy::Product).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.rules[0].support, 3);
        assert_eq!(render_rule(&rs.rules[0].statement), "IF TRUE THEN GPA = a");
        assert_eq!(rs.match_rules(&BTreeMap::<String, f64>::new()).unwrap(), &rs.rules[0]);
    }

    #[test]
    fn render_table_rule() {
        let st = RuleStatement {
            conditions: vec![cond("a-cs-course-115-2", Comparator::Le)],
            target: "course-1-2".into(),
            class: "> 2.5".into(),
        };
        assert_eq!(render_rule_with(&st, true), "IF course-115-2 ≤ 0.5 THEN course-1-2 > 2.5");
        assert_eq!(parse_rule(&render_rule(&st), None).unwrap(), st);
        assert_eq!(parse_rule(&render_rule_with(&st, true), Some("a-cs-")).unwrap(), st);
    }

    #[test]
    fn ranking_ties() {
        let mk = |support: usize, relevancy: f64, class: &str| Rule {
            statement: RuleStatement {
                conditions: vec![],
                target: "t".into(),
                class: class.into(),
            },
            support,
            correct: support,
            confidence: 1.0,
            relevancy,
        };
        let ranked = rank(vec![mk(1, 0.5, "a"), mk(5, 0.5, "b"), mk(2, 0.9, "c")]);
        let classes: Vec<&str> = ranked.iter().map(|r| r.statement.class.as_str()).collect();
        assert_eq!(classes, vec!["c", "b", "a"]);
        let rs = RuleSet { rules: ranked, n: 8 };
        assert!(rs.top_k(0).is_err());
        assert_eq!(rs.top_k(2).unwrap().len(), 2);
        assert_eq!(rs.top_k(10).unwrap().len(), 3);
    }

    #[test]
    fn plan_comparison() {
        let st = RuleStatement {
            conditions: vec![
                cond("a-cs-course-140-4", Comparator::Gt),
                cond("a-cs-course-115-4", Comparator::Le),
                cond("a-cs-course-9-2", Comparator::Gt),
            ],
            target: "course-131-4".into(),
            class: "≤ 2.5".into(),
        };
        let plan = StudyPlan::from([("course-140".into(), 4), ("course-115".into(), 4)]);
        let checks = compare_to_plan(&st, &plan).unwrap();
        let status: Vec<Alignment> = checks.iter().map(|c| c.status).collect();
        assert_eq!(status, vec![Alignment::Aligned, Alignment::Deviating, Alignment::Unconstrained]);
        assert!(compare_to_plan(&st, &StudyPlan::new())
            .unwrap()
            .iter()
            .all(|c| c.status == Alignment::Unconstrained));
        let bad = RuleStatement {
            conditions: vec![cond("a-co-course-1-1", Comparator::Gt)],
            ..st
        };
        assert!(matches!(compare_to_plan(&bad, &plan), Err(Error::UnsupportedComparison(_))));
    }

    #[test]
    fn plan_csv() {
        let plan = read_plan("course_id,recommended_semester\ncourse-1,2\ncourse-115,3\n".as_bytes()).unwrap();
        assert_eq!(plan["course-115"], 3);
        assert!(read_plan("course,semester\n".as_bytes()).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let rs = RuleSet {
            rules: vec![Rule {
                statement: RuleStatement {
                    conditions: vec![cond("a-cs-x-1", Comparator::Gt)],
                    target: "GPA".into(),
                    class: "good".into(),
                },
                support: 4,
                correct: 3,
                confidence: 0.75,
                relevancy: 0.75,
            }],
            n: 4,
        };
        let mut buf = Vec::new();
        rs.write_jsonl(&mut buf).unwrap();
        assert_eq!(RuleSet::read_jsonl(buf.as_slice()).unwrap(), rs);
    }
}
