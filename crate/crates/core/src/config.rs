//! `key = value` run configuration shared by every subcommand.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! once, except `planted`, which adds one planted rule per line
//! (`planted = course-3:2, course-7:3 => good @ 0.1`). Unknown keys are
//! rejected with the line number.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::decision_tree::Hyperparams;
use crate::error::{Error, Result};
use crate::evaluation::{DEFAULT_K, DEFAULT_SEED};
use crate::features::FeatureSelection;
use crate::labels::{LabelSpec, GRADE_BAD, GRADE_GOOD};
use crate::rules::Relevancy;
use crate::synth::{CohortSpec, PlantedRule};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub delimiter: u8,
    /// Restricts the log to these courses when set.
    pub courses: Option<BTreeSet<String>>,
    pub features: Vec<FeatureSelection>,
    pub label: Option<LabelSpec>,
    pub hyperparams: Hyperparams,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub out: PathBuf,
    pub plan: Option<PathBuf>,
    pub relevancy: Relevancy,
    pub top_k: Option<usize>,
    /// Render rules without the `a-cs-` style family prefix.
    pub strip_prefix: bool,
    /// Student whose partial orders `export` draws; the first student by id otherwise.
    pub student: Option<String>,
    pub synth: CohortSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            delimiter: b',',
            courses: None,
            features: FeatureSelection::parse_list("a-cs").expect("valid default"),
            label: None,
            hyperparams: Hyperparams::default(),
            k: DEFAULT_K,
            seed: DEFAULT_SEED,
            stratified: true,
            out: PathBuf::from("out"),
            plan: None,
            relevancy: Relevancy::Product,
            top_k: None,
            strip_prefix: false,
            student: None,
            synth: CohortSpec::default(),
        }
    }
}

pub const KEYS: [&str; 28] = [
    "input",
    "delimiter",
    "courses",
    "features",
    "label",
    "max_depth",
    "min_samples_leaf",
    "min_samples_split",
    "k",
    "seed",
    "stratified",
    "out",
    "plan",
    "relevancy",
    "top_k",
    "strip_prefix",
    "student",
    "n_students",
    "n_courses",
    "semesters_span",
    "cohorts",
    "fail_rate",
    "gap_probability",
    "dropout_rate",
    "adherence",
    "max_attempts",
    "target",
    "planted",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: {value:?} is not a valid number")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: {value:?} is not a boolean"))),
    }
}

fn parse_placement(key: &str, value: &str) -> Result<(String, u32)> {
    let (course, sem) = value
        .trim()
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("{key}: {value:?} is not <course>:<semester>")))?;
    Ok((course.trim().to_string(), parse_num(key, sem.trim())?))
}

fn parse_class(key: &str, value: &str) -> Result<String> {
    match value {
        "good" => Ok(GRADE_GOOD.into()),
        "bad" => Ok(GRADE_BAD.into()),
        v if v == GRADE_GOOD || v == GRADE_BAD => Ok(v.into()),
        _ => Err(Error::Config(format!("{key}: {value:?} is not good, bad, {GRADE_GOOD:?} or {GRADE_BAD:?}"))),
    }
}

/// `course-3:2, course-7:3 => good` with an optional `@ <noise rate>`.
pub fn parse_planted(value: &str) -> Result<PlantedRule> {
    let (lhs, rhs) = value
        .split_once("=>")
        .ok_or_else(|| Error::Config(format!("planted: {value:?} has no '=>'")))?;
    let (class, noise) = match rhs.split_once('@') {
        Some((c, n)) => (c.trim(), parse_num("planted", n.trim())?),
        None => (rhs.trim(), 0.0),
    };
    let antecedent = lhs
        .split(',')
        .map(|p| parse_placement("planted", p))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlantedRule {
        antecedent,
        consequent: parse_class("planted", class)?,
        noise_rate: noise,
    })
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "delimiter" => {
                self.delimiter = match value {
                    "tab" | "\\t" => b'\t',
                    v if v.len() == 1 && v.is_ascii() => v.as_bytes()[0],
                    _ => return Err(Error::Config(format!("delimiter: {value:?} is not a single ASCII character"))),
                }
            }
            "courses" => {
                let set: BTreeSet<String> = value
                    .split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect();
                if set.is_empty() {
                    return Err(Error::Config("courses: empty course list".into()));
                }
                self.courses = Some(set);
            }
            "features" => self.features = FeatureSelection::parse_list(value)?,
            "label" => self.label = Some(value.parse()?),
            "max_depth" => self.hyperparams.max_depth = parse_num(key, value)?,
            "min_samples_leaf" => self.hyperparams.min_samples_leaf = parse_num(key, value)?,
            "min_samples_split" => self.hyperparams.min_samples_split = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "seed" => {
                self.seed = parse_num(key, value)?;
                self.synth.seed = self.seed;
            }
            "stratified" => self.stratified = parse_bool(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "plan" => self.plan = Some(PathBuf::from(value)),
            "relevancy" => self.relevancy = value.parse()?,
            "top_k" => self.top_k = Some(parse_num(key, value)?),
            "strip_prefix" => self.strip_prefix = parse_bool(key, value)?,
            "student" => self.student = Some(value.to_string()),
            "n_students" => self.synth.n_students = parse_num(key, value)?,
            "n_courses" => self.synth.n_courses = parse_num(key, value)?,
            "semesters_span" => self.synth.semesters_span = parse_num(key, value)?,
            "cohorts" => self.synth.cohorts = parse_num(key, value)?,
            "fail_rate" => self.synth.fail_rate = parse_num(key, value)?,
            "gap_probability" => self.synth.gap_probability = parse_num(key, value)?,
            "dropout_rate" => self.synth.dropout_rate = parse_num(key, value)?,
            "adherence" => self.synth.adherence = parse_num(key, value)?,
            "max_attempts" => self.synth.max_attempts = parse_num(key, value)?,
            "target" => self.synth.target = Some(parse_placement(key, value)?),
            "planted" => {
                let rule = parse_planted(value)?;
                self.synth.planted_rules.push(rule);
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at_line = |e: Error| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                e => e,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            if !KEYS.contains(&key) {
                return Err(at_line(Error::Config(format!("unknown key {key:?}"))));
            }
            if key != "planted" && !seen.insert(key) {
                return Err(at_line(Error::Config(format!("duplicate key {key:?}"))));
            }
            self.set(key, value).map_err(at_line)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Checks what every analysis command needs: an input log and consistent settings.
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k = {} must be at least 2", self.k)));
        }
        if self.features.is_empty() {
            return Err(Error::Config("features: empty selection".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("input: no event log given".into()))
    }

    pub fn label(&self) -> Result<&LabelSpec> {
        self.label
            .as_ref()
            .ok_or_else(|| Error::Config("label: no label given (gpa:2, gpa:4 or course:<id>:<semester>)".into()))
    }
}
