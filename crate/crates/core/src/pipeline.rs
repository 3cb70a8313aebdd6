//! Log → (feature matrix, labels) → tree → rules, shared by the CLI and the C API.

use crate::decision_tree::{DecisionTree, Hyperparams};
use crate::error::Result;
use crate::evaluation::{cross_validate, CvOptions, MetricsReport};
use crate::event_log::{EventLog, StudyPath};
use crate::features::{assemble_matrix, FeatureMatrix, FeatureSelection};
use crate::labels::{select_cohort, LabelSpec, LabelVector};
use crate::rules::{extract_rules, Relevancy, RuleSet};

/// Matrix rows aligned with the label vector: only students with a defined label.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub matrix: FeatureMatrix,
    pub labels: LabelVector,
}

pub fn prepare(log: &EventLog, selection: &[FeatureSelection], label: &LabelSpec) -> Result<Prepared> {
    let traces = log.traces();
    let labels = select_cohort(&traces, label)?;
    let paths: Vec<StudyPath> = traces
        .iter()
        .filter(|t| labels.students.binary_search(&t.student_id).is_ok())
        .map(|t| t.study_path())
        .collect();
    let matrix = assemble_matrix(&paths, selection)?;
    debug_assert_eq!(matrix.students, labels.students);
    Ok(Prepared { matrix, labels })
}

impl Prepared {
    pub fn fit(&self, hp: &Hyperparams) -> Result<DecisionTree> {
        DecisionTree::fit(&self.matrix, &self.labels.classes, hp)
    }

    pub fn rules(&self, tree: &DecisionTree, relevancy: Relevancy) -> Result<RuleSet> {
        extract_rules(tree, &self.matrix, &self.labels.classes, &self.labels.target, relevancy)
    }

    pub fn cross_validate(&self, hp: &Hyperparams, cv: &CvOptions) -> Result<MetricsReport> {
        cross_validate(&self.matrix, &self.labels.classes, hp, cv)
    }
}
