//! Study-planning rule mining from exam-attempt event logs.
//!
//! The pipeline parses an event log ([`event_log`]), builds per-student
//! partial orders ([`order_graph`]), extracts order-related features
//! ([`features`]) and performance labels ([`labels`]), trains a Gini decision
//! tree ([`decision_tree`]) and reads ranked IF/THEN rules off its paths
//! ([`rules`]). [`evaluation`] cross-validates the trees and [`synth`]
//! generates seeded synthetic logs.

pub mod commands;
pub mod config;
pub mod decision_tree;
pub mod error;
pub mod evaluation;
pub mod event_log;
pub mod features;
pub mod labels;
pub mod order_graph;
pub mod pipeline;
pub mod rules;
pub mod synth;

pub use config::RunConfig;
pub use decision_tree::{DecisionTree, Hyperparams};
pub use error::{Error, ErrorClass, Result};
pub use event_log::{Event, EventLog, Schema, StudyPath, Trace};
pub use features::{FeatureMatrix, FeatureName, FeatureSelection};
pub use labels::{LabelSpec, LabelVector};
pub use order_graph::{IndexKind, LevelledPartialOrder, PoNode};
pub use rules::{Rule, RuleSet};
