//! C API over the study-rules pipeline.
//!
//! Objects cross the boundary as opaque handles. Each handle is created by a
//! constructor that writes it to an out-parameter and is released with the
//! matching `*_free` function. Every fallible call returns an [`SrStatus`];
//! after a failure [`sr_last_error`] describes the cause. Strings written to
//! out-parameters belong to the caller and are released with
//! [`sr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use study_rules::evaluation::CvOptions;
use study_rules::pipeline::{prepare, Prepared};
use study_rules::rules::{render_rule, Relevancy};
use study_rules::synth::generate;
use study_rules::{DecisionTree, ErrorClass, EventLog, FeatureSelection, Hyperparams, RuleSet, RunConfig, Schema};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid settings: unknown feature family, malformed label, bad hyperparameters.
    ConfigError = 3,
    /// Malformed or unusable input data.
    DataError = 4,
    ComputationError = 5,
    /// A bug inside the library; the handles involved must not be reused.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrHyperparams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl From<SrHyperparams> for Hyperparams {
    fn from(h: SrHyperparams) -> Self {
        Hyperparams {
            max_depth: h.max_depth,
            min_samples_leaf: h.min_samples_leaf,
            min_samples_split: h.min_samples_split,
        }
    }
}

/// A parsed or generated event log.
pub struct SrLog(EventLog);

/// Feature matrix and labels of the students a label is defined for.
pub struct SrDataset(Prepared);

pub struct SrTree(DecisionTree);

/// Rules in ranking order.
pub struct SrRuleSet(RuleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    Lib(study_rules::Error),
}

impl From<study_rules::Error> for Fail {
    fn from(e: study_rules::Error) -> Self {
        Fail::Lib(e)
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("{name} is null"));
            SrStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(name))) => {
            set_error(format!("{name} is not valid UTF-8"));
            SrStatus::InvalidUtf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            match e.class() {
                ErrorClass::Config => SrStatus::ConfigError,
                ErrorClass::Data => SrStatus::DataError,
                ErrorClass::Computation => SrStatus::ComputationError,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            SrStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s.replace('\0', " ")).expect("no interior nul");
    put(out, c.into_raw(), "out")
}

unsafe fn put_boxed<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn sr_hyperparams_default() -> SrHyperparams {
    let h = Hyperparams::default();
    SrHyperparams {
        max_depth: h.max_depth,
        min_samples_leaf: h.min_samples_leaf,
        min_samples_split: h.min_samples_split,
    }
}

/// Parses CSV event-log text with the default column names.
///
/// # Safety
/// `csv` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_log_parse_csv(csv: *const c_char, delimiter: c_char, out: *mut *mut SrLog) -> SrStatus {
    guard(|| {
        let csv = text(csv, "csv")?;
        let log = EventLog::parse_str(csv, &Schema::default().with_delimiter(delimiter as u8))?;
        put_boxed(out, SrLog(log))
    })
}

/// Generates a synthetic log from `key = value` settings (`n_students`,
/// `seed`, `target`, `planted`, ...). NULL or empty text uses the defaults.
///
/// # Safety
/// `config` must be NULL or a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_log_synthesize(config: *const c_char, out: *mut *mut SrLog) -> SrStatus {
    guard(|| {
        let cfg = if config.is_null() {
            RunConfig::default()
        } else {
            RunConfig::parse(text(config, "config")?)?
        };
        put_boxed(out, SrLog(generate(&cfg.synth)?))
    })
}

/// # Safety
/// `log` must be a live log handle; `events` and `students` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_log_counts(log: *const SrLog, events: *mut usize, students: *mut usize) -> SrStatus {
    guard(|| {
        let log = &handle(log, "log")?.0;
        put(events, log.len(), "events")?;
        put(students, log.students().len(), "students")
    })
}

/// Writes the log as CSV in the format [`sr_log_parse_csv`] reads.
///
/// # Safety
/// `log` must be a live log handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_log_to_csv(log: *const SrLog, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let csv = handle(log, "log")?.0.to_csv_string()?;
        put_string(out, csv)
    })
}

/// # Safety
/// `log` must be NULL or a handle that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn sr_log_free(log: *mut SrLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Builds the feature matrix and labels. `features` is a comma-separated
/// selection such as `"a-cs,a-pl-s"`; `label` is `gpa:2`, `gpa:4` or
/// `course:<id>:<semester>`.
///
/// # Safety
/// `log` must be a live log handle, the strings nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_prepare(
    log: *const SrLog,
    features: *const c_char,
    label: *const c_char,
    out: *mut *mut SrDataset,
) -> SrStatus {
    guard(|| {
        let log = &handle(log, "log")?.0;
        let selection = FeatureSelection::parse_list(text(features, "features")?)?;
        let label = text(label, "label")?.parse()?;
        put_boxed(out, SrDataset(prepare(log, &selection, &label)?))
    })
}

/// # Safety
/// `dataset` must be a live dataset handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_shape(dataset: *const SrDataset, rows: *mut usize, cols: *mut usize) -> SrStatus {
    guard(|| {
        let m = &handle(dataset, "dataset")?.0.matrix;
        put(rows, m.n_rows(), "rows")?;
        put(cols, m.n_cols(), "cols")
    })
}

/// # Safety
/// `dataset` must be NULL or a handle that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_free(dataset: *mut SrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_fit(dataset: *const SrDataset, params: SrHyperparams, out: *mut *mut SrTree) -> SrStatus {
    guard(|| {
        let tree = handle(dataset, "dataset")?.0.fit(&params.into())?;
        put_boxed(out, SrTree(tree))
    })
}

/// # Safety
/// `tree` must be a live tree handle; `depth` and `leaves` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_shape(tree: *const SrTree, depth: *mut usize, leaves: *mut usize) -> SrStatus {
    guard(|| {
        let tree = &handle(tree, "tree")?.0;
        put(depth, tree.depth(), "depth")?;
        put(leaves, tree.leaf_count(), "leaves")
    })
}

/// # Safety
/// `tree` must be a live tree handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_to_json(tree: *const SrTree, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let json = handle(tree, "tree")?.0.to_json()?;
        put_string(out, json)
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_from_json(json: *const c_char, out: *mut *mut SrTree) -> SrStatus {
    guard(|| {
        let tree = DecisionTree::from_json(text(json, "json")?)?;
        put_boxed(out, SrTree(tree))
    })
}

/// # Safety
/// `tree` must be a live tree handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_to_dot(tree: *const SrTree, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let dot = handle(tree, "tree")?.0.to_dot();
        put_string(out, dot)
    })
}

/// # Safety
/// `tree` must be NULL or a handle that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn sr_tree_free(tree: *mut SrTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Reads one rule per leaf, with support counted on `dataset`. `relevancy`
/// is `product`, `harmonic`, `fblend:<beta>`, or NULL for `product`.
///
/// # Safety
/// `tree` and `dataset` must be live handles, `relevancy` NULL or
/// nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sr_rules_extract(
    tree: *const SrTree,
    dataset: *const SrDataset,
    relevancy: *const c_char,
    out: *mut *mut SrRuleSet,
) -> SrStatus {
    guard(|| {
        let tree = &handle(tree, "tree")?.0;
        let data = &handle(dataset, "dataset")?.0;
        let strategy: Relevancy = if relevancy.is_null() {
            Relevancy::default()
        } else {
            text(relevancy, "relevancy")?.parse()?
        };
        put_boxed(out, SrRuleSet(data.rules(tree, strategy)?))
    })
}

/// # Safety
/// `rules` must be a live rule-set handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_rules_count(rules: *const SrRuleSet, out: *mut usize) -> SrStatus {
    guard(|| put(out, handle(rules, "rules")?.0.len(), "out"))
}

fn rule_at(rules: &RuleSet, index: usize) -> Result<&study_rules::Rule, Fail> {
    rules.rules.get(index).ok_or_else(|| {
        Fail::Lib(study_rules::Error::Lookup {
            kind: "rule index",
            name: format!("{index} (rule set has {} rules)", rules.len()),
        })
    })
}

/// Renders the rule at rank `index` (0 is the most relevant) as
/// `IF ... THEN ...` text.
///
/// # Safety
/// `rules` must be a live rule-set handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_rules_render(rules: *const SrRuleSet, index: usize, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let rule = rule_at(&handle(rules, "rules")?.0, index)?;
        put_string(out, render_rule(&rule.statement))
    })
}

/// # Safety
/// `rules` must be a live rule-set handle; the out-parameters must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_rules_stats(
    rules: *const SrRuleSet,
    index: usize,
    support: *mut usize,
    confidence: *mut f64,
    relevancy: *mut f64,
) -> SrStatus {
    guard(|| {
        let rule = rule_at(&handle(rules, "rules")?.0, index)?;
        put(support, rule.support, "support")?;
        put(confidence, rule.confidence, "confidence")?;
        put(relevancy, rule.relevancy, "relevancy")
    })
}

/// # Safety
/// `rules` must be NULL or a handle that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn sr_rules_free(rules: *mut SrRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Stratified k-fold cross-validation. Writes the mean accuracy and the
/// `mean ± sd` percentage table; `report` may be NULL.
///
/// # Safety
/// `dataset` must be a live handle; `mean_accuracy` writable; `report` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sr_cross_validate(
    dataset: *const SrDataset,
    params: SrHyperparams,
    k: usize,
    seed: u64,
    mean_accuracy: *mut f64,
    report: *mut *mut c_char,
) -> SrStatus {
    guard(|| {
        let data = &handle(dataset, "dataset")?.0;
        let opts = CvOptions {
            k,
            seed,
            stratified: true,
        };
        let r = data.cross_validate(&params.into(), &opts)?;
        put(mean_accuracy, r.accuracy.mean, "mean_accuracy")?;
        if !report.is_null() {
            put_string(report, r.to_table(&data.labels.target))?;
        }
        Ok(())
    })
}
