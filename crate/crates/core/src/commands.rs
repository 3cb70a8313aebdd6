//! The subcommands behind the `study-rules` binary. Each reads a validated
//! [`RunConfig`], writes its files under `out`, and returns a short summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::decision_tree::DecisionTree;
use crate::error::{Error, Result};
use crate::evaluation::CvOptions;
use crate::event_log::{write_dotted_chart, EventLog, FinalStatus, Schema};
use crate::order_graph::{build_lifecycle_partial_order, build_partial_order, discover_dfg, IndexKind};
use crate::pipeline::{prepare, Prepared};
use crate::rules::{compare_to_plan, read_plan, render_rule_with, write_plan_checks};
use crate::synth::generate;

pub const TREE_FILE: &str = "tree.json";

/// A fitted tree together with the digest of the inputs it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedTree {
    pub config_digest: String,
    pub tree: DecisionTree,
}

fn existing(path: &Path, key: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key}: file {} does not exist", path.display())))
    }
}

pub fn load_log(cfg: &RunConfig) -> Result<EventLog> {
    let input = cfg.input()?;
    existing(input, "input")?;
    let log = EventLog::parse(File::open(input)?, &Schema::default().with_delimiter(cfg.delimiter))?;
    let log = match &cfg.courses {
        Some(courses) => log.filter_courses(courses),
        None => log,
    };
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log)
}

fn create_out(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    write_file(dir, name, |w| Ok(w.write_all(text.as_bytes())?))
}

/// Hash of everything that determines the training data and the fitted tree.
pub fn config_digest(cfg: &RunConfig) -> Result<String> {
    let input = cfg.input()?;
    existing(input, "input")?;
    let mut h = Sha256::new();
    h.update(fs::read(input)?);
    let features: Vec<String> = cfg.features.iter().map(|f| f.to_string()).collect();
    let courses = cfg
        .courses
        .as_ref()
        .map(|c| c.iter().cloned().collect::<Vec<_>>().join(","))
        .unwrap_or_default();
    let hp = cfg.hyperparams;
    let settings = format!(
        "\ndelimiter={}\ncourses={courses}\nfeatures={}\nlabel={}\nhp={},{},{}\n",
        cfg.delimiter,
        features.join(","),
        cfg.label()?,
        hp.max_depth,
        hp.min_samples_leaf,
        hp.min_samples_split
    );
    h.update(settings.as_bytes());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn prepared(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let label = cfg.label()?;
    let log = load_log(cfg)?;
    prepare(&log, &cfg.features, label)
}

pub fn ingest(cfg: &RunConfig) -> Result<String> {
    let log = load_log(cfg)?;
    let failed = log.events.iter().filter(|e| e.final_status == FinalStatus::Failed).count();
    let ungraded = log.events.iter().filter(|e| e.grade.is_none()).count();
    let (lo, hi) = log
        .events
        .iter()
        .fold((u32::MAX, 0), |(lo, hi), e| (lo.min(e.semester), hi.max(e.semester)));
    let mut report = String::new();
    writeln!(report, "events: {}", log.len()).unwrap();
    writeln!(report, "students: {}", log.students().len()).unwrap();
    writeln!(report, "courses: {}", log.courses().len()).unwrap();
    writeln!(report, "semesters: {lo}..{hi}").unwrap();
    writeln!(report, "failed attempts: {failed}").unwrap();
    writeln!(report, "attempts without numeric grade: {ungraded}").unwrap();
    let out = create_out(cfg)?;
    write_text(out, "ingest_report.txt", &report)?;
    Ok(report)
}

pub fn features(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let (matrix, labels) = match &cfg.label {
        Some(_) => {
            let p = prepared(cfg)?;
            (p.matrix, Some(p.labels))
        }
        None => {
            let log = load_log(cfg)?;
            let paths: Vec<_> = log.traces().iter().map(|t| t.study_path()).collect();
            (crate::features::assemble_matrix(&paths, &cfg.features)?, None)
        }
    };
    let out = create_out(cfg)?;
    write_file(out, "matrix.csv", |w| matrix.write_csv(w))?;
    if let Some(labels) = &labels {
        write_file(out, "labels.csv", |w| labels.write_csv(w))?;
    }
    Ok(format!("{} students x {} features\n", matrix.n_rows(), matrix.n_cols()))
}

pub fn train(cfg: &RunConfig) -> Result<String> {
    let p = prepared(cfg)?;
    let tree = p.fit(&cfg.hyperparams)?;
    let trained = TrainedTree {
        config_digest: config_digest(cfg)?,
        tree,
    };
    let out = create_out(cfg)?;
    write_text(out, TREE_FILE, &(serde_json::to_string_pretty(&trained)? + "\n"))?;
    write_text(out, "tree.dot", &trained.tree.to_dot())?;
    Ok(format!(
        "tree of depth {} with {} leaves on {} students\n",
        trained.tree.depth(),
        trained.tree.leaf_count(),
        p.labels.len()
    ))
}

pub fn load_tree(cfg: &RunConfig) -> Result<DecisionTree> {
    let path = cfg.out.join(TREE_FILE);
    if !path.is_file() {
        return Err(Error::Config(format!("{} not found; run train first", path.display())));
    }
    let trained: TrainedTree = serde_json::from_str(&fs::read_to_string(&path)?)?;
    if trained.config_digest != config_digest(cfg)? {
        return Err(Error::Config(format!(
            "{} was trained on different input or settings; run train again",
            path.display()
        )));
    }
    Ok(trained.tree)
}

pub fn rules(cfg: &RunConfig) -> Result<String> {
    let p = prepared(cfg)?;
    let tree = load_tree(cfg)?;
    let mut set = p.rules(&tree, cfg.relevancy)?;
    if let Some(k) = cfg.top_k {
        set.rules.truncate(k);
    }
    let out = create_out(cfg)?;
    let text: String = set
        .rules
        .iter()
        .map(|r| render_rule_with(&r.statement, cfg.strip_prefix) + "\n")
        .collect();
    write_text(out, "rules.txt", &text)?;
    write_file(out, "rules.jsonl", |w| set.write_jsonl(w))?;

    let mut summary = String::new();
    for (i, r) in set.rules.iter().enumerate() {
        writeln!(
            summary,
            "{:>3}. {}  [support {}, confidence {:.3}, relevancy {:.4}]",
            i + 1,
            render_rule_with(&r.statement, cfg.strip_prefix),
            r.support,
            r.confidence,
            r.relevancy
        )
        .unwrap();
    }
    if let Some(plan_path) = &cfg.plan {
        existing(plan_path, "plan")?;
        let plan = read_plan(File::open(plan_path)?)?;
        let checks = set
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((i + 1, compare_to_plan(&r.statement, &plan)?)))
            .collect::<Result<Vec<_>>>()?;
        write_file(out, "plan_comparison.csv", |w| write_plan_checks(&checks, w))?;
    }
    Ok(summary)
}

pub fn evaluate(cfg: &RunConfig) -> Result<String> {
    let p = prepared(cfg)?;
    let opts = CvOptions {
        k: cfg.k,
        seed: cfg.seed,
        stratified: cfg.stratified,
    };
    let report = p.cross_validate(&cfg.hyperparams, &opts)?;
    let table = report.to_table(&cfg.label()?.to_string());
    let out = create_out(cfg)?;
    write_file(out, "report.csv", |w| report.write_csv(w))?;
    write_text(out, "report.txt", &table)?;
    Ok(table)
}

pub fn synth(cfg: &RunConfig) -> Result<String> {
    let log = generate(&cfg.synth)?;
    let out = create_out(cfg)?;
    write_file(out, "events.csv", |w| log.write_csv(w))?;
    let plan = cfg.synth.recommended_plan();
    write_file(out, "plan.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["course_id", "recommended_semester"])?;
        for (course, sem) in &plan {
            c.write_record([course.as_str(), &sem.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    Ok(format!("{} events for {} students\n", log.len(), log.students().len()))
}

pub fn export(cfg: &RunConfig) -> Result<String> {
    let log = load_log(cfg)?;
    let out = create_out(cfg)?;
    write_text(out, "dfg.dot", &discover_dfg(&log).to_dot())?;
    write_file(out, "dotted_chart.csv", |w| write_dotted_chart(&log.dotted_chart(), w))?;

    let traces = log.traces();
    let trace = match &cfg.student {
        Some(id) => traces.iter().find(|t| &t.student_id == id).ok_or_else(|| Error::Lookup {
            kind: "student",
            name: id.clone(),
        })?,
        None => traces.first().ok_or(Error::EmptyLog)?,
    };
    let path = trace.study_path();
    for kind in [IndexKind::Semester, IndexKind::Order, IndexKind::Distance] {
        let po = build_partial_order(&path, kind);
        write_text(out, &format!("partial_order_{}.dot", kind.letter()), &po.to_dot(&trace.student_id))?;
    }
    let lifecycle = build_lifecycle_partial_order(&path);
    write_text(out, "partial_order_lifecycle.dot", &lifecycle.to_dot(&trace.student_id))?;
    Ok(format!(
        "exported the log's directly-follows graph, dotted chart and the partial orders of {}\n",
        trace.student_id
    ))
}
