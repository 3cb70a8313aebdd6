//! Academic-performance labels: overall GPA and single course grades, binned
//! into ordered classes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{FinalStatus, Trace};

/// Class boundaries are inclusive on the better (lower) side.
pub const EXCELLENT_MAX: f64 = 1.5;
pub const GOOD_MAX: f64 = 2.5;
pub const SATISFACTORY_MAX: f64 = 3.5;
pub const SUFFICIENT_MAX: f64 = 4.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Binning {
    TwoLevel,
    FourLevel,
}

/// GPA classes ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GpaClass {
    Excellent,
    Good,
    Satisfactory,
    Sufficient,
}

impl GpaClass {
    pub fn name(self) -> &'static str {
        match self {
            GpaClass::Excellent => "excellent",
            GpaClass::Good => "good",
            GpaClass::Satisfactory => "satisfactory",
            GpaClass::Sufficient => "sufficient",
        }
    }

    /// Two-level class this four-level class collapses into.
    pub fn coarsen(self) -> GpaClass {
        match self {
            GpaClass::Excellent | GpaClass::Good => GpaClass::Good,
            GpaClass::Satisfactory | GpaClass::Sufficient => GpaClass::Satisfactory,
        }
    }
}

impl fmt::Display for GpaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn bin_gpa(value: f64, binning: Binning) -> Result<GpaClass> {
    if !(1.0 - EPS..=SUFFICIENT_MAX + EPS).contains(&value) {
        return Err(Error::OutOfRange {
            value,
            range: "GPA range [1.0, 4.0]",
        });
    }
    let four = if value <= EXCELLENT_MAX + EPS {
        GpaClass::Excellent
    } else if value <= GOOD_MAX + EPS {
        GpaClass::Good
    } else if value <= SATISFACTORY_MAX + EPS {
        GpaClass::Satisfactory
    } else {
        GpaClass::Sufficient
    };
    Ok(match binning {
        Binning::FourLevel => four,
        Binning::TwoLevel => four.coarsen(),
    })
}

/// Course-grade classes, rendered as they appear in rule consequents.
pub const GRADE_GOOD: &str = "≤ 2.5";
pub const GRADE_BAD: &str = "> 2.5";

pub fn bin_course_grade(grade: f64) -> &'static str {
    if grade <= GOOD_MAX + EPS {
        GRADE_GOOD
    } else {
        GRADE_BAD
    }
}

/// Credit-weighted mean of each course's final passed grade.
pub fn compute_overall_gpa(trace: &Trace) -> Result<f64> {
    let mut final_grade: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for e in &trace.events {
        if let (FinalStatus::Passed, Some(g)) = (e.final_status, e.grade) {
            final_grade.insert(&e.course_id, (g.value(), e.credit));
        }
    }
    let undefined = |reason: &str| Error::UndefinedLabel {
        student: trace.student_id.clone(),
        reason: reason.into(),
    };
    if final_grade.is_empty() {
        return Err(undefined("no graded passed course"));
    }
    let credits: u64 = final_grade.values().map(|&(_, c)| u64::from(c)).sum();
    if credits == 0 {
        return Err(undefined("graded courses carry no credits"));
    }
    let weighted: f64 = final_grade.values().map(|&(g, c)| g * f64::from(c)).sum();
    Ok(weighted / credits as f64)
}

/// How a failed (5.0) attempt counts in a course-grade task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FailedAttempts {
    #[default]
    AsBadGrade,
    Exclude,
}

/// Grade of the attempt of `course` in `semester` (the last one if there are several).
pub fn course_grade(trace: &Trace, course: &str, semester: u32, failed: FailedAttempts) -> Result<f64> {
    let attempt = trace
        .events
        .iter()
        .rev()
        .filter(|e| e.course_id == course && e.semester == semester)
        .find_map(|e| e.grade.map(|g| (g, e.final_status)));
    match attempt {
        Some((_, FinalStatus::Failed)) if failed == FailedAttempts::Exclude => Err(Error::UndefinedLabel {
            student: trace.student_id.clone(),
            reason: format!("failed attempt of {course} in semester {semester} excluded"),
        }),
        Some((g, _)) => Ok(g.value()),
        None => Err(Error::UndefinedLabel {
            student: trace.student_id.clone(),
            reason: format!("no graded attempt of {course} in semester {semester}"),
        }),
    }
}

pub fn course_grade_label(trace: &Trace, course: &str, semester: u32, failed: FailedAttempts) -> Result<&'static str> {
    course_grade(trace, course, semester, failed).map(bin_course_grade)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    OverallGpa,
    CourseGrade { course: String, semester: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSpec {
    pub kind: LabelKind,
    pub binning: Binning,
    #[serde(default)]
    pub failed: FailedAttempts,
}

impl LabelSpec {
    pub fn overall_gpa(binning: Binning) -> Self {
        LabelSpec {
            kind: LabelKind::OverallGpa,
            binning,
            failed: FailedAttempts::default(),
        }
    }

    pub fn course_grade(course: impl Into<String>, semester: u32) -> Self {
        LabelSpec {
            kind: LabelKind::CourseGrade {
                course: course.into(),
                semester,
            },
            binning: Binning::TwoLevel,
            failed: FailedAttempts::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.kind, self.binning) {
            (LabelKind::CourseGrade { .. }, Binning::FourLevel) => {
                Err(Error::Config("course-grade labels support two-level binning only".into()))
            }
            (LabelKind::CourseGrade { semester: 0, .. }, _) => Err(Error::Config("label semester must be ≥ 1".into())),
            _ => Ok(()),
        }
    }

    /// Name of the predicted quantity, e.g. `course-1-2` or `GPA`.
    pub fn target(&self) -> String {
        match &self.kind {
            LabelKind::OverallGpa => "GPA".into(),
            LabelKind::CourseGrade { course, semester } => format!("{course}-{semester}"),
        }
    }

    /// Classes in order from best to worst.
    pub fn classes(&self) -> Vec<String> {
        match (&self.kind, self.binning) {
            (LabelKind::CourseGrade { .. }, _) => vec![GRADE_GOOD.into(), GRADE_BAD.into()],
            (LabelKind::OverallGpa, Binning::TwoLevel) => vec!["good".into(), "satisfactory".into()],
            (LabelKind::OverallGpa, Binning::FourLevel) => {
                ["excellent", "good", "satisfactory", "sufficient"].map(String::from).to_vec()
            }
        }
    }

    fn label(&self, trace: &Trace) -> Result<(f64, String)> {
        match &self.kind {
            LabelKind::OverallGpa => {
                let gpa = compute_overall_gpa(trace)?;
                Ok((gpa, bin_gpa(gpa, self.binning)?.name().to_string()))
            }
            LabelKind::CourseGrade { course, semester } => {
                let g = course_grade(trace, course, *semester, self.failed)?;
                Ok((g, bin_course_grade(g).to_string()))
            }
        }
    }
}

/// `gpa:2`, `gpa:4`, or `course:<course-id>:<semester>`; a trailing
/// `:exclude-failed` drops failed attempts from a course-grade task.
impl FromStr for LabelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown label spec {s:?} (expected gpa:2, gpa:4 or course:<id>:<semester>)"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["gpa", "2"] => LabelSpec::overall_gpa(Binning::TwoLevel),
            ["gpa", "4"] => LabelSpec::overall_gpa(Binning::FourLevel),
            ["course", course, sem] | ["course", course, sem, "exclude-failed"] if !course.is_empty() => {
                let mut spec = LabelSpec::course_grade(*course, sem.parse().map_err(|_| bad())?);
                if parts.len() == 4 {
                    spec.failed = FailedAttempts::Exclude;
                }
                spec
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for LabelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.binning) {
            (LabelKind::OverallGpa, Binning::TwoLevel) => f.write_str("gpa:2"),
            (LabelKind::OverallGpa, Binning::FourLevel) => f.write_str("gpa:4"),
            (LabelKind::CourseGrade { course, semester }, _) => {
                write!(f, "course:{course}:{semester}")?;
                if self.failed == FailedAttempts::Exclude {
                    f.write_str(":exclude-failed")?;
                }
                Ok(())
            }
        }
    }
}

/// Labels of the students that take part in a task, in cohort order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    pub target: String,
    pub students: Vec<String>,
    pub raw: Vec<f64>,
    pub classes: Vec<String>,
}

impl LabelVector {
    pub fn len(&self) -> usize {
        self.students.len()
    }

    pub fn is_empty(&self) -> bool {
        self.students.is_empty()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["student_id", "raw_value", "class"])?;
        for ((s, v), c) in self.students.iter().zip(&self.raw).zip(&self.classes) {
            w.write_record([s.as_str(), &v.to_string(), c.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Students for which the label is defined; the others are skipped.
pub fn select_cohort(traces: &[Trace], spec: &LabelSpec) -> Result<LabelVector> {
    spec.validate()?;
    let mut out = LabelVector {
        target: spec.target(),
        students: Vec::new(),
        raw: Vec::new(),
        classes: Vec::new(),
    };
    for t in traces {
        match spec.label(t) {
            Ok((raw, class)) => {
                out.students.push(t.student_id.clone());
                out.raw.push(raw);
                out.classes.push(class);
            }
            Err(Error::UndefinedLabel { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCohort(format!("no student has a defined {spec} label")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{EventLog, Schema};

    fn trace(rows: &str) -> Trace {
        let text = format!("student-id,course-id,credit,time-start,semester,grade,final-status\n{rows}");
        EventLog::parse_str(&text, &Schema::default()).unwrap().traces().remove(0)
    }

    #[test]
    fn gpa_symmetric_weights() {
        let t = trace("s,a,6,2019-02-01,1,1.0,PASSED\ns,b,6,2019-02-02,1,3.0,PASSED\n");
        assert_eq!(compute_overall_gpa(&t).unwrap(), 2.0);
    }

    #[test]
    fn gpa_weighted() {
        let t = trace("s,a,9,2019-02-01,1,1.0,PASSED\ns,b,3,2019-02-02,1,4.0,PASSED\n");
        assert!((compute_overall_gpa(&t).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn gpa_uses_final_passed_grade() {
        let t = trace("s,a,6,2019-02-01,1,5.0,FAILED\ns,a,6,2019-07-01,2,2.3,PASSED\n");
        assert!((compute_overall_gpa(&t).unwrap() - 2.3).abs() < 1e-12);
    }

    #[test]
    fn gpa_undefined_without_grades() {
        let t = trace("s,a,6,2019-02-01,1,,PASSED\n");
        assert!(matches!(compute_overall_gpa(&t), Err(Error::UndefinedLabel { .. })));
        assert!(matches!(
            select_cohort(&[t], &LabelSpec::overall_gpa(Binning::TwoLevel)),
            Err(Error::EmptyCohort(_))
        ));
    }

    #[test]
    fn gpa_bins() {
        assert_eq!(bin_gpa(1.5, Binning::FourLevel).unwrap(), GpaClass::Excellent);
        assert_eq!(bin_gpa(2.5, Binning::TwoLevel).unwrap(), GpaClass::Good);
        assert_eq!(bin_gpa(2.51, Binning::TwoLevel).unwrap(), GpaClass::Satisfactory);
        assert_eq!(bin_gpa(4.0, Binning::FourLevel).unwrap(), GpaClass::Sufficient);
        assert!(bin_gpa(0.9, Binning::FourLevel).is_err());
        assert!(bin_gpa(4.1, Binning::TwoLevel).is_err());
    }

    #[test]
    fn course_grade_classes() {
        let t = trace("s,a,6,2019-02-01,1,5.0,FAILED\ns,a,6,2019-07-01,2,2.3,PASSED\n");
        assert_eq!(course_grade_label(&t, "a", 2, FailedAttempts::AsBadGrade).unwrap(), GRADE_GOOD);
        assert_eq!(course_grade_label(&t, "a", 1, FailedAttempts::AsBadGrade).unwrap(), GRADE_BAD);
        assert!(course_grade_label(&t, "a", 1, FailedAttempts::Exclude).is_err());
        assert!(course_grade_label(&t, "a", 3, FailedAttempts::AsBadGrade).is_err());
        assert_eq!(bin_course_grade(2.5), GRADE_GOOD);
    }

    #[test]
    fn cohort_for_course_task() {
        let text = "student-id,course-id,credit,time-start,semester,grade,final-status\n\
                    s1,c,6,2019-02-01,2,2.0,PASSED\n\
                    s2,c,6,2019-02-01,2,3.0,PASSED\n\
                    s3,c,6,2019-02-01,1,2.0,PASSED\n\
                    s4,d,6,2019-02-01,2,2.0,PASSED\n\
                    s5,c,6,2019-02-01,2,1.0,PASSED\n";
        let traces = EventLog::parse_str(text, &Schema::default()).unwrap().traces();
        let labels = select_cohort(&traces, &LabelSpec::course_grade("c", 2)).unwrap();
        assert_eq!(labels.students, vec!["s1", "s2", "s5"]);
        assert_eq!(labels.target, "c-2");
    }

    #[test]
    fn spec_strings() {
        for s in ["gpa:2", "gpa:4", "course:course-1:2", "course:x:4:exclude-failed"] {
            assert_eq!(s.parse::<LabelSpec>().unwrap().to_string(), s);
        }
        assert!("gpa:3".parse::<LabelSpec>().is_err());
        let mut four = LabelSpec::course_grade("c", 2);
        four.binning = Binning::FourLevel;
        assert!(four.validate().is_err());
    }
}
