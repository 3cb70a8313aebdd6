//! Exam-attempt event data: parsing, validation, filtering and grouping into
//! per-student traces and semester-keyed study paths.
//!
//! Each row of the input is one exam attempt. The student id plays the role
//! of the case identifier, the course id is the activity, and the exam date
//! is the timestamp.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grades on the German step scale, stored in tenths (`13` is `1.3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Grade(u8);

impl Grade {
    pub const SCALE: [u8; 11] = [10, 13, 17, 20, 23, 27, 30, 33, 37, 40, 50];
    pub const FAIL: Grade = Grade(50);

    pub fn from_tenths(tenths: u8) -> Option<Self> {
        Self::SCALE.contains(&tenths).then_some(Grade(tenths))
    }

    pub fn from_f64(value: f64) -> Option<Self> {
        let tenths = (value * 10.0).round();
        if (value * 10.0 - tenths).abs() > 1e-6 || !(0.0..=255.0).contains(&tenths) {
            return None;
        }
        Self::from_tenths(tenths as u8)
    }

    pub fn all() -> impl Iterator<Item = Grade> {
        Self::SCALE.iter().map(|&t| Grade(t))
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    pub fn is_passing(self) -> bool {
        self.0 <= 40
    }
}

impl TryFrom<f64> for Grade {
    type Error = String;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Grade::from_f64(value).ok_or_else(|| format!("{value} is not on the grade scale"))
    }
}

impl From<Grade> for f64 {
    fn from(g: Grade) -> f64 {
        g.value()
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FinalStatus {
    #[serde(rename = "PASSED")]
    Passed,
    #[serde(rename = "FAILED")]
    Failed,
}

impl FromStr for FinalStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PASSED" => Ok(FinalStatus::Passed),
            "FAILED" => Ok(FinalStatus::Failed),
            _ => Err(Error::parse("final status", s)),
        }
    }
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FinalStatus::Passed => "PASSED",
            FinalStatus::Failed => "FAILED",
        })
    }
}

/// One exam attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub student_id: String,
    pub course_id: String,
    pub credit: u32,
    pub time_start: NaiveDateTime,
    pub time_end: NaiveDateTime,
    pub semester: u32,
    pub grade: Option<Grade>,
    pub final_status: FinalStatus,
    pub gender: String,
    pub nationality: String,
    pub study_time: f64,
}

impl Event {
    /// Checks the per-event invariants. The error message describes the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.student_id.is_empty() {
            return Err("empty student id".into());
        }
        if self.course_id.is_empty() {
            return Err("empty course id".into());
        }
        if self.time_start > self.time_end {
            return Err(format!(
                "time-start {} is after time-end {}",
                self.time_start, self.time_end
            ));
        }
        if self.semester == 0 {
            return Err("semester must be at least 1".into());
        }
        if !(self.study_time >= 0.0 && self.study_time.is_finite()) {
            return Err(format!("study time {} is negative", self.study_time));
        }
        match (self.final_status, self.grade) {
            (FinalStatus::Passed, Some(g)) if !g.is_passing() => {
                Err(format!("PASSED attempt with failing grade {g}"))
            }
            (FinalStatus::Failed, Some(g)) if g != Grade::FAIL => {
                Err(format!("FAILED attempt with grade {g}"))
            }
            _ => Ok(()),
        }
    }
}

/// Event fields addressable through a [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    StudentId,
    CourseId,
    Credit,
    TimeStart,
    TimeEnd,
    Semester,
    Grade,
    FinalStatus,
    Gender,
    Nationality,
    StudyTime,
}

impl Field {
    pub const ALL: [Field; 11] = [
        Field::StudentId,
        Field::CourseId,
        Field::Credit,
        Field::TimeStart,
        Field::TimeEnd,
        Field::Semester,
        Field::Grade,
        Field::FinalStatus,
        Field::Gender,
        Field::Nationality,
        Field::StudyTime,
    ];

    pub fn default_header(self) -> &'static str {
        match self {
            Field::StudentId => "student-id",
            Field::CourseId => "course-id",
            Field::Credit => "credit",
            Field::TimeStart => "time-start",
            Field::TimeEnd => "time-end",
            Field::Semester => "semester",
            Field::Grade => "grade",
            Field::FinalStatus => "final-status",
            Field::Gender => "gender",
            Field::Nationality => "nationality",
            Field::StudyTime => "study-time",
        }
    }

    /// Case id, activity and timestamp must always be present; the rest default.
    pub fn is_mandatory(self) -> bool {
        matches!(self, Field::StudentId | Field::CourseId | Field::TimeStart)
    }

    pub fn from_header(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.default_header() == name)
    }
}

/// Maps input header names onto event fields.
#[derive(Debug, Clone)]
pub struct Schema {
    pub delimiter: u8,
    columns: BTreeMap<Field, String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            delimiter: b',',
            columns: Field::ALL
                .into_iter()
                .map(|f| (f, f.default_header().to_string()))
                .collect(),
        }
    }
}

impl Schema {
    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    /// Reads `field` from the column named `header` instead of the default name.
    pub fn remap(mut self, field: Field, header: impl Into<String>) -> Self {
        self.columns.insert(field, header.into());
        self
    }

    pub fn header_for(&self, field: Field) -> &str {
        &self.columns[&field]
    }
}

/// A multiset of events in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d.and_time(NaiveTime::MIN));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

fn format_timestamp(ts: &NaiveDateTime) -> String {
    if ts.time() == NaiveTime::MIN {
        ts.format("%Y-%m-%d").to_string()
    } else {
        ts.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

impl EventLog {
    pub fn new(events: Vec<Event>) -> Self {
        EventLog { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn students(&self) -> BTreeSet<&str> {
        self.events.iter().map(|e| e.student_id.as_str()).collect()
    }

    pub fn courses(&self) -> BTreeSet<&str> {
        self.events.iter().map(|e| e.course_id.as_str()).collect()
    }

    /// Parses delimiter-separated text with a header row.
    ///
    /// Rows are numbered from 1, counting data rows only. Grade cells that do
    /// not hold a number (pass/fail courses) yield an absent grade; numbers
    /// off the grade scale are row errors.
    pub fn parse<R: Read>(source: R, schema: &Schema) -> Result<EventLog> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(schema.delimiter)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(source);

        let headers = match reader.headers() {
            Ok(h) => h.clone(),
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(_) => return Err(Error::EmptyLog),
        };
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::EmptyLog);
        }
        let mut index: HashMap<Field, usize> = HashMap::new();
        for field in Field::ALL {
            let name = schema.header_for(field);
            match headers.iter().position(|h| h == name) {
                Some(i) => {
                    index.insert(field, i);
                }
                None if field.is_mandatory() => return Err(Error::MissingColumn(name.into())),
                None => {}
            }
        }

        let mut events = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::row(row, e.to_string()))?;
            let cell = |f: Field| index.get(&f).map(|&i| record.get(i).unwrap_or(""));
            events.push(parse_row(row, &cell)?);
        }
        if events.is_empty() {
            return Err(Error::EmptyLog);
        }
        Ok(EventLog { events })
    }

    pub fn parse_str(text: &str, schema: &Schema) -> Result<EventLog> {
        Self::parse(text.as_bytes(), schema)
    }

    /// Writes every field under the default header names, comma separated.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(Field::ALL.iter().map(|f| f.default_header()))?;
        for e in &self.events {
            w.write_record([
                e.student_id.clone(),
                e.course_id.clone(),
                e.credit.to_string(),
                format_timestamp(&e.time_start),
                format_timestamp(&e.time_end),
                e.semester.to_string(),
                e.grade.map(|g| g.to_string()).unwrap_or_default(),
                e.final_status.to_string(),
                e.gender.clone(),
                e.nationality.clone(),
                e.study_time.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Keeps only events whose course is in `allowed`.
    pub fn filter_courses<S: AsRef<str>>(&self, allowed: &BTreeSet<S>) -> EventLog {
        let allowed: BTreeSet<&str> = allowed.iter().map(|s| s.as_ref()).collect();
        EventLog {
            events: self
                .events
                .iter()
                .filter(|e| allowed.contains(e.course_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// One trace per student, sorted by student id.
    pub fn traces(&self) -> Vec<Trace> {
        let mut by_student: BTreeMap<&str, Vec<Event>> = BTreeMap::new();
        for e in &self.events {
            by_student.entry(&e.student_id).or_default().push(e.clone());
        }
        by_student
            .into_iter()
            .map(|(id, events)| Trace::new(id.to_string(), events))
            .collect()
    }

    /// Plot data for a dotted chart: one row per event.
    pub fn dotted_chart(&self) -> Vec<DottedChartRow> {
        let mut rows: Vec<DottedChartRow> = self
            .events
            .iter()
            .map(|e| DottedChartRow {
                student_id: e.student_id.clone(),
                time_start: e.time_start,
                course_id: e.course_id.clone(),
            })
            .collect();
        rows.sort_by(|a, b| {
            (&a.student_id, a.time_start, &a.course_id).cmp(&(&b.student_id, b.time_start, &b.course_id))
        });
        rows
    }
}

fn parse_row<'a>(row: usize, cell: &dyn Fn(Field) -> Option<&'a str>) -> Result<Event> {
    let text = |f: Field| cell(f).unwrap_or("").to_string();
    let number = |f: Field, default: u32| -> Result<u32> {
        match cell(f) {
            None => Ok(default),
            Some(raw) => raw.parse::<u32>().map_err(|_| {
                Error::row(row, format!("{} is not a non-negative integer: {raw:?}", f.default_header()))
            }),
        }
    };
    let time = |f: Field| -> Result<Option<NaiveDateTime>> {
        match cell(f) {
            None => Ok(None),
            Some(raw) => parse_timestamp(raw)
                .map(Some)
                .ok_or_else(|| Error::row(row, format!("{} is not an ISO-8601 date: {raw:?}", f.default_header()))),
        }
    };

    let time_start = time(Field::TimeStart)?.expect("time-start is mandatory");
    let time_end = time(Field::TimeEnd)?.unwrap_or(time_start);
    let grade = match cell(Field::Grade) {
        None => None,
        Some(raw) => match raw.parse::<f64>() {
            Ok(v) => Some(
                Grade::from_f64(v)
                    .ok_or_else(|| Error::row(row, format!("grade {raw} is not on the grade scale")))?,
            ),
            Err(_) => None,
        },
    };
    let final_status = match cell(Field::FinalStatus) {
        None => FinalStatus::Passed,
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::row(row, format!("final-status must be PASSED or FAILED, got {raw:?}")))?,
    };
    let study_time = match cell(Field::StudyTime) {
        None | Some("") => 0.0,
        Some(raw) => raw
            .parse::<f64>()
            .map_err(|_| Error::row(row, format!("study-time is not a number: {raw:?}")))?,
    };

    let event = Event {
        student_id: text(Field::StudentId),
        course_id: text(Field::CourseId),
        credit: number(Field::Credit, 0)?,
        time_start,
        time_end,
        semester: number(Field::Semester, 1)?,
        grade,
        final_status,
        gender: text(Field::Gender),
        nationality: text(Field::Nationality),
        study_time,
    };
    event.validate().map_err(|m| Error::row(row, m))?;
    Ok(event)
}

/// A student's attempts ordered by semester, then exam date, then course id.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub student_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(student_id: String, mut events: Vec<Event>) -> Self {
        debug_assert!(events.iter().all(|e| e.student_id == student_id));
        events.sort_by(|a, b| {
            (a.semester, a.time_start, &a.course_id).cmp(&(b.semester, b.time_start, &b.course_id))
        });
        Trace { student_id, events }
    }

    pub fn activities(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.course_id.as_str()).collect()
    }

    pub fn study_path(&self) -> StudyPath {
        let mut semesters: BTreeMap<u32, Vec<Attempt>> = BTreeMap::new();
        for e in &self.events {
            semesters.entry(e.semester).or_default().push(Attempt {
                course_id: e.course_id.clone(),
                grade: e.grade,
                final_status: e.final_status,
            });
        }
        StudyPath {
            student_id: self.student_id.clone(),
            semesters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub course_id: String,
    pub grade: Option<Grade>,
    pub final_status: FinalStatus,
}

/// Attempts grouped by semester. Semesters without attempts are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyPath {
    pub student_id: String,
    pub semesters: BTreeMap<u32, Vec<Attempt>>,
}

impl StudyPath {
    /// Builds a path from bare `(course, semester)` placements; all attempts count as passed.
    pub fn from_placements<S: AsRef<str>>(student_id: &str, placements: &[(S, u32)]) -> Self {
        let mut semesters: BTreeMap<u32, Vec<Attempt>> = BTreeMap::new();
        for (course, sem) in placements {
            semesters.entry(*sem).or_default().push(Attempt {
                course_id: course.as_ref().to_string(),
                grade: None,
                final_status: FinalStatus::Passed,
            });
        }
        StudyPath {
            student_id: student_id.to_string(),
            semesters,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.semesters.is_empty()
    }

    pub fn attempt_count(&self) -> usize {
        self.semesters.values().map(Vec::len).sum()
    }

    pub fn first_semester(&self) -> Option<u32> {
        self.semesters.keys().next().copied()
    }

    /// `(semester, course)` pairs in semester order.
    pub fn placements(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        self.semesters
            .iter()
            .flat_map(|(&s, atts)| atts.iter().map(move |a| (s, a.course_id.as_str())))
    }

    /// First and last semester in which each course was attempted.
    pub fn course_spans(&self) -> BTreeMap<&str, (u32, u32)> {
        let mut spans: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for (s, c) in self.placements() {
            spans
                .entry(c)
                .and_modify(|span| {
                    span.0 = span.0.min(s);
                    span.1 = span.1.max(s);
                })
                .or_insert((s, s));
        }
        spans
    }

    /// Shifts every semester by `offset`; used to check shift invariance.
    pub fn shifted(&self, offset: u32) -> StudyPath {
        StudyPath {
            student_id: self.student_id.clone(),
            semesters: self
                .semesters
                .iter()
                .map(|(s, a)| (s + offset, a.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DottedChartRow {
    pub student_id: String,
    pub time_start: NaiveDateTime,
    pub course_id: String,
}

pub fn write_dotted_chart<W: Write>(rows: &[DottedChartRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["student_id", "time_start", "course_id"])?;
    for r in rows {
        w.write_record([r.student_id.as_str(), &format_timestamp(&r.time_start), r.course_id.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
