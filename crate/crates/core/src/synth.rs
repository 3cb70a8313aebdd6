//! Seeded generator for synthetic exam-attempt logs with planted
//! placement → grade dependencies.
//!
//! Each course has a home semester (its recommended semester, or the semester
//! a planted rule puts it in). A student takes it there with probability
//! `adherence`, one semester earlier or later otherwise, and retakes failed
//! attempts in the following occupied semester. Students belong to one of
//! several intake cohorts; later cohorts are observed for fewer semesters,
//! and students may drop out after any semester.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{Event, EventLog, FinalStatus, Grade};
use crate::labels::{GRADE_BAD, GRADE_GOOD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    /// `(course, semester)` placements that must all hold.
    pub antecedent: Vec<(String, u32)>,
    /// Class of the target attempt for students satisfying the antecedent.
    pub consequent: String,
    pub noise_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_students: usize,
    pub n_courses: usize,
    /// Regular study length; home semesters fall within it.
    pub semesters_span: u32,
    pub cohorts: u32,
    pub fail_rate: f64,
    pub gap_probability: f64,
    /// Chance of leaving the programme after each semester.
    pub dropout_rate: f64,
    pub adherence: f64,
    pub max_attempts: u32,
    /// Course attempt whose grade the planted rules control.
    pub target: Option<(String, u32)>,
    pub planted_rules: Vec<PlantedRule>,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_students: 140,
            n_courses: 18,
            semesters_span: 6,
            cohorts: 6,
            fail_rate: 0.15,
            gap_probability: 0.05,
            dropout_rate: DROPOUT,
            adherence: 0.75,
            max_attempts: 3,
            target: None,
            planted_rules: Vec::new(),
            seed: 0,
        }
    }
}

pub fn course_id(i: usize) -> String {
    format!("course-{}", i + 1)
}

// Tuned with six intake cohorts so that 140 students yield about 1075 attempts.
const DROPOUT: f64 = 0.22;

const CREDITS: [u32; 6] = [6, 8, 5, 9, 6, 7];

impl CohortSpec {
    pub fn courses(&self) -> Vec<String> {
        (0..self.n_courses).map(course_id).collect()
    }

    /// Recommended semester of the `i`-th course: courses are spread evenly over the span.
    pub fn recommended_semester(&self, i: usize) -> u32 {
        1 + (i as u64 * u64::from(self.semesters_span) / self.n_courses.max(1) as u64) as u32
    }

    pub fn recommended_plan(&self) -> BTreeMap<String, u32> {
        (0..self.n_courses).map(|i| (course_id(i), self.recommended_semester(i))).collect()
    }

    /// Semesters observed for members of intake cohort `c`; one intake per semester.
    fn observed_semesters(&self, c: u32) -> u32 {
        self.semesters_span.saturating_sub(c).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Unsatisfiable(m));
        for (name, p) in [
            ("fail_rate", self.fail_rate),
            ("gap_probability", self.gap_probability),
            ("dropout_rate", self.dropout_rate),
            ("adherence", self.adherence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.n_courses == 0 || self.semesters_span == 0 || self.cohorts == 0 || self.max_attempts == 0 {
            return bad("n_courses, semesters_span, cohorts and max_attempts must be positive".into());
        }
        let courses: BTreeSet<String> = self.courses().into_iter().collect();
        let max_sem = self.semesters_span + 2;
        let mut homes: BTreeMap<&str, u32> = BTreeMap::new();
        if let Some((course, sem)) = &self.target {
            if !courses.contains(course) || *sem == 0 || *sem > max_sem {
                return bad(format!("target {course} in semester {sem} is outside the catalogue"));
            }
            homes.insert(course, *sem);
        }
        if !self.planted_rules.is_empty() && self.target.is_none() {
            return bad("planted rules need a target course".into());
        }
        for rule in &self.planted_rules {
            if !(0.0..=1.0).contains(&rule.noise_rate) {
                return bad(format!("noise_rate = {} is not a probability", rule.noise_rate));
            }
            if rule.consequent != GRADE_GOOD && rule.consequent != GRADE_BAD {
                return bad(format!("consequent {:?} is not a course-grade class", rule.consequent));
            }
            for (course, sem) in &rule.antecedent {
                if !courses.contains(course) || *sem == 0 || *sem > max_sem {
                    return bad(format!("placement {course} in semester {sem} is outside the catalogue"));
                }
                match homes.get(course.as_str()) {
                    Some(&h) if h != *sem => {
                        return bad(format!("{course} is placed in both semester {h} and {sem}"));
                    }
                    _ => {
                        homes.insert(course, *sem);
                    }
                }
            }
        }
        Ok(())
    }

    fn home_semesters(&self) -> Vec<u32> {
        let mut homes: Vec<u32> = (0..self.n_courses).map(|i| self.recommended_semester(i)).collect();
        let index = |c: &str| self.courses().iter().position(|k| k == c).expect("validated course");
        if let Some((c, s)) = &self.target {
            homes[index(c)] = *s;
        }
        for rule in &self.planted_rules {
            for (c, s) in &rule.antecedent {
                homes[index(c)] = *s;
            }
        }
        homes
    }
}

fn exam_date(rng: &mut ChaCha8Rng, cohort: u32, semester: u32) -> NaiveDate {
    let term = semester - 1;
    let intake = 2018 + cohort as i32;
    let (year, month) = if term.is_multiple_of(2) {
        (intake + (term / 2) as i32 + 1, 2)
    } else {
        (intake + term.div_ceil(2) as i32, 7)
    };
    NaiveDate::from_ymd_opt(year, month, rng.gen_range(1..=28)).expect("valid date")
}

fn passing_grade(rng: &mut ChaCha8Rng, class: Option<&str>) -> Grade {
    let pool: Vec<Grade> = Grade::all()
        .filter(|g| g.is_passing())
        .filter(|g| match class {
            Some(c) if c == GRADE_GOOD => g.value() <= 2.5,
            Some(_) => g.value() > 2.5,
            None => true,
        })
        .collect();
    pool[rng.gen_range(0..pool.len())]
}

fn complement(class: &str) -> &'static str {
    if class == GRADE_GOOD {
        GRADE_BAD
    } else {
        GRADE_GOOD
    }
}

/// Generates the log. Identical specs give identical logs.
pub fn generate(spec: &CohortSpec) -> Result<EventLog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let courses = spec.courses();
    let homes = spec.home_semesters();
    let target_idx = spec
        .target
        .as_ref()
        .map(|(c, s)| (courses.iter().position(|k| k == c).unwrap(), *s));
    let mut events = Vec::new();

    for student in 0..spec.n_students {
        let student_id = format!("student-{:05}", student + 1);
        let cohort = student as u32 % spec.cohorts;
        let observed = spec.observed_semesters(cohort);
        let gender = if rng.gen_bool(0.5) { "gender-1" } else { "gender-2" };
        let nationality = if rng.gen_bool(0.8) { "country-1" } else { "other" };
        let mut observed = observed;
        for s in 1..observed {
            if rng.gen_bool(spec.dropout_rate) {
                observed = s;
                break;
            }
        }

        // slot -> semester, skipping gap semesters
        let mut sem_of_slot = vec![0u32; (spec.semesters_span + spec.max_attempts + 6) as usize];
        let mut sem = 0;
        for (slot, s) in sem_of_slot.iter_mut().enumerate().skip(1) {
            sem += 1;
            if slot > 1 && rng.gen_bool(spec.gap_probability) {
                sem += 1;
            }
            *s = sem;
        }

        let mut first_slot = Vec::with_capacity(courses.len());
        for &home in &homes {
            let slot = if rng.gen_bool(spec.adherence) {
                home
            } else if home > 1 && rng.gen_bool(0.5) {
                home - 1
            } else {
                home + 1
            };
            first_slot.push(slot);
        }
        let first_sem: BTreeMap<&str, u32> = courses
            .iter()
            .zip(&first_slot)
            .map(|(c, &slot)| (c.as_str(), sem_of_slot[slot as usize]))
            .collect();

        let target_class = target_idx.map(|_| {
            let satisfied = spec
                .planted_rules
                .iter()
                .find(|r| r.antecedent.iter().all(|(c, s)| first_sem[c.as_str()] == *s));
            match (satisfied, spec.planted_rules.first()) {
                (Some(r), _) => {
                    if rng.gen_bool(1.0 - r.noise_rate) {
                        r.consequent.as_str()
                    } else {
                        complement(&r.consequent)
                    }
                }
                (None, Some(r)) => {
                    if rng.gen_bool(1.0 - r.noise_rate) {
                        complement(&r.consequent)
                    } else {
                        r.consequent.as_str()
                    }
                }
                (None, None) => {
                    if rng.gen_bool(0.5) {
                        GRADE_GOOD
                    } else {
                        GRADE_BAD
                    }
                }
            }
        });

        for (i, course) in courses.iter().enumerate() {
            let first = first_slot[i] as usize;
            for &semester in sem_of_slot.iter().skip(first).take(spec.max_attempts as usize) {
                if semester > observed {
                    break;
                }
                let class = match (target_idx, target_class) {
                    (Some((t, ts)), Some(class)) if t == i && ts == semester => Some(class),
                    _ => None,
                };
                let failed = match class {
                    Some(c) if c == GRADE_GOOD => false,
                    _ => rng.gen_bool(spec.fail_rate),
                };
                let grade = if failed { Grade::FAIL } else { passing_grade(&mut rng, class) };
                let start = exam_date(&mut rng, cohort, semester).and_time(NaiveTime::MIN);
                let end = start + Duration::days(rng.gen_range(14..=42));
                events.push(Event {
                    student_id: student_id.clone(),
                    course_id: course.clone(),
                    credit: CREDITS[i % CREDITS.len()],
                    time_start: start,
                    time_end: end,
                    semester,
                    grade: Some(grade),
                    final_status: if failed { FinalStatus::Failed } else { FinalStatus::Passed },
                    gender: gender.into(),
                    nationality: nationality.into(),
                    study_time: f64::from(observed) / 2.0,
                });
                if !failed {
                    break;
                }
            }
        }
    }
    Ok(EventLog::new(events))
}
