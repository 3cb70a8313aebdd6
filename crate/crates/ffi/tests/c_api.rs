use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use study_rules_ffi::*;

const CONFIG: &str = "n_students = 300\nseed = 5\ntarget = course-10:4\nplanted = course-4:2, course-7:3 => good @ 0.05\n";

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { sr_string_free(s) };
    out
}

fn last_error() -> String {
    let p = sr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn pipeline_through_handles() {
    unsafe {
        let config = CString::new(CONFIG).unwrap();
        let mut log = ptr::null_mut();
        assert_eq!(sr_log_synthesize(config.as_ptr(), &mut log), SrStatus::Ok);
        let (mut events, mut students) = (0, 0);
        assert_eq!(sr_log_counts(log, &mut events, &mut students), SrStatus::Ok);
        assert!(students <= 300 && students > 250);
        assert!(events > students);

        // the CSV export parses back to the same log
        let mut csv = ptr::null_mut();
        assert_eq!(sr_log_to_csv(log, &mut csv), SrStatus::Ok);
        let csv = CString::new(take(csv)).unwrap();
        let mut reparsed = ptr::null_mut();
        assert_eq!(sr_log_parse_csv(csv.as_ptr(), b',' as _, &mut reparsed), SrStatus::Ok);
        let (mut events2, mut students2) = (0, 0);
        sr_log_counts(reparsed, &mut events2, &mut students2);
        assert_eq!((events2, students2), (events, students));
        sr_log_free(reparsed);

        let features = CString::new("a-cs").unwrap();
        let label = CString::new("course:course-10:4").unwrap();
        let mut data = ptr::null_mut();
        assert_eq!(sr_dataset_prepare(log, features.as_ptr(), label.as_ptr(), &mut data), SrStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        sr_dataset_shape(data, &mut rows, &mut cols);
        assert!(rows > 0 && cols > 0);

        let mut tree = ptr::null_mut();
        assert_eq!(sr_tree_fit(data, sr_hyperparams_default(), &mut tree), SrStatus::Ok);
        let (mut depth, mut leaves) = (0, 0);
        sr_tree_shape(tree, &mut depth, &mut leaves);
        assert!(depth <= 5);

        let mut json = ptr::null_mut();
        assert_eq!(sr_tree_to_json(tree, &mut json), SrStatus::Ok);
        let json = CString::new(take(json)).unwrap();
        let mut copy = ptr::null_mut();
        assert_eq!(sr_tree_from_json(json.as_ptr(), &mut copy), SrStatus::Ok);

        let mut rules = ptr::null_mut();
        assert_eq!(sr_rules_extract(copy, data, ptr::null(), &mut rules), SrStatus::Ok);
        let mut n = 0;
        sr_rules_count(rules, &mut n);
        assert_eq!(n, leaves);
        let mut text = ptr::null_mut();
        assert_eq!(sr_rules_render(rules, 0, &mut text), SrStatus::Ok);
        let top = take(text);
        assert!(top.starts_with("IF ") && top.contains(" THEN course-10-4 "), "{top}");
        let mut total = 0;
        for i in 0..n {
            let (mut support, mut conf, mut rel) = (0, 0.0, 0.0);
            assert_eq!(sr_rules_stats(rules, i, &mut support, &mut conf, &mut rel), SrStatus::Ok);
            total += support;
        }
        assert_eq!(total, rows);
        let mut text = ptr::null_mut();
        assert_eq!(sr_rules_render(rules, n, &mut text), SrStatus::ComputationError);
        assert!(text.is_null());

        let mut acc = 0.0;
        let mut report = ptr::null_mut();
        assert_eq!(
            sr_cross_validate(data, sr_hyperparams_default(), 4, 42, &mut acc, &mut report),
            SrStatus::Ok
        );
        assert!((0.0..=1.0).contains(&acc));
        assert!(take(report).contains("Accuracy"));

        sr_rules_free(rules);
        sr_tree_free(copy);
        sr_tree_free(tree);
        sr_dataset_free(data);
        sr_log_free(log);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut log = ptr::null_mut();
        assert_eq!(sr_log_parse_csv(ptr::null(), b',' as _, &mut log), SrStatus::NullPointer);
        assert!(last_error().contains("csv"));

        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(sr_log_parse_csv(bad_utf8.as_ptr().cast(), b',' as _, &mut log), SrStatus::InvalidUtf8);

        let missing = CString::new("student-id,time-start\ns1,2020-01-01\n").unwrap();
        assert_eq!(sr_log_parse_csv(missing.as_ptr(), b',' as _, &mut log), SrStatus::DataError);
        assert!(last_error().contains("course-id"), "{}", last_error());
        assert!(log.is_null());

        let unknown = CString::new("no_such_key = 1\n").unwrap();
        assert_eq!(sr_log_synthesize(unknown.as_ptr(), &mut log), SrStatus::ConfigError);
        assert!(last_error().contains("no_such_key"));

        assert_eq!(sr_log_synthesize(ptr::null(), &mut log), SrStatus::Ok);
        assert!(sr_last_error().is_null());
        let mut data = ptr::null_mut();
        let features = CString::new("a-zz").unwrap();
        let label = CString::new("gpa:2").unwrap();
        assert_eq!(sr_dataset_prepare(log, features.as_ptr(), label.as_ptr(), &mut data), SrStatus::ConfigError);
        let mut tree = ptr::null_mut();
        assert_eq!(sr_tree_fit(ptr::null(), sr_hyperparams_default(), &mut tree), SrStatus::NullPointer);
        sr_log_free(log);
        // freeing NULL is a no-op
        sr_log_free(ptr::null_mut());
        sr_string_free(ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libstudy_rules_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "study_rules.h"

int main(void) {
    SrLog *log = NULL;
    if (sr_log_synthesize("n_students = 50\nseed = 3\n", &log) != SR_STATUS_OK) return 1;
    size_t events = 0, students = 0;
    sr_log_counts(log, &events, &students);
    SrDataset *data = NULL;
    if (sr_dataset_prepare(log, "a-cs,a-co", "gpa:2", &data) != SR_STATUS_OK) {
        fprintf(stderr, "%s\n", sr_last_error());
        return 2;
    }
    SrTree *tree = NULL;
    if (sr_tree_fit(data, sr_hyperparams_default(), &tree) != SR_STATUS_OK) return 3;
    SrRuleSet *rules = NULL;
    if (sr_rules_extract(tree, data, "harmonic", &rules) != SR_STATUS_OK) return 4;
    char *top = NULL;
    if (sr_rules_render(rules, 0, &top) != SR_STATUS_OK) return 5;
    printf("%zu %zu %s\n", events, students, top);
    sr_string_free(top);
    if (sr_dataset_prepare(log, "a-cs", "gpa:7", &data) != SR_STATUS_CONFIG_ERROR) return 6;
    sr_rules_free(rules);
    sr_tree_free(tree);
    sr_dataset_free(data);
    sr_log_free(log);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program failed: {:?}", out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains(" 50 IF "), "{stdout}");
}
