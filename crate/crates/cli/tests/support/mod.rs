//! Runs the built binary and checks reports against the published schema.
#![allow(dead_code)]

pub mod schema;

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

pub fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

pub fn mpcr(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_mpcr"))
        .args(args)
        .output()
        .expect("spawn mpcr");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn report_schema() -> Value {
    serde_json::from_str(include_str!("../../schema/report.schema.json")).unwrap()
}

/// Runs a successful command and checks its report against the schema.
pub fn valid_report(args: &[&str]) -> Value {
    let run = mpcr(args);
    assert_eq!(run.code, 0, "{args:?}: {}", run.stderr);
    let report = run.json();
    let errors = schema::validate(&report_schema(), &report);
    assert!(errors.is_empty(), "{args:?}: {errors:?}");
    report
}
