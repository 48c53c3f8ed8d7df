#![allow(dead_code)]

use std::path::PathBuf;

use cogloop_harness::suite::Suite;

/// Every bundled fixture suite.
pub const FIXTURES: [&str; 6] = ["qa_suite", "two_tools", "emo_suite", "minienv", "delegation", "cap"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn suite(name: &str) -> Suite {
    Suite::from_dir(&fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}
