//! Command lines shared by the CLI tests and the acceptance suite.

#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub const TEXT: &str = "The committee met on Tuesday to review the budget proposal and agreed that \
    the road repairs should be funded before the new library wing, although several members \
    argued the library had waited long enough. After a short recess the chair asked staff to \
    prepare cost estimates for both projects, and the vote was postponed until the first \
    meeting of the next month.";

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn shortphd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shortphd"))
        .args(args)
        .current_dir(crate_dir())
        .env_remove("SHORTPHD_CACHE_DIR")
        .output()
        .unwrap()
}

const DOUBLE: [&str; 5] = ["--provider", "synthetic", "--location", "cube:3:16", "--no-cache"];

pub fn score_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["score", "--text", TEXT, "--outer-restarts", "3"];
    args.extend(DOUBLE);
    args.extend(extra);
    args
}

pub fn eval_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "eval",
        "--corpus",
        "tests/data/toy.jsonl",
        "--provider",
        "synthetic",
        "--location",
        "cube:auto:16",
        "--no-cache",
        "--outer-restarts",
        "3",
    ];
    args.extend(extra);
    args
}

/// Golden file name and the command line producing it.
pub fn golden_cases() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("score_short_phd.json", score_args(&["--threshold", "3.0", "--baseline"])),
        ("score_phd.json", score_args(&["--method", "phd"])),
        ("eval_phd.json", eval_args(&["--method", "phd"])),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    crate_dir().join("tests/golden").join(name)
}
