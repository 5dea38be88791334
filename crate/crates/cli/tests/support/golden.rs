//! Runs the built binary against the frozen cassettes and compares its
//! output with the files under `tests/golden`.

#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use super::corpus::CliRun;

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"))
}

/// A scratch directory holding a database built from `data/`.
pub struct Sandbox {
    pub dir: tempfile::TempDir,
}

impl Sandbox {
    pub fn new() -> Self {
        let sandbox = Self { dir: tempfile::tempdir().unwrap() };
        let data = workspace().join("data");
        let out = sandbox.run(&["setup", "--data-dir", data.to_str().unwrap()], "");
        assert!(out.status.success(), "setup failed: {}", String::from_utf8_lossy(&out.stderr));
        sandbox
    }

    pub fn db_path(&self) -> PathBuf {
        self.dir.path().join("games.db")
    }

    pub fn run(&self, args: &[&str], stdin: &str) -> Output {
        let mut child = Command::new(env!("CARGO_BIN_EXE_soccerrag"))
            .args(args)
            .current_dir(self.dir.path())
            .env_clear()
            .env("DATABASE_URL", format!("sqlite://{}", self.db_path().display()))
            .env("GATEWAY_MODE", "replay")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
        child.wait_with_output().unwrap()
    }

    pub fn query(&self, run: &CliRun) -> Output {
        let cassettes = workspace().join("fixtures/cassettes");
        self.run(&["query", "-q", run.arg, "--cassettes", cassettes.to_str().unwrap()], run.stdin)
    }
}

/// Stdout followed by the exit code, as stored in a golden file.
pub fn transcript(out: &Output) -> String {
    format!("{}\n[exit {}]\n", String::from_utf8_lossy(&out.stdout), out.status.code().unwrap_or(-1))
}

/// Compares a transcript with its golden file, rewriting the file instead
/// when `UPDATE_GOLDEN` is set. Returns a description of any mismatch.
pub fn check(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b);
        Err(format!("{name}: transcript differs from golden at line {}", line.map_or(0, |l| l + 1)))
    }
}
