//! Run summaries as flat key=value text, written last so their presence
//! marks a completed run.

use caloric_core::csvio::fmt;
use std::io::Write;

pub struct RunSummary {
    pub command: &'static str,
    pub config_hash: u64,
    pub started: std::time::Instant,
    pub artifacts: Vec<String>,
    pub checks: Vec<(String, bool)>,
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl RunSummary {
    pub fn new(command: &'static str, config_hash: u64) -> Self {
        Self {
            command,
            config_hash,
            started: std::time::Instant::now(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            values: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.values.push((name.to_string(), v));
    }

    pub fn check(&mut self, name: &str, pass: bool) {
        self.checks.push((name.to_string(), pass));
    }

    /// Record a measured value and compare it against an upper bound.
    pub fn check_le(&mut self, name: &str, measured: f64, bound: f64) {
        self.value(name, measured);
        self.check(name, measured <= bound);
    }

    /// Record a measured value and compare it against a lower bound.
    pub fn check_ge(&mut self, name: &str, measured: f64, bound: f64) {
        self.value(name, measured);
        self.check(name, measured >= bound);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn artifact(&mut self, path: &std::path::Path) {
        self.artifacts
            .push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    /// Print one pass/fail line per check.
    pub fn print_checks(&self) {
        for (name, ok) in &self.checks {
            let v = self
                .values
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| format!(" ({v:.6e})"))
                .unwrap_or_default();
            println!("{}: {}{v}", if *ok { "pass" } else { "FAIL" }, name);
        }
    }

    /// Write the summary file (always the last artifact of a run).
    pub fn write(&self, dir: &std::path::Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.txt"))?);
        writeln!(out, "command={}", self.command)?;
        writeln!(out, "config_hash={:016x}", self.config_hash)?;
        writeln!(out, "wall_ms={}", self.started.elapsed().as_millis())?;
        writeln!(out, "status={}", if self.all_passed() { "ok" } else { "check-failed" })?;
        for (i, a) in self.artifacts.iter().enumerate() {
            writeln!(out, "artifact.{i}={a}")?;
        }
        for (name, v) in &self.values {
            writeln!(out, "value.{name}={}", fmt(*v))?;
        }
        for (name, ok) in &self.checks {
            writeln!(out, "check.{name}={}", if *ok { "pass" } else { "fail" })?;
        }
        for (i, n) in self.notes.iter().enumerate() {
            writeln!(out, "note.{i}={n}")?;
        }
        out.flush()
    }
}
