use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::Failure;

pub const OUT_ENV: &str = "STOCHOPT_OUT";

pub struct Output {
    dir: PathBuf,
}

fn io_failure(path: &std::path::Path, e: impl std::fmt::Display) -> Failure {
    Failure::Aborted(format!("cannot write {}: {e}", path.display()))
}

impl Output {
    /// Flag or config value first, then `$STOCHOPT_OUT`, then `./stochopt-out`.
    pub fn new(dir: Option<PathBuf>) -> Self {
        let dir = dir
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("stochopt-out"));
        Self { dir }
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_failure(&self.dir, e))?;
        Ok(self.dir.join(name))
    }

    /// A CSV file opened with `comments` as leading `# ` lines and `header`
    /// as its first record.
    pub fn csv(&self, name: &str, comments: &[String], header: &[&str]) -> Result<Table, Failure> {
        let path = self.path(name)?;
        let mut file = File::create(&path).map_err(|e| io_failure(&path, e))?;
        for c in comments {
            writeln!(file, "# {c}").map_err(|e| io_failure(&path, e))?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(header)
            .map_err(|e| io_failure(&path, e))?;
        Ok(Table { writer, path })
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let path = self.path(name)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| io_failure(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_failure(&path, e))?;
        Ok(path)
    }
}

pub struct Table {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl Table {
    pub fn row<I, S>(&mut self, fields: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| io_failure(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf, Failure> {
        self.writer.flush().map_err(|e| io_failure(&self.path, e))?;
        Ok(self.path)
    }
}

/// Shortest round-trip decimal form, so reruns give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}
