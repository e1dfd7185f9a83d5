use std::path::{Path, PathBuf};

use serde::Serialize;
use stvs_core::io::{to_json, write_file};
use stvs_core::{Error, Result};

use crate::args::Format;

/// Where one run writes, with per-scenario subdirectories.
pub struct Sink {
    pub root: PathBuf,
    pub format: Format,
}

impl Sink {
    pub fn path(&self, shard: Option<&str>, name: &str) -> PathBuf {
        match shard {
            Some(s) => self.root.join(s).join(name),
            None => self.root.join(name),
        }
    }

    pub fn json<T: Serialize + ?Sized>(&self, shard: Option<&str>, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(shard, &format!("{name}.json"));
        write_file(&p, &to_json(value))?;
        Ok(p)
    }

    pub fn text(&self, shard: Option<&str>, file: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(shard, file);
        write_file(&p, text)?;
        Ok(p)
    }

    /// Rows as CSV or as a JSON array, per `--format`.
    pub fn table<T: Serialize>(&self, shard: Option<&str>, name: &str, rows: &[T]) -> Result<PathBuf> {
        match self.format {
            Format::Json => self.json(shard, name, rows),
            Format::Csv => self.text(shard, &format!("{name}.csv"), &csv_text(rows)?),
        }
    }
}

pub fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Run header on stderr: every resolved setting and where it came from.
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    pub fn new(command: &str) -> Self {
        Self {
            lines: vec![
                format!("stvs {command}"),
                "precedence: flags > scenario file > case defaults".into(),
            ],
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display, source: &str) {
        self.lines.push(format!("  {key} = {value} ({source})"));
    }

    pub fn print(&self) {
        for l in &self.lines {
            eprintln!("# {l}");
        }
    }
}

pub fn shown(p: &Path) -> String {
    p.display().to_string()
}
