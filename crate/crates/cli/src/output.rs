use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Where a command writes its files.
pub struct OutputDir {
    pub dir: PathBuf,
    pub plot_data: bool,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(dir: PathBuf, plot_data: bool) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io { path: dir.clone(), source: e })?;
        Ok(OutputDir { dir, plot_data, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `contents` to a temporary sibling and renames it into place.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
        text.push('\n');
        let path = self.write(name, &text)?;
        // Read back so a truncated or unparsable file never goes unnoticed.
        let back = fs::read_to_string(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        serde_json::from_str::<serde_json::Value>(&back)
            .map_err(|e| CliError::Validation { path: path.clone(), msg: e.to_string() })?;
        Ok(path)
    }

    /// Writes gnuplot data only when plot output was requested.
    pub fn write_plot(&mut self, name: &str, contents: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.plot_data {
            self.write(name, &contents())?;
        }
        Ok(())
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e| CliError::Io { path: path.to_path_buf(), source: e };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// Two-column key/value table for the terminal.
#[derive(Default)]
pub struct Table {
    rows: Vec<(String, String)>,
}

impl Table {
    pub fn row(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.rows.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.rows {
            let pad = width - k.chars().count();
            let _ = writeln!(out, "{k}{}  {v}", " ".repeat(pad));
        }
        out
    }
}

/// Whitespace-separated columns with a `#` header line.
pub fn gnuplot_columns(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("# {}\n", header.join(" "));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
