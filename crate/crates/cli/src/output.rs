use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// 17 significant digits, so tables round-trip bit for bit.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON has no infinities; they are written as strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Column headers for a vector quantity: `p` in one dimension, `p_1, p_2,
/// ...` otherwise.
pub fn vector_header(name: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![name.to_string()]
    } else {
        (1..=dim).map(|k| format!("{name}_{k}")).collect()
    }
}

pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Where results go. Without a directory, the primary product of a command
/// goes to standard output and secondary files are skipped.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> CliResult<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|source| CliError::Write {
                path: d.to_path_buf(),
                source,
            })?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    fn write_file(&self, dir: &Path, name: &str, text: &str) -> CliResult<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Write { path, source })
    }

    fn stdout(&self, text: &str) -> CliResult<()> {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            })
    }

    /// The main table of a command: to `name` under the output directory,
    /// or to standard output.
    pub fn primary_table(&self, name: &str, table: Table) -> CliResult<()> {
        let text = table.into_string();
        match &self.dir {
            Some(d) => self.write_file(d, name, &text),
            None => self.stdout(&text),
        }
    }

    /// A table that is only written when an output directory is given.
    pub fn side_table(&self, name: &str, table: Table) -> CliResult<()> {
        match &self.dir {
            Some(d) => self.write_file(d, name, &table.into_string()),
            None => Ok(()),
        }
    }

    /// Side output written by a closure, only with an output directory.
    pub fn side_file(
        &self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let Some(d) = &self.dir else { return Ok(()) };
        let mut buf = Vec::new();
        let path = d.join(name);
        write(&mut buf).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, buf).map_err(|source| CliError::Write { path, source })
    }

    /// The JSON summary always goes to standard output, and also to `name`
    /// under the output directory.
    pub fn summary(&self, name: &str, value: &Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        if let Some(d) = &self.dir {
            self.write_file(d, name, &text)?;
        }
        self.stdout(&text)
    }
}
