//! Result persistence. Every file is written to a temporary sibling and
//! renamed into place, and carries the resolved config and seeds.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Output {
    dir: PathBuf,
    command: &'static str,
    header: Value,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf, command: &'static str, config: &impl Serialize, resolved: &impl Serialize) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let header = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config": config,
            "resolved": resolved,
        });
        Ok(Self {
            dir,
            command,
            header,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `{schema_version, command, config, resolved, result}`.
    pub fn json(&mut self, name: &str, result: &impl Serialize) -> Result<()> {
        let mut doc = self.header.clone();
        doc["result"] = serde_json::to_value(result)?;
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// CSV preceded by `# ` header lines holding the command, schema
    /// version, config and resolved values as compact JSON.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.csv_body(name, &body)
    }

    /// Like [`Output::csv`] for an already rendered body.
    pub fn csv_body(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# spinscape {} schema_version={}", self.command, SCHEMA_VERSION)?;
        writeln!(buf, "# config={}", self.header["config"])?;
        writeln!(buf, "# resolved={}", self.header["resolved"])?;
        buf.extend_from_slice(body);
        self.write(name, &buf)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Reads a CSV written by [`Output::csv`], skipping the header lines.
#[cfg(test)]
pub fn strip_header(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}
