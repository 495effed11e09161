//! Output directory handling. Every file carries the config hash; only
//! `run_metadata.json` records wall-clock time.

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Outputs {
    dir: PathBuf,
    hash: String,
    pub format: Format,
    written: Vec<String>,
}

impl Outputs {
    /// Creates `dir` and writes the resolved configuration into it.
    pub fn create(dir: &Path, cfg: &RunConfig, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut out = Outputs { dir: dir.to_path_buf(), hash: cfg.hash(), format, written: Vec::new() };
        let text = format!("# config_hash={}\n{}", out.hash, cfg.to_toml());
        out.text("config.toml", &text)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes through `f` into a buffered file.
    pub fn stream<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>, &str) -> tc_optomech::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w, &self.hash)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Pretty JSON object with a leading `config_hash` field.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::Map::new();
        body.insert("config_hash".into(), Value::String(self.hash.clone()));
        match serde_json::to_value(value)? {
            Value::Object(m) => body.extend(m),
            other => {
                body.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(body))?;
        text.push('\n');
        self.text(name, &text)
    }

    /// Table output in the selected format: `name.csv` via `csv`, or
    /// `name.json` holding `rows`.
    pub fn table<T, F>(&mut self, name: &str, rows: &[T], csv: F) -> Result<()>
    where
        T: Serialize,
        F: FnOnce(&mut BufWriter<File>, &str) -> tc_optomech::Result<()>,
    {
        match self.format {
            Format::Csv => self.stream(&format!("{name}.csv"), csv),
            Format::Json => self.json(&format!("{name}.json"), &json!({ "rows": rows })),
        }
    }

    pub fn finish(mut self, command: &str, seed: u64) -> Result<Vec<String>> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let mut files = self.written.clone();
        files.push("run_metadata.json".into());
        let meta = json!({
            "command": command,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": stamp,
            "files": files,
        });
        self.json("run_metadata.json", &meta)?;
        Ok(self.written)
    }
}
