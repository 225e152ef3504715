//! Result files. Every file carries a `format_version`: a top-level key in JSON,
//! a field on each JSONL record and the first column of CSV tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub seed: u64,
    pub build: String,
    pub config: Value,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            seed,
            build: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::config(format!("unsupported manifest format_version {}", m.format_version)));
        }
        Ok(m)
    }
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn file(&self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        File::create(&p).map(BufWriter::new).map_err(|e| CliError::io(p, e))
    }

    /// Pretty JSON object with `format_version` added.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut obj = match serde_json::to_value(value)? {
            Value::Object(m) => m,
            other => Map::from_iter([("data".to_string(), other)]),
        };
        obj.insert("format_version".into(), FORMAT_VERSION.into());
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, &obj)?;
        writeln!(f).and_then(|_| f.flush()).map_err(|e| CliError::io(self.path(name), e))
    }

    pub fn write_manifest(&self, m: &Manifest) -> CliResult<()> {
        let mut f = self.file(MANIFEST)?;
        serde_json::to_writer_pretty(&mut f, m)?;
        writeln!(f).and_then(|_| f.flush()).map_err(|e| CliError::io(self.path(MANIFEST), e))
    }

    pub fn csv(&self, name: &str, header: &[String]) -> CliResult<CsvOut> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(std::iter::once("format_version").chain(header.iter().map(String::as_str)))?;
        Ok(CsvOut(w))
    }

    pub fn jsonl(&self, name: &str) -> CliResult<JsonlOut> {
        Ok(JsonlOut { w: self.file(name)?, path: self.path(name) })
    }
}

pub struct CsvOut(csv::Writer<File>);

impl CsvOut {
    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let version = FORMAT_VERSION.to_string();
        let mut rec = csv::ByteRecord::new();
        rec.push_field(version.as_bytes());
        for f in fields {
            rec.push_field(f.as_ref());
        }
        self.0.write_byte_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.0.flush().map_err(|e| CliError::Output(e.to_string()))
    }
}

pub struct JsonlOut {
    w: BufWriter<File>,
    path: PathBuf,
}

impl JsonlOut {
    pub fn record<T: Serialize>(&mut self, value: &T) -> CliResult<()> {
        let mut obj = match serde_json::to_value(value)? {
            Value::Object(m) => m,
            other => Map::from_iter([("data".to_string(), other)]),
        };
        obj.insert("format_version".into(), FORMAT_VERSION.into());
        serde_json::to_writer(&mut self.w, &obj)?;
        writeln!(self.w).map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Shortest round-trip formatting.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
