//! Errors, atomic file output and run manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    /// Bad input file, flag value or scenario.
    Input(String),
    Numeric(String),
    /// Failure writing an artifact.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Output(m) => write!(f, "write failed: {m}"),
        }
    }
}

impl From<aa_core::Error> for CliError {
    fn from(e: aa_core::Error) -> Self {
        match e {
            aa_core::Error::Invalid(m) => CliError::Input(m),
            aa_core::Error::Numeric(m) => CliError::Numeric(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A rectangular table destined for a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Output(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Output(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }

    /// Whitespace-separated columns with a commented header. Empty cells
    /// become `?`, which gnuplot reads as missing.
    pub fn to_gnuplot(&self) -> String {
        let cell = |c: &str| if c.is_empty() { "?".to_string() } else { c.replace(char::is_whitespace, "_") };
        let mut s = format!("# {}\n", self.header.join(" "));
        for r in &self.rows {
            s.push_str(&r.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" "));
            s.push('\n');
        }
        s
    }
}

/// Formats a float for CSV; round-trips through `str::parse`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub engine_version: String,
    pub wall_time_seconds: f64,
}

/// Collects the inputs read and files written by one command.
pub struct Run {
    pub out_dir: PathBuf,
    pub gnuplot: bool,
    command: String,
    args: Vec<String>,
    inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, args: Vec<String>, out_dir: PathBuf, gnuplot: bool) -> Self {
        Run {
            out_dir,
            gnuplot,
            command: command.to_string(),
            args,
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<String> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex(&Sha256::digest(&bytes)) });
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, t: &Table) -> CliResult<PathBuf> {
        let p = self.write(&format!("{name}.csv"), &t.to_csv()?)?;
        if self.gnuplot {
            self.write(&format!("{name}.dat"), t.to_gnuplot().as_bytes())?;
        }
        Ok(p)
    }

    /// Writes `<command>.manifest.json` and returns its path.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        let name = format!("{}.manifest.json", self.command.replace(' ', "_"));
        let path = self.out_dir.join(&name);
        self.outputs.push(path.display().to_string());
        let m = RunManifest {
            command: self.command,
            args: self.args,
            inputs: self.inputs,
            seed: self.seed,
            outputs: self.outputs,
            engine_version: aa_core::VERSION.to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Output(e.to_string()))?;
        write_atomic(&path, &json)?;
        Ok(path)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Output(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| CliError::Output(e.to_string()))?;
    tmp.persist(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(())
}
