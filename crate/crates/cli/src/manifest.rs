//! Run manifests: the resolved configuration, warnings, summary values and
//! every emitted file with its SHA-256.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use kfx_core::RunConfig;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Collects outputs of one run and writes them under `dir`.
#[derive(Debug)]
pub struct Manifest {
    dir: PathBuf,
    command: String,
    config: RunConfig,
    force: bool,
    started: f64,
    pub warnings: Vec<String>,
    summary: Vec<(String, String)>,
    files: Vec<FileEntry>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

impl Manifest {
    pub fn new(dir: &Path, command: &str, config: &RunConfig, force: bool) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: config.clone(),
            force,
            started: unix_now(),
            warnings: Vec::new(),
            summary: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    /// Writes `bytes` to `name` inside the output directory and lists it.
    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        let entry = FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        };
        match self.files.iter_mut().find(|f| f.name == name) {
            Some(slot) => *slot = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn render(&self, finished: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kfx run manifest");
        let _ = writeln!(s, "tool = kfx");
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "started_unix = {:.3}", self.started);
        let _ = writeln!(s, "finished_unix = {finished:.3}");
        let _ = writeln!(s, "force = {}", self.force);
        let _ = writeln!(s, "[config]");
        s.push_str(&self.config.serialize());
        let _ = writeln!(s, "[summary]");
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "[warnings]");
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {}", w.replace('\n', " "));
        }
        let _ = writeln!(s, "[files]");
        for f in &self.files {
            let _ = writeln!(s, "{} = sha256:{} bytes:{}", f.name, f.sha256, f.bytes);
        }
        s
    }

    /// Writes `manifest.txt` atomically.
    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join(MANIFEST_NAME);
        write_atomic(&path, self.render(unix_now()).as_bytes())?;
        Ok(path)
    }
}

/// Parsed view of a written manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ManifestView {
    pub header: Vec<(String, String)>,
    pub config: String,
    pub summary: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl ManifestView {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_manifest(text: &str) -> Result<ManifestView> {
    let mut view = ManifestView::default();
    let mut section = "";
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "config" => "config",
                "summary" => "summary",
                "warnings" => "warnings",
                "files" => "files",
                other => bail!("unknown manifest section [{other}]"),
            };
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .with_context(|| format!("malformed manifest line `{line}`"))?;
        match section {
            "" => view.header.push((k.to_string(), v.to_string())),
            "config" => {
                view.config.push_str(line);
                view.config.push('\n');
            }
            "summary" => view.summary.push((k.to_string(), v.to_string())),
            "warnings" => view.warnings.push(v.to_string()),
            _ => {
                let mut parts = v.split(' ');
                let sha = parts.next().and_then(|p| p.strip_prefix("sha256:"));
                let bytes = parts.next().and_then(|p| p.strip_prefix("bytes:"));
                let (Some(sha), Some(bytes)) = (sha, bytes) else {
                    bail!("malformed file entry `{line}`");
                };
                view.files.push(FileEntry {
                    name: k.to_string(),
                    sha256: sha.to_string(),
                    bytes: bytes.parse().context("file size")?,
                });
            }
        }
    }
    Ok(view)
}

/// Reads `dir/manifest.txt` and checks that every listed file exists with
/// the recorded checksum.
pub fn verify_manifest(dir: &Path) -> Result<ManifestView> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME)).context("reading manifest")?;
    let view = parse_manifest(&text)?;
    for f in &view.files {
        let bytes = fs::read(dir.join(&f.name)).with_context(|| format!("listed file {} is missing", f.name))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            bail!("checksum mismatch for {}", f.name);
        }
    }
    Ok(view)
}
