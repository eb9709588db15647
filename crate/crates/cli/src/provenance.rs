//! Provenance headers and output helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const TOOL: &str = concat!("lmastar ", env!("CARGO_PKG_VERSION"));

/// Everything that determines an output file's contents.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub manifest_hash: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    /// One header line behind `marker` (`#` for CSV, `c` for DIMACS).
    pub fn line(&self, marker: &str) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "{marker} tool={} manifest_sha256={} seeds={}",
            TOOL.replace(' ', "/"),
            self.manifest_hash,
            seeds.join(",")
        )
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::UnwritableFile {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes a text file whose first line is the provenance header.
pub fn write_text(path: &Path, prov: &Provenance, marker: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let wrap = |source| CliError::UnwritableFile {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    writeln!(out, "{}", prov.line(marker)).map_err(wrap)?;
    body(&mut out).map_err(wrap)?;
    out.flush().map_err(wrap)
}

/// Writes a binary file plus a `<name>.provenance` sidecar, since binary
/// formats have no comment syntax.
pub fn write_binary(path: &Path, prov: &Provenance, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let wrap = |source| CliError::UnwritableFile {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    body(&mut out).map_err(wrap)?;
    out.flush().map_err(wrap)?;
    write_text(&sidecar(path), prov, "#", |_| Ok(()))
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".provenance");
    PathBuf::from(name)
}
