//! Run manifests: resolved configuration, input digests, tool version, seed.
//!
//! Inputs are recorded by role and content digest rather than by path, so a
//! rerun from anywhere with the same inputs, configuration and seed yields a
//! byte-identical manifest alongside byte-identical outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use rankfuse::{Error, Result};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// role -> "sha256:<hex>" of the input file contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file names (base names, not paths).
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            tool: "rankfuse",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed: None,
            config: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config<T: Serialize>(mut self, cfg: &T) -> Result<Self> {
        self.config = serde_json::to_value(cfg)
            .map_err(|e| Error::Data(format!("manifest config: {e}")))?;
        Ok(self)
    }

    pub fn input(mut self, role: &str, path: &Path) -> Result<Self> {
        let mut file =
            File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(7 + 64);
        hex.push_str("sha256:");
        for byte in digest {
            use std::fmt::Write as _;
            write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
        }
        self.inputs.insert(role.to_owned(), hex);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Self {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.push(name);
        self
    }

    /// Write to `<primary_output>.manifest.json`.
    pub fn write_beside(&self, primary_output: &Path) -> Result<()> {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        self.write(&primary_output.with_file_name(name))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

/// Resolve `path` against an output directory, creating the directory first.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Join a directory and file name.
pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
