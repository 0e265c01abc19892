//! Project manifests: one `file=<path>` line per source file, in order, and a
//! single `driver=<name>` line. Blank lines and `#` comments are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub files: Vec<String>,
    pub driver: String,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
        let mut files = Vec::new();
        let mut driver = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ManifestError::Syntax { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, got `{line}`")))?;
            let value = value.trim();
            if value.is_empty() {
                return Err(syntax(format!("empty value for `{}`", key.trim())));
            }
            match key.trim() {
                "file" => files.push(value.to_string()),
                "driver" if driver.is_none() => driver = Some(value.to_string()),
                "driver" => return Err(syntax("duplicate driver line".into())),
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        let driver = driver.ok_or(ManifestError::Syntax { line: 0, message: "missing driver= line".into() })?;
        if files.is_empty() {
            return Err(ManifestError::Syntax { line: 0, message: "no file= lines".into() });
        }
        Ok(Manifest { files, driver })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            s.push_str("file=");
            s.push_str(f);
            s.push('\n');
        }
        s.push_str("driver=");
        s.push_str(&self.driver);
        s.push('\n');
        s
    }
}

/// Manifest plus loaded sources. Source names are the manifest paths as
/// written, which is also how locations name their files.
#[derive(Debug, Clone)]
pub struct Project {
    pub manifest: Manifest,
    pub root: PathBuf,
    pub sources: Vec<(String, String)>,
}

impl Project {
    pub fn load(manifest_path: &Path) -> Result<Project, ManifestError> {
        let text = fs::read_to_string(manifest_path).map_err(|source| ManifestError::Io {
            path: manifest_path.to_path_buf(),
            source,
        })?;
        let manifest = Manifest::parse(&text)?;
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut sources = Vec::new();
        for f in &manifest.files {
            let path = root.join(f);
            let text = fs::read_to_string(&path).map_err(|source| ManifestError::Io { path, source })?;
            sources.push((f.clone(), text));
        }
        Ok(Project { manifest, root, sources })
    }

    pub fn from_sources(driver: &str, sources: Vec<(String, String)>) -> Project {
        Project {
            manifest: Manifest {
                files: sources.iter().map(|(n, _)| n.clone()).collect(),
                driver: driver.to_string(),
            },
            root: PathBuf::new(),
            sources,
        }
    }

    /// Content hash of the sources, binding fact files to one dimension build.
    pub fn generation(&self) -> String {
        let mut h = Sha256::new();
        for (name, text) in &self.sources {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn source(&self, file: &str) -> Option<&str> {
        self.sources.iter().find(|(n, _)| n == file).map(|(_, t)| t.as_str())
    }
}
