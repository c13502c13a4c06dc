//! Tab-separated dataset manifests: `path<TAB>rmsd<TAB>group` per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Resolved against the manifest's directory when relative.
    pub path: PathBuf,
    /// Å
    pub label: f64,
    pub group: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct group ids in order of first appearance.
    pub fn groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.group.as_str()) {
                out.push(&e.group);
            }
        }
        out
    }
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Manifest { line: line_no, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let (path, label, group) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if path.is_empty() {
            return Err(err("empty path".into()));
        }
        let label: f64 = label
            .parse()
            .map_err(|_| err(format!("unparseable label {label:?}")))?;
        if !label.is_finite() || label < 0.0 {
            return Err(err(format!("label must be a finite RMSD >= 0, got {label}")));
        }
        if group.is_empty() {
            return Err(err("empty group id".into()));
        }
        let path = Path::new(path);
        entries.push(ManifestEntry {
            path: if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            },
            label,
            group: group.to_string(),
        });
    }
    Ok(DatasetManifest { entries })
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

/// Serializes entries with paths written relative to `base` where possible.
pub fn format_manifest(manifest: &DatasetManifest, base: &Path) -> String {
    let mut out = String::new();
    for e in &manifest.entries {
        let path = e.path.strip_prefix(base).unwrap_or(&e.path);
        writeln!(out, "{}\t{}\t{}", path.display(), e.label, e.group).unwrap();
    }
    out
}
