use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};

/// A directory every command writes into, and nowhere else.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    formats: Vec<String>,
}

/// The format a file belongs to, by extension; unlisted extensions are always written.
fn format_of(name: &str) -> Option<&'static str> {
    match Path::new(name).extension()?.to_str()? {
        "txt" => Some("text"),
        "json" => Some("json"),
        "csv" => Some("csv"),
        _ => None,
    }
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            formats: vec!["text".into(), "json".into(), "csv".into()],
        })
    }

    /// Restricts writes to the listed formats (`text`, `json`, `csv`).
    pub fn with_formats(mut self, formats: &[String]) -> Self {
        self.formats = formats.to_vec();
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `name`, a plain relative file name. Files of a
    /// disabled format are skipped and `None` is returned.
    pub fn write(&self, name: &str, contents: &str) -> Result<Option<PathBuf>> {
        let rel = Path::new(name);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            bail!("refusing to write {name:?} outside the output directory");
        }
        if format_of(name).is_some_and(|f| !self.formats.iter().any(|g| g == f)) {
            return Ok(None);
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(Some(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_escaping_names() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        assert!(out.write("../x.txt", "").is_err());
        assert!(out.write("/etc/x", "").is_err());
        assert!(out.write("a/b.txt", "hi").is_ok());
        assert_eq!(fs::read_to_string(dir.path().join("a/b.txt")).unwrap(), "hi");
    }

    #[test]
    fn disabled_formats_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap().with_formats(&["json".into()]);
        assert!(out.write("a.txt", "").unwrap().is_none());
        assert!(out.write("a.csv", "").unwrap().is_none());
        assert!(out.write("a.json", "{}").unwrap().is_some());
        assert!(out.write("plots.gp", "").unwrap().is_some());
        assert!(!dir.path().join("a.txt").exists());
    }
}
