//! `relative_path<TAB>transcript` dataset manifests.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_at, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest, relative to its directory unless absolute.
    pub path: PathBuf,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Self {
        Self {
            root: root.into(),
            entries,
        }
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let (path, transcript) = line.split_once('\t').ok_or_else(|| Error::Data {
                sample: format!("line {}", lineno + 1),
                message: "expected path<TAB>transcript".into(),
            })?;
            entries.push(ManifestEntry {
                path: PathBuf::from(path),
                transcript: transcript.to_string(),
            });
        }
        Ok(Self::new(root, entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Data {
            sample: path.display().to_string(),
            message: format!("cannot read manifest: {e}"),
        })?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.path.to_string_lossy());
            out.push('\t');
            out.push_str(&e.transcript);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(io_at(path))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Location of an entry's image on disk.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Canonicalized image paths, used to detect train/validation overlap.
    pub fn resolved_paths(&self) -> Vec<PathBuf> {
        self.entries
            .iter()
            .map(|e| {
                let p = self.resolve(e);
                p.canonicalize().unwrap_or(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let text = "images/000000.pgm\tJohn Smith\nimages/000001.pgm\t$12.00\n";
        let m = Manifest::parse(text, "/data").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[1].transcript, "$12.00");
        assert_eq!(m.resolve(&m.entries()[0]), PathBuf::from("/data/images/000000.pgm"));
        assert_eq!(m.to_tsv(), text);
    }

    #[test]
    fn transcript_keeps_spaces() {
        let m = Manifest::parse("a.pgm\t 12 Main St \n", ".").unwrap();
        assert_eq!(m.entries()[0].transcript, " 12 Main St ");
    }

    #[test]
    fn missing_tab_is_an_error() {
        assert!(matches!(Manifest::parse("a.pgm\n", "."), Err(Error::Data { .. })));
    }
}
