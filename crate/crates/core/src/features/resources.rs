//! Lexicon and embedding resources read from plain text files.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Word to tag-set lookup, merged from any number of TSV files.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key<TAB>tag1,tag2` lines; blank lines and `#` comments are skipped.
    pub fn parse_into(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, tags) = line.split_once('\t').ok_or_else(|| {
                Error::Parse(format!("{origin}:{}: expected key<TAB>tags", i + 1))
            })?;
            let slot = self.entries.entry(key.to_string()).or_default();
            for tag in tags.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                if !slot.iter().any(|t| t == tag) {
                    slot.push(tag.to_string());
                }
            }
        }
        Ok(())
    }

    pub fn load_into(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_into(&text, &path.display().to_string())
    }

    pub fn insert(&mut self, key: &str, tags: &[&str]) {
        let slot = self.entries.entry(key.to_string()).or_default();
        slot.extend(tags.iter().map(|t| t.to_string()));
    }

    pub fn tags(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tags for a token, trying the surface form then the lemma.
    pub fn lookup<'a>(&'a self, surface: &str, lemma: &str) -> Vec<&'a str> {
        let mut out: Vec<&str> = self.tags(surface).iter().map(String::as_str).collect();
        if lemma != surface {
            for t in self.tags(lemma) {
                if !out.contains(&t.as_str()) {
                    out.push(t);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Pre-trained word vectors of a single dimensionality.
#[derive(Debug, Clone, Default)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    /// Parses `word v1 v2 ...` lines.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut dim = 0;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let vec: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("{origin}:{}: {e}", i + 1)))?;
            if vec.is_empty() {
                return Err(Error::Parse(format!("{origin}:{}: no components", i + 1)));
            }
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("{origin}:{}: non-finite component", i + 1)));
            }
            if dim == 0 {
                dim = vec.len();
            } else if vec.len() != dim {
                return Err(Error::Parse(format!(
                    "{origin}:{}: dimension {} differs from {dim}",
                    i + 1,
                    vec.len()
                )));
            }
            vectors.insert(word.to_string(), vec);
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, surface: &str, lemma: &str) -> Option<&[f64]> {
        self.vectors
            .get(surface)
            .or_else(|| self.vectors.get(lemma))
            .map(Vec::as_slice)
    }
}
