//! Keyword → action-tag mapping.
//!
//! The keyword model needs conversation keywords and session action tags to
//! land in one shared token space. The mapping is an explicit, editable file
//! of `keyword<TAB>tag` lines; unmapped keywords map to themselves, so a
//! dataset whose keywords already match the action tags needs no file at all.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagMap {
    entries: BTreeMap<String, String>,
}

impl TagMap {
    /// Identity map: every keyword is its own shared-space token.
    pub fn identity() -> Self {
        TagMap::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        TagMap {
            entries: pairs.into_iter().collect(),
        }
    }

    /// Resolves a keyword to its shared-space token.
    pub fn map<'a>(&'a self, keyword: &'a str) -> &'a str {
        self.entries.get(keyword).map(String::as_str).unwrap_or(keyword)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `keyword<TAB>tag` lines; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            match (parts.next(), parts.next()) {
                (Some(k), Some(v)) if !k.is_empty() && !v.is_empty() => {
                    entries.insert(k.trim().to_string(), v.trim().to_string());
                }
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "expected keyword<TAB>tag".into(),
                    })
                }
            }
        }
        Ok(TagMap { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "# keyword\ttag")?;
        for (k, v) in &self.entries {
            writeln!(file, "{}\t{}", k, v)?;
        }
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update([1u8]);
            h.update(v.as_bytes());
            h.update([0u8]);
        }
        super::vocab::hex_string(&h.finalize())
    }
}
