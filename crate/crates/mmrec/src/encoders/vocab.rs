//! Token vocabularies fitted on the training split only.
//!
//! Tokens (action tags or keywords) below the minimum relative frequency are
//! dropped at fit time; encoding unknown tokens later is a silent no-op, so
//! test-split data can never grow a vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum relative token frequency (0.1%).
pub const DEFAULT_MIN_TOKEN_FREQUENCY: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Tokens in lexicographic order.
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    /// Occurrence count per token at fit time.
    frequencies: Vec<usize>,
}

impl Vocabulary {
    /// Fits from an occurrence stream. `min_frequency` is relative to the
    /// total occurrence count.
    pub fn fit<'a>(occurrences: impl Iterator<Item = &'a str>, min_frequency: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&min_frequency) {
            return Err(Error::config(format!(
                "minimum token frequency {} not in [0, 1)",
                min_frequency
            )));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut total = 0usize;
        for tok in occurrences {
            *counts.entry(tok.to_string()).or_insert(0) += 1;
            total += 1;
        }
        let mut tokens = Vec::new();
        let mut frequencies = Vec::new();
        for (tok, count) in counts {
            if total == 0 || (count as f64 / total as f64) >= min_frequency {
                tokens.push(tok);
                frequencies.push(count);
            }
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            tokens,
            index,
            frequencies,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frequency(&self, idx: usize) -> usize {
        self.frequencies[idx]
    }

    /// Rebuilds the token→index map after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    /// Content hash over the ordered token list, used to detect encoder
    /// mismatches when loading model bundles.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex_string(&h.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}
