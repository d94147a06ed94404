use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::criteo::{split_fields, Schema};
use crate::error::Result;

/// Id reserved for missing and out-of-vocabulary tokens.
pub const OOV_ID: u32 = 0;

pub const DEFAULT_MIN_FREQ: u64 = 10;

/// Per-field token → id maps.
///
/// Ids are dense in `0..vocab_size(field)`; id 0 is [`OOV_ID`]. Tokens seen
/// at least `min_freq` times get ids `1..` ordered by descending count, ties
/// broken by the token's byte order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct FieldVocab {
    min_freq: u64,
    tokens: Vec<Vec<String>>,
    lookup: Vec<HashMap<String, u32>>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_freq: u64,
    /// Per field, tokens in id order starting at id 1.
    fields: Vec<Vec<String>>,
}

impl From<VocabFile> for FieldVocab {
    fn from(f: VocabFile) -> Self {
        Self::from_tokens(f.min_freq, f.fields)
    }
}

impl From<FieldVocab> for VocabFile {
    fn from(v: FieldVocab) -> Self {
        VocabFile {
            min_freq: v.min_freq,
            fields: v.tokens,
        }
    }
}

impl FieldVocab {
    fn from_tokens(min_freq: u64, tokens: Vec<Vec<String>>) -> Self {
        let lookup = tokens
            .iter()
            .map(|field| {
                field
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i as u32 + 1))
                    .collect()
            })
            .collect();
        Self {
            min_freq,
            tokens,
            lookup,
        }
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn num_fields(&self) -> usize {
        self.tokens.len()
    }

    /// Vocabulary size of `field`, counting the OOV slot.
    pub fn vocab_size(&self, field: usize) -> usize {
        self.tokens[field].len() + 1
    }

    pub fn vocab_sizes(&self) -> Vec<usize> {
        (0..self.num_fields()).map(|f| self.vocab_size(f)).collect()
    }

    pub fn id(&self, field: usize, token: &str) -> u32 {
        self.lookup[field].get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn token(&self, field: usize, id: u32) -> Option<&str> {
        if id == OOV_ID {
            return None;
        }
        self.tokens[field].get(id as usize - 1).map(String::as_str)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Counts categorical tokens over `lines` (training rows only) and assigns ids.
pub fn build_vocab<'a, I>(lines: I, schema: Schema, min_freq: u64) -> Result<FieldVocab>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: Vec<HashMap<&'a str, u64>> = vec![HashMap::new(); schema.num_sparse];
    for (n, line) in lines.into_iter().enumerate() {
        let fields = split_fields(line, n + 1, schema)?;
        for (field, tok) in fields[1 + schema.num_dense..].iter().enumerate() {
            if !tok.is_empty() {
                *counts[field].entry(tok).or_insert(0) += 1;
            }
        }
    }
    let tokens = counts
        .into_iter()
        .map(|field| {
            let mut kept: Vec<(&str, u64)> = field.into_iter().filter(|&(_, c)| c >= min_freq).collect();
            kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            kept.into_iter().map(|(t, _)| t.to_string()).collect()
        })
        .collect();
    Ok(FieldVocab::from_tokens(min_freq, tokens))
}
