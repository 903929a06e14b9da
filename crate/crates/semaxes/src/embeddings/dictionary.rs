//! Bilingual dictionaries and word-frequency lists.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered list of (source, target) translation pairs. Source words may
/// repeat (one-to-many entries); exact duplicate pairs are removed on load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    pairs: Vec<(String, String)>,
}

impl BilingualDictionary {
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut dict = BilingualDictionary::default();
        let mut seen = std::collections::HashSet::new();
        for (src, tgt) in pairs {
            if src.is_empty() || tgt.is_empty() {
                return Err(Error::InvalidInput(
                    "dictionary pair with an empty side".into(),
                ));
            }
            if seen.insert((src.clone(), tgt.clone())) {
                dict.pairs.push((src, tgt));
            }
        }
        Ok(dict)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Loads a two-tokens-per-line dictionary file, dropping exact duplicate
/// pairs but keeping file order otherwise.
pub fn load_bilingual_dictionary(path: &Path) -> Result<BilingualDictionary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::malformed(
                path,
                idx + 1,
                format!("expected 2 tokens, found {}", fields.len()),
            ));
        }
        let pair = (fields[0].to_owned(), fields[1].to_owned());
        if seen.insert(pair.clone()) {
            pairs.push(pair);
        }
    }
    Ok(BilingualDictionary { pairs })
}

/// Loads a one-word-per-line frequency list (most frequent first). Blank
/// lines are skipped; lines with more than one token are rejected.
pub fn load_frequency_list(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut words = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        if fields.next().is_some() {
            return Err(Error::malformed(
                path,
                idx + 1,
                "expected one word per line",
            ));
        }
        words.push(word.to_owned());
    }
    Ok(words)
}
