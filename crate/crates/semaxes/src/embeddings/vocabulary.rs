//! Vocabulary construction: a translation-aligned common block followed by a
//! per-language frequency fill, and its materialization into column-aligned
//! matrices.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{BilingualDictionary, EmbeddingMatrix};

/// The per-language word selection: `common` rows are translation tuples
/// (one word per language, pivot first) that occupy the leading aligned
/// columns; `fill` extends each language independently by frequency until
/// `total_size` words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyPlan {
    languages: Vec<String>,
    common: Vec<Vec<String>>,
    fill: Vec<Vec<String>>,
    total_size: usize,
    /// Dictionary entries dropped because a side was absent from its
    /// language's embedding file.
    skipped_entries: usize,
}

impl VocabularyPlan {
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Number of leading translation-aligned columns.
    pub fn common_size(&self) -> usize {
        self.common.len()
    }

    pub fn total_size(&self) -> usize {
        self.total_size
    }

    pub fn common_tuples(&self) -> &[Vec<String>] {
        &self.common
    }

    pub fn fill_words(&self, language: usize) -> &[String] {
        &self.fill[language]
    }

    pub fn skipped_entries(&self) -> usize {
        self.skipped_entries
    }

    /// All words planned for one language, in column order.
    pub fn words(&self, language: usize) -> impl Iterator<Item = &str> {
        self.common
            .iter()
            .map(move |tuple| tuple[language].as_str())
            .chain(self.fill[language].iter().map(|w| w.as_str()))
    }
}

/// Builds a [`VocabularyPlan`] from dictionaries that all pivot on language 0.
///
/// `dictionaries[k]` maps language 0 to language `k + 1`. A pivot word
/// contributes a common tuple when every language has a usable translation;
/// the translation chosen is the first pair in dictionary file order whose
/// target exists in that language's embedding file. A tuple is dropped
/// entirely if any of its words was already taken by an earlier tuple, which
/// keeps the aligned block duplicate-free per language.
pub fn build_vocabulary_plan(
    languages: &[String],
    dictionaries: &[BilingualDictionary],
    frequency_lists: &[Vec<String>],
    embeddings: &[EmbeddingMatrix],
    total_size: usize,
) -> Result<VocabularyPlan> {
    let n_langs = languages.len();
    if n_langs < 2 {
        return Err(Error::InvalidInput(
            "vocabulary plan needs at least 2 languages".into(),
        ));
    }
    if dictionaries.len() != n_langs - 1
        || frequency_lists.len() != n_langs
        || embeddings.len() != n_langs
    {
        return Err(Error::InvalidInput(format!(
            "expected {} dictionaries, {n_langs} frequency lists and embeddings",
            n_langs - 1
        )));
    }

    let present: Vec<HashSet<&str>> = embeddings
        .iter()
        .map(|m| m.words().iter().map(|w| w.as_str()).collect())
        .collect();

    let mut skipped_entries = 0usize;
    // chosen[k]: pivot -> first translation into language k+1 that exists in
    // that language's embedding file.
    let mut chosen: Vec<std::collections::HashMap<&str, &str>> = Vec::with_capacity(n_langs - 1);
    for (k, dict) in dictionaries.iter().enumerate() {
        let mut map = std::collections::HashMap::new();
        for (src, tgt) in dict.pairs() {
            if !present[k + 1].contains(tgt.as_str()) {
                skipped_entries += 1;
                continue;
            }
            map.entry(src.as_str()).or_insert(tgt.as_str());
        }
        chosen.push(map);
    }

    let mut used: Vec<HashSet<&str>> = vec![HashSet::new(); n_langs];
    let mut common: Vec<Vec<String>> = Vec::new();
    let mut seen_pivots: HashSet<&str> = HashSet::new();
    for (pivot, _) in dictionaries[0].pairs() {
        if !seen_pivots.insert(pivot.as_str()) {
            continue;
        }
        if !present[0].contains(pivot.as_str()) {
            skipped_entries += 1;
            continue;
        }
        let mut tuple: Vec<&str> = Vec::with_capacity(n_langs);
        tuple.push(pivot.as_str());
        if !chosen.iter().all(|map| {
            map.get(pivot.as_str())
                .copied()
                .map(|tgt| tuple.push(tgt))
                .is_some()
        }) {
            continue;
        }
        debug_assert_eq!(tuple.len(), n_langs);
        if tuple
            .iter()
            .enumerate()
            .any(|(lang, w)| used[lang].contains(w))
        {
            continue;
        }
        for (lang, w) in tuple.iter().enumerate() {
            used[lang].insert(w);
        }
        common.push(tuple.into_iter().map(str::to_owned).collect());
    }

    let common_size = common.len();
    if total_size < common_size {
        return Err(Error::InvalidInput(format!(
            "total_size {total_size} is below the common block size {common_size}"
        )));
    }

    let mut fill: Vec<Vec<String>> = Vec::with_capacity(n_langs);
    for lang in 0..n_langs {
        let mut words = Vec::with_capacity(total_size - common_size);
        for w in &frequency_lists[lang] {
            if common_size + words.len() >= total_size {
                break;
            }
            if used[lang].contains(w.as_str()) || !present[lang].contains(w.as_str()) {
                continue;
            }
            used[lang].insert(w.as_str());
            words.push(w.clone());
        }
        if common_size + words.len() < total_size {
            return Err(Error::InvalidInput(format!(
                "frequency list for language {:?} exhausted at {} of {} words",
                languages[lang],
                common_size + words.len(),
                total_size
            )));
        }
        fill.push(words);
    }

    Ok(VocabularyPlan {
        languages: languages.to_vec(),
        common,
        fill,
        total_size,
        skipped_entries,
    })
}

/// Assembles the planned `d x total_size` matrix per language. The first
/// `common_size` columns of any two outputs are translation-aligned.
pub fn materialize(
    plan: &VocabularyPlan,
    embeddings: &[EmbeddingMatrix],
) -> Result<Vec<EmbeddingMatrix>> {
    if embeddings.len() != plan.languages.len() {
        return Err(Error::InvalidInput(format!(
            "plan covers {} languages, got {} embedding matrices",
            plan.languages.len(),
            embeddings.len()
        )));
    }
    let mut out = Vec::with_capacity(embeddings.len());
    for (lang, source) in embeddings.iter().enumerate() {
        let index = source.index_map();
        let d = source.dim();
        let mut values = DMatrix::zeros(d, plan.total_size);
        let mut words = Vec::with_capacity(plan.total_size);
        for (j, word) in plan.words(lang).enumerate() {
            let &col = index.get(word).ok_or_else(|| {
                Error::Internal(format!(
                    "planned word {word:?} missing from language {:?}",
                    plan.languages[lang]
                ))
            })?;
            values.set_column(j, &source.values().column(col));
            words.push(word.to_owned());
        }
        out.push(EmbeddingMatrix::new(d, words, values)?);
    }
    Ok(out)
}
