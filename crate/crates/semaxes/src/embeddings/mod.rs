//! Word-embedding matrices and the text `.vec` interchange format.
//!
//! A `.vec` file starts with a `"<count> <dim>"` header line; every following
//! line is a word token and `dim` decimal values, all separated by ASCII
//! whitespace. Files are UTF-8 throughout.

mod dictionary;
mod vocabulary;

pub use dictionary::{load_bilingual_dictionary, load_frequency_list, BilingualDictionary};
pub use vocabulary::{build_vocabulary_plan, materialize, VocabularyPlan};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A `d x n` embedding matrix with its ordered vocabulary; column `j` is the
/// embedding of `words[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    words: Vec<String>,
    values: DMatrix<f64>,
    skipped_duplicates: usize,
}

impl EmbeddingMatrix {
    /// Builds a matrix from an ordered vocabulary and column-major values.
    ///
    /// Rejects duplicate or whitespace-bearing words, non-finite entries,
    /// dimensions below 2, and shape mismatches.
    pub fn new(dim: usize, words: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "embedding dimension must be at least 2, got {dim}"
            )));
        }
        if values.nrows() != dim || values.ncols() != words.len() {
            return Err(Error::InvalidInput(format!(
                "value matrix is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                dim,
                words.len()
            )));
        }
        let mut seen = HashMap::with_capacity(words.len());
        for (j, w) in words.iter().enumerate() {
            if w.is_empty() || w.contains(|c: char| c.is_ascii_whitespace()) {
                return Err(Error::InvalidInput(format!(
                    "word {j} ({w:?}) is empty or contains whitespace"
                )));
            }
            if seen.insert(w.as_str(), j).is_some() {
                return Err(Error::InvalidInput(format!("duplicate word {w:?}")));
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding values must be finite".into(),
            ));
        }
        Ok(Self {
            dim,
            words,
            values,
            skipped_duplicates: 0,
        })
    }

    /// Embedding dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vocabulary size `n`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The `d x n` value matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of duplicate word lines dropped while parsing.
    pub fn skipped_duplicates(&self) -> usize {
        self.skipped_duplicates
    }

    /// Word-to-column lookup table.
    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.words
            .iter()
            .enumerate()
            .map(|(j, w)| (w.as_str(), j))
            .collect()
    }
}

/// Parses a text `.vec` file, keeping at most `limit` words when given.
///
/// Columns appear in file order. A word seen more than once keeps its first
/// embedding; later occurrences are dropped and counted in
/// [`EmbeddingMatrix::skipped_duplicates`].
pub fn parse_vec_file(path: &Path, limit: Option<usize>) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        None => return Err(Error::malformed(path, 1, "empty file")),
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
    };
    let header_fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if header_fields.len() != 2 {
        return Err(Error::malformed(
            path,
            1,
            format!(
                "header must be \"<count> <dim>\", found {} fields",
                header_fields.len()
            ),
        ));
    }
    let declared: usize = header_fields[0]
        .parse()
        .map_err(|_| Error::malformed(path, 1, "header count is not an integer"))?;
    let dim: usize = header_fields[1]
        .parse()
        .map_err(|_| Error::malformed(path, 1, "header dim is not an integer"))?;
    if dim < 2 {
        return Err(Error::malformed(
            path,
            1,
            format!("embedding dimension must be at least 2, got {dim}"),
        ));
    }

    let capacity = limit.unwrap_or(declared).min(declared.max(1));
    let mut words: Vec<String> = Vec::with_capacity(capacity);
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(capacity);
    let mut data: Vec<f64> = Vec::with_capacity(capacity.saturating_mul(dim));
    let mut skipped = 0usize;

    for (idx, line) in lines {
        if limit.is_some_and(|l| words.len() >= l) {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            return Err(Error::malformed(path, lineno, "blank line"));
        };
        let start = data.len();
        let mut count = 0usize;
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                Error::malformed(path, lineno, format!("unparsable value {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!("non-finite value {field:?}"),
                ));
            }
            if count < dim {
                data.push(v);
            }
            count += 1;
        }
        if count != dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!("expected {dim} values, found {count}"),
            ));
        }
        if seen.contains_key(word) {
            data.truncate(start);
            skipped += 1;
            continue;
        }
        seen.insert(word.to_owned(), words.len());
        words.push(word.to_owned());
    }

    let values = DMatrix::from_vec(dim, words.len(), data);
    let mut matrix = EmbeddingMatrix::new(dim, words, values)?;
    matrix.skipped_duplicates = skipped;
    Ok(matrix)
}

/// Writes a matrix in the text `.vec` layout with full-precision values, so
/// that reading the file back reproduces the matrix exactly.
pub fn write_vec_file(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, s: String| {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    write(&mut out, format!("{} {}\n", matrix.len(), matrix.dim()))?;
    let mut line = String::new();
    for (j, word) in matrix.words.iter().enumerate() {
        line.clear();
        line.push_str(word);
        for i in 0..matrix.dim {
            line.push(' ');
            line.push_str(&matrix.values[(i, j)].to_string());
        }
        line.push('\n');
        write(&mut out, std::mem::take(&mut line))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_basic_file() {
        let f = write_tmp("2 3\ncat 1 0 0\ndog 0 1 0\n");
        let m = parse_vec_file(f.path(), None).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.len(), 2);
        assert_eq!(m.words(), &["cat".to_string(), "dog".to_string()]);
        assert_eq!(m.values()[(0, 0)], 1.0);
        assert_eq!(m.values()[(1, 1)], 1.0);
        assert_eq!(m.skipped_duplicates(), 0);
    }

    #[test]
    fn rejects_field_count_mismatch() {
        let f = write_tmp("1 3\ncat 1 0\n");
        let err = parse_vec_file(f.path(), None).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn skips_duplicate_words() {
        let f = write_tmp("3 2\ncat 1 0\ncat 2 2\ndog 0 1\n");
        let m = parse_vec_file(f.path(), None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.skipped_duplicates(), 1);
        // first occurrence wins
        assert_eq!(m.values()[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_empty_file() {
        let f = write_tmp("");
        assert!(matches!(
            parse_vec_file(f.path(), None),
            Err(Error::Malformed { .. })
        ));
    }

    #[test]
    fn rejects_bad_header() {
        for header in ["2", "a 3", "2 x", "2 3 4"] {
            let f = write_tmp(&format!("{header}\n"));
            assert!(
                matches!(parse_vec_file(f.path(), None), Err(Error::Malformed { line: 1, .. })),
                "header {header:?} accepted"
            );
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let f = write_tmp("1 2\ncat nan 0\n");
        assert!(matches!(
            parse_vec_file(f.path(), None),
            Err(Error::Malformed { line: 2, .. })
        ));
        let f = write_tmp("1 2\ncat inf 0\n");
        assert!(parse_vec_file(f.path(), None).is_err());
    }

    #[test]
    fn limit_truncates() {
        let f = write_tmp("3 2\na 1 0\nb 0 1\nc 1 1\n");
        let m = parse_vec_file(f.path(), Some(2)).unwrap();
        assert_eq!(m.words(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn new_rejects_duplicates_and_bad_words() {
        let values = DMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(EmbeddingMatrix::new(2, vec!["a".into(), "a".into()], values.clone()).is_err());
        assert!(EmbeddingMatrix::new(2, vec!["a b".into(), "c".into()], values.clone()).is_err());
        assert!(EmbeddingMatrix::new(2, vec!["".into(), "c".into()], values).is_err());
    }

    proptest! {
        // Round-trip: parse(write(m)) == m exactly, full-precision output.
        #[test]
        fn vec_roundtrip(
            dim in 2usize..6,
            n in 0usize..8,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let words: Vec<String> = (0..n).map(|j| format!("w{j}")).collect();
            let values = DMatrix::from_fn(dim, n, |_, _| rng.random_range(-10.0..10.0f64));
            let m = EmbeddingMatrix::new(dim, words, values).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_vec_file(&m, f.path()).unwrap();
            let back = parse_vec_file(f.path(), None).unwrap();
            prop_assert_eq!(back.words(), m.words());
            prop_assert_eq!(back.values(), m.values());
        }
    }
}
