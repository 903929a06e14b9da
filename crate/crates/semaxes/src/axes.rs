//! Labels reliable components with their top-loading words.
//!
//! Each word's embedding decomposes over the mixing columns with the
//! component row entries as weights, so sorting a component row descending
//! gives the words that load the axis most.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A reliable component labeled with its `k` top words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticAxis {
    pub language: String,
    /// 1-based position in the quality ranking.
    pub cluster_rank: usize,
    pub quality: f64,
    /// `(word, loading)` pairs with strictly non-increasing loadings.
    pub top_words: Vec<(String, f64)>,
}

/// The `k` words with the largest loadings on one component row, descending;
/// ties break toward the lower vocabulary index.
pub fn interpret_component(
    s_row: &[f64],
    vocab: &[String],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let n = s_row.len();
    if vocab.len() != n {
        return Err(Error::InvalidInput(format!(
            "row has {n} entries but vocabulary has {}",
            vocab.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "top-k must be in 1..={n}, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        s_row[b]
            .partial_cmp(&s_row[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(k)
        .map(|j| (vocab[j].clone(), s_row[j]))
        .collect())
}

/// Row-wise [`interpret_component`] over a reliable-axes matrix, preserving
/// cluster order.
pub fn interpret_all(
    reliable_axes: &DMatrix<f64>,
    vocab: &[String],
    k: usize,
) -> Result<Vec<Vec<(String, f64)>>> {
    (0..reliable_axes.nrows())
        .map(|i| {
            let row: Vec<f64> = reliable_axes.row(i).iter().copied().collect();
            interpret_component(&row, vocab, k)
        })
        .collect()
}

/// Assembles labeled axes for one language from the interpretation output
/// and the per-cluster qualities (already in rank order).
pub fn label_axes(
    language: &str,
    reliable_axes: &DMatrix<f64>,
    qualities: &[f64],
    vocab: &[String],
    k: usize,
) -> Result<Vec<SemanticAxis>> {
    if qualities.len() != reliable_axes.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} axis rows but {} quality scores",
            reliable_axes.nrows(),
            qualities.len()
        )));
    }
    let words = interpret_all(reliable_axes, vocab, k)?;
    Ok(words
        .into_iter()
        .zip(qualities)
        .enumerate()
        .map(|(i, (top_words, &quality))| SemanticAxis {
            language: language.to_owned(),
            cluster_rank: i + 1,
            quality,
            top_words,
        })
        .collect())
}

/// Aligned table of axes: one row per axis with rank, quality, then the top
/// words and loadings.
pub fn axes_to_tuples_tsv(axes: &[SemanticAxis]) -> String {
    let mut out = String::from("language\trank\tquality\twords\tloadings\n");
    for axis in axes {
        let words: Vec<&str> = axis.top_words.iter().map(|(w, _)| w.as_str()).collect();
        let scores: Vec<String> = axis.top_words.iter().map(|(_, s)| s.to_string()).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            axis.language,
            axis.cluster_rank,
            axis.quality,
            words.join(" "),
            scores.join(" ")
        ));
    }
    out
}
