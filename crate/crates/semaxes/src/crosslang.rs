//! Inter-language consistency: correlation significance tests over the
//! translation-aligned block, multiple-testing control, and cross-language
//! axis clustering.
//!
//! The null model treats two axis rows as independent isotropic direction
//! vectors, under which the squared correlation follows `Beta(1/2, (n-2)/2)`.
//! A family-wise (Bonferroni) level decides whether a cluster may exist at
//! all; the Benjamini-Hochberg step-up decides which further axes join one.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::exec;
use crate::icasso::component_similarity;

/// Pairwise axis similarities between two languages, computed over the first
/// `n_common` translation-aligned columns only.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSimilarity {
    pub lang_a: usize,
    pub lang_b: usize,
    pub n_common: usize,
    /// `axes_of_a x axes_of_b` absolute correlations in `[0, 1]`.
    pub values: DMatrix<f64>,
}

/// Computes the absolute-correlation matrix between the reliable axes of two
/// languages, restricted to the aligned common-word columns.
pub fn cross_similarity(
    lang_a: usize,
    lang_b: usize,
    s_a: &DMatrix<f64>,
    s_b: &DMatrix<f64>,
    n_common: usize,
) -> Result<CrossSimilarity> {
    if n_common < 3 {
        return Err(Error::InvalidInput(format!(
            "the significance test needs at least 3 aligned columns, got {n_common}"
        )));
    }
    if s_a.ncols() < n_common || s_b.ncols() < n_common {
        return Err(Error::InvalidInput(format!(
            "axis matrices have {} and {} columns, need at least {n_common}",
            s_a.ncols(),
            s_b.ncols()
        )));
    }
    let rows_a: Vec<Vec<f64>> = (0..s_a.nrows())
        .map(|i| s_a.row(i).columns_range(..n_common).iter().copied().collect())
        .collect();
    let rows_b: Vec<Vec<f64>> = (0..s_b.nrows())
        .map(|i| s_b.row(i).columns_range(..n_common).iter().copied().collect())
        .collect();
    let computed = exec::map_indexed(rows_a.len(), |i| -> Result<Vec<f64>> {
        rows_b
            .iter()
            .map(|rb| component_similarity(&rows_a[i], rb))
            .collect()
    });
    let mut values = DMatrix::zeros(rows_a.len(), rows_b.len());
    for (i, row) in computed.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(CrossSimilarity {
        lang_a,
        lang_b,
        n_common,
        values,
    })
}

/// Two-sided p-value of an observed absolute correlation `sigma` between two
/// independent isotropic direction vectors in `n` dimensions:
/// `P(|R| >= sigma)` with `R^2 ~ Beta(1/2, (n-2)/2)`.
pub fn correlation_pvalue(sigma: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidInput(format!(
            "similarity {sigma} outside [0, 1]"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "p-value undefined for n = {n} < 3"
        )));
    }
    if sigma == 0.0 {
        return Ok(1.0);
    }
    if sigma == 1.0 {
        return Ok(0.0);
    }
    // P(R^2 >= s^2) = I_{1-s^2}((n-2)/2, 1/2), evaluated on the small-tail
    // branch so values near zero keep full precision
    let b = (n as f64 - 2.0) / 2.0;
    Ok(beta_reg(b, 0.5, 1.0 - sigma * sigma).clamp(0.0, 1.0))
}

/// Inverts [`correlation_pvalue`] in `sigma` by bisection: the smallest
/// similarity whose p-value is at most `p_target`.
pub fn similarity_threshold(p_target: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "threshold undefined for n = {n} < 3"
        )));
    }
    if p_target >= 1.0 {
        return Ok(0.0);
    }
    if p_target <= 0.0 {
        return Ok(1.0);
    }
    let mut lo = 0.0f64; // p(lo) > target
    let mut hi = 1.0f64; // p(hi) <= target
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if correlation_pvalue(mid, n)? <= p_target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(hi)
}

/// Bonferroni-corrected per-test level `alpha_fp / n_tests`.
pub fn bonferroni_policy(alpha_fp: f64, n_tests: usize) -> Result<f64> {
    if n_tests == 0 {
        return Err(Error::InvalidInput("n_tests must be at least 1".into()));
    }
    if !(alpha_fp > 0.0 && alpha_fp < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 1), got {alpha_fp}"
        )));
    }
    Ok(alpha_fp / n_tests as f64)
}

/// Outcome of a Benjamini-Hochberg step-up pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BhSelection {
    /// Indices into the input p-value list, in ascending p order.
    pub rejected: Vec<usize>,
    /// Largest rejected p-value, or 0 when nothing is rejected.
    pub threshold: f64,
}

impl BhSelection {
    pub fn is_rejected(&self, index: usize) -> bool {
        self.rejected.contains(&index)
    }
}

/// Benjamini-Hochberg step-up: sorts ascending, finds the largest rank `i`
/// with `p_(i) <= i * alpha / m`, and rejects the first `i` hypotheses.
pub fn bh_fdr_select(pvals: &[f64], alpha_fd: f64) -> Result<BhSelection> {
    if !(alpha_fd > 0.0 && alpha_fd < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 1), got {alpha_fd}"
        )));
    }
    for (i, &p) in pvals.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "p-value {p} at index {i} outside [0, 1]"
            )));
        }
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        pvals[a]
            .partial_cmp(&pvals[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut cut = 0usize;
    for (rank0, &idx) in order.iter().enumerate() {
        let i = rank0 + 1;
        if pvals[idx] <= i as f64 * alpha_fd / m as f64 {
            cut = i;
        }
    }
    let rejected: Vec<usize> = order[..cut].to_vec();
    let threshold = if cut == 0 { 0.0 } else { pvals[order[cut - 1]] };
    Ok(BhSelection {
        rejected,
        threshold,
    })
}

/// The corrected levels and similarity cutoffs in force for one clustering
/// pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificancePolicy {
    pub alpha_fd: f64,
    pub alpha_fp: f64,
    pub n_tests: usize,
    pub n_common: usize,
    /// Benjamini-Hochberg effective per-test level `i* * alpha_fd / m` at
    /// the step-up cut (data-dependent; 0 when no link is significant).
    /// Rejection by BH is equivalent to `p <= corrected_fd`.
    pub corrected_fd: f64,
    /// Bonferroni per-test level `alpha_fp / n_tests`.
    pub corrected_fp: f64,
    /// Smallest similarity significant under the FDR rule, if any link is.
    pub sim_threshold_fd: Option<f64>,
    /// Smallest similarity significant under the FPR rule.
    pub sim_threshold_fp: f64,
}

/// A cross-language axis identified by `(language index, axis index)`.
pub type AxisId = (usize, usize);

/// Similarity and significance of one within-cluster link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStat {
    pub a: AxisId,
    pub b: AxisId,
    pub sigma: f64,
    pub p_value: f64,
}

/// Axes from distinct languages grouped by significant similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLanguageCluster {
    /// At most one axis per language, sorted by `(language, axis)`.
    pub members: Vec<AxisId>,
    /// All member pairs with their similarity and p-value.
    pub links: Vec<LinkStat>,
}

/// Clustering outcome plus the policy that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLanguageClustering {
    pub clusters: Vec<CrossLanguageCluster>,
    pub policy: SignificancePolicy,
    /// Total axis count per language index, for reporting.
    pub axis_counts: HashMap<usize, usize>,
}

struct Link {
    a: AxisId,
    b: AxisId,
    sigma: f64,
    p: f64,
}

/// Groups axes across languages. A new cluster is founded only by a pair
/// significant at the Bonferroni (FPR) level; remaining axes join an
/// existing cluster through any Benjamini-Hochberg-rejected link, strongest
/// links first, never giving a cluster two axes of one language.
pub fn cluster_across_languages(
    sims: &[CrossSimilarity],
    alpha_fd: f64,
    alpha_fp: f64,
    n_tests_override: Option<usize>,
) -> Result<CrossLanguageClustering> {
    if sims.is_empty() {
        return Err(Error::InvalidInput("no language pairs to cluster".into()));
    }
    let n_common = sims[0].n_common;
    let mut axis_counts: HashMap<usize, usize> = HashMap::new();
    let mut seen_pairs = std::collections::HashSet::new();
    for s in sims {
        if s.lang_a == s.lang_b {
            return Err(Error::InvalidInput(
                "cross-similarity must involve two distinct languages".into(),
            ));
        }
        if s.n_common != n_common {
            return Err(Error::InvalidInput(
                "all language pairs must share the aligned column count".into(),
            ));
        }
        let key = (s.lang_a.min(s.lang_b), s.lang_a.max(s.lang_b));
        if !seen_pairs.insert(key) {
            return Err(Error::InvalidInput(format!(
                "duplicate language pair {key:?}"
            )));
        }
        for (lang, count) in [(s.lang_a, s.values.nrows()), (s.lang_b, s.values.ncols())] {
            if let Some(&prev) = axis_counts.get(&lang) {
                if prev != count {
                    return Err(Error::InvalidInput(format!(
                        "language {lang} has {prev} axes in one pair and {count} in another"
                    )));
                }
            } else {
                axis_counts.insert(lang, count);
            }
        }
    }

    let mut links: Vec<Link> = Vec::new();
    for s in sims {
        for i in 0..s.values.nrows() {
            for j in 0..s.values.ncols() {
                let sigma = s.values[(i, j)];
                links.push(Link {
                    a: (s.lang_a, i),
                    b: (s.lang_b, j),
                    sigma,
                    p: correlation_pvalue(sigma, n_common)?,
                });
            }
        }
    }

    let n_tests = n_tests_override.unwrap_or_else(|| links.len().max(1));
    let corrected_fp = bonferroni_policy(alpha_fp, n_tests)?;
    let pvals: Vec<f64> = links.iter().map(|l| l.p).collect();
    let bh = bh_fdr_select(&pvals, alpha_fd)?;
    let mut bh_rejected = vec![false; links.len()];
    for &idx in &bh.rejected {
        bh_rejected[idx] = true;
    }

    let mut order: Vec<usize> = (0..links.len()).collect();
    order.sort_by(|&x, &y| {
        links[y]
            .sigma
            .partial_cmp(&links[x].sigma)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (links[x].a, links[x].b).cmp(&(links[y].a, links[y].b)))
    });

    // phase 1: found clusters from family-wise significant disjoint pairs
    let mut assigned: HashMap<AxisId, usize> = HashMap::new();
    let mut clusters: Vec<Vec<AxisId>> = Vec::new();
    for &idx in &order {
        let link = &links[idx];
        if link.p <= corrected_fp
            && !assigned.contains_key(&link.a)
            && !assigned.contains_key(&link.b)
        {
            assigned.insert(link.a, clusters.len());
            assigned.insert(link.b, clusters.len());
            clusters.push(vec![link.a, link.b]);
        }
    }

    // phase 2: attach free axes through FDR-significant links, to fixpoint
    loop {
        let mut changed = false;
        for &idx in &order {
            if !bh_rejected[idx] {
                continue;
            }
            let link = &links[idx];
            let (inside, outside) = match (assigned.get(&link.a), assigned.get(&link.b)) {
                (Some(&c), None) => (c, link.b),
                (None, Some(&c)) => (c, link.a),
                _ => continue,
            };
            if clusters[inside].iter().any(|m| m.0 == outside.0) {
                continue;
            }
            clusters[inside].push(outside);
            assigned.insert(outside, inside);
            changed = true;
        }
        if !changed {
            break;
        }
    }

    // assemble reports with every within-cluster link
    let sigma_of = |a: AxisId, b: AxisId| -> Option<f64> {
        for s in sims {
            if s.lang_a == a.0 && s.lang_b == b.0 {
                return Some(s.values[(a.1, b.1)]);
            }
            if s.lang_a == b.0 && s.lang_b == a.0 {
                return Some(s.values[(b.1, a.1)]);
            }
        }
        None
    };
    let mut out_clusters = Vec::with_capacity(clusters.len());
    for mut members in clusters {
        members.sort_unstable();
        let mut stats = Vec::new();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                if let Some(sigma) = sigma_of(a, b) {
                    stats.push(LinkStat {
                        a,
                        b,
                        sigma,
                        p_value: correlation_pvalue(sigma, n_common)?,
                    });
                }
            }
        }
        out_clusters.push(CrossLanguageCluster {
            members,
            links: stats,
        });
    }

    let sim_threshold_fp = similarity_threshold(corrected_fp, n_common)?;
    // effective BH per-test level: the step-up line at the last crossing
    let corrected_fd = if bh.rejected.is_empty() {
        0.0
    } else {
        bh.rejected.len() as f64 * alpha_fd / pvals.len() as f64
    };
    let sim_threshold_fd = if bh.rejected.is_empty() {
        None
    } else {
        Some(similarity_threshold(corrected_fd, n_common)?)
    };
    Ok(CrossLanguageClustering {
        clusters: out_clusters,
        policy: SignificancePolicy {
            alpha_fd,
            alpha_fp,
            n_tests,
            n_common,
            corrected_fd,
            corrected_fp,
            sim_threshold_fd,
            sim_threshold_fp,
        },
        axis_counts,
    })
}

/// Roll-up of a clustering pass in the shape of the detailed-results table:
/// cluster count, clustered-vector count and share, average cluster size,
/// corrected levels, and the minimum significant similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLanguageSummary {
    pub clusters_found: usize,
    pub clustered_vectors: usize,
    pub total_vectors: usize,
    pub clustered_vector_percent: f64,
    pub average_vectors_per_cluster: f64,
    pub alpha_fd: f64,
    pub corrected_alpha_fd: f64,
    pub alpha_fp: f64,
    pub corrected_alpha_fp: f64,
    pub n_tests: usize,
    pub min_significant_similarity_fdr: Option<f64>,
    pub min_significant_similarity_fpr: f64,
}

impl CrossLanguageClustering {
    pub fn summary(&self) -> CrossLanguageSummary {
        let clustered: usize = self.clusters.iter().map(|c| c.members.len()).sum();
        let total: usize = self.axis_counts.values().sum();
        let n_clusters = self.clusters.len();
        CrossLanguageSummary {
            clusters_found: n_clusters,
            clustered_vectors: clustered,
            total_vectors: total,
            clustered_vector_percent: if total == 0 {
                0.0
            } else {
                100.0 * clustered as f64 / total as f64
            },
            average_vectors_per_cluster: if n_clusters == 0 {
                0.0
            } else {
                clustered as f64 / n_clusters as f64
            },
            alpha_fd: self.policy.alpha_fd,
            corrected_alpha_fd: self.policy.corrected_fd,
            alpha_fp: self.policy.alpha_fp,
            corrected_alpha_fp: self.policy.corrected_fp,
            n_tests: self.policy.n_tests,
            min_significant_similarity_fdr: self.policy.sim_threshold_fd,
            min_significant_similarity_fpr: self.policy.sim_threshold_fp,
        }
    }
}

/// Histogram of one pair's similarities as TSV, with the top-5% quantile
/// (nearest rank) recorded on a comment line.
pub fn similarity_histogram_tsv(cross: &CrossSimilarity, bins: usize) -> String {
    let mut values: Vec<f64> = cross.values.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let top5 = if values.is_empty() {
        0.0
    } else {
        let rank = ((0.95 * values.len() as f64).ceil() as usize).clamp(1, values.len());
        values[rank - 1]
    };
    let mut counts = vec![0usize; bins];
    for &v in &values {
        let bin = ((v * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let mut out = String::new();
    out.push_str(&format!("# top5_similarity\t{top5}\n"));
    out.push_str("bin_start\tbin_end\tcount\n");
    for (i, c) in counts.iter().enumerate() {
        let lo = i as f64 / bins as f64;
        let hi = (i + 1) as f64 / bins as f64;
        out.push_str(&format!("{lo}\t{hi}\t{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_rows(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn duplicated_row_has_unit_similarity() {
        let s_a = gaussian_rows(3, 100, 1);
        let mut s_b = gaussian_rows(3, 100, 2);
        s_b.row_mut(1).copy_from(&s_a.row(2));
        let cs = cross_similarity(0, 1, &s_a, &s_b, 100).unwrap();
        assert!(cs.values[(2, 1)] > 1.0 - 1e-12);
    }

    #[test]
    fn gaussian_null_similarities_concentrate_near_zero() {
        let s_a = gaussian_rows(40, 6903, 3);
        let s_b = gaussian_rows(40, 6903, 4);
        let cs = cross_similarity(0, 1, &s_a, &s_b, 6903).unwrap();
        let mut vals: Vec<f64> = cs.values.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q95 = vals[(0.95 * vals.len() as f64).ceil() as usize - 1];
        assert!(q95 < 0.03, "95th percentile {q95:.4}");
    }

    #[test]
    fn cross_similarity_preconditions() {
        let s = gaussian_rows(2, 10, 5);
        assert!(cross_similarity(0, 1, &s, &s, 2).is_err());
        assert!(cross_similarity(0, 1, &s, &s, 11).is_err());
    }

    #[test]
    fn pvalue_boundaries() {
        assert_eq!(correlation_pvalue(0.0, 100).unwrap(), 1.0);
        assert_eq!(correlation_pvalue(1.0, 100).unwrap(), 0.0);
        assert!(correlation_pvalue(-0.1, 100).is_err());
        assert!(correlation_pvalue(1.1, 100).is_err());
        assert!(correlation_pvalue(0.5, 2).is_err());
    }

    #[test]
    fn pvalue_closed_forms() {
        // n = 4: R^2 ~ Beta(1/2, 1) so P(|R| >= s) = 1 - s
        for s in [0.1, 0.3, 0.7, 0.95] {
            assert_abs_diff_eq!(correlation_pvalue(s, 4).unwrap(), 1.0 - s, epsilon = 1e-12);
        }
        // n = 3: R^2 ~ Beta(1/2, 1/2) so P(|R| >= s) = 1 - (2/pi) asin(s)
        for s in [0.2f64, 0.5, 0.9] {
            let expect = 1.0 - 2.0 / std::f64::consts::PI * s.asin();
            assert_abs_diff_eq!(correlation_pvalue(s, 3).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn pvalue_monotone_in_sigma_and_n() {
        let sigmas = [0.01, 0.05, 0.1, 0.2, 0.4, 0.8];
        for n in [10usize, 50, 100, 1000, 6903] {
            for w in sigmas.windows(2) {
                let lo = correlation_pvalue(w[1], n).unwrap();
                let hi = correlation_pvalue(w[0], n).unwrap();
                assert!(lo < hi, "p not decreasing in sigma at n={n}");
            }
        }
        for &s in &sigmas {
            let ns = [10usize, 50, 100, 1000, 6903];
            for w in ns.windows(2) {
                let big = correlation_pvalue(s, w[1]).unwrap();
                let small = correlation_pvalue(s, w[0]).unwrap();
                assert!(big < small, "p not decreasing in n at sigma={s}");
            }
        }
    }

    #[test]
    fn paper_scale_fdr_cutoff_is_vanishingly_small() {
        let p = correlation_pvalue(0.1110, 6903).unwrap();
        assert!(p > 0.0 && p < 1e-15, "p = {p:e}");
    }

    #[test]
    fn threshold_inverts_pvalue() {
        for (target, n) in [(0.01, 100), (2.754821e-5, 6903), (0.3, 50), (1e-10, 500)] {
            let thr = similarity_threshold(target, n).unwrap();
            assert!(correlation_pvalue(thr, n).unwrap() <= target);
            if thr > 1e-9 {
                assert!(
                    correlation_pvalue(thr - 1e-9, n).unwrap() > target,
                    "threshold loose at ({target:e}, {n})"
                );
            }
        }
    }

    #[test]
    fn bonferroni_examples() {
        assert_abs_diff_eq!(bonferroni_policy(0.05, 1).unwrap(), 0.05, epsilon = 0.0);
        assert_abs_diff_eq!(
            bonferroni_policy(0.01, 363).unwrap(),
            2.754821e-5,
            epsilon = 1e-11
        );
        assert_abs_diff_eq!(bonferroni_policy(0.01, 100).unwrap(), 1e-4, epsilon = 1e-20);
        assert!(bonferroni_policy(0.01, 0).is_err());
        assert!(bonferroni_policy(1.5, 10).is_err());
    }

    #[test]
    fn bh_worked_example() {
        let pvals = [0.001, 0.008, 0.039, 0.041, 0.042, 0.06];
        let got = bh_fdr_select(&pvals, 0.05).unwrap();
        let mut rejected = got.rejected.clone();
        rejected.sort_unstable();
        assert_eq!(rejected, vec![0, 1]);
        assert_eq!(got.threshold, 0.008);
    }

    #[test]
    fn bh_boundaries() {
        let got = bh_fdr_select(&[1.0, 1.0, 1.0], 0.05).unwrap();
        assert!(got.rejected.is_empty());
        assert_eq!(got.threshold, 0.0);
        let got = bh_fdr_select(&[0.05], 0.05).unwrap();
        assert_eq!(got.rejected, vec![0]);
        assert!(bh_fdr_select(&[0.5, 1.2], 0.05).is_err());
    }

    /// Brute-force step-up straight from the definition.
    fn bh_oracle(pvals: &[f64], alpha: f64) -> Vec<usize> {
        let m = pvals.len();
        let mut sorted: Vec<(f64, usize)> =
            pvals.iter().copied().enumerate().map(|(i, p)| (p, i)).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best = 0;
        for i in 1..=m {
            if sorted[i - 1].0 <= i as f64 * alpha / m as f64 {
                best = i;
            }
        }
        let mut out: Vec<usize> = sorted[..best].iter().map(|&(_, i)| i).collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn bh_matches_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let m = rng.random_range(1..=200);
            let pvals: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            let alpha = rng.random_range(0.001..0.5);
            let mut got = bh_fdr_select(&pvals, alpha).unwrap().rejected;
            got.sort_unstable();
            assert_eq!(got, bh_oracle(&pvals, alpha));
        }
    }

    fn clustering_for(
        s_a: &DMatrix<f64>,
        s_b: &DMatrix<f64>,
        n_common: usize,
    ) -> CrossLanguageClustering {
        let cs = cross_similarity(0, 1, s_a, s_b, n_common).unwrap();
        cluster_across_languages(&[cs], 0.01, 0.01, None).unwrap()
    }

    #[test]
    fn shared_axis_forms_single_pair_cluster() {
        let s_a = gaussian_rows(4, 2000, 21);
        let mut s_b = gaussian_rows(4, 2000, 22);
        s_b.row_mut(3).copy_from(&s_a.row(0));
        let got = clustering_for(&s_a, &s_b, 2000);
        assert_eq!(got.clusters.len(), 1);
        assert_eq!(got.clusters[0].members, vec![(0, 0), (1, 3)]);
        assert_eq!(got.clusters[0].links.len(), 1);
        assert!(got.clusters[0].links[0].sigma > 0.999);
    }

    #[test]
    fn independent_axes_yield_no_clusters() {
        let s_a = gaussian_rows(6, 3000, 31);
        let s_b = gaussian_rows(6, 3000, 32);
        let got = clustering_for(&s_a, &s_b, 3000);
        assert!(
            got.clusters.is_empty(),
            "spurious clusters: {:?}",
            got.clusters
        );
    }

    #[test]
    fn fdr_extends_cluster_across_three_languages() {
        // language 1 axis 0 strongly matches language 0 axis 0 and language
        // 2 axis 1; the (0,0)-(2,1) link is weaker but still significant
        let n = 3000;
        let base = gaussian_rows(1, n, 41);
        let noise = |seed| gaussian_rows(1, n, seed);
        let mix = |w: f64, seed| -> DMatrix<f64> {
            let g = noise(seed);
            let mut out = base.clone() * w;
            out += g * (1.0 - w * w).sqrt();
            out
        };
        let mut s0 = gaussian_rows(2, n, 42);
        s0.row_mut(0).copy_from(&mix(0.9, 43).row(0));
        let mut s1 = gaussian_rows(2, n, 44);
        s1.row_mut(0).copy_from(&base.row(0));
        let mut s2 = gaussian_rows(2, n, 45);
        s2.row_mut(1).copy_from(&mix(0.9, 46).row(0));

        let cs01 = cross_similarity(0, 1, &s0, &s1, n).unwrap();
        let cs02 = cross_similarity(0, 2, &s0, &s2, n).unwrap();
        let cs12 = cross_similarity(1, 2, &s1, &s2, n).unwrap();
        let got = cluster_across_languages(&[cs01, cs02, cs12], 0.01, 0.01, None).unwrap();
        assert_eq!(got.clusters.len(), 1);
        assert_eq!(got.clusters[0].members, vec![(0, 0), (1, 0), (2, 1)]);
        // three members, three pairwise links
        assert_eq!(got.clusters[0].links.len(), 3);
    }

    #[test]
    fn cluster_invariants_hold() {
        let s_a = gaussian_rows(5, 2500, 51);
        let mut s_b = gaussian_rows(5, 2500, 52);
        s_b.row_mut(0).copy_from(&s_a.row(4));
        s_b.row_mut(2).copy_from(&s_a.row(1));
        let got = clustering_for(&s_a, &s_b, 2500);
        assert_eq!(got.clusters.len(), 2);
        for c in &got.clusters {
            assert!(c.members.len() >= 2);
            let mut langs: Vec<usize> = c.members.iter().map(|m| m.0).collect();
            langs.dedup();
            assert_eq!(langs.len(), c.members.len(), "one axis per language");
            // at least one founding link at the family-wise level
            assert!(c
                .links
                .iter()
                .any(|l| l.p_value <= got.policy.corrected_fp));
        }
        // thresholds are consistent when both levels are equal
        if let Some(fd) = got.policy.sim_threshold_fd {
            assert!(got.policy.sim_threshold_fp >= fd);
        }
    }

    #[test]
    fn axis_count_mismatch_rejected() {
        let s_a = gaussian_rows(3, 100, 61);
        let s_b = gaussian_rows(3, 100, 62);
        let s_c = gaussian_rows(2, 100, 63);
        let cs01 = cross_similarity(0, 1, &s_a, &s_b, 100).unwrap();
        // language 0 suddenly has 2 axes in the second pair
        let cs02 = cross_similarity(0, 2, &s_c, &s_b, 100).unwrap();
        assert!(cluster_across_languages(&[cs01, cs02], 0.01, 0.01, None).is_err());
    }

    #[test]
    fn summary_counts_add_up() {
        let s_a = gaussian_rows(4, 2000, 71);
        let mut s_b = gaussian_rows(4, 2000, 72);
        s_b.row_mut(1).copy_from(&s_a.row(1));
        let got = clustering_for(&s_a, &s_b, 2000);
        let sum = got.summary();
        assert_eq!(sum.clusters_found, 1);
        assert_eq!(sum.clustered_vectors, 2);
        assert_eq!(sum.total_vectors, 8);
        assert_abs_diff_eq!(sum.clustered_vector_percent, 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sum.average_vectors_per_cluster, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_marks_top_quantile() {
        let s_a = gaussian_rows(10, 500, 81);
        let s_b = gaussian_rows(10, 500, 82);
        let cs = cross_similarity(0, 1, &s_a, &s_b, 500).unwrap();
        let tsv = similarity_histogram_tsv(&cs, 20);
        assert!(tsv.starts_with("# top5_similarity\t"));
        let count: usize = tsv
            .lines()
            .skip(2)
            .map(|l| l.split('\t').nth(2).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(count, 100);
    }
}
