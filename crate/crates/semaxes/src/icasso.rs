//! Reliability clustering of independent components across runs.
//!
//! Components from `m` runs are compared pairwise with the absolute
//! uncentered correlation, clustered agglomeratively down to a target count,
//! and scored with the quality index (mean within-cluster similarity minus
//! mean similarity to everything outside). One representative component per
//! reliable cluster, its centrotype, survives into the axis matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ica::{self, IcaConfig, IcaResult};

/// Pairwise similarities of all `m * d_w` components, symmetric with a unit
/// diagonal. Flat index `run * d_w + component`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    components_per_run: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds from a dense row-major buffer; callers guarantee symmetry.
    fn from_raw(size: usize, components_per_run: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), size * size);
        Self {
            size,
            components_per_run,
            values,
        }
    }

    /// Builds directly from an explicit symmetric matrix (tests, oracles).
    pub fn from_dense(size: usize, components_per_run: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::InvalidInput(format!(
                "expected {size}x{size} similarity values"
            )));
        }
        for i in 0..size {
            for j in 0..size {
                let v = values[i * size + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "similarity ({i},{j}) = {v} outside [0,1]"
                    )));
                }
                if (v - values[j * size + i]).abs() > 0.0 {
                    return Err(Error::InvalidInput("similarity matrix not symmetric".into()));
                }
            }
        }
        Ok(Self::from_raw(size, components_per_run, values))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Flat index of component `comp` of run `run`.
    pub fn flat(&self, run: usize, comp: usize) -> usize {
        run * self.components_per_run + comp
    }

    /// Inverse of [`SimilarityMatrix::flat`].
    pub fn run_and_component(&self, flat: usize) -> (usize, usize) {
        (
            flat / self.components_per_run,
            flat % self.components_per_run,
        )
    }

    /// Dense copy for checkpointing.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.values)
    }

    pub fn components_per_run(&self) -> usize {
        self.components_per_run
    }
}

/// Absolute uncentered correlation of two component rows, in `[0, 1]`.
pub fn component_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "component lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput(
            "zero-norm component in similarity".into(),
        ));
    }
    Ok((dot.abs() / (na.sqrt() * nb.sqrt())).min(1.0))
}

fn component_rows(runs: &[IcaResult]) -> Result<Vec<Vec<f64>>> {
    let first = &runs[0];
    let (d_w, n) = first.components().shape();
    for r in runs {
        if r.components().shape() != (d_w, n) {
            return Err(Error::InvalidInput(
                "runs disagree on component dimensions".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(runs.len() * d_w);
    for r in runs {
        for i in 0..d_w {
            rows.push(r.component_row(i));
        }
    }
    Ok(rows)
}

fn similarity_upper_row(rows: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
    let size = rows.len();
    let mut out = Vec::with_capacity(size - i);
    for j in i..size {
        out.push(if i == j {
            1.0
        } else {
            component_similarity(&rows[i], &rows[j])?
        });
    }
    Ok(out)
}

fn assemble_similarity(
    d_w: usize,
    size: usize,
    upper: Vec<Result<Vec<f64>>>,
) -> Result<SimilarityMatrix> {
    let mut values = vec![0.0f64; size * size];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + off;
            values[i * size + j] = v;
            values[j * size + i] = v;
        }
    }
    Ok(SimilarityMatrix::from_raw(size, d_w, values))
}

/// Fills the full `md x md` similarity matrix over all run pairs. Each upper
/// triangle entry is computed once and mirrored.
pub fn build_similarity_matrix(runs: &[IcaResult]) -> Result<SimilarityMatrix> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no runs to compare".into()));
    }
    let d_w = runs[0].components().nrows();
    let rows = component_rows(runs)?;
    let upper = exec::map_indexed(rows.len(), |i| similarity_upper_row(&rows, i));
    assemble_similarity(d_w, rows.len(), upper)
}

/// Sequential fallback of [`build_similarity_matrix`]; same output bits.
pub fn build_similarity_matrix_seq(runs: &[IcaResult]) -> Result<SimilarityMatrix> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no runs to compare".into()));
    }
    let d_w = runs[0].components().nrows();
    let rows = component_rows(runs)?;
    let upper = exec::map_indexed_seq(rows.len(), |i| similarity_upper_row(&rows, i));
    assemble_similarity(d_w, rows.len(), upper)
}

/// Linkage rule for cluster-pair similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

/// Merges singletons bottom-up until `target_clusters` remain, always taking
/// the pair with maximum linkage similarity; ties resolve to the lowest flat
/// index pair. Returns the partition with each cluster's members sorted.
pub fn agglomerate(
    sim: &SimilarityMatrix,
    target_clusters: usize,
    linkage: Linkage,
) -> Result<Vec<Vec<usize>>> {
    let n = sim.size();
    if target_clusters == 0 || target_clusters > n {
        return Err(Error::InvalidInput(format!(
            "target_clusters must be in 1..={n}, got {target_clusters}"
        )));
    }
    // cluster slot = smallest member flat index; work matrix holds linkage
    // similarities between active slots
    let mut work = sim.values.clone();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<bool> = vec![true; n];

    for _ in target_clusters..n {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let s = work[i * n + j];
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("more than one active cluster");
        let (wi, wj) = (members[i].len() as f64, members[j].len() as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let sik = work[i * n + k];
            let sjk = work[j * n + k];
            let merged = match linkage {
                Linkage::Average => (wi * sik + wj * sjk) / (wi + wj),
                Linkage::Single => sik.max(sjk),
                Linkage::Complete => sik.min(sjk),
            };
            work[i * n + k] = merged;
            work[k * n + i] = merged;
        }
        active[j] = false;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
    }

    let mut out: Vec<Vec<usize>> = members
        .into_iter()
        .zip(active)
        .filter_map(|(mut m, keep)| {
            if keep {
                m.sort_unstable();
                Some(m)
            } else {
                None
            }
        })
        .collect();
    out.sort_by_key(|m| m[0]);
    Ok(out)
}

/// Quality index of a cluster: mean within-cluster similarity minus mean
/// similarity between the cluster and all outside components. The second
/// term is zero when the cluster covers everything.
pub fn quality_index(members: &[usize], sim: &SimilarityMatrix) -> f64 {
    let size = members.len();
    debug_assert!(size > 0);
    let mut inside = vec![false; sim.size()];
    for &m in members {
        inside[m] = true;
    }
    let outside = sim.size() - size;
    let mut intra = 0.0f64;
    let mut inter = 0.0f64;
    for &i in members {
        let row = &sim.values[i * sim.size..(i + 1) * sim.size];
        for (s, is_member) in row.iter().zip(&inside) {
            if *is_member {
                intra += s;
            } else {
                inter += s;
            }
        }
    }
    let intra_mean = intra / (size * size) as f64;
    let inter_mean = if outside == 0 {
        0.0
    } else {
        inter / (size * outside) as f64
    };
    intra_mean - inter_mean
}

/// The member with maximum total similarity to its cluster mates; ties fall
/// to the lowest flat index.
pub fn centrotype(members: &[usize], sim: &SimilarityMatrix) -> usize {
    debug_assert!(!members.is_empty());
    let mut best = members[0];
    let mut best_total = f64::NEG_INFINITY;
    for &i in members {
        let total: f64 = members
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| sim.get(i, j))
            .sum();
        if total > best_total || (total == best_total && i < best) {
            best_total = total;
            best = i;
        }
    }
    best
}

/// One cluster of component instances with its reliability score.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCluster {
    pub members: Vec<usize>,
    pub quality: f64,
    pub centrotype: usize,
    /// The centrotype's component row (length n).
    pub centroid_row: Vec<f64>,
}

/// Settings for one reliability-clustering pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcassoConfig {
    pub seeds: Vec<u64>,
    pub retain: usize,
    pub target_clusters: usize,
    pub quality_threshold: f64,
    pub linkage: Linkage,
    pub ica: IcaConfig,
}

/// Clusters of all `md` components sorted by descending quality, the runs
/// they came from, and the reliable-axis matrix (one centrotype row per
/// cluster with quality above the threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct IcassoResult {
    pub clusters: Vec<ComponentCluster>,
    pub runs: Vec<IcaResult>,
    pub reliable_axes: DMatrix<f64>,
    pub quality_threshold: f64,
    pub components_per_run: usize,
}

impl IcassoResult {
    /// Scores and ranks an existing partition; shared by [`run_icasso`] and
    /// the checkpointing pipeline.
    pub fn from_runs_and_similarity(
        runs: Vec<IcaResult>,
        sim: &SimilarityMatrix,
        target_clusters: usize,
        quality_threshold: f64,
        linkage: Linkage,
    ) -> Result<Self> {
        let partition = agglomerate(sim, target_clusters, linkage)?;
        let d_w = runs[0].components().nrows();
        let n = runs[0].components().ncols();
        let mut clusters: Vec<ComponentCluster> = partition
            .into_iter()
            .map(|members| {
                let quality = quality_index(&members, sim);
                let center = centrotype(&members, sim);
                let (run, comp) = sim.run_and_component(center);
                let centroid_row = runs[run].component_row(comp);
                ComponentCluster {
                    members,
                    quality,
                    centrotype: center,
                    centroid_row,
                }
            })
            .collect();
        clusters.sort_by(|a, b| {
            b.quality
                .partial_cmp(&a.quality)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.centrotype.cmp(&b.centrotype))
        });

        let reliable: Vec<&ComponentCluster> = clusters
            .iter()
            .filter(|c| c.quality > quality_threshold)
            .collect();
        let mut reliable_axes = DMatrix::zeros(reliable.len(), n);
        for (r, cluster) in reliable.iter().enumerate() {
            for (c, v) in cluster.centroid_row.iter().enumerate() {
                reliable_axes[(r, c)] = *v;
            }
        }
        Ok(Self {
            clusters,
            runs,
            reliable_axes,
            quality_threshold,
            components_per_run: d_w,
        })
    }

    /// Number of clusters passing the quality threshold.
    pub fn reliable_count(&self) -> usize {
        self.reliable_axes.nrows()
    }

    /// Qualities of the reliable clusters, in axis order.
    pub fn reliable_qualities(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .filter(|c| c.quality > self.quality_threshold)
            .map(|c| c.quality)
            .collect()
    }
}

/// Runs the full reliability pass: `m` seeded ICA runs, the cross-run
/// similarity matrix, clustering, and per-cluster scores.
pub fn run_icasso(x: &DMatrix<f64>, config: &IcassoConfig) -> Result<IcassoResult> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    let runs = ica::run_many(x, config.retain, &config.seeds, &config.ica)?;
    let sim = build_similarity_matrix(&runs)?;
    IcassoResult::from_runs_and_similarity(
        runs,
        &sim,
        config.target_clusters,
        config.quality_threshold,
        config.linkage,
    )
}

/// Serializable cluster report mirroring the emitted JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub runs: usize,
    pub components_per_run: usize,
    pub quality_threshold: f64,
    pub clusters: Vec<ClusterReportEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReportEntry {
    pub rank: usize,
    pub quality: f64,
    pub reliable: bool,
    pub centrotype: MemberRef,
    pub members: Vec<MemberRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberRef {
    pub run: usize,
    pub component: usize,
}

impl IcassoResult {
    pub fn cluster_report(&self) -> ClusterReport {
        let d_w = self.components_per_run;
        let to_ref = |flat: usize| MemberRef {
            run: flat / d_w,
            component: flat % d_w,
        };
        ClusterReport {
            runs: self.runs.len(),
            components_per_run: d_w,
            quality_threshold: self.quality_threshold,
            clusters: self
                .clusters
                .iter()
                .enumerate()
                .map(|(rank, c)| ClusterReportEntry {
                    rank: rank + 1,
                    quality: c.quality,
                    reliable: c.quality > self.quality_threshold,
                    centrotype: to_ref(c.centrotype),
                    members: c.members.iter().copied().map(to_ref).collect(),
                })
                .collect(),
        }
    }

    /// Quality-curve data: `rank<TAB>quality` per cluster, best first.
    pub fn quality_curve_tsv(&self) -> String {
        let mut out = String::from("rank\tquality\n");
        for (rank, c) in self.clusters.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", rank + 1, c.quality));
        }
        out
    }
}
