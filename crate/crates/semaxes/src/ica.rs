//! Centering/whitening and FastICA with symmetric decorrelation.
//!
//! One decomposition `X = A*S + mean` is produced per random seed. Runs are
//! bitwise deterministic given `(X, retain, seed, config)` regardless of how
//! many threads execute them, which is what makes downstream reliability
//! clustering meaningful.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Centered, PCA-whitened data together with the maps between the original
/// and whitened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedData {
    z: DMatrix<f64>,
    whitening_map: DMatrix<f64>,
    dewhitening_map: DMatrix<f64>,
    mean: DVector<f64>,
}

impl WhitenedData {
    pub(crate) fn from_parts(
        z: DMatrix<f64>,
        whitening_map: DMatrix<f64>,
        dewhitening_map: DMatrix<f64>,
        mean: DVector<f64>,
    ) -> Self {
        Self {
            z,
            whitening_map,
            dewhitening_map,
            mean,
        }
    }

    /// The whitened `d_w x n` matrix with identity sample covariance.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn whitening_map(&self) -> &DMatrix<f64> {
        &self.whitening_map
    }

    pub fn dewhitening_map(&self) -> &DMatrix<f64> {
        &self.dewhitening_map
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn retained(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.z.ncols()
    }
}

/// Contrast nonlinearity for the fixed-point update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// `g(u) = tanh(u)`, the log-cosh contrast.
    #[default]
    LogCosh,
    /// `g(u) = u * exp(-u^2/2)`, the Gaussian contrast.
    Exp,
    /// `g(u) = u^3`, the kurtosis contrast.
    Cube,
}

/// FastICA iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub nonlinearity: Nonlinearity,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            nonlinearity: Nonlinearity::LogCosh,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

/// One FastICA decomposition: mixing matrix `A` (d x d_w), component matrix
/// `S` (d_w x n), and the run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaResult {
    a: DMatrix<f64>,
    s: DMatrix<f64>,
    seed: u64,
    converged: bool,
    iterations: usize,
}

impl IcaResult {
    pub(crate) fn from_parts(
        a: DMatrix<f64>,
        s: DMatrix<f64>,
        seed: u64,
        converged: bool,
        iterations: usize,
    ) -> Self {
        Self {
            a,
            s,
            seed,
            converged,
            iterations,
        }
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Copies component row `i` into a contiguous vector.
    pub fn component_row(&self, i: usize) -> Vec<f64> {
        self.s.row(i).iter().copied().collect()
    }
}

/// Removes the column mean and projects onto the top `retain` principal
/// directions scaled to unit sample variance (denominator `n - 1`).
pub fn center_and_whiten(x: &DMatrix<f64>, retain: usize) -> Result<WhitenedData> {
    let (d, n) = x.shape();
    if retain == 0 || retain > d {
        return Err(Error::InvalidInput(format!(
            "retain must be in 1..={d}, got {retain}"
        )));
    }
    if n <= retain {
        return Err(Error::InvalidInput(format!(
            "need more than {retain} observations, got {n}"
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("data matrix must be finite".into()));
    }

    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut whitening = DMatrix::zeros(retain, d);
    let mut dewhitening = DMatrix::zeros(d, retain);
    for (rank, &idx) in order.iter().take(retain).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda < EIGENVALUE_FLOOR {
            return Err(Error::RankDeficient {
                index: rank,
                value: lambda,
                min: EIGENVALUE_FLOOR,
            });
        }
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        // fix the eigenvector sign: largest-magnitude entry positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        let scale = lambda.sqrt();
        whitening.row_mut(rank).copy_from(&(v.transpose() / scale));
        dewhitening.column_mut(rank).copy_from(&(&v * scale));
    }

    let z = &whitening * &centered;
    Ok(WhitenedData {
        z,
        whitening_map: whitening,
        dewhitening_map: dewhitening,
        mean,
    })
}

/// Runs the symmetric fixed-point iteration on whitened data.
///
/// The returned rotation maximizes non-Gaussianity of the component rows;
/// `converged = false` means the tolerance was not met within `max_iter`
/// (reported, not fatal). Component rows are sign-fixed to non-negative
/// skewness so downstream word rankings are stable.
pub fn fastica(z: &WhitenedData, seed: u64, config: &IcaConfig) -> Result<IcaResult> {
    if config.max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    if config.tol <= 0.0 || config.tol.is_nan() {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let d_w = z.retained();
    let n = z.n_samples();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<f64> = (0..d_w * d_w)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut w = symmetric_orthonormalize(&DMatrix::from_vec(d_w, d_w, init))?;

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let mut u = &w * &z.z;
        let mut g_prime_mean = DVector::zeros(d_w);
        apply_contrast(config.nonlinearity, &mut u, &mut g_prime_mean);
        let mut w_next = (&u * z.z.transpose()) / n as f64;
        for i in 0..d_w {
            let gp = g_prime_mean[i];
            for j in 0..d_w {
                w_next[(i, j)] -= gp * w[(i, j)];
            }
        }
        let w_next = symmetric_orthonormalize(&w_next)?;
        if !w_next.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(
                "unmixing matrix became non-finite during iteration".into(),
            ));
        }
        let mut delta = 0.0f64;
        for i in 0..d_w {
            let dot: f64 = w_next.row(i).dot(&w.row(i));
            delta = delta.max((dot.abs() - 1.0).abs());
        }
        w = w_next;
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let mut s = &w * &z.z;
    let mut a = z.dewhitening_map() * w.transpose();
    // skewness-based sign canonicalization, applied to (row of S, column of A)
    for i in 0..d_w {
        let skew: f64 = s.row(i).iter().map(|v| v * v * v).sum();
        if skew < 0.0 {
            s.row_mut(i).neg_mut();
            a.column_mut(i).neg_mut();
        }
    }
    if !s.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("component matrix is non-finite".into()));
    }

    Ok(IcaResult {
        a,
        s,
        seed,
        converged,
        iterations,
    })
}

/// Whitens once and runs [`fastica`] for every seed, in parallel when the
/// `parallel` feature is on. Results come back in seed order with content
/// independent of the schedule.
pub fn run_many(
    x: &DMatrix<f64>,
    retain: usize,
    seeds: &[u64],
    config: &IcaConfig,
) -> Result<Vec<IcaResult>> {
    let unique: HashSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(Error::InvalidInput("seeds must be distinct".into()));
    }
    let white = center_and_whiten(x, retain)?;
    exec::map_indexed(seeds.len(), |k| fastica(&white, seeds[k], config))
        .into_iter()
        .collect()
}

fn apply_contrast(nl: Nonlinearity, u: &mut DMatrix<f64>, g_prime_mean: &mut DVector<f64>) {
    let n = u.ncols() as f64;
    let d_w = u.nrows();
    let mut sums = vec![0.0f64; d_w];
    match nl {
        Nonlinearity::LogCosh => {
            for j in 0..u.ncols() {
                for i in 0..d_w {
                    let t = u[(i, j)].tanh();
                    u[(i, j)] = t;
                    sums[i] += 1.0 - t * t;
                }
            }
        }
        Nonlinearity::Exp => {
            for j in 0..u.ncols() {
                for i in 0..d_w {
                    let v = u[(i, j)];
                    let e = (-0.5 * v * v).exp();
                    u[(i, j)] = v * e;
                    sums[i] += (1.0 - v * v) * e;
                }
            }
        }
        Nonlinearity::Cube => {
            for j in 0..u.ncols() {
                for i in 0..d_w {
                    let v = u[(i, j)];
                    u[(i, j)] = v * v * v;
                    sums[i] += 3.0 * v * v;
                }
            }
        }
    }
    for i in 0..d_w {
        g_prime_mean[i] = sums[i] / n;
    }
}

/// Replaces `M` with `(M M^T)^{-1/2} M`, the closest matrix with
/// orthonormal rows.
fn symmetric_orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    let k = m.nrows();
    let mut inv_sqrt = DMatrix::zeros(k, k);
    for idx in 0..k {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::Numerical(format!(
                "degenerate candidate in symmetric decorrelation (eigenvalue {lambda:.3e})"
            )));
        }
        let v = eig.eigenvectors.column(idx);
        let w = 1.0 / lambda.sqrt();
        for r in 0..k {
            for c in 0..k {
                inv_sqrt[(r, c)] += w * v[r] * v[c];
            }
        }
    }
    Ok(inv_sqrt * m)
}
