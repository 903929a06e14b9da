//! Synthetic ground-truth data: known sources, known mixings, optionally
//! shared sources between datasets. This module is the independent oracle
//! behind most of the test suite, and also powers the `synth` CLI command
//! for demo fixtures.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assignment::max_value_assignment;
use crate::error::{Error, Result};
use crate::exec;

/// Marginal law of the source rows, all scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceLaw {
    /// Heavy-tailed; the default because it guarantees identifiability.
    #[default]
    Laplace,
    Uniform,
    /// Symmetric two-component Gaussian mixture (sub-Gaussian).
    Mixture,
}

/// How to draw each dataset's mixing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Mixing {
    /// `X = S` exactly (useful in fixtures).
    Identity,
    /// Gaussian entries, resampled until the condition number fits.
    Random { max_condition: f64 },
}

impl Default for Mixing {
    fn default() -> Self {
        Mixing::Random {
            max_condition: 10.0,
        }
    }
}

/// Source rows copied bit-identically from dataset `from` into dataset `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedRows {
    pub from: usize,
    pub to: usize,
    pub rows: Vec<usize>,
}

/// Full description of a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub datasets: usize,
    pub dim: usize,
    pub samples: usize,
    pub law: SourceLaw,
    pub mixing: Mixing,
    pub shared: Vec<SharedRows>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// One generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub x: DMatrix<f64>,
    pub mixing: DMatrix<f64>,
    pub sources: DMatrix<f64>,
}

/// A one-to-one component matching with its per-pair |correlation| scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatch {
    /// `assignment[i]` is the truth row matched to estimated row `i`.
    pub assignment: Vec<usize>,
    /// `scores[i]` is `|corr|` of estimated row `i` and its matched row.
    pub scores: Vec<f64>,
    pub mean_abs_corr: f64,
}

const MIXING_ATTEMPTS: usize = 100;

/// Derives an independent stream seed; used so parallel chunks and datasets
/// draw from disjoint deterministic streams.
pub(crate) fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_source(law: SourceLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        SourceLaw::Laplace => {
            let u: f64 = rng.random_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
        }
        SourceLaw::Uniform => {
            let lim = 3.0f64.sqrt();
            rng.random_range(-lim..lim)
        }
        SourceLaw::Mixture => {
            // 0.5*N(-mu, s^2) + 0.5*N(mu, s^2) with mu^2 + s^2 = 1
            let s = 0.5f64;
            let mu = (1.0 - s * s).sqrt();
            let z: f64 = StandardNormal.sample(rng);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * mu + s * z
        }
    }
}

/// Generates all datasets of a scenario. Deterministic per seed.
pub fn generate(scenario: &SyntheticScenario) -> Result<Vec<SyntheticDataset>> {
    let d = scenario.dim;
    let n = scenario.samples;
    if scenario.datasets == 0 {
        return Err(Error::InvalidInput("need at least one dataset".into()));
    }
    if d < 2 {
        return Err(Error::InvalidInput("dim must be at least 2".into()));
    }
    if n < 10 * d {
        return Err(Error::InvalidInput(format!(
            "need at least 10*dim = {} samples, got {n}",
            10 * d
        )));
    }
    if scenario.noise_sigma < 0.0 || scenario.noise_sigma.is_nan() {
        return Err(Error::InvalidInput("noise_sigma must be >= 0".into()));
    }
    for s in &scenario.shared {
        if s.from == s.to || s.from >= scenario.datasets || s.to >= scenario.datasets {
            return Err(Error::InvalidInput(format!(
                "shared rows reference datasets {}..{} out of {}",
                s.from, s.to, scenario.datasets
            )));
        }
        if s.rows.iter().any(|&r| r >= d) {
            return Err(Error::InvalidInput("shared row index out of range".into()));
        }
    }

    let mut sources: Vec<DMatrix<f64>> = (0..scenario.datasets)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scenario.seed, 1000 + k as u64));
            DMatrix::from_fn(d, n, |_, _| sample_source(scenario.law, &mut rng))
        })
        .collect();
    for share in &scenario.shared {
        for &row in &share.rows {
            let src = sources[share.from].row(row).clone_owned();
            sources[share.to].row_mut(row).copy_from(&src);
        }
    }

    let mut out = Vec::with_capacity(scenario.datasets);
    for (k, s) in sources.into_iter().enumerate() {
        let a = match scenario.mixing {
            Mixing::Identity => DMatrix::identity(d, d),
            Mixing::Random { max_condition } => {
                draw_conditioned_mixing(d, max_condition, mix_seed(scenario.seed, 2000 + k as u64))?
            }
        };
        let mut x = &a * &s;
        if scenario.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scenario.seed, 3000 + k as u64));
            for v in x.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += scenario.noise_sigma * g;
            }
        }
        out.push(SyntheticDataset {
            x,
            mixing: a,
            sources: s,
        });
    }
    Ok(out)
}

/// Haar-ish random orthogonal factor via sign-corrected QR of a Gaussian.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Proposes `U diag(s) V^T` with singular values inside `[1, max_condition]`
/// and verifies the realized condition number, resampling on failure. Bounds
/// below 1 are unsatisfiable and error out after the attempt budget.
fn draw_conditioned_mixing(d: usize, max_condition: f64, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = max_condition.max(1.0);
    for _ in 0..MIXING_ATTEMPTS {
        let u = random_orthogonal(d, &mut rng);
        let v = random_orthogonal(d, &mut rng);
        let singulars = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                rng.random_range(1.0..=hi)
            } else {
                0.0
            }
        });
        let a = &u * singulars * v.transpose();
        let sv = a.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if smin > 0.0 && smax / smin <= max_condition {
            return Ok(a);
        }
    }
    Err(Error::Numerical(format!(
        "no {d}x{d} mixing matrix with condition <= {max_condition} in {MIXING_ATTEMPTS} draws"
    )))
}

/// Pearson correlation of two equal-length slices.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    let cov = sab - sa * sb / n;
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    cov / (va.sqrt() * vb.sqrt())
}

/// Matches estimated component rows to true source rows one-to-one,
/// maximizing the total |Pearson correlation| (exact optimal assignment).
pub fn match_components(s_est: &DMatrix<f64>, s_true: &DMatrix<f64>) -> Result<ComponentMatch> {
    let r = s_est.nrows();
    if s_true.nrows() != r {
        return Err(Error::InvalidInput(format!(
            "row counts differ: {r} vs {}",
            s_true.nrows()
        )));
    }
    if s_est.ncols() != s_true.ncols() {
        return Err(Error::InvalidInput("column counts differ".into()));
    }
    if r == 0 {
        return Ok(ComponentMatch {
            assignment: vec![],
            scores: vec![],
            mean_abs_corr: 0.0,
        });
    }
    let est_rows: Vec<Vec<f64>> = (0..r).map(|i| s_est.row(i).iter().copied().collect()).collect();
    let true_rows: Vec<Vec<f64>> =
        (0..r).map(|i| s_true.row(i).iter().copied().collect()).collect();
    let mut value = vec![0.0f64; r * r];
    for i in 0..r {
        for j in 0..r {
            let c = pearson(&est_rows[i], &true_rows[j]).abs();
            value[i * r + j] = if c.is_finite() { c } else { 0.0 };
        }
    }
    let assignment = max_value_assignment(&value, r);
    let scores: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| value[i * r + j])
        .collect();
    let mean = scores.iter().sum::<f64>() / r as f64;
    Ok(ComponentMatch {
        assignment,
        scores,
        mean_abs_corr: mean,
    })
}

/// Counts how many of `samples` absolute Pearson correlations between two
/// independent standard normal vectors of length `n` reach `threshold`.
///
/// This is the Monte Carlo null for the correlation significance test: a
/// plain simulation of the quantity under test, deterministic per seed and
/// independent of the analytic p-value path.
pub fn null_abs_corr_exceed_count(n: usize, threshold: f64, samples: u64, seed: u64) -> u64 {
    assert!(n >= 3, "correlation null needs n >= 3");
    const CHUNK: u64 = 2048;
    let chunks = samples.div_ceil(CHUNK) as usize;
    exec::sum_counts(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, c as u64));
        let todo = CHUNK.min(samples - c as u64 * CHUNK);
        let mut x = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut count = 0u64;
        for _ in 0..todo {
            for v in x.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for v in y.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            if pearson(&x, &y).abs() >= threshold {
                count += 1;
            }
        }
        count
    })
}

/// Same law as [`null_abs_corr_exceed_count`] at half the generation cost.
///
/// Conditioned on the first vector, the correlation of two independent
/// isotropic Gaussian vectors has the same distribution against any fixed
/// unit vector of the centered subspace; with `u = (e1 - e2)/sqrt(2)` it is
/// `(y1 - y2) / (sqrt(2) * ||y - mean(y)||)`, so only one vector needs to be
/// drawn. The reduction uses nothing beyond the rotational symmetry of the
/// null itself (see the unit test pitting it against the two-vector form).
pub fn null_abs_corr_exceed_count_reduced(
    n: usize,
    threshold: f64,
    samples: u64,
    seed: u64,
) -> u64 {
    assert!(n >= 3, "correlation null needs n >= 3");
    const CHUNK: u64 = 2048;
    let chunks = samples.div_ceil(CHUNK) as usize;
    exec::sum_counts(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, c as u64));
        let todo = CHUNK.min(samples - c as u64 * CHUNK);
        let mut count = 0u64;
        for _ in 0..todo {
            let y1: f64 = StandardNormal.sample(&mut rng);
            let y2: f64 = StandardNormal.sample(&mut rng);
            let mut sum = y1 + y2;
            let mut sumsq = y1 * y1 + y2 * y2;
            for _ in 2..n {
                let v: f64 = StandardNormal.sample(&mut rng);
                sum += v;
                sumsq += v * v;
            }
            let centered_norm2 = sumsq - sum * sum / n as f64;
            let r = (y1 - y2) / (2.0 * centered_norm2).sqrt();
            if r.abs() >= threshold {
                count += 1;
            }
        }
        count
    })
}
