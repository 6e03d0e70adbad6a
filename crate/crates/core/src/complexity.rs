//! Numerical diagnostics for the capacity of path-norm balls
//! `G_R = { f_theta : ||theta||_P <= R }`.
//!
//! The Gaussian complexity `E sup_{f in G_R} (1/n) sum xi_i f(x_i)` is not computed
//! exactly. It is bracketed by a coordinate lower estimate (restricting the sup to
//! single neurons with `w = +-e_j`) and the l_inf surrogate
//! `2R E ||(1/n) sum xi_i x_i||_inf` that the closed-form bound is derived from.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::{mean_stderr, ols_slope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Upper,
    CoordinateLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub kind: SurrogateKind,
    pub seed: u64,
}

/// `2R sqrt(2 ln d / n)`; zero when `d = 1`.
pub fn gaussian_bound(radius: f64, d: usize, n: usize) -> f64 {
    if d <= 1 || n == 0 {
        return 0.0;
    }
    2.0 * radius * (2.0 * (d as f64).ln() / n as f64).sqrt()
}

/// Per-trial values of both surrogates on the same Gaussian draws.
pub fn gaussian_surrogate_samples(
    data: &Dataset,
    radius: f64,
    trials: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let x = data.x();
    let (n, d) = x.shape();
    let relu_pos = x.map(|v| v.max(0.0));
    let relu_neg = x.map(|v| (-v).max(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut upper = Vec::with_capacity(trials);
    let mut lower = Vec::with_capacity(trials);
    for _ in 0..trials {
        let xi = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let avg = x.tr_mul(&xi) / n as f64;
        upper.push(2.0 * radius * avg.amax());
        let pos = relu_pos.tr_mul(&xi) / n as f64;
        let neg = relu_neg.tr_mul(&xi) / n as f64;
        let best = (0..d).fold(0.0f64, |m, j| m.max(pos[j].abs()).max(neg[j].abs()));
        lower.push(radius * best);
    }
    (upper, lower)
}

/// Monte-Carlo estimates `(upper, coordinate_lower)` over `trials` Gaussian draws.
pub fn gaussian_complexity_mc(
    data: &Dataset,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<(ComplexityEstimate, ComplexityEstimate)> {
    if trials < 2 {
        return Err(Error::domain(format!("need at least 2 trials, got {trials}")));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("radius must be finite and >= 0, got {radius}")));
    }
    let (upper, lower) = gaussian_surrogate_samples(data, radius, trials, seed);
    let estimate = |values: &[f64], kind| {
        let (mean, stderr) = mean_stderr(values);
        ComplexityEstimate {
            mean,
            stderr,
            trials,
            kind,
            seed,
        }
    };
    Ok((
        estimate(&upper, SurrogateKind::Upper),
        estimate(&lower, SurrogateKind::CoordinateLower),
    ))
}

/// Metric-entropy exponent `2d / (d + 2)` of the unit path-norm ball.
pub fn entropy_exponent(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 + 2.0)
}

/// `lambda R + 3 R^2 / m`.
pub fn regularization_bound(r_target: f64, lambda: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("width m must be >= 1"));
    }
    if r_target < 0.0 || lambda < 0.0 {
        return Err(Error::domain("radius and lambda must be >= 0"));
    }
    Ok(lambda * r_target + 3.0 * r_target * r_target / m as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRow {
    pub eps: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringProbe {
    pub dim: usize,
    pub rows: Vec<PackingRow>,
    /// Slope of `log(count)` against `log(1/eps)`. Packing numbers lower-bound
    /// covering numbers, so this estimates the covering exponent from below.
    pub slope: f64,
    pub exponent: f64,
    pub sample_points: usize,
    pub neuron_samples: usize,
    pub seed: u64,
}

/// Greedy packing count of the rows of `points` at separation `eps` in the empirical
/// L2 metric `sqrt(mean((f - g)^2))`. Rows are visited in order.
pub fn greedy_packing_count(points: &DMatrix<f64>, eps: f64) -> usize {
    let rows = row_vectors(points);
    let mut centers = Vec::new();
    extend_packing(&rows, &mut centers, eps * eps * points.ncols() as f64);
    centers.len()
}

/// Packing counts along a strictly decreasing grid. The packing at each scale is
/// grown from the one at the previous (larger) scale, which is still a valid packing,
/// so counts never decrease as `eps` shrinks.
pub fn nested_packing_counts(points: &DMatrix<f64>, eps_grid: &[f64]) -> Result<Vec<usize>> {
    if eps_grid.iter().any(|&e| e.is_nan() || e <= 0.0) || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Grid);
    }
    let rows = row_vectors(points);
    let mut centers = Vec::new();
    Ok(eps_grid
        .iter()
        .map(|&eps| {
            extend_packing(&rows, &mut centers, eps * eps * points.ncols() as f64);
            centers.len()
        })
        .collect())
}

fn row_vectors(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    points.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Add every row farther than `sqrt(limit)` (unnormalized) from all current centers.
fn extend_packing(rows: &[Vec<f64>], centers: &mut Vec<usize>, limit: f64) {
    'outer: for (i, row) in rows.iter().enumerate() {
        for &c in centers.iter() {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(&rows[c]) {
                acc += (a - b) * (a - b);
                if acc > limit {
                    break;
                }
            }
            if acc <= limit {
                continue 'outer;
            }
        }
        centers.push(i);
    }
}

/// Responses of `neuron_samples` random signed unit-l1 neurons (rows) on
/// `sample_points` inputs drawn uniformly from `[-1, 1]^d` (columns).
pub fn neuron_responses(
    d: usize,
    sample_points: usize,
    neuron_samples: usize,
    seed: u64,
) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = DMatrix::from_fn(sample_points, d, |_, _| rng.gen_range(-1.0..=1.0));
    let mut neurons = DMatrix::zeros(neuron_samples, d);
    let mut signs = Vec::with_capacity(neuron_samples);
    for k in 0..neuron_samples {
        let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm: f64 = w.iter().map(|v| v.abs()).sum();
        for (j, v) in w.into_iter().enumerate() {
            neurons[(k, j)] = v / norm;
        }
        signs.push(if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    }
    let mut values = (&neurons * inputs.transpose()).map(|v| v.max(0.0));
    for (k, mut row) in values.row_iter_mut().enumerate() {
        row *= signs[k];
    }
    values
}

/// Greedy-packing probe of the metric entropy of signed unit-l1 single neurons
/// `+-relu(w . x)` evaluated on `sample_points` inputs drawn uniformly from `[-1, 1]^d`.
/// Packings are nested across the grid (see [`nested_packing_counts`]).
pub fn covering_exponent_probe(
    d: usize,
    eps_grid: &[f64],
    sample_points: usize,
    neuron_samples: usize,
    seed: u64,
) -> Result<CoveringProbe> {
    if d < 2 {
        return Err(Error::domain("covering probe needs d >= 2"));
    }
    if eps_grid.is_empty()
        || eps_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0))
        || eps_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Grid);
    }
    if sample_points == 0 || neuron_samples == 0 {
        return Err(Error::domain("sample counts must be positive"));
    }
    let values = neuron_responses(d, sample_points, neuron_samples, seed);
    let rows: Vec<PackingRow> = eps_grid
        .iter()
        .zip(nested_packing_counts(&values, eps_grid)?)
        .map(|(&eps, count)| PackingRow { eps, count })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.count as f64).ln()).collect();
    let slope = if rows.len() >= 2 { ols_slope(&xs, &ys) } else { f64::NAN };
    Ok(CoveringProbe {
        dim: d,
        rows,
        slope,
        exponent: entropy_exponent(d),
        sample_points,
        neuron_samples,
        seed,
    })
}
