//! Independent oracles shared by the integration tests. Nothing here calls the
//! library code paths it is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use convex_relu::arrangement::PatternSet;
use convex_relu::{BlockSolution, ConvexProgram, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut StdRng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Features uniform on `[-1, 1]`, Gaussian targets.
pub fn random_dataset(rng: &mut StdRng, n: usize, d: usize) -> Dataset {
    let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
    let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    Dataset::new(x, y).unwrap()
}

/// Masks seen by `draws` Gaussian weight vectors, using the `x . w >= 0` rule.
pub fn sampled_masks(x: &DMatrix<f64>, draws: usize, seed: u64) -> BTreeSet<Vec<bool>> {
    let mut rng = rng(seed);
    let mut out = BTreeSet::new();
    for _ in 0..draws {
        let w = gaussian_vec(&mut rng, x.ncols());
        let z = x * &w;
        out.insert(z.iter().map(|&v| v >= 0.0).collect());
    }
    out
}

/// Cone-feasible point: block `i` gets `t_i (w_i + delta_i)` where `w_i` is the pattern
/// witness and `delta_i` is small enough to keep every sign. Roughly a third of the
/// blocks are left at zero.
pub fn feasible_solution(
    rng: &mut StdRng,
    program: &ConvexProgram,
    patterns: &PatternSet,
) -> BlockSolution {
    let x = program.x();
    let p = program.num_patterns();
    let row_l1_max = x
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let blocks: Vec<DVector<f64>> = (0..program.num_blocks())
        .map(|b| {
            if rng.gen_bool(0.35) {
                return DVector::zeros(program.d());
            }
            let w = &patterns.patterns[b % p].witness;
            let margin = (x * w).iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            let mut delta = gaussian_vec(rng, program.d());
            let l1 = delta.lp_norm(1).max(f64::MIN_POSITIVE);
            delta *= 0.5 * margin / (l1 * row_l1_max);
            (w + delta) * rng.gen_range(0.05..2.0)
        })
        .collect();
    BlockSolution::from_blocks(&blocks).unwrap()
}

/// Finite-width two-layer ReLU NTK with both layers trained:
/// `(1/m) sum_k [ relu(w_k.x) relu(w_k.x') + a_k^2 1{w_k.x > 0} 1{w_k.x' > 0} x.x' ] * 2`,
/// `w_k ~ N(0, I)`, `a_k = +-1`.
pub fn mc_ntk(x: &[f64], x2: &[f64], width: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let dot: f64 = x.iter().zip(x2).map(|(a, b)| a * b).sum();
    let mut acc = 0.0;
    for _ in 0..width {
        let (mut p, mut q) = (0.0, 0.0);
        for j in 0..x.len() {
            let w: f64 = rng.sample(StandardNormal);
            p += w * x[j];
            q += w * x2[j];
        }
        let a: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        acc += p.max(0.0) * q.max(0.0);
        if p > 0.0 && q > 0.0 {
            acc += a * a * dot;
        }
    }
    2.0 * acc / width as f64
}

/// Uniform point on the unit sphere in `R^d`.
pub fn unit_vec(rng: &mut StdRng, d: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Monte-Carlo mean and standard error of `relu(w . x)^2` for `x` uniform on the sphere.
pub fn sphere_relu_second_moment(w: &DVector<f64>, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng(seed);
    let values: Vec<f64> = (0..samples)
        .map(|_| unit_vec(&mut rng, w.len()).dot(w).max(0.0).powi(2))
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
