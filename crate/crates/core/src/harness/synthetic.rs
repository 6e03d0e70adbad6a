use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Noiseless single-neuron target `y = relu(w* . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleReluTarget {
    pub w_star: DVector<f64>,
}

impl SingleReluTarget {
    pub fn eval(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.w_star).map(|v| v.max(0.0))
    }

    /// `E[relu(w* . x)^2] = |w*|^2 / (2d)` for `x` uniform on the unit sphere.
    pub fn sphere_second_moment(&self) -> f64 {
        self.w_star.norm_squared() / (2.0 * self.w_star.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub data: Dataset,
    pub target: SingleReluTarget,
}

/// `n` points uniform on the unit sphere in `R^d` labelled by a single ReLU whose weight
/// is drawn from `N(0, I_d)` first from the seed's stream.
pub fn gen_synthetic(n: usize, d: usize, seed: u64) -> Result<SyntheticData> {
    if n == 0 || d == 0 {
        return Err(Error::domain("n and d must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_star = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        loop {
            let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (j, v) in row.into_iter().enumerate() {
                    x[(i, j)] = v / norm;
                }
                break;
            }
        }
    }
    let target = SingleReluTarget { w_star };
    let y = target.eval(&x);
    Ok(SyntheticData {
        data: Dataset::new(x, y)?,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_unit_and_labels_nonnegative() {
        let s = gen_synthetic(50, 3, 7).unwrap();
        for row in s.data.x().row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
        assert!(s.data.y().iter().all(|&v| v >= 0.0));
        assert_eq!(s, gen_synthetic(50, 3, 7).unwrap());
    }

    #[test]
    fn prefix_stable_in_n() {
        let small = gen_synthetic(5, 3, 2).unwrap();
        let large = gen_synthetic(9, 3, 2).unwrap();
        assert_eq!(small.target, large.target);
        assert_eq!(small.data.x(), &large.data.x().rows(0, 5).into_owned());
    }
}
