//! Two-layer ReLU networks `f(x) = (1/m) sum_k a_k relu(w_k . x)` recovered from a block
//! solution, plus the path norm and output truncation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex_solver::{BlockSolution, ConvexProgram, Orientation};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    /// Outer weights `a`, length m.
    outer: DVector<f64>,
    /// Inner weights, one neuron per row (m x d).
    inner: DMatrix<f64>,
}

impl TwoLayerNet {
    pub fn new(outer: DVector<f64>, inner: DMatrix<f64>) -> Result<Self> {
        if outer.len() != inner.nrows() {
            return Err(Error::mismatch(inner.nrows(), outer.len()));
        }
        Ok(Self { outer, inner })
    }

    /// The width-0 network on `d` inputs; evaluates to zero everywhere.
    pub fn zero(d: usize) -> Self {
        Self {
            outer: DVector::zeros(0),
            inner: DMatrix::zeros(0, d),
        }
    }

    pub fn width(&self) -> usize {
        self.outer.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inner.ncols()
    }

    pub fn outer(&self) -> &DVector<f64> {
        &self.outer
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// Evaluate on every row of `x`.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::mismatch(self.input_dim(), x.ncols()));
        }
        let m = self.width();
        if m == 0 {
            return Ok(DVector::zeros(x.nrows()));
        }
        let hidden = (x * self.inner.transpose()).map(|v| v.max(0.0));
        Ok(hidden * &self.outer / m as f64)
    }

    pub fn path_norm(&self) -> PathNormReport {
        let m = self.width();
        if m == 0 {
            return PathNormReport {
                path_norm: 0.0,
                contributions: Vec::new(),
            };
        }
        let contributions: Vec<f64> = self
            .inner
            .row_iter()
            .zip(self.outer.iter())
            .map(|(w, a)| a.abs() * w.lp_norm(1) / m as f64)
            .collect();
        PathNormReport {
            path_norm: contributions.iter().sum(),
            contributions,
        }
    }

    /// Append zero neurons up to `width`, rescaling outer weights by `width / m` so the
    /// function and path norm are unchanged.
    pub fn padded(&self, width: usize) -> Result<Self> {
        let m = self.width();
        if width < m {
            return Err(Error::domain(format!("cannot pad width {m} down to {width}")));
        }
        let d = self.input_dim();
        let scale = if m == 0 { 0.0 } else { width as f64 / m as f64 };
        let mut outer = DVector::zeros(width);
        let mut inner = DMatrix::zeros(width, d);
        outer.rows_mut(0, m).copy_from(&(&self.outer * scale));
        inner.rows_mut(0, m).copy_from(&self.inner);
        for k in m..width {
            if d > 0 {
                inner[(k, 0)] = 1.0;
            }
        }
        Ok(Self { outer, inner })
    }

    /// Whether the width satisfies `m >= n + 1` for `n` training points.
    pub fn width_ok(&self, n: usize) -> bool {
        self.width() > n
    }

    /// Count of nonzero entries across both layers.
    pub fn nonzero_parameters(&self) -> usize {
        self.outer.iter().chain(self.inner.iter()).filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathNormReport {
    pub path_norm: f64,
    /// `|a_k| ||w_k||_1 / m` per neuron.
    pub contributions: Vec<f64>,
}

/// Relative threshold used by [`reconstruct_default`]: `1e-6 * max_i ||u_i||_1`.
pub fn default_zero_threshold(sol: &BlockSolution) -> f64 {
    1e-6 * sol.l1_norms().iter().copied().fold(0.0, f64::max)
}

/// Map blocks with `||u_i||_1 > zero_threshold` to neurons
/// `w = u / ||u||_1`, `a = +-m ||u||_1` (sign from the block orientation).
pub fn reconstruct(
    sol: &BlockSolution,
    program: &ConvexProgram,
    zero_threshold: f64,
) -> TwoLayerNet {
    let kept: Vec<usize> = (0..sol.num_blocks())
        .filter(|&i| sol.l1_norm(i) > zero_threshold && sol.l1_norm(i) > 0.0)
        .collect();
    let m = kept.len();
    let d = sol.dim();
    if m == 0 {
        return TwoLayerNet::zero(d);
    }
    let mut outer = DVector::zeros(m);
    let mut inner = DMatrix::zeros(m, d);
    for (k, &i) in kept.iter().enumerate() {
        let norm = sol.l1_norm(i);
        let sign = match program.orientation(i) {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        };
        outer[k] = sign * m as f64 * norm;
        inner.row_mut(k).copy_from(&(sol.block(i) / norm).transpose());
    }
    TwoLayerNet { outer, inner }
}

pub fn reconstruct_default(sol: &BlockSolution, program: &ConvexProgram) -> TwoLayerNet {
    reconstruct(sol, program, default_zero_threshold(sol))
}

/// Elementwise clamp to `[-bound, bound]`; `bound >= 1`.
pub fn truncate(v: &DVector<f64>, bound: f64) -> Result<DVector<f64>> {
    if bound.is_nan() || bound < 1.0 {
        return Err(Error::domain(format!("truncation level must be >= 1, got {bound}")));
    }
    Ok(v.map(|x| x.clamp(-bound, bound)))
}

pub fn mse(pred: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if pred.len() != y.len() {
        return Err(Error::mismatch(y.len(), pred.len()));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    Ok((pred - y).norm_squared() / y.len() as f64)
}

/// `(1/n) sum (y_i - f(x_i))^2 + lambda ||theta||_P`, the non-convex training objective.
pub fn path_norm_objective(net: &TwoLayerNet, data: &Dataset, lambda: f64) -> Result<f64> {
    let pred = net.forward(data.x())?;
    Ok(mse(&pred, data.y())? + lambda * net.path_norm().path_norm)
}

/// On-disk model layout: `{"m": .., "a": [..], "W": [[..], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub a: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    /// Input dimension, needed to rebuild a width-0 model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

impl From<&TwoLayerNet> for ModelFile {
    fn from(net: &TwoLayerNet) -> Self {
        ModelFile {
            m: net.width(),
            a: net.outer.iter().copied().collect(),
            w: net
                .inner
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            d: Some(net.input_dim()),
        }
    }
}

impl TryFrom<ModelFile> for TwoLayerNet {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.a.len() != file.m {
            return Err(Error::mismatch(file.m, file.a.len()));
        }
        if file.w.len() != file.m {
            return Err(Error::mismatch(file.m, file.w.len()));
        }
        let d = file
            .w
            .first()
            .map(Vec::len)
            .or(file.d)
            .ok_or_else(|| Error::Config("width-0 model needs an explicit `d`".into()))?;
        if let Some(row) = file.w.iter().find(|r| r.len() != d) {
            return Err(Error::mismatch(d, row.len()));
        }
        let inner = DMatrix::from_fn(file.m, d, |k, j| file.w[k][j]);
        TwoLayerNet::new(DVector::from_vec(file.a), inner)
    }
}
