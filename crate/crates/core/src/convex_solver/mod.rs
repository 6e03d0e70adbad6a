//! The 2P-block convex program equivalent to path-norm regularized two-layer ReLU
//! training:
//!
//! ```text
//! minimize   (1/n) || sum_i o_i D_i X u_i - y ||^2 + lambda sum_i |u_i|_1 + lambda_tilde sum_i |u_i|_2^2
//! subject to (2 D_i - I) X u_i >= 0            for every block i
//! ```
//!
//! Blocks `0..P` carry orientation `o_i = +1`, blocks `P..2P` repeat the same masks with
//! `o_i = -1`. [`solve`] is the production splitting solver; [`solve_oracle`] is an
//! independent (slow) reference used to check it.

mod admm;
mod oracle;

use std::fmt;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::arrangement::PatternSet;
use crate::data::Dataset;
use crate::error::{Error, Result};

pub use admm::{solve, solve_warm};
pub use oracle::solve_oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "+1")]
    Positive,
    #[serde(rename = "-1")]
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvexProgram {
    x: DMatrix<f64>,
    y: DVector<f64>,
    masks: Vec<Vec<bool>>,
    /// n x P, entry 1.0 where the row is active for the pattern.
    mask_matrix: DMatrix<f64>,
    pub lambda: f64,
    pub lambda_tilde: f64,
}

/// Build the program from a dataset and its activation patterns.
pub fn assemble(
    data: &Dataset,
    patterns: &PatternSet,
    lambda: f64,
    lambda_tilde: f64,
) -> Result<ConvexProgram> {
    ConvexProgram::new(
        data,
        patterns.masks().map(<[bool]>::to_vec).collect(),
        lambda,
        lambda_tilde,
    )
}

impl ConvexProgram {
    pub fn new(
        data: &Dataset,
        masks: Vec<Vec<bool>>,
        lambda: f64,
        lambda_tilde: f64,
    ) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::EmptyPatternSet);
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(lambda_tilde.is_finite() && lambda_tilde >= 0.0) {
            return Err(Error::domain(format!(
                "lambda_tilde must be finite and >= 0, got {lambda_tilde}"
            )));
        }
        let n = data.n();
        if let Some(bad) = masks.iter().find(|m| m.len() != n) {
            return Err(Error::mismatch(n, bad.len()));
        }
        let mask_matrix =
            DMatrix::from_fn(n, masks.len(), |i, k| if masks[k][i] { 1.0 } else { 0.0 });
        Ok(Self {
            x: data.x().clone(),
            y: data.y().clone(),
            masks,
            mask_matrix,
            lambda,
            lambda_tilde,
        })
    }

    /// Same data and patterns, different regularization.
    pub fn with_regularization(&self, lambda: f64, lambda_tilde: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(lambda.is_finite() && lambda >= 0.0 && lambda_tilde.is_finite() && lambda_tilde >= 0.0)
        {
            return Err(Error::domain("regularization weights must be finite and >= 0"));
        }
        out.lambda = lambda;
        out.lambda_tilde = lambda_tilde;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// P, the number of distinct masks.
    pub fn num_patterns(&self) -> usize {
        self.masks.len()
    }

    /// 2P.
    pub fn num_blocks(&self) -> usize {
        2 * self.masks.len()
    }

    pub fn num_variables(&self) -> usize {
        self.num_blocks() * self.d()
    }

    pub fn num_cone_rows(&self) -> usize {
        self.num_blocks() * self.n()
    }

    pub fn block_mask(&self, block: usize) -> &[bool] {
        &self.masks[block % self.masks.len()]
    }

    pub fn orientation(&self, block: usize) -> Orientation {
        if block < self.masks.len() {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }

    pub(crate) fn mask_matrix(&self) -> &DMatrix<f64> {
        &self.mask_matrix
    }

    /// Cone rows `A_i = (2 D_i - I) X` for one block.
    pub fn cone_rows(&self, block: usize) -> DMatrix<f64> {
        let mask = self.block_mask(block);
        let mut a = self.x.clone();
        for (i, &active) in mask.iter().enumerate() {
            if !active {
                a.row_mut(i).neg_mut();
            }
        }
        a
    }

    fn check(&self, sol: &BlockSolution) -> Result<()> {
        if sol.dim() != self.d() {
            return Err(Error::mismatch(self.d(), sol.dim()));
        }
        if sol.num_blocks() != self.num_blocks() {
            return Err(Error::mismatch(self.num_blocks(), sol.num_blocks()));
        }
        Ok(())
    }

    /// `X U`, one column per block.
    fn preactivations(&self, sol: &BlockSolution) -> DMatrix<f64> {
        &self.x * &sol.u
    }

    /// `sum_i o_i D_i X u_i`.
    pub fn fitted(&self, sol: &BlockSolution) -> Result<DVector<f64>> {
        self.check(sol)?;
        let z = self.preactivations(sol);
        let p = self.num_patterns();
        let mut out = DVector::zeros(self.n());
        for block in 0..self.num_blocks() {
            let sign = self.orientation(block).sign();
            let mask = self.mask_matrix.column(block % p);
            for i in 0..self.n() {
                out[i] += sign * mask[i] * z[(i, block)];
            }
        }
        Ok(out)
    }

    /// Data-fit part of the objective, `(1/n)||sum_i o_i D_i X u_i - y||^2`.
    pub fn data_fit(&self, sol: &BlockSolution) -> Result<f64> {
        let fitted = self.fitted(sol)?;
        Ok((fitted - &self.y).norm_squared() / self.n() as f64)
    }

    /// Objective with the elastic-net term left out.
    pub fn objective_without_ridge(&self, sol: &BlockSolution) -> Result<f64> {
        Ok(self.data_fit(sol)? + self.lambda * sol.total_l1())
    }
}

/// Full objective. Cone feasibility is not checked.
pub fn objective(program: &ConvexProgram, sol: &BlockSolution) -> Result<f64> {
    Ok(program.objective_without_ridge(sol)? + program.lambda_tilde * sol.u.norm_squared())
}

/// `max_{i,k} max(0, -(A_i u_i)_k)`.
pub fn feasibility_violation(program: &ConvexProgram, sol: &BlockSolution) -> Result<f64> {
    program.check(sol)?;
    let z = program.preactivations(sol);
    let p = program.num_patterns();
    let mut worst = 0.0f64;
    for block in 0..program.num_blocks() {
        let mask = program.mask_matrix.column(block % p);
        for i in 0..program.n() {
            let signed = if mask[i] > 0.0 { z[(i, block)] } else { -z[(i, block)] };
            worst = worst.max(-signed);
        }
    }
    Ok(worst)
}

/// Per-block weights `u_i`, stored as the columns of a `d x 2P` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution {
    u: DMatrix<f64>,
    l1: Vec<f64>,
}

impl BlockSolution {
    pub fn from_matrix(u: DMatrix<f64>) -> Self {
        let l1 = u.column_iter().map(|c| c.lp_norm(1)).collect();
        Self { u, l1 }
    }

    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let d = blocks.first().map_or(0, |b| b.len());
        if let Some(bad) = blocks.iter().find(|b| b.len() != d) {
            return Err(Error::mismatch(d, bad.len()));
        }
        Ok(Self::from_matrix(DMatrix::from_columns(blocks)))
    }

    pub fn zeros(program: &ConvexProgram) -> Self {
        Self::from_matrix(DMatrix::zeros(program.d(), program.num_blocks()))
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn num_blocks(&self) -> usize {
        self.u.ncols()
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, f64> {
        self.u.column(i)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn l1_norm(&self, i: usize) -> f64 {
        self.l1[i]
    }

    pub fn l1_norms(&self) -> &[f64] {
        &self.l1
    }

    pub fn total_l1(&self) -> f64 {
        self.l1.iter().sum()
    }

    /// `sum_i ||u_i||_2^2`.
    pub fn l2_mass(&self) -> f64 {
        self.u.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub feasibility_tol: f64,
    /// Initial augmented-Lagrangian penalty.
    pub rho: f64,
    pub adaptive_rho: bool,
    /// Over-relaxation factor in `(0, 2)`; 1 is plain splitting.
    pub relaxation: f64,
    /// Recorded for reproducibility; the splitting iteration itself is deterministic.
    pub seed: u64,
    pub warm_start: bool,
    /// Convergence is checked (and the trace sampled) every this many iterations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            feasibility_tol: 1e-8,
            rho: 1.0,
            adaptive_rho: true,
            relaxation: 1.6,
            seed: 0,
            warm_start: false,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("feasibility_tol", self.feasibility_tol),
            ("rho", self.rho),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Config(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        if self.check_every == 0 {
            return Err(Error::Config("check_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    NumericalFailure,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub objective: f64,
    pub feasibility_violation: f64,
    pub status: SolverStatus,
    pub final_rho: f64,
    pub trace: Vec<TracePoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_program(lambda: f64) -> ConvexProgram {
        let data = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        ConvexProgram::new(&data, vec![vec![false], vec![true]], lambda, 0.0).unwrap()
    }

    fn solution(values: &[f64]) -> BlockSolution {
        BlockSolution::from_matrix(DMatrix::from_row_slice(1, values.len(), values))
    }

    #[test]
    fn bookkeeping_counts() {
        let data = Dataset::from_rows(
            &[vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 1.0], vec![-1.0, 0.0, 2.0]],
            &[0.0; 4],
        )
        .unwrap();
        let program = ConvexProgram::new(
            &data,
            vec![vec![true, false, true, false], vec![false, true, true, true]],
            0.1,
            0.0,
        )
        .unwrap();
        assert_eq!(program.num_blocks(), 4);
        assert_eq!(program.num_variables(), 12);
        assert_eq!(program.num_cone_rows(), 16);
        assert_eq!(program.orientation(3), Orientation::Negative);
        assert_eq!(program.block_mask(3), program.block_mask(1));
    }

    #[test]
    fn empty_pattern_set_is_rejected() {
        let data = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        assert!(matches!(
            ConvexProgram::new(&data, vec![], 0.1, 0.0),
            Err(Error::EmptyPatternSet)
        ));
        assert!(ConvexProgram::new(&data, vec![vec![true]], -1.0, 0.0).is_err());
    }

    #[test]
    fn cone_rows_flip_inactive_rows() {
        let data = Dataset::from_rows(&[vec![1.0], vec![2.0]], &[0.0, 0.0]).unwrap();
        let program = ConvexProgram::new(&data, vec![vec![true, true]], 0.0, 0.0).unwrap();
        assert_eq!(program.cone_rows(0).as_slice(), &[1.0, 2.0]);
        let program = ConvexProgram::new(&data, vec![vec![true, false]], 0.0, 0.0).unwrap();
        assert_eq!(program.cone_rows(1).as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn objective_examples() {
        let program = scalar_program(0.0);
        // blocks: [mask 0 +, mask 1 +, mask 0 -, mask 1 -]
        assert_eq!(objective(&program, &solution(&[0.0; 4])).unwrap(), 1.0);
        assert_eq!(objective(&program, &solution(&[0.0, 1.0, 0.0, 0.0])).unwrap(), 0.0);
        let program = scalar_program(1.0);
        let v = objective(&program, &solution(&[0.0, 0.5, 0.0, 0.0])).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(objective(&program, &solution(&[0.0; 3])).is_err());
    }

    #[test]
    fn violation_examples() {
        let program = scalar_program(0.0);
        assert_eq!(feasibility_violation(&program, &solution(&[0.0; 4])).unwrap(), 0.0);
        let v = feasibility_violation(&program, &solution(&[0.0, -0.3, 0.0, 0.0])).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        // Mask 0 wants x u <= 0.
        let v = feasibility_violation(&program, &solution(&[-0.2, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            abs_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
