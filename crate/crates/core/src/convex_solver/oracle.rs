//! Reference solver for small programs.
//!
//! Each block is split as `u_i = p_i - q_i` with `p_i, q_i >= 0`, which turns the l1
//! term into the linear `lambda * sum(p_i + q_i)`. The resulting smooth problem is
//! minimized by projected gradient steps of length `1/L` with Nesterov momentum and
//! gradient-based restarts. The projection onto
//! `{p >= 0, q >= 0, A_i (p - q) >= 0}` is computed block by block with Dykstra's
//! alternating projections over the orthant and the individual half-spaces. Nothing
//! here shares code with the splitting solver; the fit operator is formed densely.

use nalgebra::{DMatrix, DVector};

use super::{objective, BlockSolution, ConvexProgram};
use crate::error::{Error, Result};

const DYKSTRA_MAX_SWEEPS: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-14;
const FEASIBLE_TOL: f64 = 1e-9;

/// Run `iters` accelerated projected-gradient steps and return the best feasible
/// iterate seen. Intended for programs with at most a few hundred variables.
pub fn solve_oracle(program: &ConvexProgram, iters: usize) -> Result<BlockSolution> {
    let (n, d, blocks) = (program.n(), program.d(), program.num_blocks());
    let fit = dense_fit_operator(program);
    let cones: Vec<Vec<DVector<f64>>> = (0..blocks)
        .map(|b| {
            let a = program.cone_rows(b);
            a.row_iter()
                .filter(|r| r.iter().any(|&v| v != 0.0))
                .map(|r| r.transpose())
                .collect()
        })
        .collect();

    let sigma_sq = (&fit * fit.transpose())
        .symmetric_eigenvalues()
        .max()
        .max(0.0);
    let lipschitz = 2.0 * (2.0 / n as f64 * sigma_sq + 2.0 * program.lambda_tilde);
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let dim = blocks * d;
    // Lifted iterate stacked as [p; q].
    let mut x = DVector::<f64>::zeros(2 * dim);
    let mut y = x.clone();
    let mut momentum = 1.0f64;

    let mut best = BlockSolution::zeros(program);
    let mut best_value = objective(program, &best)?;

    for _ in 0..iters {
        let grad = lifted_gradient(program, &fit, &y, dim);
        let trial = &y - grad * step;
        let mut x_new = DVector::zeros(2 * dim);
        for (b, rows) in cones.iter().enumerate() {
            let mut point = DVector::zeros(2 * d);
            point
                .rows_mut(0, d)
                .copy_from(&trial.rows(b * d, d));
            point
                .rows_mut(d, d)
                .copy_from(&trial.rows(dim + b * d, d));
            let proj = project_lifted(&point, rows);
            x_new.rows_mut(b * d, d).copy_from(&proj.rows(0, d));
            x_new.rows_mut(dim + b * d, d).copy_from(&proj.rows(d, d));
        }
        if !x_new.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure("oracle iterate became non-finite".into()));
        }

        let candidate = unlift(&x_new, d, blocks, dim);
        if max_violation(&candidate, &cones) <= FEASIBLE_TOL {
            let value = objective(program, &candidate)?;
            if value < best_value {
                best_value = value;
                best = candidate;
            }
        }

        // Restart when the momentum direction opposes the gradient-mapping step.
        if (&y - &x_new).dot(&(&x_new - &x)) > 0.0 {
            momentum = 1.0;
            y = x_new.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            y = &x_new + (&x_new - &x) * ((momentum - 1.0) / next);
            momentum = next;
        }
        x = x_new;
    }
    Ok(best)
}

fn dense_fit_operator(program: &ConvexProgram) -> DMatrix<f64> {
    let (n, d, blocks) = (program.n(), program.d(), program.num_blocks());
    let mut m = DMatrix::zeros(n, blocks * d);
    for b in 0..blocks {
        let sign = program.orientation(b).sign();
        for (i, &active) in program.block_mask(b).iter().enumerate() {
            if active {
                for j in 0..d {
                    m[(i, b * d + j)] = sign * program.x()[(i, j)];
                }
            }
        }
    }
    m
}

fn lifted_gradient(
    program: &ConvexProgram,
    fit: &DMatrix<f64>,
    lifted: &DVector<f64>,
    dim: usize,
) -> DVector<f64> {
    let u = lifted.rows(0, dim) - lifted.rows(dim, dim);
    let residual = fit * &u - program.y();
    let g = fit.transpose() * residual * (2.0 / program.n() as f64) + &u * (2.0 * program.lambda_tilde);
    let mut out = DVector::zeros(2 * dim);
    out.rows_mut(0, dim).copy_from(&g.add_scalar(program.lambda));
    out.rows_mut(dim, dim).copy_from(&(-g).add_scalar(program.lambda));
    out
}

fn unlift(lifted: &DVector<f64>, d: usize, blocks: usize, dim: usize) -> BlockSolution {
    let u = lifted.rows(0, dim) - lifted.rows(dim, dim);
    BlockSolution::from_matrix(DMatrix::from_column_slice(d, blocks, u.as_slice()))
}

fn max_violation(sol: &BlockSolution, cones: &[Vec<DVector<f64>>]) -> f64 {
    let mut worst = 0.0f64;
    for (b, rows) in cones.iter().enumerate() {
        let u = sol.block(b);
        for a in rows {
            worst = worst.max(-a.dot(&u));
        }
    }
    worst
}

/// Euclidean projection of `(p, q)` onto `{p >= 0, q >= 0, a_k . (p - q) >= 0}`.
pub(crate) fn project_lifted(point: &DVector<f64>, rows: &[DVector<f64>]) -> DVector<f64> {
    let d = point.len() / 2;
    let feasible = |x: &DVector<f64>| {
        x.iter().all(|&v| v >= 0.0)
            && rows
                .iter()
                .all(|a| a.dot(&(x.rows(0, d) - x.rows(d, d))) >= 0.0)
    };
    if feasible(point) {
        return point.clone();
    }

    let sets = rows.len() + 1;
    let dim = 2 * d;
    let norms: Vec<f64> = rows.iter().map(|a| a.norm_squared()).collect();
    let mut increments = vec![0.0; sets * dim];
    let mut x: Vec<f64> = point.iter().copied().collect();
    let mut y = vec![0.0; dim];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let mut change = 0.0;
        // Orthant.
        let inc = &mut increments[..dim];
        for k in 0..dim {
            let yk = x[k] + inc[k];
            let proj = yk.max(0.0);
            inc[k] = yk - proj;
            change += (proj - x[k]) * (proj - x[k]);
            x[k] = proj;
        }
        // Half-spaces, each acting on p - q.
        for (j, a) in rows.iter().enumerate() {
            let inc = &mut increments[(j + 1) * dim..(j + 2) * dim];
            for k in 0..dim {
                y[k] = x[k] + inc[k];
            }
            let value: f64 = (0..d).map(|k| a[k] * (y[k] - y[d + k])).sum();
            let scale = if value < 0.0 { value / (2.0 * norms[j]) } else { 0.0 };
            for k in 0..d {
                let (p, q) = (y[k] - scale * a[k], y[d + k] + scale * a[k]);
                inc[k] = y[k] - p;
                inc[d + k] = y[d + k] - q;
                change += (p - x[k]) * (p - x[k]) + (q - x[d + k]) * (q - x[d + k]);
                x[k] = p;
                x[d + k] = q;
            }
        }
        let size = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if change.sqrt() <= DYKSTRA_TOL * (1.0 + size) {
            break;
        }
    }
    DVector::from_vec(x)
}

#[cfg(test)]
/// Projection onto `{(p, q) : a . p - a . q >= 0}`.
fn project_halfspace(y: &DVector<f64>, a: &DVector<f64>, d: usize) -> DVector<f64> {
    let value = a.dot(&y.rows(0, d)) - a.dot(&y.rows(d, d));
    if value >= 0.0 {
        return y.clone();
    }
    let scale = value / (2.0 * a.norm_squared());
    let mut out = y.clone();
    for j in 0..d {
        out[j] -= scale * a[j];
        out[d + j] += scale * a[j];
    }
    out
}
