//! Alternating-direction splitting for the block program.
//!
//! With `U` the `d x 2P` matrix of block weights, the iteration keeps two copies of the
//! constrained quantities: `Z = U` (the l1 copy, updated by soft thresholding) and
//! `S = A U` (the cone slacks, updated by clamping at zero). The coupled `U` step solves
//!
//! ```text
//! ((2/n) M^T M + (2 lambda_tilde + rho) I + rho A^T A) u = rhs
//! ```
//!
//! Since `A_i^T A_i = X^T X` for every block, the non-data part is block diagonal with
//! one shared `d x d` block `B`, and `M^T M` has rank at most `n`. Woodbury reduces the
//! solve to `B^{-1}` plus one `n x n` Cholesky factor of
//! `(n/2) I + (X B^{-1} X^T) o (sum_i m_i m_i^T)`, refreshed only when `rho` changes.

use std::ops::{AddAssign, SubAssign};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{
    feasibility_violation, objective, BlockSolution, ConvexProgram, SolverConfig,
    SolverDiagnostics, SolverStatus, TracePoint,
};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const BALANCE_RATIO: f64 = 5.0;
/// Checks between penalty updates.
const RHO_PATIENCE: usize = 5;

/// Solve from the origin.
pub fn solve(
    program: &ConvexProgram,
    config: &SolverConfig,
) -> Result<(BlockSolution, SolverDiagnostics)> {
    solve_warm(program, config, None)
}

/// Solve, starting from `initial` when `config.warm_start` is set.
pub fn solve_warm(
    program: &ConvexProgram,
    config: &SolverConfig,
    initial: Option<&BlockSolution>,
) -> Result<(BlockSolution, SolverDiagnostics)> {
    config.validate()?;
    let ops = Operators::new(program);
    let blocks = program.num_blocks();
    let (d, n) = (program.d(), program.n());

    let mut z = match initial.filter(|_| config.warm_start) {
        Some(init) => {
            if init.dim() != d || init.num_blocks() != blocks {
                return Err(Error::mismatch(blocks * d, init.num_blocks() * init.dim()));
            }
            init.matrix().clone()
        }
        None => DMatrix::zeros(d, blocks),
    };
    // Cone slacks and their scaled duals are stored multiplied by the row signs, so
    // that `A^T v = X^T (sign o v)` becomes a plain `X^T` product.
    let mut s = ops.x * &z;
    for k in 0..blocks {
        let sign = ops.sign.column(k % ops.patterns());
        for (v, &sg) in s.column_mut(k).iter_mut().zip(sign.iter()) {
            if sg * *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    let mut w_l1 = DMatrix::<f64>::zeros(d, blocks);
    let mut w_cone = DMatrix::<f64>::zeros(n, blocks);

    let mut rho = config.rho;
    let mut factor = ops.factorize(rho, program.lambda_tilde)?;
    let data_rhs = ops.apply_mt(program.y()) * (2.0 / n as f64);
    let data_scale = data_rhs.amax();
    let alpha = config.relaxation;
    let p = ops.patterns();

    let mut work = Workspace::new(n, d, p);
    work.slack_gap.copy_from(&s);
    let mut u = DMatrix::<f64>::zeros(d, blocks);
    let mut z_prev = z.clone();
    let mut s_prev = s.clone();

    let mut trace = Vec::new();
    let mut status = SolverStatus::MaxIters;
    let mut iterations = 0;
    let (mut primal, mut dual, mut eps_primal, mut eps_dual) = (f64::NAN, f64::NAN, 0.0, 0.0);
    let mut checks_since_update = 0usize;

    for iter in 1..=config.max_iters {
        iterations = iter;
        let check = iter % config.check_every == 0 || iter == config.max_iters;
        if check {
            z_prev.copy_from(&z);
            s_prev.copy_from(&s);
        }

        // rhs = data + rho (z - w_l1) + rho A^T (s - w_cone).
        work.rhs.gemm_tr(rho, ops.x, &work.slack_gap, 0.0);
        for ((r, (&zv, &wv)), &dv) in work
            .rhs
            .iter_mut()
            .zip(z.iter().zip(w_l1.iter()))
            .zip(data_rhs.iter())
        {
            *r += rho * (zv - wv) + dv;
        }
        factor.solve_into(&ops, &mut work, &mut u);

        let threshold = program.lambda / rho;
        let mut primal_now = 0.0f64;
        let mut au_max = 0.0f64;
        for ((zv, wv), &uv) in z.iter_mut().zip(w_l1.iter_mut()).zip(u.iter()) {
            let relaxed = alpha * uv + (1.0 - alpha) * *zv;
            let next = soft_threshold(relaxed + *wv, threshold);
            *wv += relaxed - next;
            primal_now = primal_now.max((uv - next).abs());
            *zv = next;
        }
        // Slack step fused with the correction `X u = X v -+ X B^{-1} g` and with
        // forming `s - w_cone` for the next right-hand side.
        {
            let sign = ops.sign.as_slice();
            let xbg = work.xbg.as_slice();
            let columns = s
                .as_mut_slice()
                .chunks_exact_mut(n)
                .zip(w_cone.as_mut_slice().chunks_exact_mut(n))
                .zip(work.slack_gap.as_mut_slice().chunks_exact_mut(n))
                .zip(work.xu.as_slice().chunks_exact(n));
            for (k, (((sc, wc), gap), xv)) in columns.enumerate() {
                let pat = k % p;
                let flip = if k < p { -1.0 } else { 1.0 };
                let sg = &sign[pat * n..(pat + 1) * n];
                let corr = &xbg[pat * n..(pat + 1) * n];
                for a in 0..n {
                    let au = xv[a] + flip * corr[a];
                    let q = alpha * au + (1.0 - alpha) * sc[a] + wc[a];
                    let next = if sg[a] * q >= 0.0 { q } else { 0.0 };
                    let w_next = q - next;
                    primal_now = primal_now.max((au - next).abs());
                    au_max = au_max.max(au.abs());
                    sc[a] = next;
                    wc[a] = w_next;
                    gap[a] = next - w_next;
                }
            }
        }

        if !primal_now.is_finite() || !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite iterate at iteration {iter}"
            )));
        }

        if check {
            primal = primal_now;
            z_prev -= &z;
            s_prev -= &s;
            let mut step = ops.xt_times(&s_prev);
            step += &z_prev;
            dual = rho * step.amax();
            let mut mass = ops.xt_times(&w_cone);
            mass += &w_l1;
            let dual_mass = rho * mass.amax();
            let scale = u.amax().max(z.amax()).max(au_max).max(s.amax());
            eps_primal = config.abs_tol + config.rel_tol * scale;
            eps_dual = config.abs_tol + config.rel_tol * dual_mass.max(data_scale);
            let violation = ops.violation(&z);
            trace.push(TracePoint {
                iteration: iter,
                primal_residual: primal,
                dual_residual: dual,
                rho,
            });

            if primal <= eps_primal && dual <= eps_dual && violation <= config.feasibility_tol {
                status = SolverStatus::Converged;
                break;
            }
            checks_since_update += 1;
            if config.adaptive_rho && checks_since_update >= RHO_PATIENCE {
                // Balance residuals relative to their own scales.
                let rel_primal = primal / scale.max(f64::MIN_POSITIVE);
                let rel_dual = dual / dual_mass.max(data_scale).max(f64::MIN_POSITIVE);
                let ratio = (rel_primal / rel_dual.max(f64::MIN_POSITIVE)).sqrt();
                if !(1.0 / BALANCE_RATIO..=BALANCE_RATIO).contains(&ratio) {
                    let new_rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                    if new_rho != rho {
                        // Scaled duals carry a 1/rho factor.
                        let shrink = rho / new_rho;
                        w_l1 *= shrink;
                        w_cone *= shrink;
                        work.slack_gap.copy_from(&s);
                        work.slack_gap -= &w_cone;
                        rho = new_rho;
                        factor = ops.factorize(rho, program.lambda_tilde)?;
                        checks_since_update = 0;
                    }
                }
            }
        }
    }

    let solution = BlockSolution::from_matrix(z);
    let diagnostics = SolverDiagnostics {
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        primal_tolerance: eps_primal,
        dual_tolerance: eps_dual,
        objective: objective(program, &solution)?,
        feasibility_violation: feasibility_violation(program, &solution)?,
        status,
        final_rho: rho,
        trace,
    };
    Ok((solution, diagnostics))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Structured products with `M` (the fit operator) and `A` (the stacked cone rows).
struct Operators<'a> {
    x: &'a DMatrix<f64>,
    xt: DMatrix<f64>,
    /// n x P, 0/1.
    mask: &'a DMatrix<f64>,
    /// n x P, +1 on active rows and -1 elsewhere.
    sign: DMatrix<f64>,
    /// sum over all 2P blocks of m_i m_i^T.
    overlap: DMatrix<f64>,
}

impl<'a> Operators<'a> {
    fn new(program: &'a ConvexProgram) -> Self {
        let mask = program.mask_matrix();
        let x = program.x();
        Self {
            x,
            xt: x.transpose(),
            mask,
            sign: mask.map(|m| 2.0 * m - 1.0),
            overlap: (mask * mask.transpose()) * 2.0,
        }
    }

    fn patterns(&self) -> usize {
        self.mask.ncols()
    }

    /// `sum_i o_i D_i X v_i`.
    #[cfg(test)]
    fn apply_m(&self, v: &DMatrix<f64>) -> DVector<f64> {
        let xv = self.x * v;
        let p = self.patterns();
        let n = self.x.nrows();
        let mut out = DVector::zeros(n);
        for k in 0..p {
            let pos = xv.column(k);
            let neg = xv.column(k + p);
            let m = self.mask.column(k);
            for a in 0..n {
                out[a] += m[a] * (pos[a] - neg[a]);
            }
        }
        out
    }

    /// `M^T r`: block i receives `o_i X^T D_i r`.
    fn apply_mt(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let p = self.patterns();
        let mut masked = self.mask.clone();
        for mut col in masked.column_iter_mut() {
            col.component_mul_assign(r);
        }
        let g = &self.xt * masked;
        let mut out = DMatrix::zeros(g.nrows(), 2 * p);
        out.columns_mut(0, p).copy_from(&g);
        out.columns_mut(p, p).copy_from(&(-g));
        out
    }

    /// `A U`, one column per block.
    fn apply_a(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xu = self.x * u;
        let p = self.patterns();
        for (k, mut col) in xu.column_iter_mut().enumerate() {
            col.component_mul_assign(&self.sign.column(k % p));
        }
        xu
    }

    /// `A^T V`, one column per block.
    #[cfg(test)]
    fn apply_at(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.patterns();
        let mut signed = v.clone();
        for (k, mut col) in signed.column_iter_mut().enumerate() {
            col.component_mul_assign(&self.sign.column(k % p));
        }
        &self.xt * signed
    }

    /// `X^T v`.
    fn xt_times(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.xt * v
    }

    fn violation(&self, u: &DMatrix<f64>) -> f64 {
        self.apply_a(u).iter().fold(0.0f64, |m, &v| m.max(-v))
    }

    fn factorize(&self, rho: f64, lambda_tilde: f64) -> Result<Factor> {
        let d = self.x.ncols();
        let n = self.x.nrows();
        let gram = &self.xt * self.x;
        let block = gram * rho + DMatrix::identity(d, d) * (2.0 * lambda_tilde + rho);
        let block_inv = block
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("block system not positive definite".into()))?
            .inverse();
        let kernel = self.x * &block_inv * &self.xt;
        let system = kernel.component_mul(&self.overlap) + DMatrix::identity(n, n) * (n as f64 / 2.0);
        let capacitance = system.cholesky().ok_or_else(|| {
            Error::NumericalFailure("Woodbury capacitance matrix not positive definite".into())
        })?;
        Ok(Factor {
            block_inv,
            capacitance,
        })
    }
}

struct Factor {
    block_inv: DMatrix<f64>,
    capacitance: Cholesky<f64, Dyn>,
}

/// Scratch buffers reused across iterations.
struct Workspace {
    /// `sign o (s - w_cone)`.
    slack_gap: DMatrix<f64>,
    rhs: DMatrix<f64>,
    v: DMatrix<f64>,
    /// `X v`.
    xu: DMatrix<f64>,
    fit: DVector<f64>,
    masked: DMatrix<f64>,
    g: DMatrix<f64>,
    bg: DMatrix<f64>,
    xbg: DMatrix<f64>,
}

impl Workspace {
    fn new(n: usize, d: usize, p: usize) -> Self {
        Self {
            slack_gap: DMatrix::zeros(n, 2 * p),
            rhs: DMatrix::zeros(d, 2 * p),
            v: DMatrix::zeros(d, 2 * p),
            xu: DMatrix::zeros(n, 2 * p),
            fit: DVector::zeros(n),
            masked: DMatrix::zeros(n, p),
            g: DMatrix::zeros(d, p),
            bg: DMatrix::zeros(d, p),
            xbg: DMatrix::zeros(n, p),
        }
    }
}

impl Factor {
    /// Woodbury solve of `work.rhs` into `u`. Leaves `X v` in `work.xu` and
    /// `X B^{-1} g` in `work.xbg`, so `X u_k = X v_k -+ X B^{-1} g_k`.
    fn solve_into(&self, ops: &Operators<'_>, work: &mut Workspace, u: &mut DMatrix<f64>) {
        let p = ops.patterns();
        let n = ops.x.nrows();
        work.v.gemm(1.0, &self.block_inv, &work.rhs, 0.0);
        work.xu.gemm(1.0, ops.x, &work.v, 0.0);
        work.fit.fill(0.0);
        {
            let fit = work.fit.as_mut_slice();
            let (pos, neg) = work.xu.as_slice().split_at(p * n);
            let columns = ops
                .mask
                .as_slice()
                .chunks_exact(n)
                .zip(pos.chunks_exact(n).zip(neg.chunks_exact(n)));
            for (m, (pc, nc)) in columns {
                for a in 0..n {
                    fit[a] += m[a] * (pc[a] - nc[a]);
                }
            }
        }
        self.capacitance.solve_mut(&mut work.fit);
        {
            let fit = work.fit.as_slice();
            let columns = work
                .masked
                .as_mut_slice()
                .chunks_exact_mut(n)
                .zip(ops.mask.as_slice().chunks_exact(n));
            for (col, m) in columns {
                for a in 0..n {
                    col[a] = m[a] * fit[a];
                }
            }
        }
        work.g.gemm_tr(1.0, ops.x, &work.masked, 0.0);
        work.bg.gemm(1.0, &self.block_inv, &work.g, 0.0);
        work.xbg.gemm(1.0, ops.x, &work.bg, 0.0);
        u.copy_from(&work.v);
        u.columns_mut(0, p).sub_assign(&work.bg);
        u.columns_mut(p, p).add_assign(&work.bg);
    }

    #[cfg(test)]
    fn solve(&self, ops: &Operators<'_>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.block_inv * rhs;
        let t = self.capacitance.solve(&ops.apply_m(&v));
        v - &self.block_inv * ops.apply_mt(&t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn woodbury_step_matches_dense_solve() {
        let data = Dataset::from_rows(
            &[vec![1.0, 0.5], vec![-0.3, 1.0], vec![0.7, -0.2]],
            &[1.0, 0.0, 2.0],
        )
        .unwrap();
        let masks = vec![vec![true, false, true], vec![false, true, true], vec![true, true, false]];
        let program = ConvexProgram::new(&data, masks, 0.1, 0.05).unwrap();
        let ops = Operators::new(&program);
        let (rho, lt) = (0.7, program.lambda_tilde);
        let factor = ops.factorize(rho, lt).unwrap();

        // Dense operators.
        let (n, d, b) = (program.n(), program.d(), program.num_blocks());
        let mut m = DMatrix::zeros(n, b * d);
        let mut a = DMatrix::zeros(b * n, b * d);
        for blk in 0..b {
            let sign = program.orientation(blk).sign();
            let mask = program.block_mask(blk);
            let cone = program.cone_rows(blk);
            for i in 0..n {
                for j in 0..d {
                    if mask[i] {
                        m[(i, blk * d + j)] = sign * data.x()[(i, j)];
                    }
                    a[(blk * n + i, blk * d + j)] = cone[(i, j)];
                }
            }
        }
        let h = m.transpose() * &m * (2.0 / n as f64)
            + DMatrix::identity(b * d, b * d) * (2.0 * lt + rho)
            + a.transpose() * &a * rho;
        let rhs = DMatrix::from_fn(d, b, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let dense = h.lu().solve(&DVector::from_column_slice(rhs.as_slice())).unwrap();
        let fast = factor.solve(&ops, &rhs);
        for (x, y) in fast.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        let mut work = Workspace::new(n, d, program.num_patterns());
        work.rhs.copy_from(&rhs);
        let mut u = DMatrix::zeros(d, b);
        factor.solve_into(&ops, &mut work, &mut u);
        assert!((&u - &fast).amax() < 1e-12);
        let p = program.num_patterns();
        for k in 0..b {
            let flip = if k < p { -1.0 } else { 1.0 };
            let xu = work.xu.column(k) + work.xbg.column(k % p) * flip;
            assert!((xu - data.x() * u.column(k)).amax() < 1e-12);
        }
    }

    #[test]
    fn operators_match_program_definitions() {
        let data =
            Dataset::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]], &[0.0, 1.0]).unwrap();
        let program =
            ConvexProgram::new(&data, vec![vec![true, false], vec![true, true]], 0.0, 0.0)
                .unwrap();
        let ops = Operators::new(&program);
        let u = DMatrix::from_row_slice(2, 4, &[1.0, -0.5, 0.2, 0.3, 0.4, 1.0, -1.0, 0.1]);
        let sol = BlockSolution::from_matrix(u.clone());
        let fitted = program.fitted(&sol).unwrap();
        assert!((ops.apply_m(&u) - fitted).amax() < 1e-14);
        let au = ops.apply_a(&u);
        for blk in 0..4 {
            let direct = program.cone_rows(blk) * u.column(blk);
            assert!((au.column(blk) - direct).amax() < 1e-14);
        }
        // Adjoint identities.
        let r = DVector::from_vec(vec![0.3, -1.2]);
        let lhs = ops.apply_m(&u).dot(&r);
        let rhs = ops.apply_mt(&r).dot(&u);
        assert!((lhs - rhs).abs() < 1e-12);
        let v = DMatrix::from_fn(2, 4, |i, j| (i + 2 * j) as f64 * 0.1 - 0.3);
        assert!((au.dot(&v) - u.dot(&ops.apply_at(&v))).abs() < 1e-12);
    }

    #[test]
    fn scalar_instance_hits_analytic_minimizer() {
        let data = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        let program = ConvexProgram::new(&data, vec![vec![false], vec![true]], 0.1, 0.0).unwrap();
        let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
        assert_eq!(diag.status, SolverStatus::Converged);
        assert!((sol.block(1)[0] - 0.95).abs() < 1e-6, "{:?}", sol.matrix());
        for blk in [0, 2, 3] {
            assert!(sol.block(blk)[0].abs() < 1e-6);
        }

        // At tiny lambda only u_1 - u_3 is pinned down sharply.
        let program = program.with_regularization(1e-8, 0.0).unwrap();
        let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
        assert_eq!(diag.status, SolverStatus::Converged);
        assert!(program.data_fit(&sol).unwrap() <= 1e-6);
    }

    #[test]
    fn zero_targets_give_zero_solution() {
        let data = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.3, 1.0]], &[0.0, 0.0]).unwrap();
        let masks = vec![vec![true, true], vec![true, false], vec![false, true], vec![false, false]];
        let program = ConvexProgram::new(&data, masks, 0.1, 1e-10).unwrap();
        let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
        assert_eq!(diag.status, SolverStatus::Converged);
        assert_eq!(sol.total_l1(), 0.0);
        assert_eq!(diag.objective, 0.0);
    }
}
