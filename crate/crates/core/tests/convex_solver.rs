mod common;

use convex_relu::arrangement::{enumerate_patterns, EnumerationMode};
use convex_relu::convex_solver::{
    feasibility_violation, objective, solve_oracle, solve_warm, Orientation,
};
use convex_relu::{assemble, solve, BlockSolution, ConvexProgram, Dataset, Error, SolverConfig, SolverStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const ORACLE_ITERS: usize = 60_000;

fn scalar(lambda: f64) -> ConvexProgram {
    let data = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
    ConvexProgram::new(&data, vec![vec![true], vec![false]], lambda, 0.0).unwrap()
}

fn random_program(seed: u64, n: usize, d: usize, lambda: f64, lambda_tilde: f64) -> ConvexProgram {
    let mut rng = common::rng(seed);
    let data = common::random_dataset(&mut rng, n, d);
    let set = enumerate_patterns(&data, EnumerationMode::Exact, 10_000, 0).unwrap();
    assemble(&data, &set, lambda, lambda_tilde).unwrap()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[test]
fn assemble_doubles_blocks() {
    let p = random_program(1, 5, 2, 0.1, 0.0);
    assert_eq!(p.num_blocks(), 2 * p.num_patterns());
    assert_eq!(p.num_variables(), p.num_blocks() * 2);
    assert_eq!(p.num_cone_rows(), p.num_blocks() * 5);
    let half = p.num_patterns();
    for i in 0..half {
        assert_eq!(p.block_mask(i), p.block_mask(i + half));
        assert_eq!(p.cone_rows(i), p.cone_rows(i + half));
        assert_eq!(p.orientation(i), Orientation::Positive);
        assert_eq!(p.orientation(i + half), Orientation::Negative);
    }
}

#[test]
fn assemble_rejects_bad_inputs() {
    let data = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
    assert!(matches!(ConvexProgram::new(&data, vec![], 0.1, 0.0), Err(Error::EmptyPatternSet)));
    assert!(matches!(ConvexProgram::new(&data, vec![vec![true]], -1.0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(ConvexProgram::new(&data, vec![vec![true]], 0.1, f64::NAN), Err(Error::Domain(_))));
}

#[test]
fn scalar_instance_interpolates() {
    let program = scalar(1e-8);
    let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
    assert!(program.data_fit(&sol).unwrap() <= 1e-6);
    assert!(diag.feasibility_violation <= 1e-8);
    // Positive block of the active pattern carries the fit.
    let u = sol.block(0)[0] - sol.block(2)[0];
    assert!((u - 1.0).abs() < 1e-4, "{u}");
}

#[test]
fn scalar_oracle_matches_analytic_minimizer() {
    for lambda in [1e-8, 0.1, 0.5] {
        let program = scalar(lambda);
        let sol = solve_oracle(&program, 20_000).unwrap();
        assert!((sol.block(0)[0] - (1.0 - lambda / 2.0)).abs() < 1e-6, "lambda {lambda}");
        for b in 1..4 {
            assert!(sol.block(b)[0].abs() < 1e-6);
        }
    }
}

#[test]
fn zero_targets_give_zero_solution() {
    let mut rng = common::rng(9);
    let data = common::random_dataset(&mut rng, 5, 2);
    let data = Dataset::new(data.x().clone(), DVector::zeros(5)).unwrap();
    let set = enumerate_patterns(&data, EnumerationMode::Exact, 1000, 0).unwrap();
    let program = assemble(&data, &set, 0.1, 1e-10).unwrap();
    let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
    assert_eq!(diag.status, SolverStatus::Converged);
    assert!(sol.matrix().amax() < 1e-12);
    assert!(diag.objective.abs() < 1e-12);
    let oracle = solve_oracle(&program, 100).unwrap();
    assert_eq!(oracle.matrix().amax(), 0.0);
}

#[test]
fn small_instance_matches_oracle() {
    let program = random_program(4, 4, 2, 0.1, 1e-10);
    let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
    assert_eq!(diag.status, SolverStatus::Converged);
    let oracle = solve_oracle(&program, ORACLE_ITERS).unwrap();
    let a = objective(&program, &sol).unwrap();
    let b = objective(&program, &oracle).unwrap();
    assert!(rel_gap(a, b) <= 1e-5, "{a} vs {b}");
}

#[test]
fn elastic_net_mass_is_nonincreasing() {
    let base = random_program(11, 5, 2, 0.05, 0.0);
    let mut last = f64::INFINITY;
    for lt in [1e-3, 1e-2, 1e-1, 1.0] {
        let program = base.with_regularization(0.05, lt).unwrap();
        let (sol, _) = solve(&program, &SolverConfig::default()).unwrap();
        let oracle = solve_oracle(&program, ORACLE_ITERS).unwrap();
        // Strong convexity makes the minimizer unique, so both solvers agree on it.
        assert!((sol.l2_mass() - oracle.l2_mass()).abs() <= 1e-5 * (1.0 + oracle.l2_mass()));
        assert!(sol.l2_mass() <= last + 1e-9);
        last = sol.l2_mass();
    }
}

#[test]
fn large_lambda_gives_zero_solution() {
    let program = random_program(21, 6, 3, 1e-3, 1e-10);
    let n = program.n() as f64;
    // Zero is optimal once lambda dominates the gradient of the fit at the origin.
    let mut critical = 0.0f64;
    for b in 0..program.num_patterns() {
        let masked = DVector::from_iterator(
            program.n(),
            program.block_mask(b).iter().zip(program.y().iter()).map(|(&m, &y)| if m { y } else { 0.0 }),
        );
        critical = critical.max((program.x().tr_mul(&masked) * (2.0 / n)).amax());
    }
    let (sol, _) = solve(&program.with_regularization(1.01 * critical, 1e-10).unwrap(), &SolverConfig::default()).unwrap();
    assert!(sol.total_l1() < 1e-8, "{}", sol.total_l1());

    let mut lambda = 1e-3;
    let mut doublings = 0;
    loop {
        let (sol, _) = solve(&program.with_regularization(lambda, 1e-10).unwrap(), &SolverConfig::default()).unwrap();
        if sol.total_l1() < 1e-8 {
            break;
        }
        lambda *= 2.0;
        doublings += 1;
        assert!(doublings < 40);
    }
    assert!(lambda <= 2.0 * critical.max(1e-3));
}

#[test]
fn error_decays_on_strongly_convex_instance() {
    let program = random_program(31, 5, 2, 0.05, 0.01);
    let oracle = solve_oracle(&program, 200_000).unwrap();
    let error_at = |iters: usize| {
        let config = SolverConfig {
            max_iters: iters,
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            feasibility_tol: 1e-300,
            ..SolverConfig::default()
        };
        let (sol, diag) = solve(&program, &config).unwrap();
        assert_eq!(diag.iterations, iters);
        (sol.matrix() - oracle.matrix()).norm_squared()
    };
    let early = error_at(50);
    let late = error_at(5000);
    assert!(late <= 1e-4 * early, "{early:e} -> {late:e}");
}

#[test]
fn warm_start_reuses_solution() {
    let program = random_program(41, 5, 2, 0.1, 1e-10);
    let config = SolverConfig::default();
    let (sol, diag) = solve(&program, &config).unwrap();
    let warm = SolverConfig {
        warm_start: true,
        ..config
    };
    let (again, diag2) = solve_warm(&program, &warm, Some(&sol)).unwrap();
    assert!(diag2.iterations <= diag.iterations);
    assert!(rel_gap(objective(&program, &again).unwrap(), diag.objective) < 1e-6);
    let wrong = BlockSolution::from_matrix(DMatrix::zeros(1, 2));
    assert!(solve_warm(&program, &warm, Some(&wrong)).is_err());
}

#[test]
fn invalid_config_is_rejected() {
    let program = scalar(0.1);
    for bad in [
        SolverConfig { max_iters: 0, ..SolverConfig::default() },
        SolverConfig { abs_tol: 0.0, ..SolverConfig::default() },
        SolverConfig { relaxation: 2.0, ..SolverConfig::default() },
    ] {
        assert!(matches!(solve(&program, &bad), Err(Error::Config(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_agrees_with_oracle(
        seed in 0u64..10_000,
        n in 2usize..6,
        d in 1usize..3,
        lambda in prop::sample::select(vec![0.01, 0.1, 1.0]),
    ) {
        let program = random_program(seed, n, d, lambda, 1e-10);
        let (sol, diag) = solve(&program, &SolverConfig::default()).unwrap();
        prop_assert_eq!(diag.status, SolverStatus::Converged);
        let oracle = solve_oracle(&program, ORACLE_ITERS).unwrap();
        let a = objective(&program, &sol).unwrap();
        let b = objective(&program, &oracle).unwrap();
        prop_assert!(rel_gap(a, b) <= 1e-5, "{} vs {}", a, b);
    }

    #[test]
    fn converged_solutions_are_feasible_and_beat_zero(
        seed in 0u64..10_000,
        n in 2usize..8,
        d in 1usize..4,
        lambda in 1e-4f64..1.0,
    ) {
        let program = random_program(seed, n, d, lambda, 1e-10);
        let config = SolverConfig::default();
        let (sol, diag) = solve(&program, &config).unwrap();
        let zero = program.y().norm_squared() / n as f64;
        prop_assert!(diag.objective <= zero + 1e-12);
        if diag.status == SolverStatus::Converged {
            prop_assert!(feasibility_violation(&program, &sol).unwrap() <= config.feasibility_tol);
            prop_assert!(diag.primal_residual <= diag.primal_tolerance);
            prop_assert!(diag.dual_residual <= diag.dual_tolerance);
        }
        let (again, _) = solve(&program, &config).unwrap();
        prop_assert_eq!(sol, again);
    }
}
