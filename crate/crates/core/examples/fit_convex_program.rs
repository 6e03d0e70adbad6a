//! Solve the convex program on a small sample, rebuild the network, and compare
//! against the reference solver.
//!
//! ```text
//! cargo run --example fit_convex_program -- [lambda]
//! ```

use convex_relu::convex_solver::{objective, solve_oracle};
use convex_relu::harness::gen_synthetic;
use convex_relu::network::{mse, path_norm_objective, reconstruct_default};
use convex_relu::{assemble, enumerate_patterns, solve, EnumerationMode, SolverConfig};

fn main() -> convex_relu::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(0.01, |a| a.parse().expect("lambda"));
    let s = gen_synthetic(8, 2, 1)?;
    let patterns = enumerate_patterns(&s.data, EnumerationMode::Exact, 10_000, 0)?;
    let program = assemble(&s.data, &patterns, lambda, 0.0)?;
    println!(
        "{} patterns, {} blocks, {} variables",
        program.num_patterns(),
        program.num_blocks(),
        program.num_variables()
    );

    let (sol, diag) = solve(&program, &SolverConfig::default())?;
    println!(
        "splitting solver: {:?} after {} iterations, objective {:.10}, violation {:.1e}",
        diag.status, diag.iterations, diag.objective, diag.feasibility_violation
    );
    let reference = solve_oracle(&program, 20_000)?;
    println!("reference solver: objective {:.10}", objective(&program, &reference)?);

    let net = reconstruct_default(&sol, &program);
    let pred = net.forward(s.data.x())?;
    println!(
        "network: width {}, path norm {:.6}, objective {:.10}, train mse {:.3e}",
        net.width(),
        net.path_norm().path_norm,
        path_norm_objective(&net, &s.data, lambda)?,
        mse(&pred, s.data.y())?
    );
    Ok(())
}
