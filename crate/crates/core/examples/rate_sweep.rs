//! Path-norm vs NTK learning curves on single-ReLU synthetic data.
//!
//! ```text
//! cargo run --release --example rate_sweep -- [max_iters] [out.csv]
//! ```

use std::path::PathBuf;

use convex_relu::harness::{median_by_n, rate_sweep, slopes_by_method, ExperimentConfig, Method};

fn main() -> convex_relu::Result<()> {
    let mut args = std::env::args().skip(1);
    let max_iters = args.next().map_or(2000, |a| a.parse().expect("max_iters"));
    let output = args.next().map(PathBuf::from);

    let mut config = ExperimentConfig::synthetic(vec![10, 20, 40, 80, 160], 3, vec![0, 1, 2, 3, 4]);
    config.large_test = true;
    config.solver.max_iters = max_iters;
    config.output = output;

    let start = std::time::Instant::now();
    let records = rate_sweep(&config)?;
    for method in [Method::Pathnorm, Method::Ntk] {
        println!("{method}");
        for (n, m) in median_by_n(&records, method) {
            println!("  n = {n:4}  median test mse = {m:.3e}");
        }
    }
    for (method, slope) in slopes_by_method(&records) {
        match slope {
            Ok(s) => println!("{method} slope {s:.3}"),
            Err(e) => println!("{method} slope unavailable: {e}"),
        }
    }
    let failed = records.iter().filter(|r| r.is_failed()).count();
    println!("{} records, {failed} failed, {:.1} s", records.len(), start.elapsed().as_secs_f64());
    Ok(())
}
