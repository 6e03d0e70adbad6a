//! Path-norm vs NTK test MSE on the vendored breast-cancer table (569 rows, 30
//! features, 0/1 target), 80/20 split, standardized features.
//!
//! ```text
//! cargo run --release --example breast_cancer -- [max_iters] [n ...]
//! ```

use std::path::PathBuf;

use convex_relu::harness::{
    median_by_n, rate_sweep, DataSource, ExperimentConfig, Method, PatternPolicy,
};

fn main() -> convex_relu::Result<()> {
    let mut args = std::env::args().skip(1);
    let max_iters = args.next().map_or(1000, |a| a.parse().expect("max_iters"));
    let mut n_grid: Vec<usize> = args.map(|a| a.parse().expect("n")).collect();
    if n_grid.is_empty() {
        n_grid = vec![300];
    }

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/breast_cancer.csv");
    let mut config = ExperimentConfig::synthetic(vec![], 0, vec![]);
    config.source = DataSource::Csv {
        path,
        label_column: "target".into(),
        split_fraction: 0.8,
        n_grid,
        seed_list: vec![0, 1, 2, 3, 4],
    };
    config.pattern_mode = PatternPolicy::Sampled;
    config.pattern_budget = 10_000;
    config.solver.max_iters = max_iters;

    let start = std::time::Instant::now();
    let records = rate_sweep(&config)?;
    for r in &records {
        println!(
            "n = {:3} seed = {} {:8} train {:.3e} test {:.3e} iters {:?} patterns {:?}",
            r.n,
            r.seed,
            r.method.to_string(),
            r.train_mse.unwrap_or(f64::NAN),
            r.test_mse.unwrap_or(f64::NAN),
            r.iters,
            r.num_patterns
        );
    }
    for method in [Method::Pathnorm, Method::Ntk] {
        for (n, m) in median_by_n(&records, method) {
            println!("{method:8} n = {n}: median test mse {m:.4}");
        }
    }
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
