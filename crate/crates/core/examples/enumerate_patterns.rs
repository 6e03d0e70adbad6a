//! Activation patterns of a small synthetic sample, exact vs sampled.
//!
//! ```text
//! cargo run --example enumerate_patterns -- [n] [d] [budget]
//! ```

use convex_relu::arrangement::{exact_region_count, pattern_bound};
use convex_relu::harness::gen_synthetic;
use convex_relu::{enumerate_patterns, EnumerationMode};

fn main() -> convex_relu::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(10, |a| a.parse().expect("n"));
    let d = args.next().map_or(3, |a| a.parse().expect("d"));
    let budget = args.next().map_or(100_000, |a| a.parse().expect("budget"));

    let data = gen_synthetic(n, d, 0)?.data;
    let exact = enumerate_patterns(&data, EnumerationMode::Exact, 1_000_000, 0)?;
    println!(
        "n = {n}, d = {d}: {} regions (generic count {}, bound {:.3e})",
        exact.len(),
        exact_region_count(n, exact.rank),
        pattern_bound(n, exact.rank)?
    );
    for seed in 0..3 {
        let sampled = enumerate_patterns(&data, EnumerationMode::Sampled, budget, seed)?;
        println!("  sampled, budget {budget}, seed {seed}: {} found", sampled.len());
    }
    for mask in exact.masks().take(8) {
        println!("  {}", convex_relu::arrangement::mask_to_string(mask));
    }
    if exact.len() > 8 {
        println!("  ... {} more", exact.len() - 8);
    }
    Ok(())
}
