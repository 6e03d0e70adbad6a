//! Monte-Carlo brackets on the Gaussian complexity of the unit path-norm ball
//! against the closed-form bound.
//!
//! ```text
//! cargo run --example gaussian_complexity -- [trials]
//! ```

use convex_relu::complexity::{gaussian_bound, gaussian_complexity_mc};
use convex_relu::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> convex_relu::Result<()> {
    let trials = std::env::args().nth(1).map_or(1000, |a| a.parse().expect("trials"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("{:>4} {:>5} {:>10} {:>10} {:>10}", "d", "n", "lower", "upper", "bound");
    for d in [2, 8, 32] {
        for n in [50, 100, 200, 400] {
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
            let data = Dataset::unlabeled(x)?;
            let (upper, lower) = gaussian_complexity_mc(&data, 1.0, trials, 7)?;
            println!(
                "{d:>4} {n:>5} {:>10.5} {:>10.5} {:>10.5}",
                lower.mean,
                upper.mean,
                gaussian_bound(1.0, d, n)
            );
        }
    }
    Ok(())
}
