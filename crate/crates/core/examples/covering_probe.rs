//! Greedy packing counts of single-neuron responses across a shrinking scale grid.
//!
//! ```text
//! cargo run --release --example covering_probe -- [d] [neurons]
//! ```

use convex_relu::complexity::covering_exponent_probe;

fn main() -> convex_relu::Result<()> {
    let mut args = std::env::args().skip(1);
    let d = args.next().map_or(3, |a| a.parse().expect("d"));
    let neurons = args.next().map_or(5000, |a| a.parse().expect("neurons"));

    let probe = covering_exponent_probe(d, &[0.4, 0.2, 0.1, 0.05], 200, neurons, 0)?;
    for row in &probe.rows {
        println!("eps {:5.3}  count {}", row.eps, row.count);
    }
    println!("fitted slope {:.3}, entropy exponent {:.3}", probe.slope, probe.exponent);
    Ok(())
}
