//! Kernel ridge regression with the infinite-width NTK on synthetic data.
//!
//! ```text
//! cargo run --example ntk_baseline -- [n] [d]
//! ```

use convex_relu::harness::{fit_ntk, gen_synthetic};
use convex_relu::network::mse;
use convex_relu::ntk::ntk_value_slices;

fn main() -> convex_relu::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(100, |a| a.parse().expect("n"));
    let d = args.next().map_or(3, |a| a.parse().expect("d"));

    println!("same   {:.6}", ntk_value_slices(&[1.0, 0.0], &[1.0, 0.0]));
    println!("orth   {:.6}", ntk_value_slices(&[1.0, 0.0], &[0.0, 1.0]));
    println!("anti   {:.6}", ntk_value_slices(&[1.0, 0.0], &[-1.0, 0.0]));

    let train = gen_synthetic(n, d, 0)?;
    let test = gen_synthetic(1000, d, 1)?;
    // Same target on both samples.
    let test_data = convex_relu::Dataset::new(test.data.x().clone(), train.target.eval(test.data.x()))?;
    for lambda in [1e-8, 1e-4, 1e-2] {
        let (fit, pred) = fit_ntk(&train.data, &test_data, lambda)?;
        println!(
            "lambda {lambda:.0e}: train mse {:.3e}, test mse {:.3e}",
            mse(&fit, train.data.y())?,
            mse(&pred, test_data.y())?
        );
    }
    Ok(())
}
