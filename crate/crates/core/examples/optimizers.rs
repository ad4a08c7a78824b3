//! Six Adam-family update rules on a badly scaled quadratic.
//!
//! Both coordinates share one parameter tensor. Exp and Sto scale each step
//! by `d * exp(-k d)` of the gradient's deviation `d` from its running mean,
//! normalized over the tensor, so the steep coordinate's large deviations
//! shrink its step toward zero and it stalls.

use mlkit::numerics::{RngStream, Tensor};
use mlkit::optim::{OptimConfig, OptimizerState, Variant};

fn main() -> mlkit::Result<()> {
    // f(a, b) = a^2 + 25 b^2
    let scales = [1.0, 25.0];
    println!("{:<9} {:>10} {:>10} {:>12} {:>10}", "variant", "a", "b", "f", "mean xi");
    for v in Variant::ALL {
        let mut state = OptimizerState::new(v, &[2], OptimConfig::textbook(0.05), Some(RngStream::from_seed(7)))?;
        let mut theta = Tensor::vector(vec![3.0, -2.0]);
        let mut xi_sum = 0.0;
        let steps = 500;
        for _ in 0..steps {
            let g = Tensor::vector(theta.data().iter().zip(scales).map(|(t, s)| 2.0 * s * t).collect());
            let xi = state.step(&mut theta, &g)?;
            xi_sum += xi.sum() / 2.0;
        }
        let f: f64 = theta.data().iter().zip(scales).map(|(t, s)| s * t * t).sum();
        let (a, b) = (theta.data()[0], theta.data()[1]);
        println!("{:<9} {a:>10.5} {b:>10.5} {f:>12.3e} {:>10.4}", v.name(), xi_sum / steps as f64);
    }
    Ok(())
}
