//! Compares GRU backpropagation through time with central differences.

use mlkit::layers::{gru_backward, gru_forward, GruParams, GRU_PARAM_NAMES};
use mlkit::numerics::{RngStream, Tensor};

fn loss(p: &GruParams, x: &Tensor, r: &Tensor) -> f64 {
    let (h, _) = gru_forward(p, x, None).unwrap();
    h.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn main() -> mlkit::Result<()> {
    let mut rng = RngStream::from_seed(3);
    let (batch, steps, input, hidden) = (2, 5, 3, 4);
    let mut p = GruParams::init(input, hidden, &mut rng);
    let random = |shape: &[usize], rng: &mut RngStream| {
        Tensor::new(shape.to_vec(), (0..shape.iter().product()).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
    };
    let x = random(&[batch, steps, input], &mut rng)?;
    // L = sum(r * h) has upstream gradient r
    let r = random(&[batch, steps, hidden], &mut rng)?;

    let (_, cache) = gru_forward(&p, &x, None)?;
    let grads = gru_backward(&p, &cache, &r)?;

    let h = 1e-6;
    for (i, name) in GRU_PARAM_NAMES.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for k in 0..grads.params[i].len() {
            let orig = p.tensors()[i].data()[k];
            p.tensors_mut()[i].data_mut()[k] = orig + h;
            let lp = loss(&p, &x, &r);
            p.tensors_mut()[i].data_mut()[k] = orig - h;
            let lm = loss(&p, &x, &r);
            p.tensors_mut()[i].data_mut()[k] = orig;
            let num = (lp - lm) / (2.0 * h);
            let a = grads.params[i].data()[k];
            worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(1e-5));
        }
        println!("{name:<3} {:>3} entries  max relative error {worst:.2e}", grads.params[i].len());
    }
    Ok(())
}
