//! Records a small computation on the tape, runs the backward pass and
//! compares one gradient entry with a central difference.
//!
//! cargo run --release --example autodiff

use freqmix::numerics::{Rng, Tape, Tensor};

fn loss(x: &Tensor, w: &Tensor, b: &Tensor, label: usize) -> freqmix::Result<(f64, Tensor)> {
    let tape = Tape::new();
    let (xv, wv, bv) = (tape.constant(x.clone()), tape.leaf(w.clone()), tape.leaf(b.clone()));
    let h = tape.relu(tape.linear(xv, wv, bv)?)?;
    let logits = tape.mean_axis(h, 0)?;
    let l = tape.cross_entropy(logits, label)?;
    let grads = tape.backward(l)?;
    Ok((tape.item(l), grads.wrt(wv).cloned().unwrap_or_else(|| Tensor::zeros(w.shape()))))
}

fn main() -> freqmix::Result<()> {
    let mut rng = Rng::new(0);
    let x = rng.uniform_tensor(&[5, 4], -1.0, 1.0);
    let w = rng.uniform_tensor(&[4, 3], -1.0, 1.0);
    let b = rng.uniform_tensor(&[3], -0.1, 0.1);
    let (l, g) = loss(&x, &w, &b, 2)?;
    println!("loss {l:.6}");

    let eps = 1e-6;
    for k in 0..w.len() {
        let mut plus = w.clone();
        plus.data_mut()[k] += eps;
        let mut minus = w.clone();
        minus.data_mut()[k] -= eps;
        let numeric = (loss(&x, &plus, &b, 2)?.0 - loss(&x, &minus, &b, 2)?.0) / (2.0 * eps);
        println!("dW[{k:2}] tape {:+.8} numeric {numeric:+.8}", g.data()[k]);
    }
    Ok(())
}
