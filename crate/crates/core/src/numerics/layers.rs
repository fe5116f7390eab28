use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Pooling reduction used before a projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pool {
    Avg,
    Max,
}

/// `ReLU(pool(x, axis) · w + b)`: pools one axis away, then applies an affine
/// map to the last remaining axis.
pub fn pooled_projection(tape: &Tape, x: Var, w: Var, b: Var, pool: Pool, axis: usize) -> Result<Var> {
    let rank = tape.shape(x).len();
    if axis >= rank {
        return Err(Error::Axis {
            op: "pooled_projection",
            axis,
            rank,
        });
    }
    let pooled = match pool {
        Pool::Avg => tape.mean_axis(x, axis)?,
        Pool::Max => tape.max_axis(x, axis)?,
    };
    let z = tape.linear(pooled, w, b)?;
    tape.relu(z)
}

/// Eager form of [`pooled_projection`].
pub fn pooled_projection_eager(x: &Tensor, w: &Tensor, b: &Tensor, pool: Pool, axis: usize) -> Result<Tensor> {
    let tape = Tape::new();
    let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let y = pooled_projection(&tape, xv, wv, bv, pool, axis)?;
    Ok(tape.value(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn averaging_constants() {
        let x = Tensor::ones(&[4, 3, 5]);
        let y = pooled_projection_eager(&x, &Tensor::eye(3), &Tensor::zeros(&[3]), Pool::Avg, 2).unwrap();
        assert_eq!(y, Tensor::ones(&[4, 3]));
    }

    #[test]
    fn max_selects_spike() {
        let mut x = Tensor::zeros(&[2, 2, 6]);
        for j in 0..2 {
            for c in 0..2 {
                x.set(&[j, c, 3], 5.0);
            }
        }
        let y = pooled_projection_eager(&x, &Tensor::eye(2), &Tensor::zeros(&[2]), Pool::Max, 2).unwrap();
        assert_eq!(y, Tensor::full(&[2, 2], 5.0));
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = Rng::new(11);
        let x = rng.uniform_tensor(&[3, 4, 6], -1.0, 1.0);
        let w = rng.uniform_tensor(&[4, 5], -1.0, 1.0);
        let b = rng.uniform_tensor(&[5], -1.0, 1.0);
        for pool in [Pool::Avg, Pool::Max] {
            let y = pooled_projection_eager(&x, &w, &b, pool, 2).unwrap();
            let oracle = Tensor::from_fn(&[3, 5], |ix| {
                let mut z = b.get(&[ix[1]]);
                for c in 0..4 {
                    let vals: Vec<f64> = (0..6).map(|f| x.get(&[ix[0], c, f])).collect();
                    let p = match pool {
                        Pool::Avg => vals.iter().sum::<f64>() / 6.0,
                        Pool::Max => vals.iter().cloned().fold(f64::MIN, f64::max),
                    };
                    z += p * w.get(&[c, ix[1]]);
                }
                z.max(0.0)
            });
            assert!(y.max_abs_diff(&oracle) < 1e-12);
            assert!(y.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_bad_axis() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 2]));
        let w = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::zeros(&[2]));
        assert!(pooled_projection(&tape, x, w, b, Pool::Avg, 2).is_err());
    }
}
