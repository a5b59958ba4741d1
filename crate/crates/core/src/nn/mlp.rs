//! Fully connected head: ReLU hidden layers, linear output of width 1 whose
//! sigmoid is the predicted outbreak probability.

use super::linalg::{matvec, matvec_t_add, outer_add};
use super::{NnError, ParamLayout, Slot};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    weights: Vec<Slot>,
    biases: Vec<Slot>,
}

impl Mlp {
    /// `dims` = [input, hidden..., output].
    pub fn register(layout: &mut ParamLayout, prefix: &str, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "mlp needs input and output dims");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            weights.push(layout.add(format!("{prefix}.w{l}"), &[dims[l + 1], dims[l]]));
            biases.push(layout.add(format!("{prefix}.b{l}"), &[dims[l + 1]]));
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn forward_cached(&self, params: &[f64], x: &[f64]) -> Result<(Vec<f64>, MlpCache), NnError> {
        if x.len() != self.dims[0] {
            return Err(NnError::ShapeMismatch {
                expected: self.dims[0],
                got: x.len(),
            });
        }
        let layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (rows, cols) = (self.dims[l + 1], self.dims[l]);
            let mut out = vec![0.0; rows];
            matvec(self.weights[l].of(params), rows, cols, &acts[l], &mut out);
            let b = self.biases[l].of(params);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += bi;
            }
            if l + 1 < layers {
                for o in out.iter_mut() {
                    *o = o.max(0.0);
                }
            }
            acts.push(out);
        }
        let out = acts.last().expect("at least one layer").clone();
        Ok((out, MlpCache { acts }))
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_cached(params, x)?.0)
    }

    /// Returns the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        d_out: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let layers = self.dims.len() - 1;
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (rows, cols) = (self.dims[l + 1], self.dims[l]);
            if l + 1 < layers {
                // ReLU kink: zero gradient where the activation was clipped.
                for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            outer_add(self.weights[l].of_mut(grads), &delta, &cache.acts[l]);
            for (db, d) in self.biases[l].of_mut(grads).iter_mut().zip(&delta) {
                *db += d;
            }
            let mut d_in = vec![0.0; cols];
            matvec_t_add(self.weights[l].of(params), rows, cols, &delta, &mut d_in);
            delta = d_in;
        }
        delta
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// acts[0] = input, acts[l] = post-activation output of layer l.
    pub acts: Vec<Vec<f64>>,
}
