//! Gated recurrent unit and its bidirectional wrapper.
//!
//! Gates operate on the concatenation [h_{t-1}, x_t]:
//!   z = sigmoid(W_u [h, x] + b_u)        update gate
//!   r = sigmoid(W_r [h, x] + b_r)        reset gate
//!   c = tanh(W_c [r*h, x] + b_c)         candidate state
//!   h' = (1 - z) * h + z * c

use super::linalg::{matvec, matvec_t_add, outer_add};
use super::loss::sigmoid;
use super::{NnError, ParamLayout, Slot};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub hidden: usize,
    pub input: usize,
    pub w_update: Slot,
    pub w_reset: Slot,
    pub w_cand: Slot,
    pub b_update: Slot,
    pub b_reset: Slot,
    pub b_cand: Slot,
}

impl GruCell {
    pub fn register(layout: &mut ParamLayout, prefix: &str, hidden: usize, input: usize) -> Self {
        let cat = hidden + input;
        GruCell {
            hidden,
            input,
            w_update: layout.add(format!("{prefix}.w_update"), &[hidden, cat]),
            w_reset: layout.add(format!("{prefix}.w_reset"), &[hidden, cat]),
            w_cand: layout.add(format!("{prefix}.w_cand"), &[hidden, cat]),
            b_update: layout.add(format!("{prefix}.b_update"), &[hidden]),
            b_reset: layout.add(format!("{prefix}.b_reset"), &[hidden]),
            b_cand: layout.add(format!("{prefix}.b_cand"), &[hidden]),
        }
    }

    fn check_shapes(&self, h_prev: &[f64], x: &[f64]) -> Result<(), NnError> {
        if h_prev.len() != self.hidden {
            return Err(NnError::ShapeMismatch {
                expected: self.hidden,
                got: h_prev.len(),
            });
        }
        if x.len() != self.input {
            return Err(NnError::ShapeMismatch {
                expected: self.input,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One gated step; writes gate activations into the step cache.
    fn step_into(&self, params: &[f64], h_prev: &[f64], x: &[f64], step: &mut GruStep) {
        let h = self.hidden;
        let cat = h + self.input;
        step.u[..h].copy_from_slice(h_prev);
        step.u[h..].copy_from_slice(x);

        matvec(self.w_update.of(params), h, cat, &step.u, &mut step.z);
        matvec(self.w_reset.of(params), h, cat, &step.u, &mut step.r);
        let b_u = self.b_update.of(params);
        let b_r = self.b_reset.of(params);
        for i in 0..h {
            step.z[i] = sigmoid(step.z[i] + b_u[i]);
            step.r[i] = sigmoid(step.r[i] + b_r[i]);
        }
        for i in 0..h {
            step.v[i] = step.r[i] * h_prev[i];
        }
        step.v[h..].copy_from_slice(x);
        matvec(self.w_cand.of(params), h, cat, &step.v, &mut step.c);
        let b_c = self.b_cand.of(params);
        for i in 0..h {
            step.c[i] = (step.c[i] + b_c[i]).tanh();
            step.h[i] = (1.0 - step.z[i]) * h_prev[i] + step.z[i] * step.c[i];
        }
    }

    /// Run the whole sequence, retaining what the backward pass needs.
    pub fn forward_cached(&self, params: &[f64], xs: &[Vec<f64>]) -> Result<GruCache, NnError> {
        if xs.is_empty() {
            return Err(NnError::EmptySequence);
        }
        let mut cache = GruCache {
            steps: Vec::with_capacity(xs.len()),
            hidden: self.hidden,
        };
        let mut h_prev = vec![0.0; self.hidden];
        for x in xs {
            self.check_shapes(&h_prev, x)?;
            let mut step = GruStep::zeros(self.hidden, self.input);
            self.step_into(params, &h_prev, x, &mut step);
            h_prev.copy_from_slice(&step.h);
            cache.steps.push(step);
        }
        Ok(cache)
    }

    /// Backpropagate from a gradient on the final hidden state, accumulating
    /// into `grads` (same layout as `params`).
    pub fn backward(
        &self,
        params: &[f64],
        cache: &GruCache,
        d_h_final: &[f64],
        grads: &mut [f64],
    ) {
        let h = self.hidden;
        let cat = h + self.input;
        let mut dh = d_h_final.to_vec();
        let mut dhprev = vec![0.0; h];
        let mut da = vec![0.0; h];
        let mut dv = vec![0.0; cat];
        let mut du = vec![0.0; cat];
        let zeros = vec![0.0; h];
        for t in (0..cache.steps.len()).rev() {
            let step = &cache.steps[t];
            let h_prev: &[f64] = if t == 0 { &zeros } else { &cache.steps[t - 1].h };
            dhprev.iter_mut().for_each(|v| *v = 0.0);
            du.iter_mut().for_each(|v| *v = 0.0);
            dv.iter_mut().for_each(|v| *v = 0.0);

            // candidate branch
            for i in 0..h {
                let dc = dh[i] * step.z[i];
                da[i] = dc * (1.0 - step.c[i] * step.c[i]);
                dhprev[i] += dh[i] * (1.0 - step.z[i]);
            }
            outer_add(self.w_cand.of_mut(grads), &da, &step.v);
            add_bias(self.b_cand.of_mut(grads), &da);
            matvec_t_add(self.w_cand.of(params), h, cat, &da, &mut dv);
            // reset branch (the x part of dv is not propagated further)
            for i in 0..h {
                let dr = dv[i] * h_prev[i];
                dhprev[i] += dv[i] * step.r[i];
                da[i] = dr * step.r[i] * (1.0 - step.r[i]);
            }
            outer_add(self.w_reset.of_mut(grads), &da, &step.u);
            add_bias(self.b_reset.of_mut(grads), &da);
            matvec_t_add(self.w_reset.of(params), h, cat, &da, &mut du);
            // update branch
            for i in 0..h {
                let dz = dh[i] * (step.c[i] - h_prev[i]);
                da[i] = dz * step.z[i] * (1.0 - step.z[i]);
            }
            outer_add(self.w_update.of_mut(grads), &da, &step.u);
            add_bias(self.b_update.of_mut(grads), &da);
            matvec_t_add(self.w_update.of(params), h, cat, &da, &mut du);

            for i in 0..h {
                dh[i] = dhprev[i] + du[i];
            }
        }
    }
}

fn add_bias(db: &mut [f64], da: &[f64]) {
    for (d, a) in db.iter_mut().zip(da) {
        *d += a;
    }
}

#[derive(Debug, Clone)]
pub struct GruStep {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruStep {
    fn zeros(hidden: usize, input: usize) -> Self {
        GruStep {
            u: vec![0.0; hidden + input],
            v: vec![0.0; hidden + input],
            z: vec![0.0; hidden],
            r: vec![0.0; hidden],
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub steps: Vec<GruStep>,
    hidden: usize,
}

impl GruCache {
    pub fn final_hidden(&self) -> &[f64] {
        &self.steps.last().expect("non-empty sequence").h
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

/// Single GRU step from an explicit previous hidden state.
pub fn gru_step(
    cell: &GruCell,
    params: &[f64],
    h_prev: &[f64],
    x: &[f64],
) -> Result<Vec<f64>, NnError> {
    cell.check_shapes(h_prev, x)?;
    let mut step = GruStep::zeros(cell.hidden, cell.input);
    cell.step_into(params, h_prev, x, &mut step);
    Ok(step.h)
}

/// Forward and backward GRU over the same input width; the sequence
/// representation is the concatenation of the two final states.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl BiGru {
    pub fn register(layout: &mut ParamLayout, prefix: &str, hidden: usize, input: usize) -> Self {
        BiGru {
            fwd: GruCell::register(layout, &format!("{prefix}.fwd"), hidden, input),
            bwd: GruCell::register(layout, &format!("{prefix}.bwd"), hidden, input),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn forward_cached(
        &self,
        params: &[f64],
        xs: &[Vec<f64>],
    ) -> Result<(Vec<f64>, BiGruCache), NnError> {
        let fwd = self.fwd.forward_cached(params, xs)?;
        let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd = self.bwd.forward_cached(params, &reversed)?;
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend_from_slice(fwd.final_hidden());
        out.extend_from_slice(bwd.final_hidden());
        Ok((out, BiGruCache { fwd, bwd }))
    }

    pub fn backward(&self, params: &[f64], cache: &BiGruCache, d_out: &[f64], grads: &mut [f64]) {
        let h = self.fwd.hidden;
        self.fwd.backward(params, &cache.fwd, &d_out[..h], grads);
        self.bwd.backward(params, &cache.bwd, &d_out[h..], grads);
    }
}

#[derive(Debug, Clone)]
pub struct BiGruCache {
    pub fwd: GruCache,
    pub bwd: GruCache,
}

/// Sequence representation: final forward state concatenated with the final
/// backward state.
pub fn bigru_forward(bigru: &BiGru, params: &[f64], xs: &[Vec<f64>]) -> Result<Vec<f64>, NnError> {
    Ok(bigru.forward_cached(params, xs)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamSet;
    use rand::Rng;

    fn make_cell(hidden: usize, input: usize) -> (GruCell, ParamLayout) {
        let mut layout = ParamLayout::default();
        let cell = GruCell::register(&mut layout, "gru", hidden, input);
        (cell, layout)
    }

    #[test]
    fn zero_parameters_halve_previous_state() {
        let (cell, layout) = make_cell(4, 3);
        let params = ParamSet::zeros(layout);
        let h_prev = [1.0, -2.0, 0.5, 4.0];
        let h = gru_step(&cell, &params.data, &h_prev, &[0.3, 0.1, -0.7]).unwrap();
        for (hi, pi) in h.iter().zip(&h_prev) {
            assert!((hi - 0.5 * pi).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_update_gate_copies_state() {
        let (cell, layout) = make_cell(3, 2);
        let mut params = ParamSet::init_uniform(layout, 7);
        for b in cell.b_update.of_mut(&mut params.data) {
            *b = -40.0;
        }
        let h_prev = [0.4, -0.9, 0.2];
        let h = gru_step(&cell, &params.data, &h_prev, &[1.0, -1.0]).unwrap();
        for (hi, pi) in h.iter().zip(&h_prev) {
            assert!((hi - pi).abs() < 1e-6);
        }
    }

    #[test]
    fn step_matches_scalar_reference() {
        let hidden = 5;
        let input = 4;
        let cat = hidden + input;
        let (cell, layout) = make_cell(hidden, input);
        let params = ParamSet::init_uniform(layout, 42);
        let mut rng = crate::rng::stream_rng(42, 1);
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h_prev = vec![0.25, -0.5, 0.0, 1.0, -1.0];
        let h = gru_step(&cell, &params.data, &h_prev, &x).unwrap();

        // Straight-line scalar recomputation of the gate equations.
        let p = &params.data;
        let sig = |a: f64| 1.0 / (1.0 + (-a).exp());
        let concat: Vec<f64> = h_prev.iter().chain(&x).copied().collect();
        let pre = |w: Slot, b: Slot, i: usize, v: &[f64]| -> f64 {
            let mut acc = p[b.offset + i];
            for (j, vj) in v.iter().enumerate() {
                acc += p[w.offset + i * cat + j] * vj;
            }
            acc
        };
        let z: Vec<f64> = (0..hidden)
            .map(|i| sig(pre(cell.w_update, cell.b_update, i, &concat)))
            .collect();
        let r: Vec<f64> = (0..hidden)
            .map(|i| sig(pre(cell.w_reset, cell.b_reset, i, &concat)))
            .collect();
        let gated: Vec<f64> = (0..hidden)
            .map(|j| r[j] * h_prev[j])
            .chain(x.iter().copied())
            .collect();
        for i in 0..hidden {
            let c = pre(cell.w_cand, cell.b_cand, i, &gated).tanh();
            let expected = (1.0 - z[i]) * h_prev[i] + z[i] * c;
            assert!((h[i] - expected).abs() < 1e-12, "unit {i}");
        }
    }

    #[test]
    fn hidden_state_stays_bounded() {
        let (cell, layout) = make_cell(6, 3);
        let params = ParamSet::init_uniform(layout, 3);
        let mut rng = crate::rng::stream_rng(8, 0);
        let mut h = vec![0.0; 6];
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let bound = h
                .iter()
                .map(|v: &f64| v.abs())
                .fold(0.0f64, f64::max)
                .max(1.0);
            h = gru_step(&cell, &params.data, &h, &x).unwrap();
            let new_max = h.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            assert!(new_max <= bound + 1e-12, "norm grew past the convex bound");
        }
    }

    fn make_bigru(hidden: usize, input: usize) -> (BiGru, ParamLayout) {
        let mut layout = ParamLayout::default();
        let b = BiGru::register(&mut layout, "bigru", hidden, input);
        (b, layout)
    }

    fn copy_fwd_to_bwd(bigru: &BiGru, params: &mut ParamSet) {
        for (f, b) in [
            (bigru.fwd.w_update, bigru.bwd.w_update),
            (bigru.fwd.w_reset, bigru.bwd.w_reset),
            (bigru.fwd.w_cand, bigru.bwd.w_cand),
            (bigru.fwd.b_update, bigru.bwd.b_update),
            (bigru.fwd.b_reset, bigru.bwd.b_reset),
            (bigru.fwd.b_cand, bigru.bwd.b_cand),
        ] {
            let src = f.of(&params.data).to_vec();
            b.of_mut(&mut params.data).copy_from_slice(&src);
        }
    }

    #[test]
    fn length_one_sequence_is_a_pair_of_single_steps() {
        let (bigru, layout) = make_bigru(3, 2);
        let params = ParamSet::init_uniform(layout, 11);
        let x = vec![vec![0.5, -1.5]];
        let out = bigru_forward(&bigru, &params.data, &x).unwrap();
        let zero = vec![0.0; 3];
        let f = gru_step(&bigru.fwd, &params.data, &zero, &x[0]).unwrap();
        let b = gru_step(&bigru.bwd, &params.data, &zero, &x[0]).unwrap();
        assert_eq!(&out[..3], f.as_slice());
        assert_eq!(&out[3..], b.as_slice());
    }

    #[test]
    fn palindrome_with_shared_params_gives_equal_halves() {
        let (bigru, layout) = make_bigru(4, 2);
        let mut params = ParamSet::init_uniform(layout, 13);
        copy_fwd_to_bwd(&bigru, &mut params);
        let xs = vec![
            vec![1.0, 0.0],
            vec![-0.5, 2.0],
            vec![1.0, 0.0],
        ];
        let out = bigru_forward(&bigru, &params.data, &xs).unwrap();
        for i in 0..4 {
            assert!((out[i] - out[4 + i]).abs() < 1e-15);
        }
    }

    #[test]
    fn reversing_input_swaps_halves_under_shared_params() {
        let (bigru, layout) = make_bigru(4, 3);
        let mut params = ParamSet::init_uniform(layout, 17);
        copy_fwd_to_bwd(&bigru, &mut params);
        let xs: Vec<Vec<f64>> = vec![
            vec![0.1, 0.2, -0.3],
            vec![1.0, -1.0, 0.0],
            vec![0.7, 0.7, 0.7],
            vec![-0.2, 0.4, 0.9],
        ];
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let out = bigru_forward(&bigru, &params.data, &xs).unwrap();
        let out_rev = bigru_forward(&bigru, &params.data, &rev).unwrap();
        for i in 0..4 {
            assert!((out[i] - out_rev[4 + i]).abs() < 1e-15);
            assert!((out[4 + i] - out_rev[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let (bigru, layout) = make_bigru(2, 2);
        let params = ParamSet::zeros(layout);
        assert!(matches!(
            bigru_forward(&bigru, &params.data, &[]),
            Err(NnError::EmptySequence)
        ));
    }
}
