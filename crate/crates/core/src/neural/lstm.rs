//! Single LSTM layer with explicit forward caches and backpropagation through time.
//!
//! Gate pre-activations are `W · [x; h_prev] + b`, with the rows of `W`
//! grouped as input, forget, candidate and output gates (`H` rows each).

use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<T> {
    /// `4H x (input + H)`
    pub w: Tensor<T>,
    /// `4H x 1`
    pub b: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![T::zero(); hidden], c: vec![T::zero(); hidden] }
    }
}

/// Activations of one time step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    xh: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

impl<T: Scalar> LstmLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer { w: Tensor::zeros(4 * hidden, input + hidden), b: Tensor::zeros(4 * hidden, 1) }
    }

    pub fn hidden(&self) -> usize {
        self.b.rows / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols - self.hidden()
    }

    pub fn step(&self, x: &[T], state: &LstmState<T>) -> (LstmState<T>, StepCache<T>) {
        let hs = self.hidden();
        let mut xh = Vec::with_capacity(x.len() + hs);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&state.h);
        let z = self.w.affine(&xh, &self.b.data);
        let i: Vec<T> = z[..hs].iter().map(|v| v.sigmoid()).collect();
        let f: Vec<T> = z[hs..2 * hs].iter().map(|v| v.sigmoid()).collect();
        let g: Vec<T> = z[2 * hs..3 * hs].iter().map(|v| v.tanh()).collect();
        let o: Vec<T> = z[3 * hs..].iter().map(|v| v.sigmoid()).collect();
        let c: Vec<T> = (0..hs).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = (0..hs).map(|k| o[k] * tanh_c[k]).collect();
        let cache = StepCache { xh, i, f, g, o, c_prev: state.c.clone(), tanh_c };
        (LstmState { h, c }, cache)
    }

    /// Runs the layer over `inputs`; returns per-step outputs, caches and the final state.
    pub fn forward(&self, inputs: &[Vec<T>], init: LstmState<T>) -> (Vec<Vec<T>>, Vec<StepCache<T>>, LstmState<T>) {
        let mut state = init;
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (next, cache) = self.step(x, &state);
            outputs.push(next.h.clone());
            caches.push(cache);
            state = next;
        }
        (outputs, caches, state)
    }

    /// Backpropagates through the whole sequence.
    ///
    /// `d_outputs[t]` is the loss gradient w.r.t. the output at step t and
    /// `d_final` the gradient w.r.t. the final state. Parameter gradients are
    /// accumulated into `grad`. Returns input gradients and the gradient
    /// w.r.t. the initial state.
    pub fn backward(
        &self,
        caches: &[StepCache<T>],
        d_outputs: &[Vec<T>],
        d_final: LstmState<T>,
        grad: &mut LstmLayer<T>,
    ) -> (Vec<Vec<T>>, LstmState<T>) {
        let hs = self.hidden();
        let n_in = self.input();
        let one = T::one();
        let mut dh_next = d_final.h;
        let mut dc_next = d_final.c;
        let mut d_inputs = vec![Vec::new(); caches.len()];
        let mut dz = vec![T::zero(); 4 * hs];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            let mut dc_prev = vec![T::zero(); hs];
            for k in 0..hs {
                let dh = d_outputs[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dc_next[k] + dh * s.o[k] * (one - s.tanh_c[k] * s.tanh_c[k]);
                let d_i = dc * s.g[k];
                let d_g = dc * s.i[k];
                let d_f = dc * s.c_prev[k];
                dc_prev[k] = dc * s.f[k];
                dz[k] = d_i * s.i[k] * (one - s.i[k]);
                dz[hs + k] = d_f * s.f[k] * (one - s.f[k]);
                dz[2 * hs + k] = d_g * (one - s.g[k] * s.g[k]);
                dz[3 * hs + k] = d_o * s.o[k] * (one - s.o[k]);
            }
            grad.w.add_outer(&dz, &s.xh);
            for (gb, &d) in grad.b.data.iter_mut().zip(&dz) {
                *gb += d;
            }
            let mut dxh = vec![T::zero(); n_in + hs];
            self.w.add_transposed_product(&dz, &mut dxh);
            dh_next = dxh.split_off(n_in);
            d_inputs[t] = dxh;
            dc_next = dc_prev;
        }
        (d_inputs, LstmState { h: dh_next, c: dc_next })
    }
}
