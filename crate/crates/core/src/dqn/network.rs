//! Fully connected Q-network with ReLU hidden layers and a linear head.
//!
//! Parameters live in one flat vector. Layer `l` stores its weights row-major
//! as `[input][output]`, followed by its biases.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    widths: Vec<usize>,
    params: Vec<f64>,
    /// Offset of each layer's weights in `params`.
    offsets: Vec<usize>,
}

/// One training sample for [`QNetwork::loss_and_gradient`].
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

fn layer_offsets(widths: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut at = 0;
    for w in widths.windows(2) {
        offsets.push(at);
        at += w[0] * w[1] + w[1];
    }
    (offsets, at)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl QNetwork {
    /// All-zero network with the given layer widths (input first, output last).
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {widths:?}")));
        }
        let (offsets, n) = layer_offsets(widths);
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; n], offsets })
    }

    /// Weights uniform in `+-sqrt(6 / fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let o = net.offsets[l];
            for p in &mut net.params[o..o + fan_in * fan_out] {
                *p = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch { expected: net.params.len(), got: params.len() });
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weight(&self, layer: usize, input: usize, output: usize) -> f64 {
        self.params[self.offsets[layer] + input * self.widths[layer + 1] + output]
    }

    pub fn set_weight(&mut self, layer: usize, input: usize, output: usize, v: f64) {
        let i = self.offsets[layer] + input * self.widths[layer + 1] + output;
        self.params[i] = v;
    }

    pub fn bias(&self, layer: usize, output: usize) -> f64 {
        self.params[self.offsets[layer] + self.widths[layer] * self.widths[layer + 1] + output]
    }

    pub fn set_bias(&mut self, layer: usize, output: usize, v: f64) {
        let i = self.offsets[layer] + self.widths[layer] * self.widths[layer + 1] + output;
        self.params[i] = v;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// `out = act(W^T x + b)` for layer `l`.
    fn layer_forward(&self, l: usize, x: &[f64], out: &mut Vec<f64>) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let o = self.offsets[l];
        let w = &self.params[o..o + n_in * n_out];
        out.clear();
        out.extend_from_slice(&self.params[o + n_in * n_out..o + n_in * n_out + n_out]);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * n_out..(i + 1) * n_out];
            for (y, &wij) in out.iter_mut().zip(row) {
                *y += xi * wij;
            }
        }
        if l + 1 < self.n_layers() {
            for y in out.iter_mut() {
                *y = y.max(0.0);
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in 0..self.n_layers() {
            self.layer_forward(l, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Activations of every layer, input included.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let mut out = Vec::with_capacity(self.widths[l + 1]);
            self.layer_forward(l, &acts[l], &mut out);
            acts.push(out);
        }
        acts
    }

    pub fn greedy(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// `sum (y - Q(s, a))^2` over the batch and its gradient with respect to
    /// the parameters. Only the taken action's output enters each term.
    pub fn loss_and_gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for s in batch {
            self.check_input(s.state)?;
            if s.action >= self.output_dim() {
                return Err(Error::ActionOutOfRange { action: s.action, size: self.output_dim() });
            }
            let acts = self.forward_all(s.state);
            let q = acts[self.n_layers()][s.action];
            let err = s.target - q;
            loss += err * err;
            let mut delta = vec![0.0; self.output_dim()];
            delta[s.action] = -2.0 * err;
            for l in (0..self.n_layers()).rev() {
                let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
                let o = self.offsets[l];
                let x = &acts[l];
                {
                    let (gw, gb) = grad[o..o + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                    for (g, &d) in gb.iter_mut().zip(&delta) {
                        *g += d;
                    }
                    for (i, &xi) in x.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        for (g, &d) in gw[i * n_out..(i + 1) * n_out].iter_mut().zip(&delta) {
                            *g += xi * d;
                        }
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &self.params[o..o + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    if x[i] <= 0.0 {
                        continue;
                    }
                    *p = dot(&w[i * n_out..(i + 1) * n_out], &delta);
                }
                delta = prev;
            }
        }
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64> {
        let mut loss = 0.0;
        for s in batch {
            let q = self.forward(s.state)?[s.action];
            loss += (s.target - q) * (s.target - q);
        }
        Ok(loss)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}
