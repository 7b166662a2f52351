//! Differentiable building blocks: linear layers, MLPs, an LSTM cell and a small
//! strided convolutional encoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ConvGeom, Graph, Var};
use crate::error::{Error, Result};
use crate::params::{glorot, ParamId, ParamStore};
use crate::tensor::{lit, Matrix, Scalar};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    LeakyRelu,
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, g: &mut Graph<T>, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu => g.leaky_relu(x, lit(0.01)),
            Activation::Tanh => g.tanh(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        let weight = store.add(format!("{name}.w"), glorot(rng, in_dim, out_dim));
        let bias = store.add(format!("{name}.b"), Matrix::zeros(1, out_dim));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }

    pub fn zero<T: Scalar>(&self, store: &mut ParamStore<T>) {
        store.get_mut(self.weight).data_mut().iter_mut().for_each(|v| *v = T::zero());
        store.get_mut(self.bias).data_mut().iter_mut().for_each(|v| *v = T::zero());
    }
}

/// Feed-forward network; the activation is applied between layers, never after the last.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        activation: Activation,
    ) -> Self {
        let mut dims = vec![in_dim];
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Linear::new(store, rng, &format!("{name}.l{i}"), d[0], d[1]))
            .collect();
        Self { layers, activation }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h);
            if i + 1 < self.layers.len() {
                h = self.activation.apply(g, h);
            }
        }
        h
    }

    /// Zeroes the output layer so the network outputs exactly zero.
    pub fn zero_output<T: Scalar>(&self, store: &mut ParamStore<T>) {
        if let Some(last) = self.layers.last() {
            last.zero(store);
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }
}

/// LSTM cell with gate order input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let h = hidden_dim;
        let w_input = store.add(format!("{name}.w_ih"), glorot(rng, input_dim, 4 * h));
        let w_hidden = store.add(format!("{name}.w_hh"), glorot(rng, h, 4 * h));
        let mut b = Matrix::zeros(1, 4 * h);
        // forget gate bias 1
        for c in h..2 * h {
            b.set(0, c, T::one());
        }
        let bias = store.add(format!("{name}.b"), b);
        Self { w_input, w_hidden, bias, input_dim, hidden_dim }
    }

    /// One step over a batch: `x` is `n x input_dim`, `h`/`c` are `n x hidden_dim`.
    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, x: Var, h: Var, c: Var) -> (Var, Var) {
        let hd = self.hidden_dim;
        let wi = g.param(self.w_input);
        let wh = g.param(self.w_hidden);
        let b = g.param(self.bias);
        let xi = g.matmul(x, wi);
        let hh = g.matmul(h, wh);
        let pre = g.add(xi, hh);
        let pre = g.add_row(pre, b);
        let i = g.slice_cols(pre, 0, hd);
        let f = g.slice_cols(pre, hd, hd);
        let cand = g.slice_cols(pre, 2 * hd, hd);
        let o = g.slice_cols(pre, 3 * hd, hd);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c);
        let ic = g.mul(i, cand);
        let c_next = g.add(fc, ic);
        let tc = g.tanh(c_next);
        let h_next = g.mul(o, tc);
        (h_next, c_next)
    }
}

/// Stack of 3x3 stride-2 convolutions with rectified activations, global average
/// pooling and a linear head. Input images are `3 x (height*width)` maps in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct ConvEncoder {
    pub convs: Vec<(ParamId, ParamId, usize, usize)>,
    pub head: Linear,
    pub height: usize,
    pub width: usize,
}

impl ConvEncoder {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        channels: &[usize],
        out_dim: usize,
        height: usize,
        width: usize,
    ) -> Self {
        let mut convs = Vec::new();
        let mut cin = 3;
        for (i, &cout) in channels.iter().enumerate() {
            let w = store.add(format!("{name}.conv{i}.w"), glorot(rng, cout, cin * 9));
            let b = store.add(format!("{name}.conv{i}.b"), Matrix::zeros(1, cout));
            convs.push((w, b, cin, cout));
            cin = cout;
        }
        let head = Linear::new(store, rng, &format!("{name}.head"), cin, out_dim);
        Self { convs, head, height, width }
    }

    pub fn out_dim(&self) -> usize {
        self.head.out_dim
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, image: Var) -> Result<Var> {
        let expected = (3, self.height * self.width);
        if g.shape(image) != expected {
            return Err(Error::Shape(format!(
                "scene encoder expects a 3x{}x{} image, got {:?}",
                self.height,
                self.width,
                g.shape(image)
            )));
        }
        let (mut h, mut w) = (self.height, self.width);
        let mut x = image;
        for &(wid, bid, cin, cout) in &self.convs {
            let geom = ConvGeom {
                in_channels: cin,
                out_channels: cout,
                height: h,
                width: w,
                kernel: 3,
                stride: 2,
                padding: 1,
            };
            let wv = g.param(wid);
            let bv = g.param(bid);
            x = g.conv2d(x, wv, bv, geom);
            x = g.relu(x);
            h = geom.out_height();
            w = geom.out_width();
        }
        let pooled = g.mean_cols(x);
        let row = g.transpose(pooled);
        Ok(self.head.forward(g, row))
    }
}
