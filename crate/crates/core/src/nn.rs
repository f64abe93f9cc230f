//! Convolution, LSTM and dense layers built from autograd primitives.
//!
//! Layers own their parameter tensors. A forward pass registers them on the
//! graph with [`Graph::param`] in the same order as [`Layer::params`], so the
//! gradient list returned by the graph lines up with the parameter list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Padding, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Linear => x,
        }
    }
}

pub trait Layer {
    /// Named parameters in registration order.
    fn params(&self) -> Vec<(&'static str, &Tensor)>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    /// Draw fresh parameters from `rng`.
    fn init_with(&mut self, rng: &mut ChaCha8Rng);

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }
}

/// Seeded Glorot-uniform initialization of one layer.
pub fn init_params<L: Layer + ?Sized>(layer: &mut L, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer.init_with(&mut rng);
}

/// Uniform on `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape and length agree")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2DLayer {
    /// `[kh, kw, cin, cout]`
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: (usize, usize),
    pub activation: Activation,
}

impl Conv2DLayer {
    /// Zero-initialized square-kernel layer.
    pub fn new(kernel: usize, cin: usize, cout: usize, stride: (usize, usize), activation: Activation) -> Self {
        Conv2DLayer {
            kernels: Tensor::zeros(&[kernel, kernel, cin, cout]),
            bias: Tensor::zeros(&[cout]),
            stride,
            activation,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[3]
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let k = g.param(self.kernels.clone());
        let b = g.param(self.bias.clone());
        let y = g.conv2d(x, k, b, self.stride, Padding::Same)?;
        Ok(self.activation.apply(g, y))
    }
}

impl Layer for Conv2DLayer {
    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("kernels", &self.kernels), ("bias", &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }

    fn init_with(&mut self, rng: &mut ChaCha8Rng) {
        let &[kh, kw, cin, cout] = self.kernels.shape() else {
            unreachable!("conv kernels are rank 4")
        };
        let receptive = kh * kw;
        self.kernels = glorot_uniform(self.kernels.shape(), receptive * cin, receptive * cout, rng);
        self.bias = Tensor::zeros(&[cout]);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `[in, out]`
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    /// `x: [batch, in] -> [batch, out]`
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.weight.clone());
        let b = g.param(self.bias.clone());
        let y = g.matmul(x, w)?;
        let y = g.add_bias(y, b)?;
        Ok(self.activation.apply(g, y))
    }
}

impl Layer for DenseLayer {
    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn init_with(&mut self, rng: &mut ChaCha8Rng) {
        let &[fan_in, fan_out] = self.weight.shape() else {
            unreachable!("dense weight is rank 2")
        };
        self.weight = glorot_uniform(&[fan_in, fan_out], fan_in, fan_out, rng);
        self.bias = Tensor::zeros(&[fan_out]);
    }
}

/// Forget-gate LSTM without peepholes.
///
/// Each gate maps the concatenation `[x_t; h_{t-1}]` through its own
/// `[input + hidden, hidden]` weight and `[hidden]` bias:
///
/// ```text
/// i, f, o = sigmoid(·)    g = tanh(·)
/// c_t = f ⊙ c_{t-1} + i ⊙ g
/// h_t = o ⊙ tanh(c_t)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub w_g: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_g: Tensor,
}

/// An [`LstmLayer`]'s parameters registered on a graph.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    hidden: usize,
    input: usize,
    // gate order: input, forget, output, candidate
    w: [Var; 4],
    b: [Var; 4],
}

impl LstmLayer {
    pub fn new(input_size: usize, hidden_size: usize) -> Self {
        let w = || Tensor::zeros(&[input_size + hidden_size, hidden_size]);
        let b = || Tensor::zeros(&[hidden_size]);
        LstmLayer {
            input_size,
            hidden_size,
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_g: w(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_g: b(),
        }
    }

    pub fn bind(&self, g: &mut Graph) -> LstmVars {
        let w = [&self.w_i, &self.w_f, &self.w_o, &self.w_g].map(|t| g.param(t.clone()));
        let b = [&self.b_i, &self.b_f, &self.b_o, &self.b_g].map(|t| g.param(t.clone()));
        LstmVars {
            hidden: self.hidden_size,
            input: self.input_size,
            w,
            b,
        }
    }

    /// Run over `xs: [batch, t, input]` (or `[t, input]`) from zero state.
    ///
    /// Returns every hidden state (`[batch, t, hidden]`) when
    /// `return_sequence` is set, otherwise only the last one (`[batch, hidden]`).
    /// Unbatched input yields unbatched output.
    pub fn forward_sequence(&self, g: &mut Graph, xs: Var, return_sequence: bool) -> Result<Var> {
        let vars = self.bind(g);
        lstm_sequence(g, &vars, xs, return_sequence)
    }
}

impl Layer for LstmLayer {
    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("w_i", &self.w_i),
            ("w_f", &self.w_f),
            ("w_o", &self.w_o),
            ("w_g", &self.w_g),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_g", &self.b_g),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_g,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }

    fn init_with(&mut self, rng: &mut ChaCha8Rng) {
        let (fan_in, fan_out) = (self.input_size + self.hidden_size, self.hidden_size);
        for w in [&mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_g] {
            *w = glorot_uniform(&[fan_in, fan_out], fan_in, fan_out, rng);
        }
        self.b_i = Tensor::zeros(&[fan_out]);
        self.b_f = Tensor::ones(&[fan_out]);
        self.b_o = Tensor::zeros(&[fan_out]);
        self.b_g = Tensor::zeros(&[fan_out]);
    }
}

/// One LSTM step: `x: [batch, input]`, `h, c: [batch, hidden]` → `(h_t, c_t)`.
pub fn lstm_step(g: &mut Graph, layer: &LstmVars, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    let expect = |g: &Graph, v: Var, width: usize, what: &str| -> Result<()> {
        match g.shape(v) {
            [_, w] if *w == width => Ok(()),
            s => Err(Error::Config(format!("lstm_step: {what} has shape {s:?}, expected [batch, {width}]"))),
        }
    };
    expect(g, x, layer.input, "input")?;
    expect(g, h, layer.hidden, "hidden state")?;
    expect(g, c, layer.hidden, "cell state")?;

    let xh = g.concat_last(x, h)?;
    let mut gates = [xh; 4];
    for (k, gate) in gates.iter_mut().enumerate() {
        let z = g.matmul(xh, layer.w[k])?;
        *gate = g.add_bias(z, layer.b[k])?;
    }
    let i = g.sigmoid(gates[0]);
    let f = g.sigmoid(gates[1]);
    let o = g.sigmoid(gates[2]);
    let cand = g.tanh(gates[3]);

    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_t = g.add(keep, write)?;
    let squashed = g.tanh(c_t);
    let h_t = g.mul(o, squashed)?;
    Ok((h_t, c_t))
}

/// Iterate [`lstm_step`] over a sequence starting from zero state.
pub fn lstm_sequence(g: &mut Graph, layer: &LstmVars, xs: Var, return_sequence: bool) -> Result<Var> {
    let (batched, xs) = match *g.shape(xs) {
        [_, _, _] => (true, xs),
        [t, n] => (false, g.reshape(xs, &[1, t, n])?),
        ref s => return Err(Error::Config(format!("lstm_sequence: expected [batch, t, input], got {s:?}"))),
    };
    let [batch, steps, _] = *g.shape(xs) else { unreachable!() };
    if steps == 0 {
        return Err(Error::EmptySequence("lstm_sequence over zero time steps".into()));
    }
    let mut h = g.constant(Tensor::zeros(&[batch, layer.hidden]));
    let mut c = g.constant(Tensor::zeros(&[batch, layer.hidden]));
    let mut outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = g.select(xs, t)?;
        (h, c) = lstm_step(g, layer, x_t, h, c)?;
        outputs.push(h);
    }
    let out = if return_sequence { g.stack(&outputs)? } else { h };
    if batched {
        Ok(out)
    } else {
        let shape: Vec<usize> = g.shape(out)[1..].to_vec();
        g.reshape(out, &shape)
    }
}
