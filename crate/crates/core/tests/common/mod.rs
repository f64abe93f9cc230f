//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's kernels.
#![allow(dead_code)]

use coopsteer::autograd::{Graph, Padding, Var};
use coopsteer::models::Model;
use coopsteer::nn::{lstm_sequence, Layer, LstmLayer};
use coopsteer::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step used by every gradient check.
pub const EPS: f64 = 1e-6;

/// Output length and leading pad for one spatial axis.
pub fn axis_geometry(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let needed = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, needed / 2))
        }
        Padding::Valid => (kernel <= input).then(|| ((input - kernel) / stride + 1, 0)),
    }
}

/// Cross-correlation by explicit loops over `[n, h, w, cin]` and `[kh, kw, cin, cout]`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_direct(
    input: &[f64],
    [n, h, w, cin]: [usize; 4],
    kernels: &[f64],
    [kh, kw, _, cout]: [usize; 4],
    bias: &[f64],
    (sh, sw): (usize, usize),
    padding: Padding,
) -> (Vec<f64>, [usize; 4]) {
    let (oh, ph) = axis_geometry(h, kh, sh, padding).expect("kernel fits");
    let (ow, pw) = axis_geometry(w, kw, sw, padding).expect("kernel fits");
    let mut out = vec![0.0; n * oh * ow * cout];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = bias[co];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * sh + ky) as isize - ph as isize;
                            let ix = (ox * sw + kx) as isize - pw as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let (iy, ix) = (iy as usize, ix as usize);
                            for ci in 0..cin {
                                let v = input[((b * h + iy) * w + ix) * cin + ci];
                                let k = kernels[((ky * kw + kx) * cin + ci) * cout + co];
                                acc += v * k;
                            }
                        }
                    }
                    out[((b * oh + oy) * ow + ox) * cout + co] = acc;
                }
            }
        }
    }
    (out, [n, oh, ow, cout])
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Scalar-loop LSTM from zero state over `xs: [batch, steps, input]`.
/// Returns all hidden states `[batch, steps, hidden]`.
pub fn lstm_direct(layer: &LstmLayer, xs: &[f64], batch: usize, steps: usize) -> Vec<f64> {
    let (n_in, n_h) = (layer.input_size, layer.hidden_size);
    let ws = [&layer.w_i, &layer.w_f, &layer.w_o, &layer.w_g];
    let bs = [&layer.b_i, &layer.b_f, &layer.b_o, &layer.b_g];
    let mut out = vec![0.0; batch * steps * n_h];
    for b in 0..batch {
        let mut h = vec![0.0; n_h];
        let mut c = vec![0.0; n_h];
        for t in 0..steps {
            let x = &xs[(b * steps + t) * n_in..][..n_in];
            let mut z = [vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]];
            for (k, zk) in z.iter_mut().enumerate() {
                let w = ws[k].data();
                for j in 0..n_h {
                    let mut acc = bs[k].data()[j];
                    for (r, &v) in x.iter().chain(h.iter()).enumerate() {
                        acc += v * w[r * n_h + j];
                    }
                    zk[j] = acc;
                }
            }
            for j in 0..n_h {
                let (i, f, o, g) = (sigmoid(z[0][j]), sigmoid(z[1][j]), sigmoid(z[2][j]), z[3][j].tanh());
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            out[(b * steps + t) * n_h..][..n_h].copy_from_slice(&h);
        }
    }
    out
}

/// Anchors whose `x` ego frames and `x` lead frames all lie in `[0, n)`,
/// found by checking every candidate index.
pub fn brute_force_anchors(n: usize, x: usize, dt: usize) -> Vec<usize> {
    (0..n)
        .filter(|&t| {
            let ego_ok = (0..x).all(|k| t >= k && t - k < n);
            let lead_ok = (0..x).all(|k| t + dt + k < n);
            x >= 1 && ego_ok && lead_ok
        })
        .collect()
}

/// Long-run RMS of `0.5 sin(2πt/97) + 0.3 sin(2πt/41 + 1)`: the two
/// incommensurate sinusoids are orthogonal, so the mean square is
/// `0.5²/2 + 0.3²/2`.
pub fn zero_predictor_rmse() -> f64 {
    (0.5f64.powi(2) / 2.0 + 0.3f64.powi(2) / 2.0).sqrt()
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Mean squared error of the model's batch prediction against `target`.
fn model_loss(model: &Model, input: &Tensor, target: &Tensor) -> (Graph, coopsteer::autograd::Var) {
    let mut g = Graph::new();
    let x = g.constant(input.clone());
    let y = g.constant(target.clone());
    let pred = model.forward(&mut g, x).unwrap();
    let loss = g.mse_loss(pred, y).unwrap();
    (g, loss)
}

/// Central-difference check of every parameter tensor of `model` at
/// `per_tensor` random coordinates (all coordinates for small tensors).
/// Returns the worst `|a - n| / max(1, |a|)` and the number of coordinates checked.
pub fn model_gradcheck(model: &Model, input: &Tensor, target: &Tensor, per_tensor: usize, eps: f64, rng: &mut impl Rng) -> (f64, usize) {
    let (g, loss) = model_loss(model, input, target);
    let grads = g.backward(loss).unwrap().params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, grad) in grads.iter().enumerate() {
        let numel = grad.numel();
        let coords: Vec<usize> = if numel <= per_tensor {
            (0..numel).collect()
        } else {
            (0..per_tensor).map(|_| rng.gen_range(0..numel)).collect()
        };
        for i in coords {
            let orig = probe.params_mut()[k].data()[i];
            let mut at = |v: f64| {
                probe.params_mut()[k].data_mut()[i] = v;
                let (g, l) = model_loss(&probe, input, target);
                g.value(l).item().unwrap()
            };
            let numeric = (at(orig + eps) - at(orig - eps)) / (2.0 * eps);
            at(orig);
            let a = grad.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
            checked += 1;
        }
    }
    (worst, checked)
}

/// Reduce any output to a scalar with fixed random weights so every
/// output coordinate contributes a distinct sensitivity.
pub fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let w = random_tensor(&mut ChaCha8Rng::seed_from_u64(seed), g.shape(y), 1.0);
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

/// Central differences over every parameter of `layer` against the
/// gradients its own forward pass registers on the graph.
pub fn layer_gradcheck<L: Layer + Clone>(layer: &L, loss: impl Fn(&L, &mut Graph) -> Result<Var>) -> f64 {
    let mut g = Graph::new();
    let l = loss(layer, &mut g).unwrap();
    let grads = g.backward(l).unwrap().params();
    assert_eq!(grads.len(), layer.params().len());
    let value = |probe: &L| {
        let mut g = Graph::new();
        let l = loss(probe, &mut g).unwrap();
        g.value(l).item().unwrap()
    };
    let mut probe = layer.clone();
    let mut worst: f64 = 0.0;
    for (k, grad) in grads.iter().enumerate() {
        assert_eq!(grad.shape(), layer.params()[k].1.shape());
        for i in 0..grad.numel() {
            let orig = probe.params_mut()[k].data()[i];
            probe.params_mut()[k].data_mut()[i] = orig + EPS;
            let up = value(&probe);
            probe.params_mut()[k].data_mut()[i] = orig - EPS;
            let down = value(&probe);
            probe.params_mut()[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * EPS);
            worst = worst.max((grad.data()[i] - numeric).abs() / grad.data()[i].abs().max(1.0));
        }
    }
    worst
}

/// Shift every bias off zero so no ReLU unit sits exactly on its kink.
pub fn jitter_biases(model: &mut Model, seed: u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    for (name, t) in names.iter().zip(model.params_mut()) {
        if name.contains(".b") {
            *t = random_tensor(&mut r, t.shape(), 0.1);
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One random small conv2d instance: library result against [`conv2d_direct`].
pub fn conv_oracle_case(rng: &mut impl Rng) -> f64 {
    loop {
        let n = rng.gen_range(1..=3);
        let h = rng.gen_range(1..=9);
        let w = rng.gen_range(1..=9);
        let cin = rng.gen_range(1..=4);
        let cout = rng.gen_range(1..=4);
        let kh = rng.gen_range(1..=5);
        let kw = rng.gen_range(1..=5);
        let stride = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let padding = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Valid };
        if padding == Padding::Valid && (kh > h || kw > w) {
            continue;
        }
        let input = random_tensor(rng, &[n, h, w, cin], 1.0);
        let kernels = random_tensor(rng, &[kh, kw, cin, cout], 1.0);
        let bias = random_tensor(rng, &[cout], 1.0);

        let mut g = Graph::new();
        let (x, k, b) = (g.constant(input.clone()), g.constant(kernels.clone()), g.constant(bias.clone()));
        let y = g.conv2d(x, k, b, stride, padding).unwrap();
        let (expected, shape) = conv2d_direct(input.data(), [n, h, w, cin], kernels.data(), [kh, kw, cin, cout], bias.data(), stride, padding);
        assert_eq!(g.shape(y), &shape[..]);
        return max_abs_diff(g.value(y).data(), &expected);
    }
}

/// One random small LSTM instance: full sequence and final state against [`lstm_direct`].
pub fn lstm_oracle_case(rng: &mut impl Rng) -> f64 {
    let batch = rng.gen_range(1..=3);
    let steps = rng.gen_range(1..=7);
    let n_in = rng.gen_range(1..=6);
    let n_h = rng.gen_range(1..=5);
    let mut layer = LstmLayer::new(n_in, n_h);
    for w in [&mut layer.w_i, &mut layer.w_f, &mut layer.w_o, &mut layer.w_g] {
        *w = random_tensor(rng, &[n_in + n_h, n_h], 1.0);
    }
    for b in [&mut layer.b_i, &mut layer.b_f, &mut layer.b_o, &mut layer.b_g] {
        *b = random_tensor(rng, &[n_h], 1.0);
    }
    let xs = random_tensor(rng, &[batch, steps, n_in], 1.5);

    let mut g = Graph::new();
    let vars = layer.bind(&mut g);
    let x = g.constant(xs.clone());
    let all = lstm_sequence(&mut g, &vars, x, true).unwrap();
    let last = lstm_sequence(&mut g, &vars, x, false).unwrap();
    let expected = lstm_direct(&layer, xs.data(), batch, steps);
    assert_eq!(g.shape(all), &[batch, steps, n_h]);
    assert_eq!(g.shape(last), &[batch, n_h]);
    let final_states: Vec<f64> = (0..batch)
        .flat_map(|b| expected[(b * steps + steps - 1) * n_h..][..n_h].to_vec())
        .collect();
    max_abs_diff(g.value(all).data(), &expected).max(max_abs_diff(g.value(last).data(), &final_states))
}
