//! Independent reference implementations and a finite-difference checker
//! shared by the integration tests.
#![allow(dead_code)]

pub mod contract_suite;
pub mod grad_suite;
pub mod oracle_suite;

use aliif::decoder::{Mode, ModelConfig};
use aliif::nn::Mlp;
use aliif::params::ParamStore;
use aliif::{Image, Model, Tape, Tensor, Var};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Uniform values with magnitude in `[min_abs, max_abs)` and random sign,
/// for ops with a kink at zero.
pub fn away_from_zero(shape: &[usize], min_abs: f64, max_abs: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(min_abs..max_abs);
            if rng.gen_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    let px = (0..h * w * 3).map(|_| rng.gen::<f32>()).collect();
    Image::new(h, w, px).unwrap()
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub max_rel: f64,
    pub checked: usize,
    /// Entries whose one-sided differences disagree: the step crossed a
    /// kink, so the central difference is not a derivative estimate.
    pub kinks: usize,
}

impl FdReport {
    pub fn merge(&mut self, other: FdReport) {
        self.max_rel = self.max_rel.max(other.max_rel);
        self.checked += other.checked;
        self.kinks += other.kinks;
    }
}

/// Compares the tape gradient of `loss(inputs)` against central
/// differences for every entry of every input.
pub fn fd_check<F>(inputs: &[Tensor<f64>], loss: F) -> FdReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |values: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let l = loss(&mut tape, &vars);
        tape.value(l).item().unwrap()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let l = loss(&mut tape, &vars);
    let base = tape.value(l).item().unwrap();
    let grads = tape.backward(l).unwrap();

    let mut report = FdReport::default();
    let mut values = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape().to_vec()));
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            values[i].data_mut()[j] = x + FD_STEP;
            let up = eval(&values);
            values[i].data_mut()[j] = x - FD_STEP;
            let down = eval(&values);
            values[i].data_mut()[j] = x;
            let (fwd, bwd) = ((up - base) / FD_STEP, (base - down) / FD_STEP);
            if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(1e-4) {
                report.kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * FD_STEP);
            report.max_rel = report.max_rel.max(rel_error(analytic.data()[j], numeric));
            report.checked += 1;
        }
    }
    report
}

/// `Σ out ⊙ r` with a fixed random `r`, turning any op output into a scalar
/// whose gradient exercises every output entry.
pub fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let r = uniform(&shape, -1.0, 1.0, &mut rng(seed ^ 0x9e37_79b9));
    let r = tape.constant(r);
    let m = tape.mul(out, r).unwrap();
    tape.sum(m)
}

pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    out
}

/// 3×3 cross-correlation with zero padding, as four nested loops.
pub fn naive_conv2d(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    kernel: &[f64],
    c_out: usize,
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let mut out = vec![0.0; c_out * h * w];
    for o in 0..c_out {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias.map_or(0.0, |b| b[o]);
                for c in 0..c_in {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let sy = y as isize + ky as isize - 1;
                            let sx = x as isize + kx as isize - 1;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            let v = input[(c * h + sy as usize) * w + sx as usize];
                            acc += kernel[((o * c_in + c) * 3 + ky) * 3 + kx] * v;
                        }
                    }
                }
                out[(o * h + y) * w + x] = acc;
            }
        }
    }
    out
}

fn keys(x: f64) -> f64 {
    // a = -0.5
    let t = x.abs();
    if t < 1.0 {
        1.5 * t.powi(3) - 2.5 * t.powi(2) + 1.0
    } else if t < 2.0 {
        -0.5 * t.powi(3) + 2.5 * t.powi(2) - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Weight of source sample `src` for output `i` along one axis, with the
/// kernel widened by `in/out` when shrinking.
fn axis_weight(i: usize, src: isize, in_len: usize, out_len: usize) -> f64 {
    let s = out_len as f64 / in_len as f64;
    let center = (i as f64 + 0.5) / s - 0.5;
    let d = center - src as f64;
    if s < 1.0 { s * keys(s * d) } else { keys(d) }
}

/// Bicubic resize evaluated as one 2-D sum per output pixel over a window
/// of source positions, out-of-range positions reading the nearest edge
/// pixel, weights normalized by their 2-D total, output clamped to [0, 1].
pub fn naive_bicubic(image: &Image, out_h: usize, out_w: usize) -> Vec<f64> {
    let (in_h, in_w) = (image.height(), image.width());
    let reach = |in_len: usize, out_len: usize| {
        let s = out_len as f64 / in_len as f64;
        (if s < 1.0 { 2.0 / s } else { 2.0 }).ceil() as isize + 1
    };
    let (ry, rx) = (reach(in_h, out_h), reach(in_w, out_w));
    let mut out = Vec::with_capacity(out_h * out_w * 3);
    for y in 0..out_h {
        let cy = ((y as f64 + 0.5) * in_h as f64 / out_h as f64 - 0.5).round() as isize;
        for x in 0..out_w {
            let cx = ((x as f64 + 0.5) * in_w as f64 / out_w as f64 - 0.5).round() as isize;
            let mut acc = [0.0; 3];
            let mut total = 0.0;
            for sy in cy - ry..=cy + ry {
                for sx in cx - rx..=cx + rx {
                    let wgt = axis_weight(y, sy, in_h, out_h) * axis_weight(x, sx, in_w, out_w);
                    if wgt == 0.0 {
                        continue;
                    }
                    let py = sy.clamp(0, in_h as isize - 1) as usize;
                    let px = sx.clamp(0, in_w as isize - 1) as usize;
                    let p = image.get(py, px);
                    for c in 0..3 {
                        acc[c] += wgt * p[c] as f64;
                    }
                    total += wgt;
                }
            }
            out.extend(acc.map(|v| (v / total).clamp(0.0, 1.0)));
        }
    }
    out
}

/// Plain-loop evaluation of an MLP on one input row.
pub fn naive_mlp(mlp: &Mlp, params: &ParamStore<f64>, row: &[f64]) -> Vec<f64> {
    let mut x = row.to_vec();
    let n = mlp.layers().len();
    for (li, layer) in mlp.layers().iter().enumerate() {
        let w = params.get(layer.weight).data();
        let b = params.get(layer.bias).data();
        let mut y = b.to_vec();
        for (i, &xi) in x.iter().enumerate() {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += xi * w[i * layer.fan_out + j];
            }
        }
        if li + 1 < n {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        x = y;
    }
    x
}

/// `Σ_k ω_k · MLP_k(row)` as an explicit loop.
pub fn naive_mixture(bank: &[Mlp], params: &ParamStore<f64>, omega: &[f64], row: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (mlp, &w) in bank.iter().zip(omega) {
        let y = naive_mlp(mlp, params, row);
        for c in 0..3 {
            out[c] += w * y[c];
        }
    }
    out
}

pub fn naive_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// One Adam update at step `t` written out from the textbook formula.
pub fn hand_adam(w: f64, g: f64, m: f64, v: f64, t: i32, lr: f64) -> (f64, f64, f64) {
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let m = b1 * m + (1.0 - b1) * g;
    let v = b2 * v + (1.0 - b2) * g * g;
    let mh = m / (1.0 - b1.powi(t));
    let vh = v / (1.0 - b2.powi(t));
    (w - lr * mh / (vh.sqrt() + eps), m, v)
}

/// Center of pixel `i` of `n` in `[-1, 1]`, written as an interpolation
/// between the first and last centers.
pub fn center_oracle(i: usize, n: usize) -> f64 {
    let half = 1.0 / n as f64;
    let (first, last) = (-1.0 + half, 1.0 - half);
    if n == 1 { 0.0 } else { first + (last - first) * i as f64 / (n - 1) as f64 }
}

/// A tiny architecture for float64 gradient checks.
pub fn tiny_config(mode: Mode, k: usize) -> ModelConfig {
    ModelConfig {
        mode,
        k,
        feat_dim: 3,
        blocks: 1,
        basis_hidden: 5,
        basis_layers: 2,
        expansion_hidden: 5,
        expansion_layers: 2,
        literal_relu: false,
        share_ensemble_weights: false,
    }
}

pub fn tiny_model(mode: Mode, k: usize, seed: u64) -> Model<f64> {
    Model::new(tiny_config(mode, k), seed).unwrap()
}
