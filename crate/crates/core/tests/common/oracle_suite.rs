//! Library paths against independent reference implementations. Every
//! function returns the largest absolute deviation it saw.
#![allow(dead_code)]

use aliif::decoder::{decode_aliif, expansion_weights, DecoderInput, MixtureWeights};
use aliif::image::bicubic_resize;
use aliif::nn::Mlp;
use aliif::params::ParamStore;
use aliif::training::{adam_step, AdamState};
use aliif::{Tape, Tensor};
use rand::Rng as _;

use super::{hand_adam, naive_bicubic, naive_conv2d, naive_mixture, naive_mlp, naive_softmax, random_image, rng, uniform};

pub const CONV_TOL: f64 = 1e-6;
pub const BICUBIC_TOL: f64 = 1e-6;
pub const MIXTURE_TOL: f64 = 1e-6;
pub const ADAM_TOL: f64 = 1e-9;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn conv2d(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(seed);
        let (c_in, c_out) = (r.gen_range(1..5), r.gen_range(1..5));
        let (h, w) = (r.gen_range(1..9), r.gen_range(1..9));
        let x = uniform(&[c_in, h, w], -1.0, 1.0, &mut r);
        let k = uniform(&[c_out, c_in, 3, 3], -1.0, 1.0, &mut r);
        let b = uniform(&[c_out], -1.0, 1.0, &mut r);
        for bias in [false, true] {
            let mut tape = Tape::<f64>::new();
            let (xv, kv) = (tape.constant(x.clone()), tape.constant(k.clone()));
            let bv = bias.then(|| tape.constant(b.clone()));
            let y = tape.conv2d(xv, kv, bv).unwrap();
            let want = naive_conv2d(x.data(), c_in, h, w, k.data(), c_out, bias.then(|| b.data()));
            worst = worst.max(max_diff(tape.value(y).data(), &want));
        }
    }
    worst
}

pub fn bicubic(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(100 + seed);
        let (h, w) = (r.gen_range(1..24), r.gen_range(1..24));
        let image = random_image(h, w, &mut r);
        let (oh, ow) = (r.gen_range(1..40), r.gen_range(1..40));
        let got = bicubic_resize(&image, oh, ow).unwrap();
        let got: Vec<f64> = got.pixels().iter().map(|&v| v as f64).collect();
        worst = worst.max(max_diff(&got, &naive_bicubic(&image, oh, ow)));
    }
    worst
}

/// A bank of `k` basis nets on `width`-wide inputs.
pub fn bank(k: usize, width: usize, seed: u64) -> (Vec<Mlp>, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let bank = (0..k)
        .map(|i| {
            Mlp::declare(
                &mut store,
                &format!("b{i}"),
                &[width, 6, 6, 3],
                &mut aliif::rng::stream(seed, &format!("bank{i}")),
            )
        })
        .collect();
    (bank, store)
}

pub fn random_input(d: usize, seed: u64) -> DecoderInput<f64> {
    let mut r = rng(seed);
    DecoderInput {
        z: (0..9 * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
        rel: [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)],
        cell: [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)],
    }
}

pub fn random_weights(k: usize, seed: u64) -> MixtureWeights<f64> {
    let mut r = rng(seed);
    let logits: Vec<f64> = (0..k).map(|_| r.gen_range(-3.0..3.0)).collect();
    MixtureWeights::new(naive_softmax(&logits)).unwrap()
}

pub fn mixture(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let d = 2;
        let (nets, store) = bank(3, 9 * d + 4, seed);
        let input = random_input(d, seed);
        let omega = random_weights(3, seed);
        let got = decode_aliif(&input, &omega, &nets, &store).unwrap();
        let want = naive_mixture(&nets, &store, omega.as_slice(), &input.to_row());
        worst = worst.max(max_diff(&got, &want));
    }
    worst
}

pub fn expansion(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut store = ParamStore::new();
        let net = Mlp::declare(&mut store, "p", &[9 * 2 + 2, 8, 4], &mut aliif::rng::stream(seed, "p"));
        let input = random_input(2, seed);
        let got = expansion_weights(&input.z, input.rel, &net, &store).unwrap();
        let mut row = input.z.clone();
        row.extend(input.rel);
        let want = naive_softmax(&naive_mlp(&net, &store, &row));
        worst = worst.max(max_diff(got.as_slice(), &want));
    }
    worst
}

/// Adam on a random store: first step and `steps` later steps against the
/// textbook recurrence, per element.
pub fn adam(steps: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let mut store = ParamStore::<f64>::new();
    store.push("a", uniform(&[3, 4], -1.0, 1.0, &mut r));
    store.push("b", uniform(&[5], -1.0, 1.0, &mut r));
    let mut state = AdamState::new(&store);
    let mut reference: Vec<(f64, f64, f64)> = store
        .tensors()
        .iter()
        .flat_map(|t| t.data().iter().map(|&w| (w, 0.0, 0.0)))
        .collect();
    let (mut first, mut later) = (0.0f64, 0.0f64);
    for t in 1..=steps as i32 {
        let grads: Vec<Option<Tensor<f64>>> = store
            .tensors()
            .iter()
            .map(|p| Some(uniform(p.shape(), -2.0, 2.0, &mut r)))
            .collect();
        let flat: Vec<f64> = grads.iter().flat_map(|g| g.as_ref().unwrap().data().to_vec()).collect();
        adam_step(&mut store, &grads, &mut state, 0.01).unwrap();
        for (e, &g) in reference.iter_mut().zip(&flat) {
            *e = hand_adam(e.0, g, e.1, e.2, t, 0.01);
        }
        let got: Vec<f64> = store.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
        let want: Vec<f64> = reference.iter().map(|e| e.0).collect();
        let d = max_diff(&got, &want);
        if t == 1 { first = d } else { later = later.max(d) }
    }
    (first, later)
}
