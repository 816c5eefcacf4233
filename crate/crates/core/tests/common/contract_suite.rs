//! Mixture-weight and degenerate-mixture contracts, measured on the
//! production `f32` model.
#![allow(dead_code)]

use aliif::decoder::{decode_aliif, decode_liif, expansion_weights, MixtureWeights, QueryPoint};
use aliif::{Image, Mode, Model, ModelConfig};
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{random_image, rng};

pub const SIMPLEX_TOL: f64 = 1e-6;
pub const EQUIV_TOL: f64 = 1e-6;

#[derive(Debug, Default, Clone, Copy)]
pub struct SimplexReport {
    pub queries: usize,
    pub min_weight: f64,
    pub max_sum_error: f64,
    /// `K = 1` weights that were not exactly `[1.0]`.
    pub k1_not_one: usize,
}

fn random_queries(n: usize, seed: u64) -> Vec<QueryPoint> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let c = [r.gen_range(-1.0..=1.0), r.gen_range(-1.0..=1.0)];
            let s = r.gen_range(0.005..0.5);
            QueryPoint::new(c, [s, s])
        })
        .collect()
}

fn image(seed: u64) -> Image {
    random_image(12, 10, &mut rng(seed))
}

/// Mixture weights of `queries` random queries for each ensemble
/// neighbor, on a desk A-LIIF model and on a `K = 1` model.
pub fn simplex(queries: usize, seed: u64) -> SimplexReport {
    let mut report = SimplexReport {
        queries,
        min_weight: f64::INFINITY,
        ..Default::default()
    };
    let im = image(seed);
    for k in [ModelConfig::desk(Mode::Aliif).k, 1] {
        let mut cfg = ModelConfig::desk(Mode::Aliif);
        cfg.k = k;
        let model = Model::<f32>::new(cfg, seed).unwrap();
        let net = model.expansion().unwrap();
        let fm = model.encode(&im).unwrap();
        let unfolded = fm.unfold();
        for q in random_queries(queries, seed) {
            for (reference, _) in q.ensemble(fm.height(), fm.width()) {
                let input = model.decoder_input(&unfolded, &q, &reference);
                let w = expansion_weights(&input.z, input.rel, net, model.params()).unwrap();
                let w = w.as_slice();
                if k == 1 {
                    report.k1_not_one += (w != [1.0]) as usize;
                    continue;
                }
                let sum: f64 = w.iter().map(|&v| v as f64).sum();
                report.max_sum_error = report.max_sum_error.max((sum - 1.0).abs());
                for &v in w {
                    report.min_weight = report.min_weight.min(v as f64);
                }
            }
        }
    }
    report
}

/// `K = 1` A-LIIF against LIIF with the same basis parameters, per raw
/// decoder call and per rendered value.
pub fn k1_equivalence(inputs: usize, seed: u64) -> (f64, f64) {
    let liif = Model::<f32>::new(ModelConfig::desk(Mode::Liif), seed).unwrap();
    let mut cfg = ModelConfig::desk(Mode::Aliif);
    cfg.k = 1;
    let aliif = Model::<f32>::new(cfg, seed).unwrap();
    let im = image(seed);
    let fm = liif.encode(&im).unwrap();
    assert_eq!(fm, aliif.encode(&im).unwrap());
    let unfolded = fm.unfold();
    let one = MixtureWeights::new(vec![1.0f32]).unwrap();
    let queries = random_queries(inputs, seed + 1);
    let mut worst_decode = 0.0f64;
    for q in &queries {
        let r = q.nearest(fm.height(), fm.width());
        let input = liif.decoder_input(&unfolded, q, &r);
        let a = decode_liif(&input, &liif.basis()[0], liif.params()).unwrap();
        let b = decode_aliif(&input, &one, aliif.basis(), aliif.params()).unwrap();
        for c in 0..3 {
            worst_decode = worst_decode.max((a[c] as f64 - b[c] as f64).abs());
        }
    }
    let ra = liif.render(&fm, &queries).unwrap();
    let rb = aliif.render(&fm, &queries).unwrap();
    let worst_render = ra
        .iter()
        .flatten()
        .zip(rb.iter().flatten())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .fold(0.0, f64::max);
    (worst_decode, worst_render)
}

/// Permuting the basis bank and the weights together, `K = 5`.
pub fn permutation(inputs: usize, seed: u64) -> f64 {
    let mut cfg = ModelConfig::desk(Mode::Aliif);
    cfg.k = 5;
    let model = Model::<f32>::new(cfg, seed).unwrap();
    let im = image(seed);
    let fm = model.encode(&im).unwrap();
    let unfolded = fm.unfold();
    let mut r = rng(seed + 2);
    let mut worst = 0.0f64;
    for q in random_queries(inputs, seed + 3) {
        let reference = q.nearest(fm.height(), fm.width());
        let input = model.decoder_input(&unfolded, &q, &reference);
        let logits: Vec<f32> = (0..5).map(|_| r.gen_range(-3.0..3.0)).collect();
        let e: Vec<f32> = logits.iter().map(|v| v.exp()).collect();
        let s: f32 = e.iter().sum();
        let w: Vec<f32> = e.iter().map(|v| v / s).collect();
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut r);
        let bank: Vec<_> = perm.iter().map(|&i| model.basis()[i].clone()).collect();
        let pw: Vec<f32> = perm.iter().map(|&i| w[i]).collect();
        let a = decode_aliif(&input, &MixtureWeights::new(w).unwrap(), model.basis(), model.params()).unwrap();
        let b = decode_aliif(&input, &MixtureWeights::new(pw).unwrap(), &bank, model.params()).unwrap();
        for c in 0..3 {
            worst = worst.max((a[c] as f64 - b[c] as f64).abs());
        }
    }
    worst
}
