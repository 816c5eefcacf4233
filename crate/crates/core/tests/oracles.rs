mod common;

use aliif::decoder::{axis_coord, make_query_grid};
use aliif::encoder::FeatureMap;
use aliif::params::ParamStore;
use aliif::training::{adam_step, sample_batch, AdamState, Dataset, TrainConfig};
use aliif::{Mode, Tensor};
use common::oracle_suite::{self as oracle, ADAM_TOL, BICUBIC_TOL, CONV_TOL, MIXTURE_TOL};
use common::{center_oracle, naive_matmul, random_image, rng, uniform};

#[test]
fn conv2d_matches_nested_loops() {
    let d = oracle::conv2d(50);
    assert!(d < CONV_TOL, "max deviation {d:.3e}");
}

#[test]
fn matmul_matches_triple_loop() {
    let mut r = rng(3);
    for (m, k, n) in [(1, 1, 1), (3, 7, 2), (17, 5, 33), (64, 64, 9)] {
        let a = uniform(&[m, k], -1.0, 1.0, &mut r);
        let b = uniform(&[k, n], -1.0, 1.0, &mut r);
        let mut tape = aliif::Tape::<f64>::new();
        let (av, bv) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let y = tape.matmul(av, bv).unwrap();
        let want = naive_matmul(a.data(), b.data(), m, k, n);
        for (x, w) in tape.value(y).data().iter().zip(&want) {
            assert!((x - w).abs() < 1e-12);
        }
    }
}

#[test]
fn bicubic_matches_direct_two_dimensional_sum() {
    let d = oracle::bicubic(60);
    assert!(d < BICUBIC_TOL, "max deviation {d:.3e}");
}

#[test]
fn mixture_matches_explicit_sum() {
    let d = oracle::mixture(50);
    assert!(d < MIXTURE_TOL, "max deviation {d:.3e}");
}

#[test]
fn expansion_weights_match_softmax_of_plain_network() {
    let d = oracle::expansion(50);
    assert!(d < 1e-12, "max deviation {d:.3e}");
}

#[test]
fn adam_matches_hand_evaluated_update() {
    let (first, later) = oracle::adam(10, 9);
    assert!(first < ADAM_TOL, "step 1 deviation {first:.3e}");
    assert!(later < 1e-12, "later steps deviation {later:.3e}");

    let mut store = ParamStore::<f64>::new();
    let w = store.push("w", Tensor::scalar(0.0));
    let mut state = AdamState::new(&store);
    adam_step(&mut store, &[Some(Tensor::scalar(1.0))], &mut state, 0.1).unwrap();
    let want = -0.1 / (1.0 + 1e-8);
    assert!((store.get(w).item().unwrap() - want).abs() < ADAM_TOL);
}

#[test]
fn unfold_interior_matches_hand_gather() {
    let mut r = rng(5);
    let (c, h, w) = (3, 5, 6);
    let fm = FeatureMap::new(uniform(&[c, h, w], -1.0, 1.0, &mut r)).unwrap();
    let u = fm.unfold();
    let (y, x) = (2, 3);
    let got = u.at(y, x);
    for ch in 0..c {
        for j in 0..9 {
            let (ny, nx) = (y + j / 3 - 1, x + j % 3 - 1);
            assert_eq!(got[ch * 9 + j], fm.at(ny, nx)[ch]);
        }
    }
}

#[test]
fn query_grid_matches_center_formula() {
    for n in 1..=64 {
        for i in 0..n {
            assert!((axis_coord(i, n) - center_oracle(i, n)).abs() < 1e-12);
        }
    }
    let g = make_query_grid(3, 5).unwrap();
    for (idx, q) in g.iter().enumerate() {
        assert_eq!(q.coord, [axis_coord(idx / 5, 3), axis_coord(idx % 5, 5)]);
    }
}

#[test]
fn sampled_coordinates_match_formula() {
    let mut r = rng(8);
    let images = (0..3).map(|_| random_image(40, 44, &mut r)).collect();
    let data = Dataset::from_images(images).unwrap();
    let config = TrainConfig::toy(Mode::Aliif);
    for seed in 0..5 {
        let batch = sample_batch(&data, &config, &mut aliif::rng::stream(seed, "data")).unwrap();
        for s in &batch.items {
            let hr = &data.images()[s.source];
            for (q, t) in s.queries.iter().zip(&s.targets) {
                let cell = 2.0 / s.crop as f64;
                assert_eq!(q.cell, [cell, cell]);
                // recover the crop pixel from the coordinate and read the
                // HR image around every possible crop origin
                let iy = ((q.coord[0] + 1.0) / cell - 0.5).round() as usize;
                let ix = ((q.coord[1] + 1.0) / cell - 0.5).round() as usize;
                assert!((q.coord[0] - center_oracle(iy, s.crop)).abs() < 1e-12);
                assert!((q.coord[1] - center_oracle(ix, s.crop)).abs() < 1e-12);
                let found = (0..=hr.height() - s.crop).any(|top| {
                    (0..=hr.width() - s.crop).any(|left| hr.get(top + iy, left + ix) == *t)
                });
                assert!(found);
            }
        }
    }
}
