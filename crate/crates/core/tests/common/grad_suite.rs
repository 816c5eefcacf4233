//! Finite-difference cases for every tape op and for whole models.
#![allow(dead_code)]

use aliif::decoder::{make_query_grid, Mode, QueryPoint};
use aliif::params::Bound;
use aliif::{Image, Model, Tape, Tensor, Var};
use rand::Rng as _;

use super::{away_from_zero, fd_check, project, random_image, rng, uniform, FdReport, FD_STEP};

pub const INSTANCES: u64 = 20;
pub const OP_TOL: f64 = 1e-4;
pub const E2E_TOL: f64 = 1e-3;

type Case = fn(u64) -> FdReport;

fn dims(seed: u64) -> (usize, usize, usize) {
    let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
    (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(1..5))
}

fn u(shape: &[usize], seed: u64) -> Tensor<f64> {
    uniform(shape, -1.0, 1.0, &mut rng(seed))
}

fn matmul(seed: u64) -> FdReport {
    let (m, k, n) = dims(seed);
    fd_check(&[u(&[m, k], seed), u(&[k, n], seed + 1)], |t, v| {
        let y = t.matmul(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn add_bias(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[u(&[m, n], seed), u(&[n], seed + 1)], |t, v| {
        let y = t.add_bias(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn add(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[u(&[m, n], seed), u(&[m, n], seed + 1)], |t, v| {
        let y = t.add(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn mul(seed: u64) -> FdReport {
    let (m, n, k) = dims(seed);
    fd_check(&[u(&[m, n, k], seed), u(&[m, n, k], seed + 1)], |t, v| {
        let y = t.mul(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn scale(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    let c = rng(seed).gen_range(-2.0..2.0);
    fd_check(&[u(&[m, n], seed)], |t, v| {
        let y = t.scale(v[0], c);
        project(t, y, seed)
    })
}

fn sum(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[u(&[m, n], seed)], |t, v| {
        let s = t.sum(v[0]);
        t.scale(s, 0.7)
    })
}

fn relu(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[away_from_zero(&[m, n], 1e-3, 1.0, &mut rng(seed))], |t, v| {
        let y = t.relu(v[0]);
        project(t, y, seed)
    })
}

fn softmax(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[uniform(&[m, n + 1], -3.0, 3.0, &mut rng(seed))], |t, v| {
        let y = t.softmax(v[0]).unwrap();
        project(t, y, seed)
    })
}

fn conv2d_bias(seed: u64) -> FdReport {
    let (c_in, c_out, h) = dims(seed);
    let w = dims(seed + 9).0 + 1;
    fd_check(
        &[u(&[c_in, h, w], seed), u(&[c_out, c_in, 3, 3], seed + 1), u(&[c_out], seed + 2)],
        |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2])).unwrap();
            project(t, y, seed)
        },
    )
}

fn conv2d_plain(seed: u64) -> FdReport {
    let (c_in, c_out, h) = dims(seed);
    let w = dims(seed + 9).0;
    fd_check(&[u(&[c_in, h, w], seed), u(&[c_out, c_in, 3, 3], seed + 1)], |t, v| {
        let y = t.conv2d(v[0], v[1], None).unwrap();
        project(t, y, seed)
    })
}

fn unfold3x3(seed: u64) -> FdReport {
    let (c, h, w) = dims(seed);
    fd_check(&[u(&[c, h, w], seed)], |t, v| {
        let y = t.unfold3x3(v[0]).unwrap();
        project(t, y, seed)
    })
}

fn transpose(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    fd_check(&[u(&[m, n], seed)], |t, v| {
        let y = t.transpose(v[0]).unwrap();
        project(t, y, seed)
    })
}

fn reshape(seed: u64) -> FdReport {
    let (a, b, c) = dims(seed);
    fd_check(&[u(&[a, b, c], seed)], |t, v| {
        let y = t.reshape(v[0], &[a * b, c]).unwrap();
        project(t, y, seed)
    })
}

fn gather_rows(seed: u64) -> FdReport {
    let (m, n, k) = dims(seed);
    let mut r = rng(seed);
    let index: Vec<usize> = (0..k + m).map(|_| r.gen_range(0..m)).collect();
    fd_check(&[u(&[m, n], seed)], |t, v| {
        let y = t.gather_rows(v[0], &index).unwrap();
        project(t, y, seed)
    })
}

fn slice_rows(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    let m = m + 2;
    let mut r = rng(seed);
    let start = r.gen_range(0..m - 1);
    let end = r.gen_range(start + 1..=m);
    fd_check(&[u(&[m, n], seed)], |t, v| {
        let y = t.slice_rows(v[0], start, end).unwrap();
        project(t, y, seed)
    })
}

fn concat_rows(seed: u64) -> FdReport {
    let (a, b, n) = dims(seed);
    fd_check(&[u(&[a, n], seed), u(&[b, n], seed + 1), u(&[1, n], seed + 2)], |t, v| {
        let y = t.concat_rows(v).unwrap();
        project(t, y, seed)
    })
}

fn concat_cols(seed: u64) -> FdReport {
    let (m, a, b) = dims(seed);
    fd_check(&[u(&[m, a], seed), u(&[m, b], seed + 1)], |t, v| {
        let y = t.concat_cols(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn mix(seed: u64) -> FdReport {
    let (rows, k, cols) = dims(seed);
    let mut inputs = vec![u(&[rows, k], seed)];
    inputs.extend((0..k).map(|j| u(&[rows, cols], seed + 1 + j as u64)));
    fd_check(&inputs, |t, v| {
        let y = t.mix(v[0], &v[1..]).unwrap();
        project(t, y, seed)
    })
}

fn group_weighted_sum(seed: u64) -> FdReport {
    let (q, g, cols) = dims(seed);
    fd_check(&[u(&[q * g, cols], seed), u(&[q, g], seed + 1)], |t, v| {
        let y = t.group_weighted_sum(v[0], v[1]).unwrap();
        project(t, y, seed)
    })
}

fn l1_loss(seed: u64) -> FdReport {
    let (m, n, _) = dims(seed);
    let target = u(&[m, n], seed + 1);
    let offset = away_from_zero(&[m, n], 1e-3, 1.0, &mut rng(seed));
    let pred = Tensor::new(
        vec![m, n],
        target.data().iter().zip(offset.data()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    fd_check(&[pred, target], |t, v| t.l1_loss(v[0], v[1]).unwrap())
}

pub fn op_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("matmul", matmul),
        ("add_bias", add_bias),
        ("add", add),
        ("mul", mul),
        ("scale", scale),
        ("sum", sum),
        ("relu", relu),
        ("softmax", softmax),
        ("conv2d (bias)", conv2d_bias),
        ("conv2d (no bias)", conv2d_plain),
        ("unfold3x3", unfold3x3),
        ("transpose", transpose),
        ("reshape", reshape),
        ("gather_rows", gather_rows),
        ("slice_rows", slice_rows),
        ("concat_rows", concat_rows),
        ("concat_cols", concat_cols),
        ("mix", mix),
        ("group_weighted_sum", group_weighted_sum),
        ("l1_loss", l1_loss),
    ]
}

/// Runs one op case over all seeded instances.
pub fn run_op(case: Case) -> FdReport {
    let mut total = FdReport::default();
    for seed in 0..INSTANCES {
        total.merge(case(1000 + seed));
    }
    total
}

/// One training-style problem: a random LR image, random queries and
/// random targets.
pub struct Problem {
    pub image: Image,
    pub queries: Vec<QueryPoint>,
    pub targets: Tensor<f64>,
}

impl Problem {
    pub fn new(seed: u64) -> Problem {
        let mut r = rng(seed);
        let (h, w) = (r.gen_range(3..7), r.gen_range(3..7));
        let image = random_image(h, w, &mut r);
        let (oh, ow) = (r.gen_range(h..3 * h), r.gen_range(w..3 * w));
        let grid = make_query_grid(oh, ow).unwrap();
        let queries: Vec<QueryPoint> = (0..8).map(|_| grid[r.gen_range(0..grid.len())]).collect();
        let targets = uniform(&[queries.len(), 3], 0.0, 1.0, &mut r);
        Problem { image, queries, targets }
    }

    fn loss(&self, model: &Model<f64>, tape: &mut Tape<f64>, p: &Bound) -> Var {
        let pred = model.forward_batch(tape, p, &[(&self.image, &self.queries)]).unwrap();
        let target = tape.constant(self.targets.clone());
        tape.l1_loss(pred, target).unwrap()
    }

    fn loss_value(&self, model: &Model<f64>) -> f64 {
        let mut tape = Tape::new();
        let p = Bound::bind(&mut tape, model.params(), false);
        let l = self.loss(model, &mut tape, &p);
        tape.value(l).item().unwrap()
    }
}

/// Gradient check of the L1 loss of `problem` with respect to every
/// parameter whose name starts with `prefix`.
pub fn check_model(model: &Model<f64>, problem: &Problem, prefix: &str) -> FdReport {
    let mut tape = Tape::new();
    let p = Bound::bind(&mut tape, model.params(), true);
    let l = problem.loss(model, &mut tape, &p);
    let base = tape.value(l).item().unwrap();
    let mut g = tape.backward(l).unwrap();
    let grads = p.gradients(&mut g);

    let mut report = FdReport::default();
    let mut m = model.clone();
    let ids: Vec<_> = model.params().ids().collect();
    for (id, grad) in ids.into_iter().zip(grads) {
        if !model.params().name(id).starts_with(prefix) {
            continue;
        }
        let grad = grad.unwrap_or_else(|| Tensor::zeros(model.params().get(id).shape().to_vec()));
        for j in 0..grad.len() {
            let x = model.params().get(id).data()[j];
            m.params_mut().get_mut(id).data_mut()[j] = x + FD_STEP;
            let up = problem.loss_value(&m);
            m.params_mut().get_mut(id).data_mut()[j] = x - FD_STEP;
            let down = problem.loss_value(&m);
            m.params_mut().get_mut(id).data_mut()[j] = x;
            let (fwd, bwd) = ((up - base) / FD_STEP, (base - down) / FD_STEP);
            if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(1e-4) {
                report.kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * FD_STEP);
            report.max_rel = report.max_rel.max(super::rel_error(grad.data()[j], numeric));
            report.checked += 1;
        }
    }
    report
}

fn variant(mode: Mode, k: usize, shared: bool, literal: bool, seed: u64) -> Model<f64> {
    let mut cfg = super::tiny_config(mode, k);
    cfg.share_ensemble_weights = shared;
    cfg.literal_relu = literal;
    Model::new(cfg, seed).unwrap()
}

/// Model variants covered by the end-to-end check, built per seed.
pub type Builder = fn(u64) -> Model<f64>;

pub fn e2e_variants() -> Vec<(&'static str, Builder)> {
    vec![
        ("liif", |s| variant(Mode::Liif, 1, false, false, s)),
        ("aliif K=3", |s| variant(Mode::Aliif, 3, false, false, s)),
        ("aliif shared weights", |s| variant(Mode::Aliif, 2, true, false, s)),
        ("aliif literal ReLU", |s| variant(Mode::Aliif, 2, false, true, s)),
    ]
}

/// End-to-end check of one variant: a fresh model and problem per seed.
pub fn run_e2e(build: Builder) -> FdReport {
    let mut total = FdReport::default();
    for seed in 0..INSTANCES {
        total.merge(check_model(&build(seed), &Problem::new(500 + seed), ""));
    }
    total
}
