//! Single-query decoding on explicit decoder inputs.

use crate::error::{ensure, Error, Result};
use crate::nn::Mlp;
use crate::params::{Bound, ParamStore};
use crate::tensor::{Float, Tape, Tensor};

/// The decoder's view of one (query, feature) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderInput<T: Float = f32> {
    /// Unfolded feature vector (`9·D` values).
    pub z: Vec<T>,
    /// Relative offset `ξ` in feature-grid pitches.
    pub rel: [T; 2],
    /// Query cell size in feature-grid pitches.
    pub cell: [T; 2],
}

impl<T: Float> DecoderInput<T> {
    pub fn len(&self) -> usize {
        self.z.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[z, ξ, cell]`.
    pub fn to_row(&self) -> Vec<T> {
        let mut row = self.z.clone();
        row.extend(self.rel);
        row.extend(self.cell);
        row
    }
}

/// Per-query mixture weights `ω`: nonnegative, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureWeights<T: Float = f32> {
    omega: Vec<T>,
}

impl<T: Float> MixtureWeights<T> {
    /// Validates nonnegativity and unit sum (within `1e-6`).
    pub fn new(omega: Vec<T>) -> Result<Self> {
        ensure!(!omega.is_empty(), Dimension, "mixture weights cannot be empty");
        ensure!(
            is_simplex(&omega),
            Contract,
            "mixture weights must be nonnegative and sum to 1, got {omega:?}"
        );
        Ok(MixtureWeights { omega })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.omega
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }
}

pub(crate) fn is_simplex<T: Float>(omega: &[T]) -> bool {
    let sum: f64 = omega.iter().map(|v| v.as_f64()).sum();
    omega.iter().all(|&v| v >= T::zero()) && (sum - 1.0).abs() < 1e-6
}

fn row_tensor<T: Float>(row: Vec<T>) -> Tensor<T> {
    let n = row.len();
    Tensor::new([1, n], row).expect("non-empty row")
}

fn run_mlp<T: Float>(mlp: &Mlp, params: &ParamStore<T>, row: Vec<T>) -> Result<Vec<T>> {
    ensure!(
        row.len() == mlp.input_width(),
        Contract,
        "input of width {} does not match network input width {}",
        row.len(),
        mlp.input_width()
    );
    let mut tape = Tape::new();
    let p = Bound::bind(&mut tape, params, false);
    let x = tape.constant(row_tensor(row));
    let y = mlp.forward(&mut tape, &p, x)?;
    Ok(tape.value(y).data().to_vec())
}

fn rgb<T: Float>(v: Vec<T>) -> Result<[T; 3]> {
    v.try_into()
        .map_err(|v: Vec<T>| Error::Dimension(format!("expected 3 outputs, got {}", v.len())))
}

/// Mixture weights `ω = softmax(P([z_center, ξ]))` for one query.
pub fn expansion_weights<T: Float>(
    z_center: &[T],
    rel: [T; 2],
    net: &Mlp,
    params: &ParamStore<T>,
) -> Result<MixtureWeights<T>> {
    let mut row = z_center.to_vec();
    row.extend(rel);
    let mut logits = run_mlp(net, params, row)?;
    crate::tensor::softmax_in_place(&mut logits);
    MixtureWeights::new(logits)
}

/// RGB from the single shared MLP; no output nonlinearity.
pub fn decode_liif<T: Float>(
    input: &DecoderInput<T>,
    mlp: &Mlp,
    params: &ParamStore<T>,
) -> Result<[T; 3]> {
    rgb(run_mlp(mlp, params, input.to_row())?)
}

/// RGB as the `ω`-weighted sum of the basis MLP outputs.
pub fn decode_aliif<T: Float>(
    input: &DecoderInput<T>,
    weights: &MixtureWeights<T>,
    bank: &[Mlp],
    params: &ParamStore<T>,
) -> Result<[T; 3]> {
    ensure!(
        weights.k() == bank.len(),
        Contract,
        "{} mixture weights for a bank of {} basis networks",
        weights.k(),
        bank.len()
    );
    ensure!(!bank.is_empty(), Contract, "empty basis bank");
    let row = input.to_row();
    let mut tape = Tape::new();
    let p = Bound::bind(&mut tape, params, false);
    let x = tape.constant(row_tensor(row));
    let parts = bank
        .iter()
        .map(|mlp| mlp.forward(&mut tape, &p, x))
        .collect::<Result<Vec<_>>>()?;
    let w = tape.constant(row_tensor(weights.as_slice().to_vec()));
    let out = tape.mix(w, &parts)?;
    rgb(tape.value(out).data().to_vec())
}
