//! Layer building blocks shared by the encoder and the decoders.

use crate::error::{ensure, Result};
use crate::params::{fan_in_uniform, Bound, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Float, Tape, Var};

/// Fully connected layer `y = x·W + b` with `W: fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn declare<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut Rng,
    ) -> Linear {
        let weight = store.push(
            format!("{name}.weight"),
            fan_in_uniform(&[fan_in, fan_out], fan_in, rng),
        );
        let bias = store.push(format!("{name}.bias"), fan_in_uniform(&[fan_out], fan_in, rng));
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward<T: Float>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, p.var(self.weight))?;
        tape.add_bias(xw, p.var(self.bias))
    }
}

/// Multi-layer perceptron with ReLU between layers and a linear output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `widths = [input, hidden.., output]`; `widths.len() - 1` layers.
    pub fn declare<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        widths: &[usize],
        rng: &mut Rng,
    ) -> Mlp {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::declare(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out
    }

    pub fn forward<T: Float>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let width = tape.value(x).shape().last().copied().unwrap_or(0);
        ensure!(
            tape.value(x).rank() == 2 && width == self.input_width(),
            Contract,
            "MLP expects rows of width {}, got shape {:?}",
            self.input_width(),
            tape.value(x).shape()
        );
        let first = self.layers[0].forward(tape, p, x)?;
        self.forward_from_first(tape, p, first)
    }

    /// Continues a forward pass from the pre-activation of the first layer.
    pub(crate) fn forward_from_first<T: Float>(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        first: Var,
    ) -> Result<Var> {
        let mut h = first;
        for layer in &self.layers[1..] {
            let a = tape.relu(h);
            h = layer.forward(tape, p, a)?;
        }
        Ok(h)
    }
}

/// 3×3, padding-1 convolution with bias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conv3x3 {
    pub weight: ParamId,
    pub bias: ParamId,
    pub c_in: usize,
    pub c_out: usize,
}

impl Conv3x3 {
    pub fn declare<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        rng: &mut Rng,
    ) -> Conv3x3 {
        let weight = store.push(
            format!("{name}.weight"),
            fan_in_uniform(&[c_out, c_in, 3, 3], c_in * 9, rng),
        );
        let bias = store.push(format!("{name}.bias"), fan_in_uniform(&[c_out], c_in * 9, rng));
        Conv3x3 {
            weight,
            bias,
            c_in,
            c_out,
        }
    }

    pub fn forward<T: Float>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        tape.conv2d(x, p.var(self.weight), Some(p.var(self.bias)))
    }
}
