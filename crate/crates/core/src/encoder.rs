//! Residual convolutional encoder producing the feature map.

use crate::error::{ensure, Result};
use crate::image::Image;
use crate::nn::Conv3x3;
use crate::params::{Bound, ParamStore};
use crate::rng::Rng;
use crate::tensor::{unfold3x3, Float, Tape, Tensor, Var};

/// Per-pixel feature vectors of an LR image, stored planar `D×H×W`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T: Float = f32> {
    tensor: Tensor<T>,
}

impl<T: Float> FeatureMap<T> {
    pub fn new(tensor: Tensor<T>) -> Result<Self> {
        tensor.dims3("feature map")?;
        Ok(FeatureMap { tensor })
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.tensor
    }

    /// Feature vector at one location.
    pub fn at(&self, y: usize, x: usize) -> Vec<T> {
        let (h, w) = (self.height(), self.width());
        (0..self.channels())
            .map(|c| self.tensor.data()[c * h * w + y * w + x])
            .collect()
    }

    /// Concatenates each location's edge-clamped 3×3 neighborhood:
    /// channel `c·9 + j` holds channel `c` of neighbor `j`.
    pub fn unfold(&self) -> FeatureMap<T> {
        let (c, h, w) = (self.channels(), self.height(), self.width());
        let data = unfold3x3(self.tensor.data(), c, h, w);
        FeatureMap {
            tensor: Tensor::new([9 * c, h, w], data).expect("unfold preserves shape"),
        }
    }
}

/// Encoder input for `image`: `3×H×W`, values mapped from `[0, 1]` to
/// `[-1, 1]`.
pub fn input_tensor<T: Float>(image: &Image) -> Tensor<T> {
    let mut t: Tensor<T> = image.to_tensor();
    let two = T::of_f64(2.0);
    for v in t.data_mut() {
        *v = two * *v - T::one();
    }
    t
}

/// `unfold_features` as a free function.
pub fn unfold_features<T: Float>(fm: &FeatureMap<T>) -> FeatureMap<T> {
    fm.unfold()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResBlock {
    pub first: Conv3x3,
    pub second: Conv3x3,
}

/// Head conv (3→D), `B` residual blocks (conv, ReLU, conv, skip) and a tail
/// conv, with a long skip from the head output around the body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoder {
    pub head: Conv3x3,
    pub blocks: Vec<ResBlock>,
    pub tail: Conv3x3,
}

impl Encoder {
    pub fn declare<T: Float>(
        store: &mut ParamStore<T>,
        feat_dim: usize,
        blocks: usize,
        rng: &mut Rng,
    ) -> Encoder {
        let head = Conv3x3::declare(store, "encoder.head", 3, feat_dim, rng);
        let blocks = (0..blocks)
            .map(|i| ResBlock {
                first: Conv3x3::declare(store, &format!("encoder.block{i}.0"), feat_dim, feat_dim, rng),
                second: Conv3x3::declare(store, &format!("encoder.block{i}.1"), feat_dim, feat_dim, rng),
            })
            .collect();
        let tail = Conv3x3::declare(store, "encoder.tail", feat_dim, feat_dim, rng);
        Encoder { head, blocks, tail }
    }

    pub fn feat_dim(&self) -> usize {
        self.head.c_out
    }

    /// `image: 3×H×W -> D×H×W`.
    pub fn forward<T: Float>(&self, tape: &mut Tape<T>, p: &Bound, image: Var) -> Result<Var> {
        let shape = tape.value(image).shape();
        ensure!(
            shape.len() == 3 && shape[0] == 3,
            Contract,
            "encoder expects a 3×H×W image, got {shape:?}"
        );
        let head = self.head.forward(tape, p, image)?;
        let mut x = head;
        for block in &self.blocks {
            let t = block.first.forward(tape, p, x)?;
            let t = tape.relu(t);
            let t = block.second.forward(tape, p, t)?;
            x = tape.add(x, t)?;
        }
        let t = self.tail.forward(tape, p, x)?;
        tape.add(t, head)
    }

    /// Tape-free convenience: the feature map of `image`.
    pub fn encode<T: Float>(&self, params: &ParamStore<T>, image: &Image) -> Result<FeatureMap<T>> {
        let mut tape = Tape::new();
        let p = Bound::bind(&mut tape, params, false);
        let x = tape.constant(input_tensor(image));
        let out = self.forward(&mut tape, &p, x)?;
        FeatureMap::new(tape.value(out).clone())
    }
}
