//! Arbitrary-scale image super-resolution with local implicit image
//! functions, on a small hand-written autodiff engine.
//!
//! [`Model`] pairs a residual convolutional encoder with a coordinate
//! decoder. In [`Mode::Liif`] the decoder is one MLP; in [`Mode::Aliif`] it
//! is a bank of basis MLPs blended per query by softmax weights.
//! [`training::train`] fits a model, [`harness`] holds the command
//! implementations, and the guide under `book/` walks through each part.

pub mod decoder;
pub mod encoder;
pub mod harness;
pub mod error;
pub mod image;
pub mod nn;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod training;

pub use decoder::{Mode, Model, ModelConfig};
pub use error::{Error, Result};
pub use image::Image;
pub use tensor::{Float, Gradients, Tape, Tensor, Var};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tape.md")]
    mod tape {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/queries.md")]
    mod queries {}
    #[doc = include_str!("../../../book/src/mixture.md")]
    mod mixture {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
}
