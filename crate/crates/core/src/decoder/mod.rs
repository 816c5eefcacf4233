//! Implicit decoders: map a feature map plus a continuous coordinate and
//! cell size to RGB.
//!
//! Two decoders share all plumbing. LIIF evaluates a single MLP on
//! `[z, ξ, cell]`. A-LIIF evaluates `K` basis MLPs on the same input and
//! blends them with per-query weights `ω = softmax(P([z, ξ]))` produced by
//! the expansion network `P`:
//!
//! ```text
//! rgb = Σ_k ω_k · MLP_k(z, ξ, cell)
//! ```
//!
//! Both are wrapped in the four-neighbor local ensemble, and rendered values
//! are clamped to `[0, 1]`.

mod batch;
mod decode;
mod grid;
mod model;
mod render;

pub use decode::{decode_aliif, decode_liif, expansion_weights, DecoderInput, MixtureWeights};
pub use grid::{axis_coord, make_query_grid, QueryPoint, Reference, BORDER_EPS, ENSEMBLE_SHIFTS};
pub use model::{Mode, Model, ModelConfig};
pub use batch::{OUTPUT_OFFSET, OUTPUT_SCALE};
pub use render::RENDER_CHUNK;
pub(crate) use render::rgb_tensor;
