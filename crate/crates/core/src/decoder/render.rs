use super::batch::QueryPlan;
use super::decode::DecoderInput;
use super::grid::{make_query_grid, QueryPoint, Reference};
use super::model::Model;
use crate::encoder::FeatureMap;
use crate::error::{ensure, Result};
use crate::image::Image;
use crate::params::Bound;
use crate::tensor::{Float, Tape, Tensor};

/// Queries decoded per tape during inference.
pub const RENDER_CHUNK: usize = 4096;

impl<T: Float> Model<T> {
    pub fn encode(&self, image: &Image) -> Result<FeatureMap<T>> {
        self.encoder.encode(&self.params, image)
    }

    /// Explicit decoder input for `query` against the feature at `reference`
    /// of an unfolded map.
    pub fn decoder_input(
        &self,
        unfolded: &FeatureMap<T>,
        query: &QueryPoint,
        reference: &Reference,
    ) -> DecoderInput<T> {
        let (h, w) = (unfolded.height(), unfolded.width());
        DecoderInput {
            z: unfolded.at(reference.index[0], reference.index[1]),
            rel: reference.rel.map(T::of_f64),
            cell: query.cell_in_grid_units(h, w).map(T::of_f64),
        }
    }

    /// Local-ensemble RGB for each query, clamped to `[0, 1]`. Results do
    /// not depend on how the queries are split into calls.
    pub fn render(&self, fm: &FeatureMap<T>, queries: &[QueryPoint]) -> Result<Vec<[T; 3]>> {
        ensure!(
            fm.channels() == self.config.feat_dim,
            Contract,
            "feature map has {} channels, model expects {}",
            fm.channels(),
            self.config.feat_dim
        );
        let (h, w) = (fm.height(), fm.width());
        let projected = {
            let mut tape = Tape::new();
            let p = Bound::bind(&mut tape, &self.params, false);
            let x = tape.constant(fm.tensor().clone());
            let u = self.unfolded_rows(&mut tape, x)?;
            let proj = self.project(&mut tape, &p, u)?;
            self.project_values(&tape, &proj)
        };
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(RENDER_CHUNK) {
            let mut tape = Tape::new();
            let p = Bound::bind(&mut tape, &self.params, false);
            let proj = self.projected_constants(&mut tape, &projected);
            let mut plan = QueryPlan::new(self.config.share_ensemble_weights);
            for q in chunk {
                plan.push(q, h, w, 0);
            }
            debug_assert_eq!(plan.len(), chunk.len());
            let rgb = self.decode_plan(&mut tape, &p, &proj, &plan)?;
            let clamp = |v: T| v.max(T::zero()).min(T::one());
            out.extend(
                tape.value(rgb)
                    .data()
                    .chunks_exact(3)
                    .map(|c| [clamp(c[0]), clamp(c[1]), clamp(c[2])]),
            );
        }
        Ok(out)
    }

    /// Renders a full `out_h × out_w` image from a feature map.
    pub fn render_image(&self, fm: &FeatureMap<T>, out_h: usize, out_w: usize) -> Result<Image> {
        let grid = make_query_grid(out_h, out_w)?;
        let rgb = self.render(fm, &grid)?;
        let pixels = rgb
            .iter()
            .flat_map(|c| c.map(|v| v.as_f64() as f32))
            .collect();
        Image::new(out_h, out_w, pixels)
    }

    /// Encode then render at the requested size.
    pub fn upscale(&self, image: &Image, out_h: usize, out_w: usize) -> Result<Image> {
        let fm = self.encode(image)?;
        self.render_image(&fm, out_h, out_w)
    }
}

/// Tensor of a list of RGB triples, `n × 3`.
pub(crate) fn rgb_tensor<T: Float>(rgb: &[[f32; 3]]) -> Result<Tensor<T>> {
    Tensor::new(
        [rgb.len(), 3],
        rgb.iter()
            .flat_map(|c| c.map(|v| T::of_f64(v as f64)))
            .collect(),
    )
}
