//! Batched decoding of many queries on one tape.
//!
//! The first layer of every decoder MLP acts on `[z, ξ, cell]`; its `z`
//! part depends only on the feature location, so `z·W_z` is computed once
//! per location and gathered per query row. Only the four `ξ`/cell columns
//! are multiplied per row.

use super::grid::QueryPoint;
use super::model::{Mode, Model};
use crate::error::Result;
use crate::image::Image;
use crate::nn::Mlp;
use crate::params::Bound;
use crate::tensor::{Float, Tape, Tensor, Var};

/// Decoder outputs live in centered units; `rgb = OUTPUT_OFFSET +
/// OUTPUT_SCALE · y`.
pub const OUTPUT_SCALE: f64 = 0.5;
pub const OUTPUT_OFFSET: f64 = 0.5;

/// Row layout of a set of queries against one or more feature grids.
/// Each query owns four consecutive rows, one per ensemble neighbor.
pub(crate) struct QueryPlan<T: Float> {
    queries: usize,
    rows: Vec<usize>,
    basis_extra: Vec<T>,
    exp_rows: Vec<usize>,
    exp_extra: Vec<T>,
    shared: bool,
    area: Vec<T>,
}

impl<T: Float> QueryPlan<T> {
    pub(crate) fn new(share_ensemble_weights: bool) -> Self {
        QueryPlan {
            queries: 0,
            rows: Vec::new(),
            basis_extra: Vec::new(),
            exp_rows: Vec::new(),
            exp_extra: Vec::new(),
            shared: share_ensemble_weights,
            area: Vec::new(),
        }
    }

    /// Adds one query against a `feat_h × feat_w` grid whose locations
    /// start at row `offset` of the projected feature matrices.
    pub(crate) fn push(&mut self, q: &QueryPoint, feat_h: usize, feat_w: usize, offset: usize) {
        let cell = q.cell_in_grid_units(feat_h, feat_w).map(T::of_f64);
        let flat = |idx: [usize; 2]| offset + idx[0] * feat_w + idx[1];
        for (r, w) in q.ensemble(feat_h, feat_w) {
            let rel = r.rel.map(T::of_f64);
            self.rows.push(flat(r.index));
            self.basis_extra.extend([rel[0], rel[1], cell[0], cell[1]]);
            if !self.shared {
                self.exp_rows.push(flat(r.index));
                self.exp_extra.extend(rel);
            }
            self.area.push(T::of_f64(w));
        }
        if self.shared {
            let r = q.nearest(feat_h, feat_w);
            self.exp_rows.push(flat(r.index));
            self.exp_extra.extend(r.rel.map(T::of_f64));
        }
        self.queries += 1;
    }

    pub(crate) fn len(&self) -> usize {
        self.queries
    }
}

/// `z·W_z` for every feature location, per decoder network.
pub(crate) struct Projected {
    basis: Vec<Var>,
    expansion: Option<Var>,
}

fn first_layer<T: Float>(
    tape: &mut Tape<T>,
    p: &Bound,
    mlp: &Mlp,
    projected: Var,
    rows: &[usize],
    extra: Var,
    z_dim: usize,
) -> Result<Var> {
    let lin = &mlp.layers()[0];
    let gathered = tape.gather_rows(projected, rows)?;
    let w_rest = tape.slice_rows(p.var(lin.weight), z_dim, lin.fan_in)?;
    let e = tape.matmul(extra, w_rest)?;
    let s = tape.add(gathered, e)?;
    tape.add_bias(s, p.var(lin.bias))
}

fn project_one<T: Float>(tape: &mut Tape<T>, p: &Bound, mlp: &Mlp, u: Var, z_dim: usize) -> Result<Var> {
    let wz = tape.slice_rows(p.var(mlp.layers()[0].weight), 0, z_dim)?;
    tape.matmul(u, wz)
}

impl<T: Float> Model<T> {
    /// Encodes `image` and returns its unfolded features as a
    /// `(H·W) × 9D` matrix (one row per location, row-major).
    pub(crate) fn feature_rows(&self, tape: &mut Tape<T>, p: &Bound, image: &Image) -> Result<Var> {
        let x = tape.constant(crate::encoder::input_tensor(image));
        let fm = self.encoder.forward(tape, p, x)?;
        self.unfolded_rows(tape, fm)
    }

    /// `D×H×W` feature map variable to `(H·W) × 9D` unfolded rows.
    pub(crate) fn unfolded_rows(&self, tape: &mut Tape<T>, fm: Var) -> Result<Var> {
        let (c, h, w) = tape.value(fm).dims3("feature map")?;
        let u = tape.unfold3x3(fm)?;
        let u = tape.reshape(u, &[9 * c, h * w])?;
        tape.transpose(u)
    }

    pub(crate) fn project(&self, tape: &mut Tape<T>, p: &Bound, u: Var) -> Result<Projected> {
        let z_dim = self.config.unfolded_dim();
        let basis = self
            .basis
            .iter()
            .map(|mlp| project_one(tape, p, mlp, u, z_dim))
            .collect::<Result<Vec<_>>>()?;
        let expansion = match &self.expansion {
            Some(net) => Some(project_one(tape, p, net, u, z_dim)?),
            None => None,
        };
        Ok(Projected { basis, expansion })
    }

    /// Projected matrices as plain tensors, for reuse across tapes.
    pub(crate) fn project_values(&self, tape: &Tape<T>, proj: &Projected) -> (Vec<Tensor<T>>, Option<Tensor<T>>) {
        (
            proj.basis.iter().map(|&v| tape.value(v).clone()).collect(),
            proj.expansion.map(|v| tape.value(v).clone()),
        )
    }

    pub(crate) fn projected_constants(
        &self,
        tape: &mut Tape<T>,
        values: &(Vec<Tensor<T>>, Option<Tensor<T>>),
    ) -> Projected {
        Projected {
            basis: values.0.iter().map(|t| tape.constant(t.clone())).collect(),
            expansion: values.1.as_ref().map(|t| tape.constant(t.clone())),
        }
    }

    /// Unclamped RGB for every planned query, `queries × 3`.
    pub(crate) fn decode_plan(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        proj: &Projected,
        plan: &QueryPlan<T>,
    ) -> Result<Var> {
        let z_dim = self.config.unfolded_dim();
        let nrows = plan.rows.len();
        let extra = tape.constant(Tensor::new([nrows, 4], plan.basis_extra.clone())?);
        let mut preds = Vec::with_capacity(self.basis.len());
        for (mlp, &pz) in self.basis.iter().zip(&proj.basis) {
            let h = first_layer(tape, p, mlp, pz, &plan.rows, extra, z_dim)?;
            preds.push(mlp.forward_from_first(tape, p, h)?);
        }
        let pred = match (self.config.mode, &self.expansion, proj.expansion) {
            (Mode::Aliif, Some(net), Some(pz)) => {
                let e_extra = tape.constant(Tensor::new([plan.exp_rows.len(), 2], plan.exp_extra.clone())?);
                let h = first_layer(tape, p, net, pz, &plan.exp_rows, e_extra, z_dim)?;
                let logits = net.forward_from_first(tape, p, h)?;
                let mut omega = tape.softmax(logits)?;
                debug_assert!(
                    tape.value(omega)
                        .data()
                        .chunks_exact(self.config.k)
                        .all(super::decode::is_simplex),
                    "mixture weights left the simplex"
                );
                if plan.shared {
                    let expand: Vec<usize> = (0..plan.queries).flat_map(|q| [q; 4]).collect();
                    omega = tape.gather_rows(omega, &expand)?;
                }
                let mixed = tape.mix(omega, &preds)?;
                if self.config.literal_relu {
                    tape.relu(mixed)
                } else {
                    mixed
                }
            }
            _ => preds[0],
        };
        let area = tape.constant(Tensor::new([plan.queries, 4], plan.area.clone())?);
        let y = tape.group_weighted_sum(pred, area)?;
        let y = tape.scale(y, T::of_f64(OUTPUT_SCALE));
        let offset = tape.constant(Tensor::full([plan.queries, 3], T::of_f64(OUTPUT_OFFSET)));
        tape.add(y, offset)
    }

    /// Training forward pass: encodes each LR image, decodes its queries and
    /// returns all predictions stacked in item order (`Σ queries × 3`).
    pub fn forward_batch(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        items: &[(&Image, &[QueryPoint])],
    ) -> Result<Var> {
        let mut plan = QueryPlan::new(self.config.share_ensemble_weights);
        let mut parts = Vec::with_capacity(items.len());
        let mut offset = 0;
        for (image, queries) in items {
            parts.push(self.feature_rows(tape, p, image)?);
            let (h, w) = (image.height(), image.width());
            for q in queries.iter() {
                plan.push(q, h, w, offset);
            }
            offset += h * w;
        }
        let u = if parts.len() == 1 {
            parts[0]
        } else {
            tape.concat_rows(&parts)?
        };
        let proj = self.project(tape, p, u)?;
        self.decode_plan(tape, p, &proj, &plan)
    }
}
