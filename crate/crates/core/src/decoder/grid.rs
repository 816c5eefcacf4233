//! Continuous coordinates and the feature-grid geometry of a query.
//!
//! Coordinates are normalized to `[-1, 1]` per axis with pixel centers at
//! `-1 + (2i + 1) / n`; they are ordered `[row, column]`.

use crate::error::{ensure, Result};

/// Shift applied before nearest-feature lookup so that a query lying
/// exactly on a cell border resolves to one side deterministically.
pub const BORDER_EPS: f64 = 1e-6;

/// Added to every ensemble area so that the normalizer is never zero.
const AREA_EPS: f64 = 1e-9;

/// Center of pixel `i` among `n` along one axis.
pub fn axis_coord(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}

/// A continuous target location and the size of the pixel it stands for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryPoint {
    /// Target coordinate `x`, `[row, column]`.
    pub coord: [f64; 2],
    /// Query pixel size in normalized units.
    pub cell: [f64; 2],
}

/// The feature location a query is decoded against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    /// Grid index `[row, column]` of the feature vector.
    pub index: [usize; 2],
    /// Coordinate `x_r` of that feature's center.
    pub coord: [f64; 2],
    /// Offset `ξ = (x − x_r) / spacing`, spacing being the feature grid
    /// pitch `2 / n` on each axis.
    pub rel: [f64; 2],
}

/// The four diagonal neighbors of the local ensemble, as `[row, column]`
/// half-pixel shifts.
pub const ENSEMBLE_SHIFTS: [[f64; 2]; 4] = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];

impl QueryPoint {
    pub fn new(coord: [f64; 2], cell: [f64; 2]) -> Self {
        QueryPoint { coord, cell }
    }

    /// The feature reached from this query after shifting by `shift`
    /// half-pitches on a `feat_h × feat_w` grid.
    pub fn reference(&self, feat_h: usize, feat_w: usize, shift: [f64; 2]) -> Reference {
        let dims = [feat_h, feat_w];
        let mut index = [0; 2];
        let mut coord = [0.0; 2];
        let mut rel = [0.0; 2];
        for axis in 0..2 {
            let n = dims[axis];
            let eps = if shift[axis] == 0.0 { 0.0 } else { BORDER_EPS };
            let probe = (self.coord[axis] + shift[axis] / n as f64 + eps)
                .clamp(-1.0 + BORDER_EPS, 1.0 - BORDER_EPS);
            let i = (((probe + 1.0) * n as f64 / 2.0).floor() as usize).min(n - 1);
            index[axis] = i;
            coord[axis] = axis_coord(i, n);
            rel[axis] = (self.coord[axis] - coord[axis]) * n as f64 / 2.0;
        }
        Reference { index, coord, rel }
    }

    /// The feature whose cell contains the query.
    pub fn nearest(&self, feat_h: usize, feat_w: usize) -> Reference {
        self.reference(feat_h, feat_w, [0.0, 0.0])
    }

    /// The four ensemble neighbors with their blending weights. The weight
    /// of a neighbor is the area of the rectangle spanned by the query and
    /// the diagonally opposite neighbor, normalized to sum to one.
    pub fn ensemble(&self, feat_h: usize, feat_w: usize) -> [(Reference, f64); 4] {
        let refs = ENSEMBLE_SHIFTS.map(|s| self.reference(feat_h, feat_w, s));
        let areas = refs.map(|r| (r.rel[0] * r.rel[1]).abs() + AREA_EPS);
        let total: f64 = areas.iter().sum();
        [0, 1, 2, 3].map(|j| (refs[j], areas[3 - j] / total))
    }

    /// The cell size measured in feature-grid pitches.
    pub fn cell_in_grid_units(&self, feat_h: usize, feat_w: usize) -> [f64; 2] {
        [self.cell[0] * feat_h as f64 / 2.0, self.cell[1] * feat_w as f64 / 2.0]
    }
}

/// Pixel-center queries of a full `out_h × out_w` output grid, row-major.
pub fn make_query_grid(out_h: usize, out_w: usize) -> Result<Vec<QueryPoint>> {
    ensure!(
        out_h > 0 && out_w > 0,
        Contract,
        "query grid size must be positive, got {out_h}×{out_w}"
    );
    let cell = [2.0 / out_h as f64, 2.0 / out_w as f64];
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        for x in 0..out_w {
            out.push(QueryPoint::new([axis_coord(y, out_h), axis_coord(x, out_w)], cell));
        }
    }
    Ok(out)
}
