use super::Image;
use crate::error::{ensure, Result};

/// Cubic convolution parameter (Keys, as used by MATLAB's `imresize`).
pub const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`; support `(-2, 2)`.
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps of one output sample along one axis.
struct Taps {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

/// Per-output-index taps for resampling `in_len` samples to `out_len`.
/// On downscale the kernel is stretched by `1/scale` (antialiasing); taps
/// outside the input are clamped to the nearest edge sample.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = out_len as f64 / in_len as f64;
    let (stretch, width) = if scale < 1.0 {
        (scale, 4.0 / scale)
    } else {
        (1.0, 4.0)
    };
    let count = width.ceil() as usize + 2;
    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let left = (center - width / 2.0).floor() as isize;
            let mut indices = Vec::with_capacity(count);
            let mut weights = Vec::with_capacity(count);
            for j in 0..count as isize {
                let src = left + j;
                let w = stretch * cubic_kernel(stretch * (center - src as f64));
                if w != 0.0 {
                    indices.push(src.clamp(0, in_len as isize - 1) as usize);
                    weights.push(w);
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            Taps { indices, weights }
        })
        .collect()
}

/// Separable bicubic resampling to `out_h × out_w`, output clamped to `[0, 1]`.
pub fn bicubic_resize(image: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    ensure!(
        out_h > 0 && out_w > 0,
        Contract,
        "bicubic_resize target must be positive, got {out_h}×{out_w}"
    );
    let (in_h, in_w) = (image.height(), image.width());
    let src = image.pixels();

    let cols = axis_taps(in_w, out_w);
    let mut horiz = vec![0.0f64; in_h * out_w * 3];
    for y in 0..in_h {
        for (x, taps) in cols.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            for (&sx, &w) in taps.indices.iter().zip(&taps.weights) {
                let p = (y * in_w + sx) * 3;
                for c in 0..3 {
                    acc[c] += w * src[p + c] as f64;
                }
            }
            horiz[(y * out_w + x) * 3..][..3].copy_from_slice(&acc);
        }
    }

    let rows = axis_taps(in_h, out_h);
    let mut out = Vec::with_capacity(out_h * out_w * 3);
    for taps in &rows {
        for x in 0..out_w {
            let mut acc = [0.0f64; 3];
            for (&sy, &w) in taps.indices.iter().zip(&taps.weights) {
                let p = (sy * out_w + x) * 3;
                for c in 0..3 {
                    acc[c] += w * horiz[p + c];
                }
            }
            out.extend(acc.map(|v| v.clamp(0.0, 1.0) as f32));
        }
    }
    Image::new(out_h, out_w, out)
}
