use super::Image;
use crate::error::{ensure, Result};

/// Side of the uniform SSIM window.
pub const SSIM_WINDOW: usize = 8;

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn same_dims(a: &Image, b: &Image, what: &str) -> Result<()> {
    ensure!(
        a.height() == b.height() && a.width() == b.width(),
        Contract,
        "{what}: image sizes differ ({}×{} vs {}×{})",
        a.height(),
        a.width(),
        b.height(),
        b.width()
    );
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all RGB values, peak 1.0.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b, "psnr")?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sum / a.pixels().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// Summed-area table of one channel (and optionally a product of two),
/// `(h+1)×(w+1)` with a zero first row/column.
fn integral(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let stride = w + 1;
    let mut sat = vec![0.0; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += f(y, x);
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    sat
}

fn window_sum(sat: &[f64], stride: usize, y: usize, x: usize, n: usize) -> f64 {
    sat[(y + n) * stride + x + n] - sat[y * stride + x + n] - sat[(y + n) * stride + x]
        + sat[y * stride + x]
}

/// Single-scale SSIM with an 8×8 uniform window slid at stride 1; the mean
/// over windows is taken per channel and then averaged over RGB.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b, "ssim")?;
    let (h, w) = (a.height(), a.width());
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        Contract,
        "ssim needs images of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {h}×{w}"
    );
    let n = SSIM_WINDOW;
    let area = (n * n) as f64;
    let stride = w + 1;
    let (pa, pb) = (a.pixels(), b.pixels());
    let mut total = 0.0;
    for c in 0..3 {
        let va = |y: usize, x: usize| pa[(y * w + x) * 3 + c] as f64;
        let vb = |y: usize, x: usize| pb[(y * w + x) * 3 + c] as f64;
        let sa = integral(h, w, va);
        let sb = integral(h, w, vb);
        let saa = integral(h, w, |y, x| va(y, x) * va(y, x));
        let sbb = integral(h, w, |y, x| vb(y, x) * vb(y, x));
        let sab = integral(h, w, |y, x| va(y, x) * vb(y, x));
        let mut channel = 0.0;
        let mut windows = 0usize;
        for y in 0..=h - n {
            for x in 0..=w - n {
                let mu_a = window_sum(&sa, stride, y, x, n) / area;
                let mu_b = window_sum(&sb, stride, y, x, n) / area;
                let var_a = (window_sum(&saa, stride, y, x, n) / area - mu_a * mu_a).max(0.0);
                let var_b = (window_sum(&sbb, stride, y, x, n) / area - mu_b * mu_b).max(0.0);
                let cov = window_sum(&sab, stride, y, x, n) / area - mu_a * mu_b;
                channel += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                    / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
                windows += 1;
            }
        }
        total += channel / windows as f64;
    }
    Ok(total / 3.0)
}
