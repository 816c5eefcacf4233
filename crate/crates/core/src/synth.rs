//! Seeded synthetic textures built from linear gradients, checkerboards
//! and Gaussian blobs.

use rand::Rng as _;

use crate::error::Result;
use crate::image::Image;
use crate::rng::{stream, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Texture {
    Gradient,
    Checkerboard,
    Blobs,
}

fn color(rng: &mut Rng) -> [f32; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn lerp(a: [f32; 3], b: [f32; 3], t: f32) -> [f32; 3] {
    [0, 1, 2].map(|c| a[c] + (b[c] - a[c]) * t)
}

/// One `height × width` texture of the given kind.
pub fn texture(kind: Texture, height: usize, width: usize, rng: &mut Rng) -> Result<Image> {
    match kind {
        Texture::Gradient => {
            let (a, b) = (color(rng), color(rng));
            let angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
            let (dy, dx) = angle.sin_cos();
            let span = (height as f32 * dy.abs() + width as f32 * dx.abs()).max(1.0);
            Image::from_fn(height, width, |y, x| {
                let t = ((y as f32 - height as f32 / 2.0) * dy + (x as f32 - width as f32 / 2.0) * dx) / span + 0.5;
                lerp(a, b, t.clamp(0.0, 1.0))
            })
        }
        Texture::Checkerboard => {
            let (a, b) = (color(rng), color(rng));
            let period = rng.gen_range(3..=9);
            let (oy, ox) = (rng.gen_range(0..period), rng.gen_range(0..period));
            Image::from_fn(height, width, |y, x| {
                if ((y + oy) / period + (x + ox) / period) % 2 == 0 {
                    a
                } else {
                    b
                }
            })
        }
        Texture::Blobs => {
            let background = color(rng);
            let blobs: Vec<_> = (0..rng.gen_range(2..=5))
                .map(|_| {
                    let cy = rng.gen_range(0.0..height as f32);
                    let cx = rng.gen_range(0.0..width as f32);
                    let sigma = rng.gen_range(2.0..(height.min(width) as f32 / 3.0).max(2.5));
                    (cy, cx, sigma, color(rng))
                })
                .collect();
            Image::from_fn(height, width, |y, x| {
                let mut px = background;
                for &(cy, cx, sigma, c) in &blobs {
                    let d2 = (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2);
                    px = lerp(px, c, (-d2 / (2.0 * sigma * sigma)).exp());
                }
                px
            })
        }
    }
}

/// Layers `top` over `base` wherever `mask(y, x)` holds.
fn overlay(base: &Image, top: &Image, mask: impl Fn(usize, usize) -> bool) -> Result<Image> {
    Image::from_fn(base.height(), base.width(), |y, x| {
        if mask(y, x) {
            top.get(y, x)
        } else {
            base.get(y, x)
        }
    })
}

/// One composite texture: a gradient background, a checkerboard
/// rectangle covering a quarter to a half of each side, then blobs
/// alpha-blended on top.
pub fn composite(height: usize, width: usize, rng: &mut Rng) -> Result<Image> {
    let background = texture(Texture::Gradient, height, width, rng)?;
    let checker = texture(Texture::Checkerboard, height, width, rng)?;
    let rh = rng.gen_range(height / 4..=height / 2);
    let rw = rng.gen_range(width / 4..=width / 2);
    let (top, left) = (rng.gen_range(0..=height - rh), rng.gen_range(0..=width - rw));
    let base = overlay(&background, &checker, |y, x| {
        (top..top + rh).contains(&y) && (left..left + rw).contains(&x)
    })?;
    let blobs = texture(Texture::Blobs, height, width, rng)?;
    let pixels = base
        .pixels()
        .iter()
        .zip(blobs.pixels())
        .map(|(a, b)| 0.6 * a + 0.4 * b)
        .collect();
    Image::new(height, width, pixels)
}

/// `count` composite textures with sides drawn from `[min_side, max_side]`.
pub fn toy_set(count: usize, min_side: usize, max_side: usize, seed: u64) -> Result<Vec<Image>> {
    let mut rng = stream(seed, "synth");
    (0..count)
        .map(|_| {
            let h = rng.gen_range(min_side..=max_side);
            let w = rng.gen_range(min_side..=max_side);
            composite(h, w, &mut rng)
        })
        .collect()
}
