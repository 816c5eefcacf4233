//! RGB images in `[0, 1]`, 8-bit PNG I/O, bicubic resampling and quality
//! metrics.

mod metrics;
mod resize;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::tensor::{Float, Tensor};

pub use metrics::{psnr, ssim, SSIM_WINDOW};
pub use resize::{bicubic_resize, cubic_kernel, CUBIC_A};

/// Interleaved RGB image, row-major, every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    /// Builds an image from interleaved RGB values, clamping them into `[0, 1]`.
    pub fn new(height: usize, width: usize, mut pixels: Vec<f32>) -> Result<Self> {
        ensure!(
            height > 0 && width > 0,
            Contract,
            "image dimensions must be positive, got {height}×{width}"
        );
        ensure!(
            pixels.len() == height * width * 3,
            Dimension,
            "{height}×{width} RGB image needs {} values, got {}",
            height * width * 3,
            pixels.len()
        );
        for v in &mut pixels {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let pixels = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, pixels)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend(f(y, x));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        ensure!(
            height > 0 && width > 0 && top + height <= self.height && left + width <= self.width,
            Contract,
            "crop {height}×{width} at ({top}, {left}) exceeds {}×{} image",
            self.height,
            self.width
        );
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in top..top + height {
            let row = (y * self.width + left) * 3;
            pixels.extend_from_slice(&self.pixels[row..row + width * 3]);
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    /// Planar `3×H×W` tensor.
    pub fn to_tensor<T: Float>(&self) -> Tensor<T> {
        let hw = self.height * self.width;
        let mut data = vec![T::zero(); 3 * hw];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * hw + i] = T::of_f64(px[c] as f64);
            }
        }
        Tensor::new([3, self.height, self.width], data).expect("image has positive size")
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decode_err = |message: String| Error::Decode {
            path: path.to_path_buf(),
            message,
        };
        let mut decoder = png::Decoder::new(BufReader::new(file));
        // palette and low-bit-depth grayscale are widened to 8 bits
        decoder.set_transformations(png::Transformations::EXPAND);
        let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| decode_err(e.to_string()))?;
        if info.bit_depth != png::BitDepth::Eight {
            return Err(decode_err(format!(
                "unsupported bit depth {:?}",
                info.bit_depth
            )));
        }
        let (h, w) = (info.height as usize, info.width as usize);
        let bytes = &buf[..info.buffer_size()];
        let stride = info.line_size;
        let mut pixels = Vec::with_capacity(h * w * 3);
        for row in bytes.chunks_exact(stride).take(h) {
            for x in 0..w {
                let rgb = match info.color_type {
                    png::ColorType::Rgb => [row[3 * x], row[3 * x + 1], row[3 * x + 2]],
                    png::ColorType::Rgba => [row[4 * x], row[4 * x + 1], row[4 * x + 2]],
                    png::ColorType::Grayscale => [row[x]; 3],
                    png::ColorType::GrayscaleAlpha => [row[2 * x]; 3],
                    png::ColorType::Indexed => {
                        return Err(decode_err("indexed color was not expanded".into()))
                    }
                };
                pixels.extend(rgb.map(|v| v as f32 / 255.0));
            }
        }
        Image::new(h, w, pixels)
    }

    /// Writes an 8-bit RGB PNG, rounding each value to the nearest level.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let encode_err = |e: png::EncodingError| match e {
            png::EncodingError::IoError(io) => Error::io(path, io),
            other => Error::Decode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        };
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer
            .write_image_data(&self.to_u8())
            .map_err(encode_err)?;
        writer.finish().map_err(encode_err)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}
