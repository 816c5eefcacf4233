use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng as _;

use super::TrainConfig;
use crate::decoder::{axis_coord, QueryPoint};
use crate::error::{Error, Result};
use crate::image::{bicubic_resize, Image};
use crate::rng::{fnv1a64, Rng};

/// Redraws allowed before sampling gives up on a too-small dataset.
const MAX_REDRAWS: usize = 10_000;

/// HR training images with their source names.
#[derive(Clone, Debug)]
pub struct Dataset {
    images: Vec<Image>,
    names: Vec<String>,
}

impl Dataset {
    pub fn from_images(images: Vec<Image>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset("no images given".into()));
        }
        let names = (0..images.len()).map(|i| format!("image{i}")).collect();
        Ok(Dataset { images, names })
    }

    /// Every `*.png` in `dir` (not recursive), in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let paths = png_files(dir)?;
        if paths.is_empty() {
            return Err(Error::EmptyDataset(format!("no PNG files in {}", dir.display())));
        }
        let mut images = Vec::with_capacity(paths.len());
        let mut names = Vec::with_capacity(paths.len());
        for p in paths {
            images.push(Image::load_png(&p)?);
            names.push(p.file_name().unwrap_or_default().to_string_lossy().into_owned());
        }
        Ok(Dataset { images, names })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Sorted `*.png` paths directly inside `dir`.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// One training item: an LR patch and HR pixels sampled from its crop.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub source: usize,
    pub scale: f64,
    /// Side of the HR crop, `round(patch_size · scale)`.
    pub crop: usize,
    pub lr: Image,
    pub queries: Vec<QueryPoint>,
    pub targets: Vec<[f32; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub items: Vec<Sample>,
}

impl Batch {
    pub fn num_queries(&self) -> usize {
        self.items.iter().map(|s| s.queries.len()).sum()
    }

    /// FNV-1a over every pixel, coordinate and target, for equality checks.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::new();
        for s in &self.items {
            bytes.extend((s.source as u64).to_le_bytes());
            bytes.extend(s.scale.to_le_bytes());
            for v in s.lr.pixels() {
                bytes.extend(v.to_le_bytes());
            }
            for q in &s.queries {
                for v in q.coord.iter().chain(&q.cell) {
                    bytes.extend(v.to_le_bytes());
                }
            }
            for t in &s.targets {
                for v in t {
                    bytes.extend(v.to_le_bytes());
                }
            }
        }
        fnv1a64(&bytes)
    }
}

fn draw_scale(config: &TrainConfig, rng: &mut Rng) -> f64 {
    if config.integer_scales {
        let lo = config.scale_min.ceil() as u64;
        let hi = config.scale_max.floor() as u64;
        rng.gen_range(lo..=hi) as f64
    } else if config.scale_min == config.scale_max {
        config.scale_min
    } else {
        rng.gen_range(config.scale_min..=config.scale_max)
    }
}

fn crop_side(patch: usize, scale: f64) -> usize {
    (patch as f64 * scale).round() as usize
}

/// Draws one training item. Images too small for the drawn crop are
/// skipped by redrawing both the image and the scale.
pub fn sample_item(dataset: &Dataset, config: &TrainConfig, rng: &mut Rng) -> Result<Sample> {
    let smallest = crop_side(config.patch_size, config.scale_min);
    if !dataset
        .images
        .iter()
        .any(|im| im.height() >= smallest && im.width() >= smallest)
    {
        return Err(Error::EmptyDataset(format!(
            "no image is at least {smallest}×{smallest}, the smallest crop"
        )));
    }
    for _ in 0..MAX_REDRAWS {
        let source = rng.gen_range(0..dataset.len());
        let scale = draw_scale(config, rng);
        let crop = crop_side(config.patch_size, scale);
        let image = &dataset.images[source];
        if image.height() < crop || image.width() < crop {
            continue;
        }
        let top = rng.gen_range(0..=image.height() - crop);
        let left = rng.gen_range(0..=image.width() - crop);
        let hr = image.crop(top, left, crop, crop)?;
        let lr = bicubic_resize(&hr, config.patch_size, config.patch_size)?;

        let cell = 2.0 / crop as f64;
        let picks = sample(rng, crop * crop, config.pixels_per_patch.min(crop * crop));
        let mut queries = Vec::with_capacity(picks.len());
        let mut targets = Vec::with_capacity(picks.len());
        for flat in picks.iter() {
            let (y, x) = (flat / crop, flat % crop);
            queries.push(QueryPoint::new([axis_coord(y, crop), axis_coord(x, crop)], [cell, cell]));
            targets.push(hr.get(y, x));
        }
        return Ok(Sample {
            source,
            scale,
            crop,
            lr,
            queries,
            targets,
        });
    }
    Err(Error::EmptyDataset(format!(
        "no fitting crop found after {MAX_REDRAWS} draws"
    )))
}

/// `batch_size` items drawn in order from `rng`.
pub fn sample_batch(dataset: &Dataset, config: &TrainConfig, rng: &mut Rng) -> Result<Batch> {
    let items = (0..config.batch_size)
        .map(|_| sample_item(dataset, config, rng))
        .collect::<Result<_>>()?;
    Ok(Batch { items })
}
