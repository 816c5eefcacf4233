//! Commands behind the `aliif` binary: training from a config file,
//! upscaling, evaluation and the K sweep.

pub mod checkpoint;
pub mod config;
pub mod eval;

use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::{parse_kv, parse_list, RunConfig, SEED_ENV};
pub use eval::{evaluate, load_dir, lr_size, EvalReport, EvalRow, Method};

use crate::decoder::{Mode, Model};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::training::{train, write_loss_csv, Dataset, TrainConfig};

/// Requested output size of an upscale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputSize {
    Scale(f64),
    Exact { height: usize, width: usize },
}

impl OutputSize {
    /// Output `(height, width)` for an `h × w` input: each side times the
    /// scale, rounded, at least one pixel.
    pub fn resolve(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match *self {
            OutputSize::Scale(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Usage(format!("scale must be a positive number, got {s}")));
                }
                let side = |n: usize| ((n as f64 * s).round() as usize).max(1);
                Ok((side(h), side(w)))
            }
            OutputSize::Exact { height, width } => {
                if height == 0 || width == 0 {
                    return Err(Error::Usage(format!("size must be positive, got {height}x{width}")));
                }
                Ok((height, width))
            }
        }
    }
}

impl FromStr for OutputSize {
    type Err = Error;

    /// `HxW`, e.g. `120x80`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("expected HxW, got `{s}`"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(OutputSize::Exact {
            height: h.trim().parse().map_err(|_| bad())?,
            width: w.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub loss_csv: PathBuf,
    pub checksum: u64,
    pub final_loss: f64,
}

/// Trains per `run` and writes checkpoint, manifest and loss log.
pub fn run_training(run: &RunConfig) -> Result<TrainSummary> {
    let dataset = Dataset::from_dir(&run.data_dir)?;
    let outcome = train(&dataset, &run.train)?;
    let bytes = checkpoint::to_bytes(&outcome.model);
    std::fs::write(&run.checkpoint, &bytes).map_err(|e| Error::io(&run.checkpoint, e))?;
    let manifest = checkpoint::write_manifest(&run.checkpoint, &run.train, &bytes)?;
    write_loss_csv(&run.loss_csv, &outcome.history)?;
    Ok(TrainSummary {
        checkpoint: run.checkpoint.clone(),
        manifest,
        loss_csv: run.loss_csv.clone(),
        checksum: u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes")),
        final_loss: outcome.history.last().map_or(f64::NAN, |r| r.loss),
    })
}

/// `train <cfg>`; `$ALIIF_SEED` overrides the configured seed.
pub fn cmd_train(config_file: impl AsRef<Path>) -> Result<TrainSummary> {
    let mut run = RunConfig::from_file(config_file)?;
    run.apply_env()?;
    run_training(&run)
}

/// `upscale <ckpt> <in> (--scale S | --size HxW) <out>`; returns the
/// output size.
pub fn cmd_upscale(
    checkpoint_file: impl AsRef<Path>,
    input: impl AsRef<Path>,
    size: OutputSize,
    output: impl AsRef<Path>,
) -> Result<(usize, usize)> {
    let image = Image::load_png(input)?;
    let (h, w) = size.resolve(image.height(), image.width())?;
    let model = checkpoint::load(checkpoint_file)?;
    let out = model.upscale(&image, h, w)?;
    out.save_png(output)?;
    Ok((h, w))
}

fn method_names(paths: &[PathBuf]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for p in paths {
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let mut name = stem.clone();
        let mut n = 2;
        while name == "bicubic" || names.contains(&name) {
            name = format!("{stem}-{n}");
            n += 1;
        }
        names.push(name);
    }
    names
}

/// `eval <ckpt...> <dir> --scales ...`: bicubic plus every checkpoint,
/// named by file stem.
pub fn cmd_eval(
    checkpoints: &[PathBuf],
    dataset_dir: impl AsRef<Path>,
    scales: &[f64],
    with_ssim: bool,
) -> Result<EvalReport> {
    let models = checkpoints.iter().map(checkpoint::load).collect::<Result<Vec<_>>>()?;
    let images = load_dir(dataset_dir.as_ref())?;
    let mut methods = vec![Method::Bicubic];
    for (name, model) in method_names(checkpoints).into_iter().zip(&models) {
        methods.push(Method::Model { name, model });
    }
    evaluate(&images, &methods, scales, with_ssim)
}

/// One `(K, scale)` result of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub k: usize,
    pub scale: f64,
    pub psnr: Option<f64>,
    pub error: Option<String>,
}

/// Trains one A-LIIF model per K under the same seed and budget and
/// scores each at `scales`. A failing K is reported and the sweep goes on.
pub fn ablate_k(
    base: &TrainConfig,
    ks: &[usize],
    dataset: &Dataset,
    eval_images: &[(String, Result<Image>)],
    scales: &[f64],
) -> Vec<AblationRow> {
    let mut rows = Vec::new();
    for &k in ks {
        let mut config = base.clone();
        config.model.mode = Mode::Aliif;
        config.model.k = k;
        let scored = train(dataset, &config).and_then(|out| score(&out.model, eval_images, scales));
        match scored {
            Ok(report) => rows.extend(report.rows.iter().map(|r| AblationRow {
                k,
                scale: r.scale,
                psnr: r.psnr,
                error: r.is_failed().then(|| "no image could be scored".to_string()),
            })),
            Err(e) => rows.extend(scales.iter().map(|&scale| AblationRow {
                k,
                scale,
                psnr: None,
                error: Some(e.to_string()),
            })),
        }
    }
    rows
}

/// Mean PSNR of `model` on `images` at each scale.
pub fn score(model: &Model, images: &[(String, Result<Image>)], scales: &[f64]) -> Result<EvalReport> {
    let methods = [Method::Model {
        name: model.mode().to_string(),
        model,
    }];
    evaluate(images, &methods, scales, false)
}

/// `ablate-k <cfg> --k-list ...`: the sweep on the config's data, scored
/// on `eval_dir` (the training directory if unset).
pub fn cmd_ablate_k(config_file: impl AsRef<Path>, ks: &[usize]) -> Result<Vec<AblationRow>> {
    let mut run = RunConfig::from_file(config_file)?;
    run.apply_env()?;
    if ks.is_empty() {
        return Err(Error::Usage("empty K list".into()));
    }
    let dataset = Dataset::from_dir(&run.data_dir)?;
    let eval_images = load_dir(run.eval_dir.as_ref().unwrap_or(&run.data_dir))?;
    Ok(ablate_k(&run.train, ks, &dataset, &eval_images, &run.eval_scales))
}

pub fn write_ablation_csv<W: std::io::Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "scale", "psnr", "status", "message"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.scale.to_string(),
            r.psnr.map(|p| p.to_string()).unwrap_or_default(),
            if r.error.is_some() { "failed" } else { "ok" }.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_arithmetic() {
        assert_eq!(OutputSize::Scale(2.5).resolve(10, 10).unwrap(), (25, 25));
        assert_eq!(OutputSize::Scale(1.0).resolve(7, 3).unwrap(), (7, 3));
        assert_eq!(OutputSize::Scale(0.01).resolve(7, 3).unwrap(), (1, 1));
        assert!(matches!(OutputSize::Scale(0.0).resolve(7, 3), Err(Error::Usage(_))));
        assert!(matches!(OutputSize::Scale(-2.0).resolve(7, 3), Err(Error::Usage(_))));
        assert!(OutputSize::Scale(f64::NAN).resolve(7, 3).is_err());
    }

    #[test]
    fn size_parsing() {
        assert_eq!(
            "120x80".parse::<OutputSize>().unwrap(),
            OutputSize::Exact { height: 120, width: 80 }
        );
        assert!("120".parse::<OutputSize>().is_err());
        assert!("0x5".parse::<OutputSize>().unwrap().resolve(1, 1).is_err());
    }

    #[test]
    fn method_names_are_unique() {
        let names = method_names(&["a/m.alif".into(), "b/m.alif".into(), "bicubic.alif".into()]);
        assert_eq!(names, ["m", "m-2", "bicubic-2"]);
    }
}
