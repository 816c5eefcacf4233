//! Evaluation protocol: bicubic LR synthesis per scale, reconstruction at
//! the original size, full-image RGB PSNR (and optionally SSIM) averaged
//! over the images of a directory.

use std::fmt::Write as _;
use std::path::Path;

use crate::decoder::Model;
use crate::error::{Error, Result};
use crate::image::{bicubic_resize, psnr, ssim, Image};
use crate::training::png_files;

/// A way of producing an `out_h × out_w` image from an LR input.
pub enum Method<'a> {
    Bicubic,
    Model { name: String, model: &'a Model },
}

impl Method<'_> {
    pub fn name(&self) -> &str {
        match self {
            Method::Bicubic => "bicubic",
            Method::Model { name, .. } => name,
        }
    }

    pub fn reconstruct(&self, lr: &Image, out_h: usize, out_w: usize) -> Result<Image> {
        match self {
            Method::Bicubic => bicubic_resize(lr, out_h, out_w),
            Method::Model { model, .. } => model.upscale(lr, out_h, out_w),
        }
    }
}

/// LR size for an `h × w` image at `scale`: each side divided and rounded,
/// at least one pixel.
pub fn lr_size(h: usize, w: usize, scale: f64) -> (usize, usize) {
    let side = |n: usize| ((n as f64 / scale).round() as usize).max(1);
    (side(h), side(w))
}

/// One `(method, scale)` cell of the report.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub scale: f64,
    /// Mean over scored images; `None` when none could be scored.
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub images: usize,
    pub failed: usize,
}

impl EvalRow {
    pub fn is_failed(&self) -> bool {
        self.psnr.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// `(image, reason)` for every image or reconstruction that failed.
    pub failures: Vec<(String, String)>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores `methods` on `images` (name, loaded image or load error) at
/// every scale. Rows come out method-major in the given orders.
pub fn evaluate(
    images: &[(String, Result<Image>)],
    methods: &[Method],
    scales: &[f64],
    with_ssim: bool,
) -> Result<EvalReport> {
    if let Some(&s) = scales.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Usage(format!("scale must be positive, got {s}")));
    }
    let mut report = EvalReport::default();
    for (name, im) in images {
        if let Err(e) = im {
            report.failures.push((name.clone(), e.to_string()));
        }
    }
    let lrs: Vec<Vec<Option<Image>>> = scales
        .iter()
        .map(|&s| {
            images
                .iter()
                .map(|(_, im)| {
                    let im = im.as_ref().ok()?;
                    let (h, w) = lr_size(im.height(), im.width(), s);
                    bicubic_resize(im, h, w).ok()
                })
                .collect()
        })
        .collect();
    for method in methods {
        for (si, &scale) in scales.iter().enumerate() {
            let (mut ps, mut ss, mut failed) = (Vec::new(), Vec::new(), 0);
            for ((name, hr), lr) in images.iter().zip(&lrs[si]) {
                let (Ok(hr), Some(lr)) = (hr, lr) else {
                    failed += 1;
                    continue;
                };
                let scored = method
                    .reconstruct(lr, hr.height(), hr.width())
                    .and_then(|sr| {
                        let p = psnr(&sr, hr)?;
                        let s = if with_ssim { Some(ssim(&sr, hr)?) } else { None };
                        Ok((p, s))
                    });
                match scored {
                    Ok((p, s)) => {
                        ps.push(p);
                        ss.extend(s);
                    }
                    Err(e) => {
                        failed += 1;
                        report
                            .failures
                            .push((name.clone(), format!("{} ×{scale}: {e}", method.name())));
                    }
                }
            }
            report.rows.push(EvalRow {
                method: method.name().to_string(),
                scale,
                psnr: mean(&ps),
                ssim: if with_ssim { mean(&ss) } else { None },
                images: ps.len(),
                failed,
            });
        }
    }
    Ok(report)
}

/// Loads every PNG of `dir`; unreadable files are kept as errors.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, Result<Image>)>> {
    let paths = png_files(dir)?;
    if paths.is_empty() {
        return Err(Error::EmptyDataset(format!("no PNG files in {}", dir.display())));
    }
    Ok(paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            (name, Image::load_png(&p))
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(EvalRow::is_failed)
    }

    pub fn get(&self, method: &str, scale: f64) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method && r.scale == scale)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "scale", "psnr", "ssim", "images", "failed", "status"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.scale.to_string(),
                fmt_opt(r.psnr),
                fmt_opt(r.ssim),
                r.images.to_string(),
                r.failed.to_string(),
                if r.is_failed() { "failed" } else { "ok" }.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Rows of a CSV written by [`EvalReport::write_csv`].
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<EvalRow>> {
        let mut r = csv::Reader::from_reader(input);
        let bad = |m: String| Error::Decode { path: "<csv>".into(), message: m };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
            let num = |s: &str| -> Result<f64> { s.parse().map_err(|e| bad(format!("`{s}`: {e}"))) };
            let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
            let int = |s: &str| -> Result<usize> { s.parse().map_err(|e| bad(format!("`{s}`: {e}"))) };
            rows.push(EvalRow {
                method: f(0)?.to_string(),
                scale: num(f(1)?)?,
                psnr: opt(f(2)?)?,
                ssim: opt(f(3)?)?,
                images: int(f(4)?)?,
                failed: int(f(5)?)?,
            });
        }
        Ok(rows)
    }

    /// Aligned text table grouped by scale, plus any failures.
    pub fn table(&self) -> String {
        let mut scales: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !scales.contains(&r.scale) {
                scales.push(r.scale);
            }
        }
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let name_w = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<name_w$}", "method");
        for s in &scales {
            let _ = write!(out, " {:>9}", format!("×{s}"));
        }
        out.push('\n');
        for m in &methods {
            let _ = write!(out, "{m:<name_w$}");
            for &s in &scales {
                let cell = match self.get(m, s) {
                    Some(EvalRow { psnr: Some(p), .. }) => format!("{p:.2}"),
                    _ => "failed".to_string(),
                };
                let _ = write!(out, " {cell:>9}");
            }
            out.push('\n');
        }
        for (name, why) in &self.failures {
            let _ = writeln!(out, "failed: {name}: {why}");
        }
        out
    }
}
