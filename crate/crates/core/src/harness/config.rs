//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::decoder::Mode;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "ALIIF_SEED";

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// skipped. Repeated keys are an error.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {}: expected `key = value`", n + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::config("", format!("line {}: empty key", n + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::config(key, format!("line {}: repeated key", n + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Everything `train` and `ablate-k` need from a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    /// Held-out images for `ablate-k`; the training directory if unset.
    pub eval_dir: Option<PathBuf>,
    pub eval_scales: Vec<f64>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

/// Comma-separated positive numbers.
pub fn parse_list<T: FromStr + PartialOrd + Default>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = value
        .split(',')
        .map(|s| parse::<T>(key, s.trim()))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() || items.iter().any(|v| *v <= T::default()) {
        return Err(Error::config(key, format!("expected positive values, got `{value}`")));
    }
    Ok(items)
}

fn preset(name: &str, mode: Mode) -> Result<TrainConfig> {
    match name {
        "desk" => Ok(TrainConfig::desk(mode)),
        "paper" => Ok(TrainConfig::paper(mode)),
        "toy" => Ok(TrainConfig::toy(mode)),
        other => Err(Error::config("preset", format!("unknown preset `{other}` (desk|paper|toy)"))),
    }
}

impl RunConfig {
    /// Builds a config from parsed pairs. `preset` and `mode` are applied
    /// first; relative paths are resolved against `base`.
    pub fn from_pairs(pairs: &[(String, String)], base: &Path) -> Result<Self> {
        let map: BTreeMap<&str, &str> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let mode = map.get("mode").map(|v| v.parse()).transpose()?.unwrap_or(Mode::Aliif);
        let mut train = preset(map.get("preset").copied().unwrap_or("desk"), mode)?;
        let path = |v: &str| base.join(v);
        let mut data_dir = None;
        let mut checkpoint = None;
        let mut loss_csv = None;
        let mut eval_dir = None;
        let mut eval_scales = vec![2.0];
        for (key, value) in pairs {
            let (key, value) = (key.as_str(), value.as_str());
            let m = &mut train.model;
            match key {
                "preset" | "mode" => {}
                "k" => m.k = parse(key, value)?,
                "feat_dim" => m.feat_dim = parse(key, value)?,
                "blocks" => m.blocks = parse(key, value)?,
                "basis_hidden" => m.basis_hidden = parse(key, value)?,
                "basis_layers" => m.basis_layers = parse(key, value)?,
                "expansion_hidden" => m.expansion_hidden = parse(key, value)?,
                "expansion_layers" => m.expansion_layers = parse(key, value)?,
                "literal_relu" => m.literal_relu = parse_bool(key, value)?,
                "share_ensemble_weights" => m.share_ensemble_weights = parse_bool(key, value)?,
                "patch_size" => train.patch_size = parse(key, value)?,
                "pixels_per_patch" => train.pixels_per_patch = parse(key, value)?,
                "scale_min" => train.scale_min = parse(key, value)?,
                "scale_max" => train.scale_max = parse(key, value)?,
                "integer_scales" => train.integer_scales = parse_bool(key, value)?,
                "lr" => train.lr = parse(key, value)?,
                "lr_decay_every" => train.lr_decay_every = parse(key, value)?,
                "lr_decay_factor" => train.lr_decay_factor = parse(key, value)?,
                "epochs" => train.epochs = parse(key, value)?,
                "iters_per_epoch" => train.iters_per_epoch = parse(key, value)?,
                "batch_size" => train.batch_size = parse(key, value)?,
                "seed" => train.seed = parse(key, value)?,
                "data_dir" => data_dir = Some(path(value)),
                "checkpoint" => checkpoint = Some(path(value)),
                "loss_csv" => loss_csv = Some(path(value)),
                "eval_dir" => eval_dir = Some(path(value)),
                "eval_scales" => eval_scales = parse_list(key, value)?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        let data_dir = data_dir.ok_or_else(|| Error::config("data_dir", "required"))?;
        let checkpoint = checkpoint.unwrap_or_else(|| base.join("model.alif"));
        let loss_csv = loss_csv.unwrap_or_else(|| checkpoint.with_extension("loss.csv"));
        train.validate()?;
        Ok(RunConfig {
            train,
            data_dir,
            checkpoint,
            loss_csv,
            eval_dir,
            eval_scales,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        Self::from_pairs(&parse_kv(text)?, base)
    }

    /// Reads a config file; paths in it are relative to its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Replaces the seed with `$ALIIF_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }
}

/// The training configuration as `key = value` lines, in a fixed order.
pub fn train_config_kv(c: &TrainConfig) -> Vec<(&'static str, String)> {
    let m = &c.model;
    vec![
        ("mode", m.mode.to_string()),
        ("k", m.k.to_string()),
        ("feat_dim", m.feat_dim.to_string()),
        ("blocks", m.blocks.to_string()),
        ("basis_hidden", m.basis_hidden.to_string()),
        ("basis_layers", m.basis_layers.to_string()),
        ("expansion_hidden", m.expansion_hidden.to_string()),
        ("expansion_layers", m.expansion_layers.to_string()),
        ("literal_relu", m.literal_relu.to_string()),
        ("share_ensemble_weights", m.share_ensemble_weights.to_string()),
        ("patch_size", c.patch_size.to_string()),
        ("pixels_per_patch", c.pixels_per_patch.to_string()),
        ("scale_min", c.scale_min.to_string()),
        ("scale_max", c.scale_max.to_string()),
        ("integer_scales", c.integer_scales.to_string()),
        ("lr", c.lr.to_string()),
        ("lr_decay_every", c.lr_decay_every.to_string()),
        ("lr_decay_factor", c.lr_decay_factor.to_string()),
        ("epochs", c.epochs.to_string()),
        ("iters_per_epoch", c.iters_per_epoch.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("seed", c.seed.to_string()),
    ]
}

pub fn format_kv<K: AsRef<str>>(pairs: &[(K, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{} = {v}\n", k.as_ref()))
        .collect()
}
