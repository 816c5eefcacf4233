use std::fmt;
use std::str::FromStr;

use crate::encoder::Encoder;
use crate::error::{ensure, Error, Result};
use crate::nn::Mlp;
use crate::params::ParamStore;
use crate::rng::stream;
use crate::tensor::Float;

/// Which implicit decoder a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One shared MLP for every query.
    Liif,
    /// Softmax-gated mixture of `K` basis MLPs.
    Aliif,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Liif => "liif",
            Mode::Aliif => "aliif",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "liif" => Ok(Mode::Liif),
            "aliif" | "a-liif" => Ok(Mode::Aliif),
            other => Err(Error::config("mode", format!("unknown mode `{other}` (liif|aliif)"))),
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub mode: Mode,
    /// Number of basis MLPs (forced to 1 in LIIF mode).
    pub k: usize,
    /// Feature channels `D`.
    pub feat_dim: usize,
    /// Residual blocks `B` in the encoder.
    pub blocks: usize,
    pub basis_hidden: usize,
    pub basis_layers: usize,
    pub expansion_hidden: usize,
    pub expansion_layers: usize,
    /// Apply a ReLU to the mixed RGB output.
    pub literal_relu: bool,
    /// Compute the mixture weights once per query from its nearest feature
    /// instead of once per ensemble neighbor.
    pub share_ensemble_weights: bool,
}

impl ModelConfig {
    /// Widths as published: `K = 10`, a 5×256 expansion network and 5×16
    /// basis networks.
    pub fn paper(mode: Mode) -> Self {
        ModelConfig {
            mode,
            k: if mode == Mode::Liif { 1 } else { 10 },
            feat_dim: 16,
            blocks: 4,
            basis_hidden: 16,
            basis_layers: 5,
            expansion_hidden: 256,
            expansion_layers: 5,
            literal_relu: false,
            share_ensemble_weights: false,
        }
    }

    /// Small preset for CPU-minutes training: `K = 4` and a 64-wide
    /// expansion network.
    pub fn desk(mode: Mode) -> Self {
        ModelConfig {
            k: if mode == Mode::Liif { 1 } else { 4 },
            expansion_hidden: 64,
            ..Self::paper(mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_cfg(self.k >= 1, "k", "K must be ≥ 1")?;
        ensure_cfg(
            self.mode == Mode::Aliif || self.k == 1,
            "k",
            "LIIF mode uses a single MLP; K must be 1",
        )?;
        ensure_cfg(self.feat_dim >= 1, "feat_dim", "must be ≥ 1")?;
        ensure_cfg(self.blocks >= 1, "blocks", "must be ≥ 1")?;
        ensure_cfg(self.basis_hidden >= 1, "basis_hidden", "must be ≥ 1")?;
        ensure_cfg(self.basis_layers >= 1, "basis_layers", "must be ≥ 1")?;
        ensure_cfg(self.expansion_hidden >= 1, "expansion_hidden", "must be ≥ 1")?;
        ensure_cfg(self.expansion_layers >= 1, "expansion_layers", "must be ≥ 1")?;
        Ok(())
    }

    /// Width of the unfolded feature vector `z`.
    pub fn unfolded_dim(&self) -> usize {
        9 * self.feat_dim
    }

    /// Decoder input width: `z`, `ξ` and cell.
    pub fn decoder_input_dim(&self) -> usize {
        self.unfolded_dim() + 4
    }

    /// Expansion network input width: `z` and `ξ`.
    pub fn expansion_input_dim(&self) -> usize {
        self.unfolded_dim() + 2
    }

    fn widths(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(hidden, layers - 1));
        w.push(output);
        w
    }

    pub fn basis_widths(&self) -> Vec<usize> {
        Self::widths(self.decoder_input_dim(), self.basis_hidden, self.basis_layers, 3)
    }

    pub fn expansion_widths(&self) -> Vec<usize> {
        Self::widths(
            self.expansion_input_dim(),
            self.expansion_hidden,
            self.expansion_layers,
            self.k,
        )
    }
}

fn ensure_cfg(cond: bool, key: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

/// Encoder, basis bank and (for A-LIIF) expansion network together with
/// their parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Float = f32> {
    pub(crate) config: ModelConfig,
    pub(crate) encoder: Encoder,
    pub(crate) basis: Vec<Mlp>,
    pub(crate) expansion: Option<Mlp>,
    pub(crate) params: ParamStore<T>,
}

impl<T: Float> Model<T> {
    /// Freshly initialized model. Each parameter group draws from its own
    /// seeded stream, so e.g. the encoder and basis nets of a `K = 1`
    /// A-LIIF model start identical to those of a LIIF model.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let encoder = Encoder::declare(
            &mut params,
            config.feat_dim,
            config.blocks,
            &mut stream(seed, "init/encoder"),
        );
        let widths = config.basis_widths();
        let basis = (0..config.k)
            .map(|k| {
                Mlp::declare(
                    &mut params,
                    &format!("basis{k}"),
                    &widths,
                    &mut stream(seed, &format!("init/basis{k}")),
                )
            })
            .collect();
        let expansion = (config.mode == Mode::Aliif).then(|| {
            Mlp::declare(
                &mut params,
                "expansion",
                &config.expansion_widths(),
                &mut stream(seed, "init/expansion"),
            )
        });
        Ok(Model {
            config,
            encoder,
            basis,
            expansion,
            params,
        })
    }

    /// Rebuilds a model around existing parameters, checking that every
    /// tensor has the shape the architecture declares.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        ensure!(
            params.len() == model.params.len(),
            Contract,
            "architecture declares {} parameter tensors, got {}",
            model.params.len(),
            params.len()
        );
        for (id, (name, t)) in model.params.ids().zip(params.iter()) {
            let want = model.params.get(id).shape();
            ensure!(
                want == t.shape(),
                Contract,
                "parameter `{name}` has shape {:?}, architecture declares {want:?}",
                t.shape()
            );
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn basis(&self) -> &[Mlp] {
        &self.basis
    }

    pub fn expansion(&self) -> Option<&Mlp> {
        self.expansion.as_ref()
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Float>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            basis: self.basis.clone(),
            expansion: self.expansion.clone(),
            params: self.params.cast(),
        }
    }
}
