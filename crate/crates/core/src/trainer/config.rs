//! Run configuration and its flat `key = value` file form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::networks::{Activation, NetworkSpec, RepresentationKind};

/// Every trainer hyperparameter.
///
/// `lambda`/`mu` default to 1e-6. The entropy term is a per-pixel mean while
/// the reconstruction terms are Frobenius sums, so `lambda` is relative to a
/// pixel-count-scaled reconstruction error.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub mu: f64,
    pub hsi_iters: usize,
    pub msi_iters: usize,
    /// Every `angle_period`-th MSI step minimizes the angle objective.
    pub angle_period: usize,
    /// Disables the angle steps; those iterations minimize reconstruction.
    pub angle_steps: bool,
    pub learning_rate: f64,
    pub seed: u64,
    pub log_every: usize,
    /// Stop a phase once the objective improved by less than this over
    /// `early_stop_window` steps.
    pub early_stop_tol: Option<f64>,
    pub early_stop_window: usize,
    pub c: usize,
    pub hsi_layers: Vec<usize>,
    pub msi_layers: Vec<usize>,
    pub decoder_layers: Vec<usize>,
    pub hidden_activation: Activation,
    pub representation: RepresentationKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            mu: 1e-6,
            hsi_iters: 10_000,
            msi_iters: 10_000,
            angle_period: 10,
            angle_steps: true,
            learning_rate: 1e-3,
            seed: 0,
            log_every: 10,
            early_stop_tol: None,
            early_stop_window: 500,
            c: 10,
            hsi_layers: vec![10, 10, 10],
            msi_layers: vec![4, 5, 7, 9, 10],
            decoder_layers: vec![10, 10],
            hidden_activation: Activation::Sigmoid,
            representation: RepresentationKind::StickBreaking,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            mu: self.mu,
        }
    }

    pub fn network_spec(&self, hsi_bands: usize, msi_bands: usize) -> NetworkSpec {
        let mut spec = NetworkSpec::new(hsi_bands, msi_bands);
        for enc in [&mut spec.hsi, &mut spec.msi] {
            enc.c = self.c;
            enc.hidden_activation = self.hidden_activation;
            enc.representation = self.representation;
        }
        spec.hsi.layer_widths = self.hsi_layers.clone();
        spec.msi.layer_widths = self.msi_layers.clone();
        spec.decoder.layer_widths = self.decoder_layers.clone();
        spec
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "lambda" => self.lambda = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "hsi_iters" => self.hsi_iters = parse(key, value)?,
            "msi_iters" => self.msi_iters = parse(key, value)?,
            "angle_period" => self.angle_period = parse(key, value)?,
            "angle_steps" => self.angle_steps = parse(key, value)?,
            "optimizer" => {
                if value != "adam" {
                    return Err(Error::Config(format!("unsupported optimizer {value:?}")));
                }
            }
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "log_every" => self.log_every = parse(key, value)?,
            "early_stop_tol" => {
                self.early_stop_tol = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "early_stop_window" => self.early_stop_window = parse(key, value)?,
            "c" => self.c = parse(key, value)?,
            "hsi_layers" => self.hsi_layers = parse_list(key, value)?,
            "msi_layers" => self.msi_layers = parse_list(key, value)?,
            "decoder_layers" => self.decoder_layers = parse_list(key, value)?,
            "hidden_activation" => self.hidden_activation = value.parse()?,
            "representation" => self.representation = value.parse()?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", n + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        LossWeights::new(self.lambda, self.mu)?;
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.hsi_iters == 0 || self.msi_iters == 0 {
            return fail("iteration counts must be positive");
        }
        if self.angle_period == 0 {
            return fail("angle_period must be at least 1");
        }
        if self.log_every == 0 {
            return fail("log_every must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.early_stop_window == 0 {
            return fail("early_stop_window must be positive");
        }
        if self.c < 2 {
            return fail("c must be at least 2");
        }
        if self.hsi_layers.is_empty() || self.msi_layers.is_empty() {
            return fail("encoders need at least one hidden layer");
        }
        Ok(())
    }

    /// Canonical `key = value` listing of every resolved setting.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("lambda", format!("{:e}", self.lambda));
        put("mu", format!("{:e}", self.mu));
        put("hsi_iters", self.hsi_iters.to_string());
        put("msi_iters", self.msi_iters.to_string());
        put("angle_period", self.angle_period.to_string());
        put("angle_steps", self.angle_steps.to_string());
        put("optimizer", "adam".into());
        put("learning_rate", format!("{:e}", self.learning_rate));
        put("seed", self.seed.to_string());
        put("log_every", self.log_every.to_string());
        put(
            "early_stop_tol",
            self.early_stop_tol
                .map_or_else(|| "none".into(), |t| format!("{t:e}")),
        );
        put("early_stop_window", self.early_stop_window.to_string());
        put("c", self.c.to_string());
        put("hsi_layers", list(&self.hsi_layers));
        put("msi_layers", list(&self.msi_layers));
        put("decoder_layers", list(&self.decoder_layers));
        put("hidden_activation", self.hidden_activation.to_string());
        put("representation", self.representation.to_string());
        s
    }
}
