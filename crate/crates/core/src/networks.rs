//! The two coupled Dirichlet-nets.
//!
//! Each encoder is densely connected: hidden layer `k` receives
//! `Σ_{j<k} x_j W_{j→k} + b_k`, where `x_0` is the raw input, and the last
//! hidden layer feeds the stick-breaking head. The decoder is linear and
//! bias-free, so its weight product is the spectral basis `Φ_h` (`c × L`).
//! The MSI network reuses that basis through the sensor response,
//! `Ŷ_m = S_m Φ_h R`, and never trains it.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{ParamId, ParamStore, Tape, Value};
use crate::error::{Error, Result};
use crate::stickbreak::{representation_head, HeadParams, StickParams};

pub const HSI_PREFIX: &str = "he.";
pub const MSI_PREFIX: &str = "me.";
pub const DECODER_PREFIX: &str = "hd.";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Softplus,
    Identity,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Self::Sigmoid),
            "softplus" => Ok(Self::Softplus),
            "identity" | "linear" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sigmoid => "sigmoid",
            Self::Softplus => "softplus",
            Self::Identity => "identity",
        })
    }
}

fn activate(tape: &mut Tape, x: Value, act: Activation) -> Value {
    match act {
        Activation::Sigmoid => tape.sigmoid(x),
        Activation::Softplus => tape.softplus(x),
        Activation::Identity => x,
    }
}

/// How the bottleneck is produced from the last hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepresentationKind {
    /// Sigmoid/softplus heads, Kumaraswamy inverse, stick breaking.
    StickBreaking,
    /// Unconstrained affine bottleneck (plain autoencoder).
    Linear,
}

impl FromStr for RepresentationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stick_breaking" | "dirichlet" => Ok(Self::StickBreaking),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown representation {other:?}"))),
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StickBreaking => "stick_breaking",
            Self::Linear => "linear",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    /// Representation width.
    pub c: usize,
    pub hidden_activation: Activation,
    pub representation: RepresentationKind,
}

impl EncoderSpec {
    /// Three hidden layers of 10.
    pub fn hsi(bands: usize) -> Self {
        Self {
            input_width: bands,
            layer_widths: vec![10, 10, 10],
            c: 10,
            hidden_activation: Activation::Sigmoid,
            representation: RepresentationKind::StickBreaking,
        }
    }

    /// Five hidden layers growing from 4 to 10.
    pub fn msi(bands: usize) -> Self {
        Self {
            input_width: bands,
            layer_widths: vec![4, 5, 7, 9, 10],
            ..Self::hsi(bands)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.layer_widths.is_empty() || self.c < 2 {
            return Err(Error::Config(format!(
                "encoder needs an input, at least one hidden layer and c >= 2: {self:?}"
            )));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config("encoder layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderSpec {
    /// Hidden widths between the representation and the output.
    pub layer_widths: Vec<usize>,
    pub output_width: usize,
}

impl DecoderSpec {
    pub fn hsi(bands: usize) -> Self {
        Self {
            layer_widths: vec![10, 10],
            output_width: bands,
        }
    }
}

#[derive(Clone, Debug)]
struct DenseLayer {
    /// One weight per source layer, source 0 being the input.
    from: Vec<ParamId>,
    bias: ParamId,
}

#[derive(Clone, Debug)]
enum Head {
    Stick(HeadParams),
    Linear { weight: ParamId, bias: ParamId },
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
}

/// Densely connected encoder with its representation head.
#[derive(Clone, Debug)]
pub struct Encoder {
    spec: EncoderSpec,
    layers: Vec<DenseLayer>,
    head: Head,
}

/// Tape handles of one encoder pass.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub hidden: Vec<Value>,
    pub s: Value,
    pub stick: Option<StickParams>,
}

impl Encoder {
    pub fn build(
        prefix: &str,
        spec: EncoderSpec,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        spec.validate()?;
        let mut widths = vec![spec.input_width];
        let mut layers = Vec::new();
        for (k, &w) in spec.layer_widths.iter().enumerate() {
            let k = k + 1;
            let from = widths
                .iter()
                .enumerate()
                .map(|(j, &src)| store.insert(format!("{prefix}l{k}.from{j}"), glorot(rng, src, w)))
                .collect();
            let bias = store.insert(format!("{prefix}l{k}.bias"), Array2::zeros((1, w)));
            layers.push(DenseLayer { from, bias });
            widths.push(w);
        }
        let last = *widths.last().expect("at least one hidden layer");
        let head = match spec.representation {
            RepresentationKind::StickBreaking => Head::Stick(HeadParams {
                u_weight: store.insert(format!("{prefix}u.weight"), glorot(rng, last, spec.c - 1)),
                u_bias: store.insert(format!("{prefix}u.bias"), Array2::zeros((1, spec.c - 1))),
                beta_weight: store.insert(format!("{prefix}beta.weight"), glorot(rng, last, 1)),
                beta_bias: store.insert(format!("{prefix}beta.bias"), Array2::zeros((1, 1))),
            }),
            RepresentationKind::Linear => Head::Linear {
                weight: store.insert(format!("{prefix}s.weight"), glorot(rng, last, spec.c)),
                bias: store.insert(format!("{prefix}s.bias"), Array2::zeros((1, spec.c))),
            },
        };
        Ok(Self { spec, layers, head })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Value) -> Result<EncoderOutput> {
        let width = tape.data(input).ncols();
        if width != self.spec.input_width {
            return Err(Error::shape(
                "encoder input",
                tape.data(input).dim(),
                (tape.data(input).nrows(), self.spec.input_width),
            ));
        }
        let mut sources = vec![input];
        for layer in &self.layers {
            let bias = tape.param(store, layer.bias);
            let mut acc: Option<Value> = None;
            for (&src, &wid) in sources.iter().zip(&layer.from) {
                let w = tape.param(store, wid);
                acc = Some(match acc {
                    None => tape.affine(src, w, Some(bias))?,
                    Some(a) => {
                        let term = tape.matmul(src, w)?;
                        tape.add(a, term)?
                    }
                });
            }
            let pre = acc.expect("every layer has the input as a source");
            sources.push(activate(tape, pre, self.spec.hidden_activation));
        }
        let last = *sources.last().expect("non-empty");
        let hidden = sources[1..].to_vec();
        match &self.head {
            Head::Stick(h) => {
                let stick = representation_head(tape, store, h, last)?;
                Ok(EncoderOutput {
                    hidden,
                    s: stick.s,
                    stick: Some(stick),
                })
            }
            Head::Linear { weight, bias } => {
                let w = tape.param(store, *weight);
                let b = tape.param(store, *bias);
                let s = tape.affine(last, w, Some(b))?;
                Ok(EncoderOutput {
                    hidden,
                    s,
                    stick: None,
                })
            }
        }
    }
}

/// Linear, bias-free decoder shared by both networks.
#[derive(Clone, Debug)]
pub struct Decoder {
    weights: Vec<ParamId>,
}

impl Decoder {
    pub fn build(
        prefix: &str,
        c: usize,
        spec: &DecoderSpec,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if spec.output_width == 0 || spec.layer_widths.contains(&0) {
            return Err(Error::Config("decoder widths must be positive".into()));
        }
        let mut dims = vec![c];
        dims.extend(&spec.layer_widths);
        dims.push(spec.output_width);
        let weights = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let init = Array2::from_shape_simple_fn((d[0], d[1]), || rng.random_range(0.0..0.1));
                store.insert(format!("{prefix}w{i}"), init)
            })
            .collect();
        Ok(Self { weights })
    }

    pub fn weight_ids(&self) -> &[ParamId] {
        &self.weights
    }

    /// Records the decoder weights as trainable parameters.
    pub fn weight_values(&self, tape: &mut Tape, store: &ParamStore) -> Vec<Value> {
        self.weights.iter().map(|&id| tape.param(store, id)).collect()
    }

    pub fn apply(&self, tape: &mut Tape, weights: &[Value], s: Value) -> Result<Value> {
        let mut x = s;
        for &w in weights {
            x = tape.matmul(x, w)?;
        }
        Ok(x)
    }

    /// `Φ_h = W_0 W_1 … W_k`, row `i` the spectrum of basis `i`.
    pub fn extract_basis(&self, store: &ParamStore) -> Array2<f64> {
        let mut it = self.weights.iter();
        let first = store.value(*it.next().expect("decoder has a weight")).clone();
        it.fold(first, |acc, &id| acc.dot(store.value(id)))
    }
}

/// Widths and activation choices for both networks and the decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub hsi: EncoderSpec,
    pub msi: EncoderSpec,
    pub decoder: DecoderSpec,
}

impl NetworkSpec {
    pub fn new(hsi_bands: usize, msi_bands: usize) -> Self {
        Self {
            hsi: EncoderSpec::hsi(hsi_bands),
            msi: EncoderSpec::msi(msi_bands),
            decoder: DecoderSpec::hsi(hsi_bands),
        }
    }
}

/// Handles of an HSI network pass.
#[derive(Clone, Debug)]
pub struct HsiForward {
    pub input: Value,
    pub encoder: EncoderOutput,
    pub decoder_weights: Vec<Value>,
    pub y_hat: Value,
}

/// Handles of an MSI network pass.
#[derive(Clone, Debug)]
pub struct MsiForward {
    pub input: Value,
    pub encoder: EncoderOutput,
    pub y_hat: Value,
}

/// Both encoders, the shared decoder and their parameters.
#[derive(Clone, Debug)]
pub struct CoupledNets {
    pub store: ParamStore,
    pub hsi_encoder: Encoder,
    pub msi_encoder: Encoder,
    pub decoder: Decoder,
}

impl CoupledNets {
    pub fn new(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        if spec.hsi.c != spec.msi.c {
            return Err(Error::Config(format!(
                "representation widths differ: {} vs {}",
                spec.hsi.c, spec.msi.c
            )));
        }
        if spec.decoder.output_width != spec.hsi.input_width {
            return Err(Error::Config(format!(
                "decoder output {} does not match HSI bands {}",
                spec.decoder.output_width, spec.hsi.input_width
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let hsi_encoder = Encoder::build(HSI_PREFIX, spec.hsi.clone(), &mut store, &mut rng)?;
        let decoder = Decoder::build(DECODER_PREFIX, spec.hsi.c, &spec.decoder, &mut store, &mut rng)?;
        let msi_encoder = Encoder::build(MSI_PREFIX, spec.msi.clone(), &mut store, &mut rng)?;
        Ok(Self {
            store,
            hsi_encoder,
            msi_encoder,
            decoder,
        })
    }

    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.store.with_prefix(prefix).collect()
    }

    /// Encoder, head and trainable decoder over the low-resolution pixels.
    pub fn hsi_forward(&self, tape: &mut Tape, y_h: &Array2<f64>) -> Result<HsiForward> {
        self.hsi_forward_with(&self.store, tape, y_h)
    }

    /// [`Self::hsi_forward`] reading parameter values from `store`.
    pub fn hsi_forward_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        y_h: &Array2<f64>,
    ) -> Result<HsiForward> {
        let input = tape.leaf(y_h.clone());
        let encoder = self.hsi_encoder.forward(tape, store, input)?;
        let decoder_weights = self.decoder.weight_values(tape, store);
        let y_hat = self.decoder.apply(tape, &decoder_weights, encoder.s)?;
        Ok(HsiForward {
            input,
            encoder,
            decoder_weights,
            y_hat,
        })
    }

    /// `Φ_m = Φ_h R`, the frozen decoder of the MSI network.
    pub fn msi_basis(&self, response: &Array2<f64>) -> Result<Array2<f64>> {
        let l = self.msi_encoder.spec().input_width;
        let big_l = self.hsi_encoder.spec().input_width;
        if response.dim() != (big_l, l) {
            return Err(Error::Config(format!(
                "spectral response is {:?}, expected ({big_l}, {l})",
                response.dim()
            )));
        }
        Ok(self.extract_basis().dot(response))
    }

    /// MSI encoder and head, decoded through the frozen basis and the
    /// sensor response. No gradient reaches the decoder parameters.
    pub fn msi_forward(
        &self,
        tape: &mut Tape,
        y_m: &Array2<f64>,
        response: &Array2<f64>,
    ) -> Result<MsiForward> {
        let phi_m = self.msi_basis(response)?;
        self.msi_forward_with_basis(tape, y_m, &phi_m)
    }

    pub fn msi_forward_with_basis(
        &self,
        tape: &mut Tape,
        y_m: &Array2<f64>,
        phi_m: &Array2<f64>,
    ) -> Result<MsiForward> {
        self.msi_forward_with(&self.store, tape, y_m, phi_m)
    }

    /// MSI pass reading encoder parameters from `store`, with `phi_m` the
    /// precomputed frozen basis.
    pub fn msi_forward_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        y_m: &Array2<f64>,
        phi_m: &Array2<f64>,
    ) -> Result<MsiForward> {
        let input = tape.leaf(y_m.clone());
        let encoder = self.msi_encoder.forward(tape, store, input)?;
        let basis = tape.leaf(phi_m.clone());
        let y_hat = tape.matmul(encoder.s, basis)?;
        Ok(MsiForward {
            input,
            encoder,
            y_hat,
        })
    }

    pub fn extract_basis(&self) -> Array2<f64> {
        self.decoder.extract_basis(&self.store)
    }
}

/// `X = S_m Φ_h`.
pub fn fuse(s_m: &Array2<f64>, phi_h: &Array2<f64>) -> Result<Array2<f64>> {
    if s_m.ncols() != phi_h.nrows() {
        return Err(Error::shape("fuse", s_m.dim(), phi_h.dim()));
    }
    Ok(s_m.dot(phi_h))
}
