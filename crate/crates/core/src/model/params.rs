use flowembed_tensor::{BatchNormStats, Tensor};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::EncoderConfig;

/// Learnable weights, in a fixed order, plus batch-norm running statistics
/// (one per conv layer, then the decoder's).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
    pub bn: Vec<BatchNormStats>,
}

/// Names and shapes of every parameter tensor for `config`.
pub fn parameter_layout(config: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    let (c, k, q) = (config.channels, config.kernel, config.q);
    let mut out = Vec::new();
    for i in 1..=config.conv_layers {
        let in_ch = if i == 1 { q } else { c };
        let mut w = vec![c, in_ch];
        w.extend(std::iter::repeat_n(k, q));
        out.push((format!("conv{i}.weight"), w));
        out.push((format!("conv{i}.bias"), vec![c]));
        out.push((format!("bn{i}.gamma"), vec![c]));
        out.push((format!("bn{i}.beta"), vec![c]));
    }
    let (f, d, h, o) = (config.flat_features(), config.embed_dim, config.hidden, config.output_len());
    out.push(("embed.weight".into(), vec![f, d]));
    out.push(("embed.bias".into(), vec![d]));
    out.push(("mlp1.weight".into(), vec![d, h]));
    out.push(("mlp1.bias".into(), vec![h]));
    out.push(("mlp_bn.gamma".into(), vec![h]));
    out.push(("mlp_bn.beta".into(), vec![h]));
    out.push(("mlp2.weight".into(), vec![h, o]));
    out.push(("mlp2.bias".into(), vec![o]));
    out
}

fn fan_in(name: &str, layout: &[(String, Vec<usize>)]) -> usize {
    let weight = name.replace(".bias", ".weight");
    let ws = &layout.iter().find(|(n, _)| *n == weight).expect("paired weight").1;
    if name.starts_with("conv") {
        ws[1..].iter().product()
    } else {
        ws[0]
    }
}

impl ModelParams {
    /// Uniform fan-in initialisation `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for weights and biases; batch-norm scale 1, shift 0. The output layer
    /// starts at zero so the initial reconstruction is the zero field.
    pub fn init<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config);
        let mut names = Vec::with_capacity(layout.len());
        let mut tensors = Vec::with_capacity(layout.len());
        for (name, shape) in &layout {
            let len: usize = shape.iter().product();
            let data = if name.starts_with("mlp2.") {
                vec![0.0; len]
            } else if name.ends_with(".gamma") {
                vec![1.0; len]
            } else if name.ends_with(".beta") {
                vec![0.0; len]
            } else {
                let bound = 1.0 / (fan_in(name, &layout) as f64).sqrt();
                (0..len).map(|_| rng.random_range(-bound..bound)).collect()
            };
            names.push(name.clone());
            tensors.push(Tensor::new(shape.clone(), data)?);
        }
        let mut bn: Vec<BatchNormStats> = (0..config.conv_layers)
            .map(|_| BatchNormStats::new(config.channels, config.bn_momentum, config.bn_eps))
            .collect();
        bn.push(BatchNormStats::new(config.hidden, config.bn_momentum, config.bn_eps));
        Ok(ModelParams { config, names, tensors, bn })
    }

    /// Reassembles parameters, checking names and shapes against `config`.
    pub fn from_parts(
        config: EncoderConfig,
        named: Vec<(String, Tensor)>,
        bn: Vec<BatchNormStats>,
    ) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config);
        if named.len() != layout.len() {
            return Err(Error::Format(format!("{} tensors, expected {}", named.len(), layout.len())));
        }
        for ((name, t), (want, shape)) in named.iter().zip(&layout) {
            if name != want || t.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "tensor {name} {:?} does not match {want} {shape:?}",
                    t.shape()
                )));
            }
        }
        let widths: Vec<usize> = (0..config.conv_layers).map(|_| config.channels).chain([config.hidden]).collect();
        if bn.len() != widths.len() || bn.iter().zip(&widths).any(|(s, &w)| s.channels() != w) {
            return Err(Error::Format("batch-norm statistics do not match the layout".into()));
        }
        if bn.iter().any(|s| s.running_var.iter().any(|&v| !(v > 0.0))) {
            return Err(Error::Format("running variance must be positive".into()));
        }
        let (names, tensors) = named.into_iter().unzip();
        Ok(ModelParams { config, names, tensors, bn })
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }

    /// Euclidean norm of each tensor, for diagnostics.
    pub fn norms(&self) -> Vec<(String, f64)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| (n.clone(), t.data().iter().map(|v| v * v).sum::<f64>().sqrt()))
            .collect()
    }
}
