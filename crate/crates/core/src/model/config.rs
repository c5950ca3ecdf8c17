use flowembed_tensor::{conv_output_extent, FieldLossKind};

use crate::error::{Error, Result};
use crate::phasefield::MonomialDictionary;

/// Shape hyperparameters of the encoder and decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub q: usize,
    pub n: usize,
    pub conv_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub degree: u32,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl EncoderConfig {
    /// Three 128-channel stride-2 convolutions, `d = 100` for planar and
    /// `d = 256` for spatial systems, cubic dictionary.
    pub fn standard(q: usize, n: usize) -> Self {
        EncoderConfig {
            q,
            n,
            conv_layers: 3,
            channels: 128,
            kernel: 3,
            stride: 2,
            embed_dim: if q == 3 { 256 } else { 100 },
            hidden: 128,
            dropout: 0.1,
            degree: 3,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.q) {
            return Err(Error::UnsupportedDimension(self.q));
        }
        if self.conv_layers == 0 || self.channels == 0 || self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::Config("kernel and stride must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0 && self.bn_eps > 0.0) {
            return Err(Error::Config("batch-norm momentum must be in (0, 1], eps > 0".into()));
        }
        MonomialDictionary::build(self.q, self.degree)?;
        self.feature_extents()?;
        Ok(())
    }

    /// Spatial extent after each convolution.
    pub fn feature_extents(&self) -> Result<Vec<usize>> {
        let mut s = self.n;
        let mut out = Vec::with_capacity(self.conv_layers);
        for layer in 0..self.conv_layers {
            s = conv_output_extent(s, self.kernel, self.stride).ok_or_else(|| {
                Error::Config(format!("resolution {} too small for conv layer {}", self.n, layer + 1))
            })?;
            out.push(s);
        }
        Ok(out)
    }

    /// Length of the flattened final feature map.
    pub fn flat_features(&self) -> usize {
        let s = *self.feature_extents().expect("validated").last().unwrap();
        self.channels * s.pow(self.q as u32)
    }

    pub fn dictionary(&self) -> MonomialDictionary {
        MonomialDictionary::build(self.q, self.degree).expect("validated")
    }

    /// Number of decoded coefficients, `p * q`.
    pub fn output_len(&self) -> usize {
        self.dictionary().len() * self.q
    }
}

/// Optimisation hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the coefficient L1 penalty.
    pub beta: f64,
    /// Guard added to the local speed in the normalized loss.
    pub eps: f64,
    pub loss: FieldLossKind,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 200,
            batch_size: 64,
            beta: 1e-3,
            eps: 1e-5,
            loss: FieldLossKind::Pointwise,
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lr, self.adam_eps, self.eps];
        if positive.iter().any(|v| !(*v > 0.0)) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("lr, eps, epochs and batch size must be positive".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("sparsity weight {} < 0", self.beta)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("validation fraction {} outside [0, 1)", self.val_fraction)));
        }
        Ok(())
    }

    /// Whether the loss divides by the local speed.
    pub fn fixed_point_normalization(&self) -> bool {
        self.loss != FieldLossKind::Unnormalized
    }
}

pub fn loss_kind_name(kind: FieldLossKind) -> &'static str {
    match kind {
        FieldLossKind::Pointwise => "pointwise",
        FieldLossKind::Global => "global",
        FieldLossKind::Unnormalized => "none",
    }
}

pub fn loss_kind_from_name(name: &str) -> Option<FieldLossKind> {
    Some(match name {
        "pointwise" => FieldLossKind::Pointwise,
        "global" => FieldLossKind::Global,
        "none" => FieldLossKind::Unnormalized,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes() {
        let c = EncoderConfig::standard(2, 64);
        c.validate().unwrap();
        assert_eq!(c.feature_extents().unwrap(), vec![31, 15, 7]);
        assert_eq!(c.flat_features(), 128 * 49);
        assert_eq!(c.output_len(), 20);
        assert_eq!(EncoderConfig::standard(3, 64).output_len(), 60);
        assert_eq!(EncoderConfig::standard(3, 64).embed_dim, 256);
        assert_eq!(EncoderConfig::standard(2, 32).feature_extents().unwrap(), vec![15, 7, 3]);
        assert_eq!(EncoderConfig::standard(2, 128).feature_extents().unwrap(), vec![63, 31, 15]);
        assert!(EncoderConfig::standard(2, 8).validate().is_err());
        assert!(EncoderConfig::standard(4, 64).validate().is_err());
    }

    #[test]
    fn train_defaults_validate() {
        let t = TrainConfig::default();
        t.validate().unwrap();
        assert_eq!((t.lr, t.epochs, t.beta, t.batch_size), (1e-4, 200, 1e-3, 64));
        assert!(TrainConfig { beta: -1.0, ..t.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..t }.validate().is_err());
    }
}
