use std::sync::Arc;

use flowembed_tensor::{Adam, AdamConfig, BatchNormStats, Mode, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::loss::{recon_loss, sparsity_loss};
use crate::model::network::{batch_input, decoder_offset, lattice_basis, record_decoder, record_forward, reconstruct_batch};
use crate::model::{ModelParams, TrainConfig};
use crate::phasefield::VectorField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Everything needed to continue training: weights, optimiser moments and
/// the loss history so far.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: Adam,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    pub config: TrainConfig,
}

impl TrainState {
    pub fn new(params: ModelParams, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam_cfg = AdamConfig {
            lr: config.lr,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
        };
        let adam = Adam::new(adam_cfg, &params.tensors.iter().collect::<Vec<_>>());
        Ok(TrainState { params, adam, epoch: 0, history: Vec::new(), config })
    }

    /// Fresh parameters initialised from `config.seed`.
    pub fn initialize(encoder: crate::model::EncoderConfig, config: TrainConfig) -> Result<Self> {
        let mut rng = epoch_rng(config.seed, 0);
        let params = ModelParams::init(encoder, &mut rng)?;
        Self::new(params, config)
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }
}

/// Generator for epoch `epoch` (stream 0 is reserved for initialisation),
/// so a resumed run draws exactly what an uninterrupted one would.
pub fn epoch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean objective over a batch with its parameter gradients, in
/// [`ModelParams::tensors`] order.
pub struct BatchObjective {
    pub loss: f64,
    pub grads: Vec<Tensor>,
}

/// Batch-mean reconstruction loss plus `beta` times the mean coefficient L1
/// norm, differentiated with respect to every parameter.
pub fn batch_objective<R: Rng + ?Sized>(
    params: &ModelParams,
    stats: &mut [BatchNormStats],
    fields: &[&VectorField],
    basis: &Arc<[f64]>,
    config: &TrainConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<BatchObjective> {
    let mut tape = Tape::new();
    let input = batch_input(params, fields)?;
    let fwd = record_forward(&mut tape, params, stats, input, mode, true, rng)?;
    let points = fields[0].lattice().num_points();
    let truth: Vec<f64> = fields.iter().flat_map(|f| f.velocities().iter().copied()).collect();
    let recon = tape.dictionary_field(fwd.xi, basis.clone(), points)?;
    let mut loss = tape.field_loss(recon, &truth, config.eps, config.loss)?;
    if config.beta > 0.0 {
        let l1 = tape.abs_sum(fwd.xi);
        let l1 = tape.scale(l1, config.beta / fields.len() as f64);
        loss = tape.add(loss, l1)?;
    }
    let value = tape.value(loss).data()[0];
    let mut g = tape.backward(loss)?;
    let grads = fwd
        .params
        .iter()
        .zip(&params.tensors)
        .map(|(&v, t)| g.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok(BatchObjective { loss: value, grads })
}

/// Eval-mode objective per field: reconstruction loss plus `beta` times the
/// coefficient L1 norm.
pub fn evaluate_objective(
    params: &ModelParams,
    fields: &[&VectorField],
    config: &TrainConfig,
    exec: Exec,
) -> Result<Vec<f64>> {
    reconstruct_batch(params, fields, exec)?
        .iter()
        .zip(fields)
        .map(|((xi, recon), truth)| {
            Ok(recon_loss(config.loss, truth, recon, config.eps)? + config.beta * sparsity_loss(xi))
        })
        .collect()
}

pub fn mean_objective(params: &ModelParams, data: &LabeledDataset, config: &TrainConfig, exec: Exec) -> Result<f64> {
    let losses = evaluate_objective(params, &data.fields(), config, exec)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Shuffled index batches; a trailing singleton joins the previous batch.
fn batches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

fn diagnostics(params: &ModelParams) -> String {
    params
        .norms()
        .iter()
        .map(|(n, v)| format!("{n}={v:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs epochs until `state.config.epochs`, calling `on_epoch` after each.
///
/// Parameters change only after a finite batch loss, so on
/// [`Error::NonFiniteLoss`] `state` still holds the last good weights.
pub fn train<F>(
    state: &mut TrainState,
    train_set: &LabeledDataset,
    val_set: Option<&LabeledDataset>,
    exec: Exec,
    mut on_epoch: F,
) -> Result<()>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    if train_set.is_empty() {
        return Err(Error::Precondition("training set is empty".into()));
    }
    state.config.validate()?;
    let basis = lattice_basis(&state.params, &train_set.lattice)?;
    let fields = train_set.fields();
    while state.epoch < state.config.epochs {
        let mut rng = epoch_rng(state.config.seed, state.epoch as u64 + 1);
        let mut total = 0.0;
        for (b, idx) in batches(fields.len(), state.config.batch_size, &mut rng).into_iter().enumerate() {
            let batch: Vec<&VectorField> = idx.iter().map(|&i| fields[i]).collect();
            let mut stats = state.params.bn.clone();
            let obj = batch_objective(&state.params, &mut stats, &batch, &basis, &state.config, Mode::Train, &mut rng)?;
            if !obj.loss.is_finite() || obj.grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: state.epoch,
                    batch: b,
                    diagnostics: diagnostics(&state.params),
                });
            }
            let mut refs: Vec<&mut Tensor> = state.params.tensors.iter_mut().collect();
            state.adam.update(&mut refs, &obj.grads.iter().collect::<Vec<_>>())?;
            state.params.bn = stats;
            total += obj.loss * batch.len() as f64;
        }
        let val_loss = match val_set {
            Some(v) if !v.is_empty() => Some(mean_objective(&state.params, v, &state.config, exec)?),
            _ => None,
        };
        state.epoch += 1;
        state.history.push(EpochRecord {
            epoch: state.epoch,
            train_loss: total / fields.len() as f64,
            val_loss,
        });
        on_epoch(state)?;
    }
    Ok(())
}

/// Retrains only the decoder on fixed embeddings for `config.epochs`
/// epochs with a fresh optimiser; the encoder is left untouched. Returns the
/// updated parameters and the mean train loss per epoch.
pub fn finetune_decoder(
    params: &ModelParams,
    embeddings: &[Vec<f64>],
    fields: &[&VectorField],
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    config.validate()?;
    if fields.is_empty() || embeddings.len() != fields.len() {
        return Err(Error::Precondition(format!(
            "{} embeddings for {} fields",
            embeddings.len(),
            fields.len()
        )));
    }
    let cfg = params.config.clone();
    let d = cfg.embed_dim;
    if embeddings.iter().any(|z| z.len() != d) {
        return Err(Error::Dimension(format!("embeddings must have length {d}")));
    }
    let off = decoder_offset(&cfg);
    let basis = lattice_basis(params, fields[0].lattice())?;
    let points = fields[0].lattice().num_points();
    let mut out = params.clone();
    let adam_cfg = AdamConfig { lr: config.lr, beta1: config.adam_beta1, beta2: config.adam_beta2, eps: config.adam_eps };
    let mut adam = Adam::new(adam_cfg, &out.tensors[off..].iter().collect::<Vec<_>>());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = epoch_rng(config.seed, epoch as u64 + 1);
        let mut total = 0.0;
        for idx in batches(fields.len(), config.batch_size, &mut rng) {
            let mut tape = Tape::new();
            let vars: Vec<_> = out.tensors[off..].iter().map(|t| tape.leaf(t.clone().with_grad(true))).collect();
            let zdata = idx.iter().flat_map(|&i| embeddings[i].iter().copied()).collect();
            let z = tape.leaf(Tensor::new(vec![idx.len(), d], zdata)?);
            let mut stats = out.bn[cfg.conv_layers].clone();
            let xi = record_decoder(&mut tape, &cfg, &vars, &mut stats, z, Mode::Train, &mut rng)?;
            let truth: Vec<f64> = idx.iter().flat_map(|&i| fields[i].velocities().iter().copied()).collect();
            let recon = tape.dictionary_field(xi, basis.clone(), points)?;
            let mut loss = tape.field_loss(recon, &truth, config.eps, config.loss)?;
            if config.beta > 0.0 {
                let l1 = tape.abs_sum(xi);
                let l1 = tape.scale(l1, config.beta / idx.len() as f64);
                loss = tape.add(loss, l1)?;
            }
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0, diagnostics: diagnostics(&out) });
            }
            let mut g = tape.backward(loss)?;
            let grads: Vec<Tensor> = vars
                .iter()
                .zip(&out.tensors[off..])
                .map(|(&v, t)| g.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
                .collect();
            let mut refs: Vec<&mut Tensor> = out.tensors[off..].iter_mut().collect();
            adam.update(&mut refs, &grads.iter().collect::<Vec<_>>())?;
            out.bn[cfg.conv_layers] = stats;
            total += value * idx.len() as f64;
        }
        history.push(total / fields.len() as f64);
    }
    Ok((out, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_every_index_once() {
        let mut rng = epoch_rng(1, 1);
        let b = batches(129, 64, &mut rng);
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].len(), 65);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..129).collect::<Vec<_>>());
        assert_eq!(batches(1, 64, &mut rng), vec![vec![0]]);
    }
}
