use std::path::Path;

use flowembed_tensor::{Adam, AdamConfig, BatchNormStats, Tensor};

use crate::error::{Error, Result};
use crate::io::bytes::{narrow, Reader, Writer};
use crate::io::write_atomic;
use crate::model::{loss_kind_from_name, loss_kind_name, EncoderConfig, EpochRecord, ModelParams, TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"P2VC";
pub const CHECKPOINT_VERSION: u16 = 1;
pub const EMBEDDING_MAGIC: &[u8; 4] = b"P2VE";
pub const EMBEDDING_VERSION: u16 = 1;

fn put_usize(w: &mut Writer, v: usize) {
    w.u64(v as u64);
}

fn put_str(w: &mut Writer, s: &str) -> Result<()> {
    w.u16(narrow(s.len(), "name length")?);
    w.bytes(s.as_bytes());
    Ok(())
}

fn get_str(r: &mut Reader) -> Result<String> {
    let len = r.u16()? as usize;
    String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("name is not UTF-8".into()))
}

fn put_encoder(w: &mut Writer, c: &EncoderConfig) {
    for v in [c.q, c.n, c.conv_layers, c.channels, c.kernel, c.stride, c.embed_dim, c.hidden] {
        put_usize(w, v);
    }
    w.f64(c.dropout);
    w.u32(c.degree);
    w.f64(c.bn_momentum);
    w.f64(c.bn_eps);
}

fn get_encoder(r: &mut Reader) -> Result<EncoderConfig> {
    let mut u = [0usize; 8];
    for v in &mut u {
        *v = r.usize()?;
    }
    let [q, n, conv_layers, channels, kernel, stride, embed_dim, hidden] = u;
    Ok(EncoderConfig {
        q,
        n,
        conv_layers,
        channels,
        kernel,
        stride,
        embed_dim,
        hidden,
        dropout: r.f64()?,
        degree: r.u32()?,
        bn_momentum: r.f64()?,
        bn_eps: r.f64()?,
    })
}

fn put_train(w: &mut Writer, c: &TrainConfig) -> Result<()> {
    w.f64s(&[c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps]);
    put_usize(w, c.epochs);
    put_usize(w, c.batch_size);
    w.f64(c.beta);
    w.f64(c.eps);
    put_str(w, loss_kind_name(c.loss))?;
    w.u64(c.seed);
    w.f64(c.val_fraction);
    Ok(())
}

fn get_train(r: &mut Reader) -> Result<TrainConfig> {
    let [lr, adam_beta1, adam_beta2, adam_eps] = r.f64s(4)?.try_into().unwrap();
    let epochs = r.usize()?;
    let batch_size = r.usize()?;
    let beta = r.f64()?;
    let eps = r.f64()?;
    let name = get_str(r)?;
    let loss = loss_kind_from_name(&name).ok_or_else(|| Error::Format(format!("unknown loss kind {name:?}")))?;
    Ok(TrainConfig {
        lr,
        adam_beta1,
        adam_beta2,
        adam_eps,
        epochs,
        batch_size,
        beta,
        eps,
        loss,
        seed: r.u64()?,
        val_fraction: r.f64()?,
    })
}

/// Serializes the full training state: weights, batch-norm statistics,
/// optimiser moments, epoch counter, train config and loss history.
pub fn encode_checkpoint(state: &TrainState) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    let params = &state.params;
    put_encoder(&mut w, &params.config);
    w.u32(narrow(params.tensors.len(), "tensor count")?);
    for (name, t) in params.names.iter().zip(&params.tensors) {
        put_str(&mut w, name)?;
        w.u8(narrow(t.shape().len(), "rank")?);
        for &d in t.shape() {
            w.u32(narrow(d, "extent")?);
        }
        w.f64s(t.data());
    }
    w.u32(narrow(params.bn.len(), "batch-norm count")?);
    for s in &params.bn {
        w.f64(s.momentum);
        w.f64(s.eps);
        w.f64_vec(&s.running_mean)?;
        w.f64_vec(&s.running_var)?;
    }
    let a = &state.adam;
    w.f64s(&[a.config.lr, a.config.beta1, a.config.beta2, a.config.eps]);
    w.u64(a.step);
    w.u32(narrow(a.first_moment.len(), "moment count")?);
    for (m, v) in a.first_moment.iter().zip(&a.second_moment) {
        w.f64_vec(m)?;
        w.f64_vec(v)?;
    }
    put_usize(&mut w, state.epoch);
    put_train(&mut w, &state.config)?;
    w.u32(narrow(state.history.len(), "history length")?);
    for h in &state.history {
        put_usize(&mut w, h.epoch);
        w.f64(h.train_loss);
        match h.val_loss {
            Some(v) => {
                w.u8(1);
                w.f64(v);
            }
            None => w.u8(0),
        }
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(data: &[u8]) -> Result<TrainState> {
    let mut r = Reader::new(data);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let config = get_encoder(&mut r)?;
    let count = r.u32()? as usize;
    let mut named = Vec::with_capacity(count.min(256));
    for _ in 0..count {
        let name = get_str(&mut r)?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or_else(|| Error::Format(format!("tensor {name} is too large")))?;
        let t = Tensor::new(shape, r.f64s(len)?)?;
        named.push((name, t));
    }
    let bn_count = r.u32()? as usize;
    let mut bn = Vec::with_capacity(bn_count.min(256));
    for _ in 0..bn_count {
        let momentum = r.f64()?;
        let eps = r.f64()?;
        let running_mean = r.f64_vec()?;
        let running_var = r.f64_vec()?;
        if running_mean.len() != running_var.len() {
            return Err(Error::Format("batch-norm mean and variance lengths differ".into()));
        }
        bn.push(BatchNormStats { running_mean, running_var, momentum, eps });
    }
    let params = ModelParams::from_parts(config, named, bn)?;
    let [lr, beta1, beta2, eps] = r.f64s(4)?.try_into().unwrap();
    let step = r.u64()?;
    let moments = r.u32()? as usize;
    if moments != params.tensors.len() {
        return Err(Error::Format(format!("{moments} optimiser moments for {} tensors", params.tensors.len())));
    }
    let mut first_moment = Vec::with_capacity(moments);
    let mut second_moment = Vec::with_capacity(moments);
    for t in &params.tensors {
        let (m, v) = (r.f64_vec()?, r.f64_vec()?);
        if m.len() != t.len() || v.len() != t.len() {
            return Err(Error::Format("optimiser moment shape does not match its tensor".into()));
        }
        first_moment.push(m);
        second_moment.push(v);
    }
    let adam = Adam { config: AdamConfig { lr, beta1, beta2, eps }, step, first_moment, second_moment };
    let epoch = r.usize()?;
    let train = get_train(&mut r)?;
    train.validate()?;
    let hist_len = r.u32()? as usize;
    let mut history = Vec::with_capacity(hist_len.min(1 << 16));
    for _ in 0..hist_len {
        let epoch = r.usize()?;
        let train_loss = r.f64()?;
        let val_loss = match r.u8()? {
            0 => None,
            1 => Some(r.f64()?),
            f => return Err(Error::Format(format!("bad validation flag {f}"))),
        };
        history.push(EpochRecord { epoch, train_loss, val_loss });
    }
    r.finish()?;
    Ok(TrainState { params, adam, epoch, history, config: train })
}

pub fn write_checkpoint(path: &Path, state: &TrainState) -> Result<()> {
    write_atomic(path, &encode_checkpoint(state)?)
}

pub fn read_checkpoint(path: &Path) -> Result<TrainState> {
    decode_checkpoint(&std::fs::read(path)?)
}

/// One embedding row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn encode_embeddings(e: &Embeddings) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(EMBEDDING_MAGIC);
    w.u16(EMBEDDING_VERSION);
    w.u32(narrow(e.rows.len(), "row count")?);
    w.u32(narrow(e.dim, "embedding dimension")?);
    for row in &e.rows {
        if row.len() != e.dim {
            return Err(Error::Dimension(format!("embedding row of length {} in a {}-d file", row.len(), e.dim)));
        }
        w.f64s(row);
    }
    Ok(w.buf)
}

pub fn decode_embeddings(data: &[u8]) -> Result<Embeddings> {
    let mut r = Reader::new(data);
    r.magic(EMBEDDING_MAGIC)?;
    r.version(EMBEDDING_VERSION)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let rows = (0..count).map(|_| r.f64s(dim)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(Embeddings { dim, rows })
}

pub fn write_embeddings(path: &Path, e: &Embeddings) -> Result<()> {
    write_atomic(path, &encode_embeddings(e)?)
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    decode_embeddings(&std::fs::read(path)?)
}
