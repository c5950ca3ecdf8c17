use std::sync::Arc;

use flowembed_tensor::{BatchNormStats, Mode, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{EncoderConfig, ModelParams};
use crate::phasefield::{CoefficientMatrix, Lattice, PolynomialSystem, VectorField};

/// Fields evaluated together in eval-mode batches.
const EVAL_CHUNK: usize = 16;

/// Handles into a recorded forward pass.
pub struct Forward {
    /// Parameter leaves, in [`ModelParams::tensors`] order.
    pub params: Vec<Var>,
    /// Output of each conv block (after ReLU).
    pub features: Vec<Var>,
    /// Embeddings `[B, d]`.
    pub z: Var,
    /// Coefficients `[B, p, q]`.
    pub xi: Var,
}

/// Stacks fields channel-first into `[B, q, n, .., n]`.
pub fn batch_input(params: &ModelParams, fields: &[&VectorField]) -> Result<Tensor> {
    let cfg = &params.config;
    for f in fields {
        let l = f.lattice();
        if l.q() != cfg.q || l.n() != cfg.n {
            return Err(Error::Dimension(format!(
                "field on a q = {}, n = {} lattice; model expects q = {}, n = {}",
                l.q(),
                l.n(),
                cfg.q,
                cfg.n
            )));
        }
    }
    if fields.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let mut shape = vec![fields.len(), cfg.q];
    shape.extend(std::iter::repeat_n(cfg.n, cfg.q));
    let data = fields.iter().flat_map(|f| f.to_channels()).collect();
    Ok(Tensor::new(shape, data)?)
}

/// Records encoder and decoder on `tape`. Parameters become leaves that
/// track gradients iff `track`. Batch-norm statistics are updated in train
/// mode; the decoder's batch norm falls back to running statistics when a
/// train batch holds a single sample.
pub fn record_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &ModelParams,
    stats: &mut [BatchNormStats],
    input: Tensor,
    mode: Mode,
    track: bool,
    rng: &mut R,
) -> Result<Forward> {
    let cfg = &params.config;
    let batch = input.shape()[0];
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.leaf(t.clone().with_grad(track))).collect();
    let mut x = tape.leaf(input);
    let mut features = Vec::with_capacity(cfg.conv_layers);
    for layer in 0..cfg.conv_layers {
        let [w, b, g, beta] = [0, 1, 2, 3].map(|k| vars[4 * layer + k]);
        x = tape.conv(x, w, b, cfg.stride)?;
        x = tape.batch_norm(x, g, beta, &mut stats[layer], mode)?;
        x = tape.relu(x);
        features.push(x);
    }
    let base = 4 * cfg.conv_layers;
    x = tape.reshape(x, vec![batch, cfg.flat_features()])?;
    let z = tape.linear(x, vars[base], vars[base + 1])?;
    let xi = record_decoder(tape, cfg, &vars[base + 2..], &mut stats[cfg.conv_layers], z, mode, rng)?;
    Ok(Forward { params: vars, features, z, xi })
}

/// Index of the first decoder tensor in [`ModelParams::tensors`].
pub fn decoder_offset(cfg: &EncoderConfig) -> usize {
    4 * cfg.conv_layers + 2
}

/// Records the decoder MLP from embeddings `z` `[B, d]` to coefficients
/// `[B, p, q]`; `vars` are the six decoder leaves in parameter order.
pub fn record_decoder<R: Rng + ?Sized>(
    tape: &mut Tape,
    cfg: &EncoderConfig,
    vars: &[Var],
    stats: &mut BatchNormStats,
    z: Var,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    let batch = tape.value(z).shape()[0];
    let mut h = tape.linear(z, vars[0], vars[1])?;
    let mlp_mode = if batch < 2 { Mode::Eval } else { mode };
    h = tape.batch_norm(h, vars[2], vars[3], stats, mlp_mode)?;
    h = tape.relu(h);
    h = tape.dropout(h, cfg.dropout, mode, rng)?;
    let out = tape.linear(h, vars[4], vars[5])?;
    let p = cfg.output_len() / cfg.q;
    Ok(tape.reshape(out, vec![batch, p, cfg.q])?)
}

struct EvalOut {
    z: Vec<f64>,
    xi: Vec<f64>,
    shapes: Vec<Vec<usize>>,
}

fn eval_chunk(params: &ModelParams, fields: &[&VectorField]) -> Result<EvalOut> {
    let mut tape = Tape::new();
    let mut stats = params.bn.clone();
    let input = batch_input(params, fields)?;
    // Eval mode draws no randomness.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = record_forward(&mut tape, params, &mut stats, input, Mode::Eval, false, &mut rng)?;
    let shapes = f.features.iter().map(|&v| tape.value(v).shape().to_vec()).collect();
    Ok(EvalOut {
        z: tape.value(f.z).data().to_vec(),
        xi: tape.value(f.xi).data().to_vec(),
        shapes,
    })
}

fn eval_all(params: &ModelParams, fields: &[&VectorField], exec: Exec) -> Result<Vec<EvalOut>> {
    let chunks = fields.len().div_ceil(EVAL_CHUNK);
    exec.try_map(chunks, |c| eval_chunk(params, &fields[c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(fields.len())]))
}

/// Eval-mode embedding of one field.
pub fn encode(params: &ModelParams, field: &VectorField) -> Result<Vec<f64>> {
    Ok(eval_chunk(params, &[field])?.z)
}

/// Eval-mode embeddings of many fields, in input order.
pub fn encode_batch(params: &ModelParams, fields: &[&VectorField], exec: Exec) -> Result<Vec<Vec<f64>>> {
    let d = params.config.embed_dim;
    Ok(eval_all(params, fields, exec)?
        .into_iter()
        .flat_map(|o| o.z.chunks(d).map(<[f64]>::to_vec).collect::<Vec<_>>())
        .collect())
}

/// Shapes (without the batch axis) of each conv block's output and of the
/// embedding, for one field.
pub fn activation_shapes(params: &ModelParams, field: &VectorField) -> Result<Vec<Vec<usize>>> {
    let out = eval_chunk(params, &[field])?;
    let mut shapes: Vec<Vec<usize>> = out.shapes.into_iter().map(|s| s[1..].to_vec()).collect();
    shapes.push(vec![out.z.len()]);
    Ok(shapes)
}

/// Eval-mode decoder applied to one embedding.
pub fn decode(params: &ModelParams, z: &[f64]) -> Result<CoefficientMatrix> {
    let cfg = &params.config;
    if z.len() != cfg.embed_dim {
        return Err(Error::Dimension(format!("embedding of length {}, expected {}", z.len(), cfg.embed_dim)));
    }
    let mut tape = Tape::new();
    let mut stats = params.bn[cfg.conv_layers].clone();
    let v: Vec<Var> =
        params.tensors[decoder_offset(cfg)..].iter().map(|t| tape.leaf(t.clone().with_grad(false))).collect();
    let x = tape.leaf(Tensor::new(vec![1, z.len()], z.to_vec())?);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let xi = record_decoder(&mut tape, cfg, &v, &mut stats, x, Mode::Eval, &mut rng)?;
    let p = cfg.output_len() / cfg.q;
    CoefficientMatrix::new(p, cfg.q, tape.value(xi).data().to_vec())
}

fn to_systems(params: &ModelParams, outs: Vec<EvalOut>) -> Result<Vec<CoefficientMatrix>> {
    let (pq, q) = (params.config.output_len(), params.config.q);
    outs.into_iter()
        .flat_map(|o| o.xi.chunks(pq).map(<[f64]>::to_vec).collect::<Vec<_>>())
        .map(|v| CoefficientMatrix::new(pq / q, q, v))
        .collect()
}

/// Predicted coefficients for many fields (eval mode).
pub fn predict_coefficients(
    params: &ModelParams,
    fields: &[&VectorField],
    exec: Exec,
) -> Result<Vec<CoefficientMatrix>> {
    let outs = eval_all(params, fields, exec)?;
    to_systems(params, outs)
}

/// Coefficients and the field they generate on the input's lattice.
pub fn reconstruct(params: &ModelParams, field: &VectorField) -> Result<(CoefficientMatrix, VectorField)> {
    let xi = predict_coefficients(params, &[field], Exec::Sequential)?.pop().expect("one field");
    let recon = field_of(params, &xi, field.lattice())?;
    Ok((xi, recon))
}

/// Batched [`reconstruct`].
pub fn reconstruct_batch(
    params: &ModelParams,
    fields: &[&VectorField],
    exec: Exec,
) -> Result<Vec<(CoefficientMatrix, VectorField)>> {
    let xis = predict_coefficients(params, fields, exec)?;
    xis.into_iter()
        .zip(fields)
        .map(|(xi, f)| {
            let recon = field_of(params, &xi, f.lattice())?;
            Ok((xi, recon))
        })
        .collect()
}

/// `Phi(X) xi` over `lattice` with the model's dictionary.
pub fn field_of(params: &ModelParams, xi: &CoefficientMatrix, lattice: &Lattice) -> Result<VectorField> {
    PolynomialSystem::new(params.config.dictionary(), xi.clone())?.eval_on_lattice(lattice)
}

/// Dictionary basis `[N, p]` on `lattice`, shared by every training batch.
pub fn lattice_basis(params: &ModelParams, lattice: &Lattice) -> Result<Arc<[f64]>> {
    params.config.dictionary().basis_matrix(lattice, Exec::Sequential)
}
