//! Bigram CNN pair scorer.
//!
//! Each sentence goes through
//! `conv_bigram → avg_pool2 → conv_bigram → global_avg_pool`, giving a vector
//! of `n_filters_2` features. A question/answer pair is scored by logistic
//! regression over `[q; a; q ⊙ a]`. Embeddings are frozen; only the two
//! convolutions and the output layer are trained.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embeddings::SentenceMatrix;
use crate::error::{Error, Result};
use crate::numkernel::{
    avg_pool2, avg_pool2_backward, bce_loss, conv_bigram, conv_bigram_backward, global_avg_pool,
    global_avg_pool_backward, sigmoid, Dense2,
};
use crate::rng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub embed_dim: usize,
    pub n_filters_1: usize,
    pub n_filters_2: usize,
    pub max_len: usize,
}

impl ModelDims {
    /// Small dimensions for fast experiments and tests.
    pub fn desk() -> Self {
        ModelDims {
            embed_dim: 8,
            n_filters_1: 8,
            n_filters_2: 8,
            max_len: 40,
        }
    }

    /// 300-dimensional word2vec input with 40 filters per layer.
    pub fn full() -> Self {
        ModelDims {
            embed_dim: 300,
            n_filters_1: 40,
            n_filters_2: 40,
            max_len: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.n_filters_1 == 0 || self.n_filters_2 == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidArgument("max_len must be at least 2".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let (e, f1, f2) = (self.embed_dim, self.n_filters_1, self.n_filters_2);
        f1 * 2 * e + f1 + f2 * 2 * f1 + f2 + 3 * f2 + 1
    }
}

/// Trainable weights. The same layout doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub conv1_filters: Dense2,
    pub conv1_bias: Vec<f64>,
    pub conv2_filters: Dense2,
    pub conv2_bias: Vec<f64>,
    pub lr_weights: Vec<f64>,
    pub lr_bias: f64,
}

pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(dims: &ModelDims) -> Self {
        ModelParams {
            conv1_filters: Dense2::zeros(dims.n_filters_1, 2 * dims.embed_dim),
            conv1_bias: vec![0.0; dims.n_filters_1],
            conv2_filters: Dense2::zeros(dims.n_filters_2, 2 * dims.n_filters_1),
            conv2_bias: vec![0.0; dims.n_filters_2],
            lr_weights: vec![0.0; 3 * dims.n_filters_2],
            lr_bias: 0.0,
        }
    }

    pub fn dims(&self, max_len: usize) -> ModelDims {
        ModelDims {
            embed_dim: self.conv1_filters.cols() / 2,
            n_filters_1: self.conv1_filters.rows(),
            n_filters_2: self.conv2_filters.rows(),
            max_len,
        }
    }

    pub fn fits(&self, dims: &ModelDims) -> bool {
        self.conv1_filters.rows() == dims.n_filters_1
            && self.conv1_filters.cols() == 2 * dims.embed_dim
            && self.conv1_bias.len() == dims.n_filters_1
            && self.conv2_filters.rows() == dims.n_filters_2
            && self.conv2_filters.cols() == 2 * dims.n_filters_1
            && self.conv2_bias.len() == dims.n_filters_2
            && self.lr_weights.len() == 3 * dims.n_filters_2
    }

    /// All values in a fixed block order: conv1 filters, conv1 bias, conv2
    /// filters, conv2 bias, output weights, output bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.conv1_filters.as_slice());
        v.extend_from_slice(&self.conv1_bias);
        v.extend_from_slice(self.conv2_filters.as_slice());
        v.extend_from_slice(&self.conv2_bias);
        v.extend_from_slice(&self.lr_weights);
        v.push(self.lr_bias);
        v
    }

    pub fn from_flat(dims: &ModelDims, flat: &[f64]) -> Result<Self> {
        if flat.len() != dims.n_params() {
            return Err(Error::Shape(format!(
                "{} values for a model with {} parameters",
                flat.len(),
                dims.n_params()
            )));
        }
        let mut p = ModelParams::zeros(dims);
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(p.conv1_filters.as_mut_slice());
        take(&mut p.conv1_bias);
        take(p.conv2_filters.as_mut_slice());
        take(&mut p.conv2_bias);
        take(&mut p.lr_weights);
        p.lr_bias = rest[0];
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.conv1_filters.is_finite()
            && self.conv2_filters.is_finite()
            && self
                .conv1_bias
                .iter()
                .chain(&self.conv2_bias)
                .chain(&self.lr_weights)
                .all(|v| v.is_finite())
            && self.lr_bias.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self += alpha · grad`. With `output_only`, the convolution blocks are
    /// left untouched.
    pub fn add_scaled(&mut self, alpha: f64, grad: &Gradients, output_only: bool) {
        fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
        if !output_only {
            axpy(
                self.conv1_filters.as_mut_slice(),
                alpha,
                grad.conv1_filters.as_slice(),
            );
            axpy(&mut self.conv1_bias, alpha, &grad.conv1_bias);
            axpy(
                self.conv2_filters.as_mut_slice(),
                alpha,
                grad.conv2_filters.as_slice(),
            );
            axpy(&mut self.conv2_bias, alpha, &grad.conv2_bias);
        }
        axpy(&mut self.lr_weights, alpha, &grad.lr_weights);
        self.lr_bias += alpha * grad.lr_bias;
    }
}

fn glorot(r: &mut rng::Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..rows * cols)
        .map(|_| r.random_range(-limit..=limit))
        .collect()
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(dims: &ModelDims, seed: u64) -> Result<ModelParams> {
    dims.validate()?;
    let mut r = rng::stream(seed, rng::streams::INIT);
    let (e, f1, f2) = (dims.embed_dim, dims.n_filters_1, dims.n_filters_2);
    let mut p = ModelParams::zeros(dims);
    p.conv1_filters = Dense2::from_vec(f1, 2 * e, glorot(&mut r, f1, 2 * e, 2 * e, f1))?;
    p.conv2_filters = Dense2::from_vec(f2, 2 * f1, glorot(&mut r, f2, 2 * f1, 2 * f1, f2))?;
    p.lr_weights = glorot(&mut r, 1, 3 * f2, 3 * f2, 1);
    Ok(p)
}

/// Intermediate values of one encoder pass, kept for the backward pass.
struct EncodeTrace {
    input: Dense2,
    h1: Dense2,
    p1_rows: usize,
    p1: Dense2,
    h2: Dense2,
    out: Vec<f64>,
}

fn encode_traced(params: &ModelParams, sent: &SentenceMatrix) -> Result<EncodeTrace> {
    if sent.dim() != params.conv1_filters.cols() / 2 {
        return Err(Error::DimMismatch {
            expected: params.conv1_filters.cols() / 2,
            found: sent.dim(),
        });
    }
    // Only populated rows take part; short sentences get one zero row.
    let input = sent.data().head_rows(sent.true_len().max(2));
    let h1 = conv_bigram(&input, &params.conv1_filters, &params.conv1_bias)?;
    let pooled = avg_pool2(&h1);
    let p1_rows = pooled.rows();
    let p1 = if p1_rows < 2 {
        pooled.head_rows(2)
    } else {
        pooled
    };
    let h2 = conv_bigram(&p1, &params.conv2_filters, &params.conv2_bias)?;
    let out = global_avg_pool(&h2);
    Ok(EncodeTrace {
        input,
        h1,
        p1_rows,
        p1,
        h2,
        out,
    })
}

/// Accumulates the encoder's parameter gradients for cotangent `grad_out`.
fn encode_backward(
    params: &ModelParams,
    trace: &EncodeTrace,
    grad_out: &[f64],
    grads: &mut Gradients,
) {
    let g_h2 = global_avg_pool_backward(grad_out, trace.h2.rows());
    let c2 = conv_bigram_backward(&trace.p1, &params.conv2_filters, &trace.h2, &g_h2);
    let g_p1 = c2.input.head_rows(trace.p1_rows);
    let g_h1 = avg_pool2_backward(&g_p1, trace.h1.rows());
    let c1 = conv_bigram_backward(&trace.input, &params.conv1_filters, &trace.h1, &g_h1);

    add_into(grads.conv1_filters.as_mut_slice(), c1.filters.as_slice());
    add_into(&mut grads.conv1_bias, &c1.bias);
    add_into(grads.conv2_filters.as_mut_slice(), c2.filters.as_slice());
    add_into(&mut grads.conv2_bias, &c2.bias);
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Sentence encoding of length `n_filters_2`.
pub fn encode(params: &ModelParams, sent: &SentenceMatrix) -> Result<Vec<f64>> {
    Ok(encode_traced(params, sent)?.out)
}

/// `[q; a; q ⊙ a]`
fn pair_features(eq: &[f64], ea: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * eq.len());
    v.extend_from_slice(eq);
    v.extend_from_slice(ea);
    v.extend(eq.iter().zip(ea).map(|(x, y)| x * y));
    v
}

fn logit(params: &ModelParams, features: &[f64]) -> f64 {
    params
        .lr_weights
        .iter()
        .zip(features)
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + params.lr_bias
}

/// Scores a pair whose question is already encoded.
pub fn score_encoded(params: &ModelParams, eq: &[f64], ea: &[f64]) -> f64 {
    sigmoid(logit(params, &pair_features(eq, ea)))
}

/// Probability that `a` answers `q`.
pub fn score(params: &ModelParams, q: &SentenceMatrix, a: &SentenceMatrix) -> Result<f64> {
    let eq = encode(params, q)?;
    let ea = encode(params, a)?;
    Ok(score_encoded(params, &eq, &ea))
}

/// One labeled pair for the loss.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub question: &'a SentenceMatrix,
    pub answer: &'a SentenceMatrix,
    pub label: bool,
    pub question_id: &'a str,
}

/// Mean cross-entropy of the batch.
pub fn loss(params: &ModelParams, batch: &[Example<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for ex in batch {
        let p = score(params, ex.question, ex.answer)?;
        let l = bce_loss(p, ex.label);
        if !l.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss for question {}",
                ex.question_id
            )));
        }
        total += l;
    }
    Ok(total / batch.len() as f64)
}

/// Mean cross-entropy of the batch and its gradient.
pub fn loss_and_grad(params: &ModelParams, batch: &[Example<'_>]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n_f2 = params.conv2_filters.rows();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = ModelParams::zeros(&params.dims(2));
    let mut total = 0.0;
    for ex in batch {
        let tq = encode_traced(params, ex.question)?;
        let ta = encode_traced(params, ex.answer)?;
        let features = pair_features(&tq.out, &ta.out);
        let p = sigmoid(logit(params, &features));
        let l = bce_loss(p, ex.label);
        if !l.is_finite() || !p.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss for question {}",
                ex.question_id
            )));
        }
        total += l;

        let dz = (p - if ex.label { 1.0 } else { 0.0 }) * scale;
        for (g, x) in grads.lr_weights.iter_mut().zip(&features) {
            *g += dz * x;
        }
        grads.lr_bias += dz;

        let w = &params.lr_weights;
        let mut g_q = vec![0.0; n_f2];
        let mut g_a = vec![0.0; n_f2];
        for k in 0..n_f2 {
            let wp = dz * w[2 * n_f2 + k];
            g_q[k] = dz * w[k] + wp * ta.out[k];
            g_a[k] = dz * w[n_f2 + k] + wp * tq.out[k];
        }
        encode_backward(params, &tq, &g_q, &mut grads);
        encode_backward(params, &ta, &g_a, &mut grads);
    }
    Ok((total * scale, grads))
}

#[derive(Serialize, Deserialize)]
struct NamedArray {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    dims: ModelDims,
    arrays: Vec<NamedArray>,
}

const ARRAY_NAMES: [&str; 6] = [
    "conv1_filters",
    "conv1_bias",
    "conv2_filters",
    "conv2_bias",
    "lr_weights",
    "lr_bias",
];

fn expected_shape(name: &str, d: &ModelDims) -> Vec<usize> {
    match name {
        "conv1_filters" => vec![d.n_filters_1, 2 * d.embed_dim],
        "conv1_bias" => vec![d.n_filters_1],
        "conv2_filters" => vec![d.n_filters_2, 2 * d.n_filters_1],
        "conv2_bias" => vec![d.n_filters_2],
        "lr_weights" => vec![3 * d.n_filters_2],
        _ => vec![1],
    }
}

/// Serializes parameters and dims as JSON. Floats are written in shortest
/// round-trip form, so a reload is bit-exact.
pub fn write_checkpoint<W: Write>(params: &ModelParams, dims: &ModelDims, writer: W) -> Result<()> {
    if !params.fits(dims) {
        return Err(Error::Checkpoint(
            "parameters do not match the given dims".into(),
        ));
    }
    let blocks: [Vec<f64>; 6] = [
        params.conv1_filters.as_slice().to_vec(),
        params.conv1_bias.clone(),
        params.conv2_filters.as_slice().to_vec(),
        params.conv2_bias.clone(),
        params.lr_weights.clone(),
        vec![params.lr_bias],
    ];
    let file = CheckpointFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        dims: *dims,
        arrays: ARRAY_NAMES
            .iter()
            .zip(blocks)
            .map(|(name, data)| NamedArray {
                name: (*name).to_owned(),
                shape: expected_shape(name, dims),
                data,
            })
            .collect(),
    };
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn read_checkpoint(text: &str) -> Result<(ModelParams, ModelDims)> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    let dims = file.dims;
    dims.validate()?;
    let mut flat = Vec::with_capacity(dims.n_params());
    for name in ARRAY_NAMES {
        let arr = file
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
        let shape = expected_shape(name, &dims);
        if arr.shape != shape {
            return Err(Error::Checkpoint(format!(
                "array {name} has shape {:?}, dims require {:?}",
                arr.shape, shape
            )));
        }
        if arr.data.len() != shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!(
                "array {name} holds {} values for shape {:?}",
                arr.data.len(),
                shape
            )));
        }
        flat.extend_from_slice(&arr.data);
    }
    let params = ModelParams::from_flat(&dims, &flat)?;
    if !params.is_finite() {
        return Err(Error::Checkpoint("non-finite weight".into()));
    }
    Ok((params, dims))
}

pub fn save_checkpoint(
    params: &ModelParams,
    dims: &ModelDims,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(params, dims, file)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, ModelDims)> {
    let path = path.as_ref();
    let mut text = String::new();
    std::io::Read::read_to_string(
        &mut BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?),
        &mut text,
    )
    .map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text)
}

/// Loads a checkpoint and requires its dims to equal `expected`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, expected: &ModelDims) -> Result<ModelParams> {
    let (params, dims) = load_checkpoint(path)?;
    if dims != *expected {
        return Err(Error::Checkpoint(format!(
            "checkpoint dims {dims:?} do not match experiment dims {expected:?}"
        )));
    }
    Ok(params)
}
