//! Parameters, forward pass and hand-written backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::matrix::{dot, Matrix};
use super::{EncoderError, Hyperparams};
use crate::corpus::Label;
use crate::tokens::InputSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
    pub output: Matrix,
    pub ln1_scale: Vec<f64>,
    pub ln1_shift: Vec<f64>,
    pub ffn_w1: Matrix,
    pub ffn_b1: Vec<f64>,
    pub ffn_w2: Matrix,
    pub ffn_b2: Vec<f64>,
    pub ln2_scale: Vec<f64>,
    pub ln2_shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParameters {
    pub token_embedding: Matrix,
    /// The single segment row.
    pub segment_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<LayerParams>,
    /// `d_model × 2`, column 0 is clean.
    pub classifier_weight: Matrix,
    pub classifier_bias: Vec<f64>,
}

/// A borrowed named tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl EncoderParameters {
    /// All-zero parameters of the given shape, LayerNorm scales included.
    pub fn zeros(vocab_size: usize, hp: &Hyperparams) -> Self {
        let d = hp.d_model;
        let layer = LayerParams {
            query: Matrix::zeros(d, d),
            key: Matrix::zeros(d, d),
            value: Matrix::zeros(d, d),
            output: Matrix::zeros(d, d),
            ln1_scale: vec![0.0; d],
            ln1_shift: vec![0.0; d],
            ffn_w1: Matrix::zeros(d, hp.d_ff),
            ffn_b1: vec![0.0; hp.d_ff],
            ffn_w2: Matrix::zeros(hp.d_ff, d),
            ffn_b2: vec![0.0; d],
            ln2_scale: vec![0.0; d],
            ln2_shift: vec![0.0; d],
        };
        Self {
            token_embedding: Matrix::zeros(vocab_size, d),
            segment_embedding: Matrix::zeros(1, d),
            position_embedding: Matrix::zeros(hp.max_len, d),
            layers: vec![layer; hp.num_layers],
            classifier_weight: Matrix::zeros(d, 2),
            classifier_bias: vec![0.0; 2],
        }
    }

    /// Weights uniform in `(-scale, scale)`, LayerNorm scale 1 and shift 0.
    /// Tensors are filled in [`tensors`](Self::tensors) order.
    pub fn init(vocab_size: usize, hp: &Hyperparams, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let mut p = Self::zeros(vocab_size, hp);
        p.for_each_tensor_mut(|name, data| {
            let layer_norm_scale = name.ends_with(".scale");
            let layer_norm_shift = name.ends_with(".shift");
            for x in data.iter_mut() {
                *x = if layer_norm_scale {
                    1.0
                } else if layer_norm_shift {
                    0.0
                } else {
                    rng.gen_range(-scale..scale)
                };
            }
        });
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.rows
    }

    /// Every tensor with its canonical name, in a fixed order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        fn m<'a>(name: String, x: &'a Matrix) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: vec![x.rows, x.cols],
                data: &x.data,
            }
        }
        fn v<'a>(name: String, x: &'a [f64]) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: vec![x.len()],
                data: x,
            }
        }
        let mut out = vec![
            m("token_embedding".into(), &self.token_embedding),
            m("segment_embedding".into(), &self.segment_embedding),
            m("position_embedding".into(), &self.position_embedding),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.extend([
                m(format!("layer{i}.attention.query"), &l.query),
                m(format!("layer{i}.attention.key"), &l.key),
                m(format!("layer{i}.attention.value"), &l.value),
                m(format!("layer{i}.attention.output"), &l.output),
                v(format!("layer{i}.ln1.scale"), &l.ln1_scale),
                v(format!("layer{i}.ln1.shift"), &l.ln1_shift),
                m(format!("layer{i}.ffn.w1"), &l.ffn_w1),
                v(format!("layer{i}.ffn.b1"), &l.ffn_b1),
                m(format!("layer{i}.ffn.w2"), &l.ffn_w2),
                v(format!("layer{i}.ffn.b2"), &l.ffn_b2),
                v(format!("layer{i}.ln2.scale"), &l.ln2_scale),
                v(format!("layer{i}.ln2.shift"), &l.ln2_shift),
            ]);
        }
        out.push(m("classifier.weight".into(), &self.classifier_weight));
        out.push(v("classifier.bias".into(), &self.classifier_bias));
        out
    }

    /// Visits every tensor mutably, in [`tensors`](Self::tensors) order.
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        f("token_embedding", &mut self.token_embedding.data);
        f("segment_embedding", &mut self.segment_embedding.data);
        f("position_embedding", &mut self.position_embedding.data);
        for (i, l) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{i}.attention.query"), &mut l.query.data);
            f(&format!("layer{i}.attention.key"), &mut l.key.data);
            f(&format!("layer{i}.attention.value"), &mut l.value.data);
            f(&format!("layer{i}.attention.output"), &mut l.output.data);
            f(&format!("layer{i}.ln1.scale"), &mut l.ln1_scale);
            f(&format!("layer{i}.ln1.shift"), &mut l.ln1_shift);
            f(&format!("layer{i}.ffn.w1"), &mut l.ffn_w1.data);
            f(&format!("layer{i}.ffn.b1"), &mut l.ffn_b1);
            f(&format!("layer{i}.ffn.w2"), &mut l.ffn_w2.data);
            f(&format!("layer{i}.ffn.b2"), &mut l.ffn_b2);
            f(&format!("layer{i}.ln2.scale"), &mut l.ln2_scale);
            f(&format!("layer{i}.ln2.shift"), &mut l.ln2_shift);
        }
        f("classifier.weight", &mut self.classifier_weight.data);
        f("classifier.bias", &mut self.classifier_bias);
    }

    /// Pairs up the tensors of `self` and `other` (same shapes) in order.
    pub fn zip_mut(&mut self, other: &EncoderParameters, mut f: impl FnMut(&str, &mut [f64], &[f64])) {
        let others: Vec<&[f64]> = other.tensors().into_iter().map(|t| t.data).collect();
        let mut i = 0;
        self.for_each_tensor_mut(|name, data| {
            f(name, data, others[i]);
            i += 1;
        });
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &EncoderParameters) {
        self.zip_mut(other, |_, a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        });
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_tensor_mut(|_, data| data.iter_mut().for_each(|x| *x *= factor));
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Checks that every shape agrees with `hp`.
    pub fn check_shapes(&self, hp: &Hyperparams) -> Result<(), EncoderError> {
        let expected = Self::zeros(self.vocab_size(), hp);
        let got = self.tensors();
        let want = expected.tensors();
        if got.len() != want.len() {
            return Err(EncoderError::ShapeMismatch(format!(
                "{} tensors, expected {}",
                got.len(),
                want.len()
            )));
        }
        for (g, w) in got.iter().zip(&want) {
            if g.shape != w.shape {
                return Err(EncoderError::ShapeMismatch(format!(
                    "{} has shape {:?}, expected {:?}",
                    g.name, g.shape, w.shape
                )));
            }
        }
        Ok(())
    }
}

/// Class probabilities for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub instance_id: String,
    /// `(p_clean, p_buggy)`
    pub probs: (f64, f64),
    pub label: Label,
}

impl Prediction {
    pub fn from_probs(instance_id: impl Into<String>, probs: (f64, f64)) -> Self {
        // Ties go to clean.
        let label = if probs.1 > probs.0 {
            Label::Buggy
        } else {
            Label::Clean
        };
        Self {
            instance_id: instance_id.into(),
            probs,
            label,
        }
    }
}

/// Row `i` is `TE[ids[i]] + SE[0] + PE[i]`.
pub fn embed(input: &InputSequence, params: &EncoderParameters) -> Result<Matrix, EncoderError> {
    let len = input.ids.len();
    if len > params.position_embedding.rows {
        return Err(EncoderError::SequenceTooLong {
            len,
            max: params.position_embedding.rows,
        });
    }
    let d = params.token_embedding.cols;
    let mut x = Matrix::zeros(len, d);
    for (i, &id) in input.ids.iter().enumerate() {
        if id as usize >= params.vocab_size() {
            return Err(EncoderError::IdOutOfRange {
                id,
                vocab_size: params.vocab_size(),
            });
        }
        let te = params.token_embedding.row(id as usize);
        let se = params.segment_embedding.row(0);
        let pe = params.position_embedding.row(i);
        for (j, out) in x.row_mut(i).iter_mut().enumerate() {
            *out = te[j] + se[j] + pe[j];
        }
    }
    Ok(x)
}

/// `softmax(QKᵀ/√d_k)` with masked keys at −∞. Returns the weights.
pub fn attention_weights(q: &Matrix, k: &Matrix, mask: &[u8]) -> Result<Matrix, EncoderError> {
    if q.cols != k.cols || k.rows != mask.len() {
        return Err(EncoderError::ShapeMismatch(format!(
            "attention Q {}x{}, K {}x{}, mask {}",
            q.rows,
            q.cols,
            k.rows,
            k.cols,
            mask.len()
        )));
    }
    let scale = 1.0 / (k.cols as f64).sqrt();
    let mut s = q.matmul_t(k);
    for r in 0..s.rows {
        let row = s.row_mut(r);
        let mut max = f64::NEG_INFINITY;
        for (x, &m) in row.iter_mut().zip(mask) {
            if m == 0 {
                *x = f64::NEG_INFINITY;
            } else {
                *x *= scale;
                max = max.max(*x);
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(EncoderError::AllMaskedRow(r));
        }
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    Ok(s)
}

/// Scaled dot-product attention.
pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix, mask: &[u8]) -> Result<Matrix, EncoderError> {
    if v.rows != k.rows {
        return Err(EncoderError::ShapeMismatch(format!(
            "attention K has {} rows, V has {}",
            k.rows, v.rows
        )));
    }
    Ok(attention_weights(q, k, mask)?.matmul(v))
}

/// Row-wise LayerNorm. Returns the output and the normalized rows before
/// scale/shift together with each row's `1/√(var+ε)`.
pub fn layer_norm(
    x: &Matrix,
    scale: &[f64],
    shift: &[f64],
    eps: f64,
) -> (Matrix, Matrix, Vec<f64>) {
    let n = x.cols as f64;
    let mut out = Matrix::zeros(x.rows, x.cols);
    let mut normed = Matrix::zeros(x.rows, x.cols);
    let mut inv_std = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std.push(inv);
        for (j, &v) in row.iter().enumerate() {
            let h = (v - mean) * inv;
            normed[(r, j)] = h;
            out[(r, j)] = h * scale[j] + shift[j];
        }
    }
    (out, normed, inv_std)
}

struct LayerCache {
    input: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    weights: Vec<Matrix>,
    concat: Matrix,
    ln1_normed: Matrix,
    ln1_inv: Vec<f64>,
    y: Matrix,
    hidden_pre: Matrix,
    hidden: Matrix,
    ln2_normed: Matrix,
    ln2_inv: Vec<f64>,
}

fn layer_forward(
    x: &Matrix,
    p: &LayerParams,
    mask: &[u8],
    hp: &Hyperparams,
) -> Result<(Matrix, LayerCache), EncoderError> {
    let d = hp.d_model;
    if x.cols != d {
        return Err(EncoderError::ShapeMismatch(format!(
            "layer input has {} columns, d_model is {d}",
            x.cols
        )));
    }
    if x.rows != mask.len() {
        return Err(EncoderError::ShapeMismatch(format!(
            "layer input has {} rows, mask has {}",
            x.rows,
            mask.len()
        )));
    }
    let dk = d / hp.num_heads;
    let q = x.matmul(&p.query);
    let k = x.matmul(&p.key);
    let v = x.matmul(&p.value);
    let mut concat = Matrix::zeros(x.rows, d);
    let mut weights = Vec::with_capacity(hp.num_heads);
    for h in 0..hp.num_heads {
        let (qh, kh, vh) = (q.col_slice(h * dk, dk), k.col_slice(h * dk, dk), v.col_slice(h * dk, dk));
        let w = attention_weights(&qh, &kh, mask)?;
        concat.set_col_slice(h * dk, &w.matmul(&vh));
        weights.push(w);
    }
    let mut r1 = concat.matmul(&p.output);
    r1.add_assign(x);
    let (y, ln1_normed, ln1_inv) = layer_norm(&r1, &p.ln1_scale, &p.ln1_shift, hp.ln_epsilon);

    let mut hidden_pre = y.matmul(&p.ffn_w1);
    hidden_pre.add_row_vector(&p.ffn_b1);
    let mut hidden = hidden_pre.clone();
    hidden.data.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut r2 = hidden.matmul(&p.ffn_w2);
    r2.add_row_vector(&p.ffn_b2);
    r2.add_assign(&y);
    let (z, ln2_normed, ln2_inv) = layer_norm(&r2, &p.ln2_scale, &p.ln2_shift, hp.ln_epsilon);

    let cache = LayerCache {
        input: x.clone(),
        q,
        k,
        v,
        weights,
        concat,
        ln1_normed,
        ln1_inv,
        y,
        hidden_pre,
        hidden,
        ln2_normed,
        ln2_inv,
    };
    Ok((z, cache))
}

/// One encoder layer: `Y = LN(X + MultiHead(X))`, `Z = LN(Y + FFN(Y))`.
pub fn encoder_layer(
    x: &Matrix,
    p: &LayerParams,
    mask: &[u8],
    hp: &Hyperparams,
) -> Result<Matrix, EncoderError> {
    Ok(layer_forward(x, p, mask, hp)?.0)
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    cls: Vec<f64>,
    probs: [f64; 2],
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Softmax over two classifier logits, `(p_clean, p_buggy)`.
pub fn class_probs(logits: (f64, f64)) -> (f64, f64) {
    let p = softmax2([logits.0, logits.1]);
    (p[0], p[1])
}

fn forward_cached(
    input: &InputSequence,
    params: &EncoderParameters,
    hp: &Hyperparams,
) -> Result<ForwardCache, EncoderError> {
    if params.layers.len() != hp.num_layers || params.token_embedding.cols != hp.d_model {
        return Err(EncoderError::ShapeMismatch(
            "parameters do not match hyperparameters".into(),
        ));
    }
    if input.mask.len() != input.ids.len() {
        return Err(EncoderError::ShapeMismatch("mask length differs from ids".into()));
    }
    let mut x = embed(input, params)?;
    let mut layers = Vec::with_capacity(hp.num_layers);
    for p in &params.layers {
        let (z, cache) = layer_forward(&x, p, &input.mask, hp)?;
        layers.push(cache);
        x = z;
    }
    if x.rows == 0 {
        return Err(EncoderError::ShapeMismatch("empty input sequence".into()));
    }
    let cls = x.row(0).to_vec();
    let w = &params.classifier_weight;
    let mut logits = [params.classifier_bias[0], params.classifier_bias[1]];
    for (j, &h) in cls.iter().enumerate() {
        logits[0] += h * w[(j, 0)];
        logits[1] += h * w[(j, 1)];
    }
    Ok(ForwardCache {
        layers,
        cls,
        probs: softmax2(logits),
    })
}

/// Class probabilities from the final `[CLS]` hidden state.
pub fn forward(
    input: &InputSequence,
    params: &EncoderParameters,
    hp: &Hyperparams,
) -> Result<(f64, f64), EncoderError> {
    let c = forward_cached(input, params, hp)?;
    Ok((c.probs[0], c.probs[1]))
}

/// Hidden states after the last layer, one row per position.
pub fn encode(
    input: &InputSequence,
    params: &EncoderParameters,
    hp: &Hyperparams,
) -> Result<Matrix, EncoderError> {
    let mut x = embed(input, params)?;
    for p in &params.layers {
        x = encoder_layer(&x, p, &input.mask, hp)?;
    }
    Ok(x)
}

/// Probability floor applied before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy `−ln p[label]`.
pub fn loss(probs: (f64, f64), label: Label) -> f64 {
    let p = match label {
        Label::Clean => probs.0,
        Label::Buggy => probs.1,
    };
    -p.max(PROB_FLOOR).ln()
}

fn layer_norm_backward(d_out: &Matrix, normed: &Matrix, inv_std: &[f64], scale: &[f64], d_scale: &mut [f64], d_shift: &mut [f64]) -> Matrix {
    let n = d_out.cols as f64;
    let mut dx = Matrix::zeros(d_out.rows, d_out.cols);
    let mut dn = vec![0.0; d_out.cols];
    for r in 0..d_out.rows {
        let g = d_out.row(r);
        let h = normed.row(r);
        for j in 0..g.len() {
            d_scale[j] += g[j] * h[j];
            d_shift[j] += g[j];
            dn[j] = g[j] * scale[j];
        }
        let mean_dn = dn.iter().sum::<f64>() / n;
        let mean_dn_h = dot(&dn, h) / n;
        for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
            *out = inv_std[r] * (dn[j] - mean_dn - h[j] * mean_dn_h);
        }
    }
    dx
}

fn layer_backward(
    dz: &Matrix,
    p: &LayerParams,
    c: &LayerCache,
    g: &mut LayerParams,
    hp: &Hyperparams,
) -> Matrix {
    let dk = hp.d_model / hp.num_heads;
    let scale = 1.0 / (dk as f64).sqrt();

    let dr2 = layer_norm_backward(dz, &c.ln2_normed, &c.ln2_inv, &p.ln2_scale, &mut g.ln2_scale, &mut g.ln2_shift);
    c.hidden.t_matmul_into(&dr2, &mut g.ffn_w2);
    dr2.sum_rows_into(&mut g.ffn_b2);
    let mut dh = dr2.matmul_t(&p.ffn_w2);
    for (d, &pre) in dh.data.iter_mut().zip(&c.hidden_pre.data) {
        if pre <= 0.0 {
            *d = 0.0;
        }
    }
    c.y.t_matmul_into(&dh, &mut g.ffn_w1);
    dh.sum_rows_into(&mut g.ffn_b1);
    let mut dy = dh.matmul_t(&p.ffn_w1);
    dy.add_assign(&dr2);

    let dr1 = layer_norm_backward(&dy, &c.ln1_normed, &c.ln1_inv, &p.ln1_scale, &mut g.ln1_scale, &mut g.ln1_shift);
    c.concat.t_matmul_into(&dr1, &mut g.output);
    let dconcat = dr1.matmul_t(&p.output);

    let rows = dz.rows;
    let mut dq = Matrix::zeros(rows, hp.d_model);
    let mut dkm = Matrix::zeros(rows, hp.d_model);
    let mut dv = Matrix::zeros(rows, hp.d_model);
    for (h, w) in c.weights.iter().enumerate() {
        let off = h * dk;
        let d_o = dconcat.col_slice(off, dk);
        let (qh, kh, vh) = (c.q.col_slice(off, dk), c.k.col_slice(off, dk), c.v.col_slice(off, dk));
        let dw = d_o.matmul_t(&vh);
        let mut dvh = Matrix::zeros(rows, dk);
        w.t_matmul_into(&d_o, &mut dvh);
        let mut ds = Matrix::zeros(rows, rows);
        for r in 0..rows {
            let wr = w.row(r);
            let dwr = dw.row(r);
            let row_dot = dot(wr, dwr);
            for (j, out) in ds.row_mut(r).iter_mut().enumerate() {
                *out = wr[j] * (dwr[j] - row_dot) * scale;
            }
        }
        let dqh = ds.matmul(&kh);
        let mut dkh = Matrix::zeros(rows, dk);
        ds.t_matmul_into(&qh, &mut dkh);
        dq.set_col_slice(off, &dqh);
        dkm.set_col_slice(off, &dkh);
        dv.set_col_slice(off, &dvh);
    }
    c.input.t_matmul_into(&dq, &mut g.query);
    c.input.t_matmul_into(&dkm, &mut g.key);
    c.input.t_matmul_into(&dv, &mut g.value);
    let mut dx = dr1;
    dx.add_assign(&dq.matmul_t(&p.query));
    dx.add_assign(&dkm.matmul_t(&p.key));
    dx.add_assign(&dv.matmul_t(&p.value));
    dx
}

/// Loss of one example and the gradient of that loss with respect to every
/// parameter, accumulated into `grads`.
pub fn backprop_into(
    input: &InputSequence,
    label: Label,
    params: &EncoderParameters,
    hp: &Hyperparams,
    grads: &mut EncoderParameters,
) -> Result<f64, EncoderError> {
    let cache = forward_cached(input, params, hp)?;
    let probs = (cache.probs[0], cache.probs[1]);
    let loss = loss(probs, label);

    // Past the floor the loss is constant, so its gradient is zero.
    let y = label.index();
    if cache.probs[y] < PROB_FLOOR {
        return Ok(loss);
    }
    let mut dlogits = cache.probs;
    dlogits[y] -= 1.0;

    let d = hp.d_model;
    let mut dz = Matrix::zeros(input.ids.len(), d);
    for j in 0..d {
        grads.classifier_weight[(j, 0)] += cache.cls[j] * dlogits[0];
        grads.classifier_weight[(j, 1)] += cache.cls[j] * dlogits[1];
        dz[(0, j)] = params.classifier_weight[(j, 0)] * dlogits[0]
            + params.classifier_weight[(j, 1)] * dlogits[1];
    }
    grads.classifier_bias[0] += dlogits[0];
    grads.classifier_bias[1] += dlogits[1];

    for i in (0..params.layers.len()).rev() {
        dz = layer_backward(&dz, &params.layers[i], &cache.layers[i], &mut grads.layers[i], hp);
    }

    for (i, &id) in input.ids.iter().enumerate() {
        let row = dz.row(i);
        for (a, b) in grads.token_embedding.row_mut(id as usize).iter_mut().zip(row) {
            *a += b;
        }
        for (a, b) in grads.segment_embedding.row_mut(0).iter_mut().zip(row) {
            *a += b;
        }
        for (a, b) in grads.position_embedding.row_mut(i).iter_mut().zip(row) {
            *a += b;
        }
    }
    Ok(loss)
}

/// Loss and gradient of one example.
pub fn backprop(
    input: &InputSequence,
    label: Label,
    params: &EncoderParameters,
    hp: &Hyperparams,
) -> Result<(f64, EncoderParameters), EncoderError> {
    let mut grads = EncoderParameters::zeros(params.vocab_size(), hp);
    let loss = backprop_into(input, label, params, hp, &mut grads)?;
    Ok((loss, grads))
}
