//! Forward pass with cached activations and the matching backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ops::{
    add_assign, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward_input,
    linear_backward_params, softmax_in_place, LnCache,
};
use super::weights::{ClassifierHead, EncoderWeights, Scalar};

/// Inverted dropout: each mask entry is 0 or 1/(1-p).
pub(crate) struct Dropout<'r> {
    pub p: f64,
    pub rng: &'r mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn mask<T: Scalar>(&mut self, len: usize) -> Vec<T> {
        let keep = T::of(1.0 / (1.0 - self.p));
        (0..len)
            .map(|_| if self.rng.random::<f64>() < self.p { T::zero() } else { keep })
            .collect()
    }
}

fn apply_mask<T: Scalar>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

struct LayerTrace<T> {
    ln1: LnCache<T>,
    a: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `[head][query][key]`, keys limited to the attended prefix.
    probs: Vec<T>,
    ctx: Vec<T>,
    mask1: Option<Vec<T>>,
    ln2: LnCache<T>,
    b: Vec<T>,
    u: Vec<T>,
    f: Vec<T>,
    mask2: Option<Vec<T>>,
}

/// Activations of one sequence. Rows are query positions `0..rows`; only
/// key positions `0..keys` are attended (the rest are padding).
pub(crate) struct Trace<T> {
    ids: Vec<u32>,
    pub rows: usize,
    keys: usize,
    mask0: Option<Vec<T>>,
    layers: Vec<LayerTrace<T>>,
    lnf: LnCache<T>,
    /// Final hidden states `[rows × d_model]`.
    pub hidden: Vec<T>,
}

pub(crate) fn encode<T: Scalar>(w: &EncoderWeights<T>, ids: &[u32], keys: usize, mut dropout: Option<Dropout>) -> Trace<T> {
    let c = &w.config;
    let (d, heads, ff) = (c.d_model, c.heads, c.ff_dim);
    let dh = d / heads;
    let rows = ids.len();
    let scale = T::of(1.0 / (dh as f64).sqrt());

    let mut x = Vec::with_capacity(rows * d);
    for (pos, &id) in ids.iter().enumerate() {
        let tok = &w.token_embedding[id as usize * d..(id as usize + 1) * d];
        let p = &w.position_embedding[pos * d..(pos + 1) * d];
        x.extend(tok.iter().zip(p).map(|(&a, &b)| a + b));
    }
    let mask0 = dropout.as_mut().map(|dr| dr.mask(rows * d));
    apply_mask(&mut x, &mask0);

    let mut layers = Vec::with_capacity(w.layers.len());
    for lw in &w.layers {
        let (a, ln1) = layer_norm(&x, &lw.ln1_gain, &lw.ln1_bias, d);
        let q = linear(&a, &lw.wq, &lw.bq, rows, d, d);
        let k = linear(&a[..keys * d], &lw.wk, &lw.bk, keys, d, d);
        let v = linear(&a[..keys * d], &lw.wv, &lw.bv, keys, d, d);
        let mut probs = Vec::with_capacity(heads * rows * keys);
        let mut ctx = vec![T::zero(); rows * d];
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..rows {
                let qi = &q[i * d..][cols.clone()];
                let start = probs.len();
                probs.extend((0..keys).map(|j| dot(qi, &k[j * d..][cols.clone()]) * scale));
                let p = &mut probs[start..];
                softmax_in_place(p);
                let out = &mut ctx[i * d..][cols.clone()];
                for (j, &pj) in p.iter().enumerate() {
                    for (o, &vv) in out.iter_mut().zip(&v[j * d..][cols.clone()]) {
                        *o += pj * vv;
                    }
                }
            }
        }
        let mut attn = linear(&ctx, &lw.wo, &lw.bo, rows, d, d);
        let mask1 = dropout.as_mut().map(|dr| dr.mask(rows * d));
        apply_mask(&mut attn, &mask1);
        add_assign(&mut x, &attn);

        let (b, ln2) = layer_norm(&x, &lw.ln2_gain, &lw.ln2_bias, d);
        let u = linear(&b, &lw.w1, &lw.b1, rows, d, ff);
        let f: Vec<T> = u.iter().map(|&z| gelu(z)).collect();
        let mut g = linear(&f, &lw.w2, &lw.b2, rows, ff, d);
        let mask2 = dropout.as_mut().map(|dr| dr.mask(rows * d));
        apply_mask(&mut g, &mask2);
        add_assign(&mut x, &g);

        layers.push(LayerTrace {
            ln1,
            a,
            q,
            k,
            v,
            probs,
            ctx,
            mask1,
            ln2,
            b,
            u,
            f,
            mask2,
        });
    }
    let (hidden, lnf) = layer_norm(&x, &w.final_gain, &w.final_bias, d);
    Trace {
        ids: ids.to_vec(),
        rows,
        keys,
        mask0,
        layers,
        lnf,
        hidden,
    }
}

/// Accumulate parameter gradients given `d_hidden`, the loss gradient with
/// respect to the final hidden states.
pub(crate) fn backward<T: Scalar>(w: &EncoderWeights<T>, trace: &Trace<T>, d_hidden: &[T], grads: &mut EncoderWeights<T>) {
    let c = &w.config;
    let (d, heads, ff) = (c.d_model, c.heads, c.ff_dim);
    let dh = d / heads;
    let (rows, keys) = (trace.rows, trace.keys);
    let scale = T::of(1.0 / (dh as f64).sqrt());

    let mut dx = layer_norm_backward(d_hidden, &trace.lnf, &w.final_gain, &mut grads.final_gain, &mut grads.final_bias, d);

    for (li, lt) in trace.layers.iter().enumerate().rev() {
        let lw = &w.layers[li];
        let lg = &mut grads.layers[li];

        // feed-forward residual branch
        let mut dg = dx.clone();
        apply_mask(&mut dg, &lt.mask2);
        linear_backward_params(&lt.f, &dg, &mut lg.w2, &mut lg.b2, ff, d);
        let df = linear_backward_input(&dg, &lw.w2, ff, d);
        let du: Vec<T> = df.iter().zip(&lt.u).map(|(&g, &z)| g * gelu_grad(z)).collect();
        linear_backward_params(&lt.b, &du, &mut lg.w1, &mut lg.b1, d, ff);
        let db = linear_backward_input(&du, &lw.w1, d, ff);
        let dx_ln2 = layer_norm_backward(&db, &lt.ln2, &lw.ln2_gain, &mut lg.ln2_gain, &mut lg.ln2_bias, d);
        add_assign(&mut dx, &dx_ln2);

        // attention residual branch
        let mut dattn = dx.clone();
        apply_mask(&mut dattn, &lt.mask1);
        linear_backward_params(&lt.ctx, &dattn, &mut lg.wo, &mut lg.bo, d, d);
        let dctx = linear_backward_input(&dattn, &lw.wo, d, d);
        let mut dq = vec![T::zero(); rows * d];
        let mut dk = vec![T::zero(); keys * d];
        let mut dv = vec![T::zero(); keys * d];
        let mut dp = vec![T::zero(); keys];
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..rows {
                let p = &lt.probs[(h * rows + i) * keys..][..keys];
                let dci = &dctx[i * d..][cols.clone()];
                let mut weighted = T::zero();
                for j in 0..keys {
                    dp[j] = dot(dci, &lt.v[j * d..][cols.clone()]);
                    weighted += p[j] * dp[j];
                    for (g, &dcv) in dv[j * d..][cols.clone()].iter_mut().zip(dci) {
                        *g += p[j] * dcv;
                    }
                }
                let qi = &lt.q[i * d..][cols.clone()];
                for j in 0..keys {
                    let ds = p[j] * (dp[j] - weighted) * scale;
                    let kj = &lt.k[j * d..][cols.clone()];
                    for (g, &kv) in dq[i * d..][cols.clone()].iter_mut().zip(kj) {
                        *g += ds * kv;
                    }
                    for (g, &qv) in dk[j * d..][cols.clone()].iter_mut().zip(qi) {
                        *g += ds * qv;
                    }
                }
            }
        }
        linear_backward_params(&lt.a, &dq, &mut lg.wq, &mut lg.bq, d, d);
        linear_backward_params(&lt.a[..keys * d], &dk, &mut lg.wk, &mut lg.bk, d, d);
        linear_backward_params(&lt.a[..keys * d], &dv, &mut lg.wv, &mut lg.bv, d, d);
        let mut da = linear_backward_input(&dq, &lw.wq, d, d);
        let da_k = linear_backward_input(&dk, &lw.wk, d, d);
        let da_v = linear_backward_input(&dv, &lw.wv, d, d);
        add_assign(&mut da[..keys * d], &da_k);
        add_assign(&mut da[..keys * d], &da_v);
        let dx_ln1 = layer_norm_backward(&da, &lt.ln1, &lw.ln1_gain, &mut lg.ln1_gain, &mut lg.ln1_bias, d);
        add_assign(&mut dx, &dx_ln1);
    }

    apply_mask(&mut dx, &trace.mask0);
    for (pos, (&id, g)) in trace.ids.iter().zip(dx.chunks_exact(d)).enumerate() {
        add_assign(&mut grads.token_embedding[id as usize * d..(id as usize + 1) * d], g);
        add_assign(&mut grads.position_embedding[pos * d..(pos + 1) * d], g);
    }
}

/// Cross-entropy of the `[CLS]` classifier. Accumulates head gradients and
/// returns `(loss, probabilities, d_hidden)`; `d_hidden` is zero outside row 0.
pub(crate) fn classifier_loss<T: Scalar>(
    head: &ClassifierHead<T>,
    trace: &Trace<T>,
    label: usize,
    head_grads: &mut ClassifierHead<T>,
) -> (T, [T; 2], Vec<T>) {
    let d = head.d_model();
    let h = &trace.hidden[..d];
    let mut p = head.logits(h);
    softmax_in_place(&mut p);
    let loss = -p[label].ln();
    let mut d_hidden = vec![T::zero(); trace.hidden.len()];
    for c in 0..2 {
        let g = p[c] - if c == label { T::one() } else { T::zero() };
        head_grads.bias[c] += g;
        let row = &head.weight[c * d..(c + 1) * d];
        for j in 0..d {
            head_grads.weight[c * d + j] += g * h[j];
            d_hidden[j] += g * row[j];
        }
    }
    (loss, p, d_hidden)
}

/// Masked-token cross-entropy with the output projection tied to the token
/// embeddings plus a separate bias. Returns the summed loss over `targets`,
/// the number of correct argmax predictions, and `d_hidden`.
pub(crate) fn mlm_loss<T: Scalar>(
    w: &EncoderWeights<T>,
    mlm_bias: &[T],
    trace: &Trace<T>,
    targets: &[(usize, u32)],
    grads: &mut EncoderWeights<T>,
    bias_grads: &mut [T],
) -> (T, usize, Vec<T>) {
    let d = w.config.d_model;
    let vocab = w.config.vocab_size;
    let mut d_hidden = vec![T::zero(); trace.hidden.len()];
    let mut loss = T::zero();
    let mut correct = 0;
    let mut logits = vec![T::zero(); vocab];
    for &(pos, target) in targets {
        let hrow = &trace.hidden[pos * d..(pos + 1) * d];
        for (t, l) in logits.iter_mut().enumerate() {
            *l = dot(hrow, &w.token_embedding[t * d..(t + 1) * d]) + mlm_bias[t];
        }
        let best = (0..vocab).fold(0, |b, t| if logits[t] > logits[b] { t } else { b });
        correct += usize::from(best == target as usize);
        softmax_in_place(&mut logits);
        loss += -logits[target as usize].ln();
        logits[target as usize] -= T::one();
        let dh = &mut d_hidden[pos * d..(pos + 1) * d];
        for (t, &g) in logits.iter().enumerate() {
            bias_grads[t] += g;
            let emb = &w.token_embedding[t * d..(t + 1) * d];
            let gemb = &mut grads.token_embedding[t * d..(t + 1) * d];
            for j in 0..d {
                dh[j] += g * emb[j];
                gemb[j] += g * hrow[j];
            }
        }
    }
    (loss, correct, d_hidden)
}
