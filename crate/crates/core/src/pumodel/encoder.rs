//! Pre-LN transformer encoder over flat `f64` parameters, with a hand-written
//! backward pass.
//!
//! Only the `[CLS]` row of the last block is ever needed, so that block
//! computes a single query row. Everything the first block derives from a
//! position (layer norm, Q/K/V projections) depends only on the `(token,
//! position)` pair, so within a batch those are computed once per distinct
//! pair. Padding positions are never touched, which makes the output exactly
//! invariant to padding.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::vocab::PAD;
use super::{line_loss, line_loss_derivative, ModelConfig};
use crate::math::{self, axpy, dot};
use crate::weaklabel::WeakLabel;
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Offsets of one block's tensors in the flat parameter vector. Weight
/// matrices are stored `[out][in]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embed: usize,
    pub blocks: Vec<BlockLayout>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
}

impl Layout {
    fn new(vocab: usize, d: usize, hidden: usize, layers: usize) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let at = next;
            next += n;
            at
        };
        let embed = take(vocab * d);
        let blocks = (0..layers)
            .map(|_| BlockLayout {
                ln1_g: take(d),
                ln1_b: take(d),
                wq: take(d * d),
                bq: take(d),
                wk: take(d * d),
                bk: take(d),
                wv: take(d * d),
                bv: take(d),
                wo: take(d * d),
                bo: take(d),
                ln2_g: take(d),
                ln2_b: take(d),
                w1: take(hidden * d),
                b1: take(hidden),
                w2: take(d * hidden),
                b2: take(d),
            })
            .collect();
        let lnf_g = take(d);
        let lnf_b = take(d);
        let head_w = take(d * d);
        let head_b = take(d);
        Layout { embed, blocks, lnf_g, lnf_b, head_w, head_b, total: next }
    }

    /// Ranges holding layer-norm gains (initialized to 1) and biases (0).
    fn norm_ranges(&self, d: usize) -> Vec<(usize, f64)> {
        let mut r = Vec::new();
        for b in &self.blocks {
            r.extend([(b.ln1_g, 1.0), (b.ln1_b, 0.0), (b.ln2_g, 1.0), (b.ln2_b, 0.0)]);
        }
        r.extend([(self.lnf_g, 1.0), (self.lnf_b, 0.0)]);
        r.into_iter().map(|(at, v)| (at / d * d, v)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    d: usize,
    heads: usize,
    hidden: usize,
    max_len: usize,
    vocab: usize,
    dropout: f64,
    layout: Layout,
    /// Sinusoidal position table, `max_len × d`.
    pe: Vec<f64>,
    embed_scale: f64,
}

/// Per-batch memo of first-block quantities keyed by `(token, position)`.
struct FirstBlockCache {
    keys: Vec<u64>,
    tok: Vec<u32>,
    xhat: Vec<f64>,
    rstd: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    has_q: Vec<bool>,
    k: Vec<f64>,
    v: Vec<f64>,
    dq: Vec<f64>,
    dk: Vec<f64>,
    dv: Vec<f64>,
}

/// Everything the backward pass needs from one block of one line.
#[derive(Default)]
struct BlockTape {
    rows: usize,
    // per-position first norm and projections (blocks after the first only)
    xhat1: Vec<f64>,
    rstd1: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    mask1: Vec<f64>,
    xhat2: Vec<f64>,
    rstd2: Vec<f64>,
    b: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    mask2: Vec<f64>,
}

struct LineTape {
    len: usize,
    entries: Vec<usize>,
    blocks: Vec<BlockTape>,
    yhat: Vec<f64>,
    rstd_f: f64,
    y: Vec<f64>,
    z: Vec<f64>,
}

/// Number of non-padding ids at the front of a padded input.
pub(crate) fn valid_len(ids: &[u32]) -> usize {
    ids.iter().position(|&t| t == PAD).unwrap_or(ids.len())
}

#[inline]
fn linear(p: &[f64], w: usize, b: usize, n_out: usize, n_in: usize, x: &[f64], y: &mut [f64]) {
    for j in 0..n_out {
        y[j] = p[b + j] + dot(&p[w + j * n_in..w + (j + 1) * n_in], x);
    }
}

/// Accumulates weight/bias gradients and, if given, `dx += Wᵀ dy`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn linear_backward(p: &[f64], g: &mut [f64], w: usize, b: usize, n_out: usize, n_in: usize, x: &[f64], dy: &[f64], mut dx: Option<&mut [f64]>) {
    for j in 0..n_out {
        let d = dy[j];
        if d == 0.0 {
            continue;
        }
        g[b + j] += d;
        axpy(d, x, &mut g[w + j * n_in..w + (j + 1) * n_in]);
        if let Some(dx) = dx.as_deref_mut() {
            axpy(d, &p[w + j * n_in..w + (j + 1) * n_in], dx);
        }
    }
}

/// Returns `1/σ`; writes the normalized input and the affine output.
#[inline]
fn layer_norm(p: &[f64], g: usize, b: usize, x: &[f64], xhat: &mut [f64], out: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / math::sqrt(var + LN_EPS);
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * rstd;
        out[i] = xhat[i] * p[g + i] + p[b + i];
    }
    rstd
}

/// `dx += ∂/∂x`, plus gain/bias gradients.
#[inline]
#[allow(clippy::too_many_arguments)]
fn layer_norm_backward(p: &[f64], grads: &mut [f64], g: usize, b: usize, xhat: &[f64], rstd: f64, dout: &[f64], dx: &mut [f64]) {
    let n = xhat.len();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        grads[g + i] += dout[i] * xhat[i];
        grads[b + i] += dout[i];
        let dh = dout[i] * p[g + i];
        m1 += dh;
        m2 += dh * xhat[i];
    }
    m1 /= n as f64;
    m2 /= n as f64;
    for i in 0..n {
        let dh = dout[i] * p[g + i];
        dx[i] += rstd * (dh - m1 - xhat[i] * m2);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[inline]
fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::tanh(GELU_C * (x + 0.044715 * x * x * x)))
}

#[inline]
fn gelu_derivative(x: f64) -> f64 {
    let t = math::tanh(GELU_C * (x + 0.044715 * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn dropout_mask(rng: &mut Option<&mut ChaCha8Rng>, rate: f64, n: usize) -> Vec<f64> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect()
        }
        _ => Vec::new(),
    }
}

#[inline]
fn apply_mask(mask: &[f64], x: &mut [f64]) {
    if !mask.is_empty() {
        for (v, m) in x.iter_mut().zip(mask) {
            *v *= m;
        }
    }
}

fn check_finite(v: &[f64], at: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(at))
    }
}

impl Encoder {
    pub fn new(cfg: &ModelConfig, vocab_size: usize) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let mut pe = vec![0.0; cfg.max_len * d];
        for pos in 0..cfg.max_len {
            for i in 0..d / 2 {
                let angle = pos as f64 / math::powf(10_000.0, (2 * i) as f64 / d as f64);
                pe[pos * d + 2 * i] = math::sin(angle);
                pe[pos * d + 2 * i + 1] = math::cos(angle);
            }
        }
        Ok(Encoder {
            d,
            heads: cfg.n_heads,
            hidden: cfg.hidden_dim,
            max_len: cfg.max_len,
            vocab: vocab_size,
            dropout: cfg.dropout_rate,
            layout: Layout::new(vocab_size, d, cfg.hidden_dim, cfg.n_layers),
            pe,
            embed_scale: math::sqrt(d as f64),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    /// Uniform in `[-1/√d, 1/√d]`, except the output head weights
    /// (`[-1/d, 1/d]`) and layer norms (gain 1, bias 0).
    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let bound = 1.0 / math::sqrt(self.d as f64);
        let mut p: Vec<f64> = (0..self.layout.total).map(|_| rng.gen_range(-bound..=bound)).collect();
        for (at, v) in self.layout.norm_ranges(self.d) {
            p[at..at + self.d].fill(v);
        }
        // A full-scale head starts every line at ‖z‖ ≈ √(d/3), and the first
        // epochs are then spent shrinking all norms alike.
        let hw = self.layout.head_w;
        for v in &mut p[hw..hw + self.d * self.d] {
            *v *= bound;
        }
        p
    }

    /// Eval-mode `z` vectors, one per input.
    pub fn forward(&self, params: &[f64], batch: &[&[u32]]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(batch.len());
        self.run(params, batch, None, None, |_, tape| {
            out.push(tape.z.clone());
            None
        })?;
        Ok(out)
    }

    /// Mean PU loss of a batch and its gradient, accumulated into `grads`.
    /// Dropout is active iff `rng` is given. Returns the loss and `‖z‖` of
    /// every line.
    pub fn loss_and_gradient(
        &self,
        params: &[f64],
        batch: &[&[u32]],
        labels: &[WeakLabel],
        q: f64,
        rng: Option<&mut ChaCha8Rng>,
        grads: &mut [f64],
    ) -> Result<(f64, Vec<f64>)> {
        if batch.len() != labels.len() {
            return Err(Error::LengthMismatch { left: batch.len(), right: labels.len() });
        }
        let m = batch.len() as f64;
        let mut loss = 0.0;
        let mut norms = Vec::with_capacity(batch.len());
        self.run(params, batch, rng, Some(grads), |i, tape| {
            let n = math::norm(&tape.z);
            norms.push(n);
            loss += line_loss(n, labels[i], q);
            let dn = line_loss_derivative(n, labels[i], q) / m;
            if n > 0.0 && dn != 0.0 {
                Some(tape.z.iter().map(|v| dn * v / n).collect())
            } else {
                Some(vec![0.0; tape.z.len()])
            }
        })?;
        Ok((loss / m, norms))
    }

    fn build_cache(&self, params: &[f64], batch: &[&[u32]], train: bool) -> Result<(FirstBlockCache, Vec<Vec<usize>>)> {
        let d = self.d;
        let ml = self.max_len as u64;
        let lens: Vec<usize> = batch.iter().map(|ids| valid_len(ids).min(self.max_len)).collect();
        let mut keys: Vec<u64> = Vec::new();
        for (ids, &len) in batch.iter().zip(&lens) {
            keys.extend(ids[..len].iter().enumerate().map(|(p, &t)| t as u64 * ml + p as u64));
        }
        keys.sort_unstable();
        keys.dedup();
        let n = keys.len();
        let all_q = self.layout.blocks.len() > 1;
        let blk = &self.layout.blocks[0];
        let mut c = FirstBlockCache {
            tok: keys.iter().map(|k| (k / ml) as u32).collect(),
            xhat: vec![0.0; n * d],
            rstd: vec![0.0; n],
            a: vec![0.0; n * d],
            q: vec![0.0; n * d],
            has_q: keys.iter().map(|k| all_q || k % ml == 0).collect(),
            k: vec![0.0; n * d],
            v: vec![0.0; n * d],
            dq: if train { vec![0.0; n * d] } else { Vec::new() },
            dk: if train { vec![0.0; n * d] } else { Vec::new() },
            dv: if train { vec![0.0; n * d] } else { Vec::new() },
            keys,
        };
        let mut x = vec![0.0; d];
        for e in 0..n {
            let tok = c.tok[e] as usize;
            if tok >= self.vocab {
                return Err(Error::Invalid(alloc::format!("token id {} outside vocabulary", tok)));
            }
            let pos = (c.keys[e] % ml) as usize;
            self.embed_row(params, tok, pos, &mut x);
            let r = e * d..(e + 1) * d;
            c.rstd[e] = layer_norm(params, blk.ln1_g, blk.ln1_b, &x, &mut c.xhat[r.clone()], &mut c.a[r.clone()]);
            let a = &c.a[r.clone()];
            if c.has_q[e] {
                linear(params, blk.wq, blk.bq, d, d, a, &mut c.q[r.clone()]);
            }
            linear(params, blk.wk, blk.bk, d, d, a, &mut c.k[r.clone()]);
            linear(params, blk.wv, blk.bv, d, d, a, &mut c.v[r]);
        }
        let entries = batch
            .iter()
            .zip(&lens)
            .map(|(ids, &len)| {
                ids[..len]
                    .iter()
                    .enumerate()
                    .map(|(p, &t)| c.keys.binary_search(&(t as u64 * ml + p as u64)).unwrap())
                    .collect()
            })
            .collect();
        Ok((c, entries))
    }

    #[inline]
    fn embed_row(&self, params: &[f64], tok: usize, pos: usize, out: &mut [f64]) {
        let d = self.d;
        let e = &params[self.layout.embed + tok * d..self.layout.embed + (tok + 1) * d];
        let pe = &self.pe[pos * d..(pos + 1) * d];
        for i in 0..d {
            out[i] = self.embed_scale * e[i] + pe[i];
        }
    }

    /// Forward every line; `upstream` receives each line's tape and returns
    /// `∂loss/∂z` when gradients are wanted.
    fn run<F>(&self, params: &[f64], batch: &[&[u32]], mut rng: Option<&mut ChaCha8Rng>, mut grads: Option<&mut [f64]>, mut upstream: F) -> Result<()>
    where
        F: FnMut(usize, &LineTape) -> Option<Vec<f64>>,
    {
        if params.len() != self.layout.total {
            return Err(Error::LengthMismatch { left: params.len(), right: self.layout.total });
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.layout.total {
                return Err(Error::LengthMismatch { left: g.len(), right: self.layout.total });
            }
        }
        if batch.is_empty() {
            return Ok(());
        }
        let (mut cache, entries) = self.build_cache(params, batch, grads.is_some())?;
        for (i, ents) in entries.into_iter().enumerate() {
            let tape = self.forward_line(params, &cache, ents, &mut rng)?;
            if let Some(dz) = upstream(i, &tape) {
                if let Some(g) = grads.as_deref_mut() {
                    self.backward_line(params, g, &mut cache, &tape, &dz);
                }
            }
        }
        if let Some(g) = grads {
            self.backward_cache(params, g, &cache);
        }
        Ok(())
    }

    fn forward_line(&self, params: &[f64], cache: &FirstBlockCache, entries: Vec<usize>, rng: &mut Option<&mut ChaCha8Rng>) -> Result<LineTape> {
        let d = self.d;
        let len = entries.len();
        let n_blocks = self.layout.blocks.len();
        let mut x = vec![0.0; len * d];
        for (p, &e) in entries.iter().enumerate() {
            self.embed_row(params, cache.tok[e] as usize, p, &mut x[p * d..(p + 1) * d]);
        }
        let mut blocks = Vec::with_capacity(n_blocks);
        for (l, blk) in self.layout.blocks.iter().enumerate() {
            let rows = if l + 1 == n_blocks { 1 } else { len };
            let mut t = BlockTape { rows, ..Default::default() };
            if l > 0 {
                t.xhat1 = vec![0.0; len * d];
                t.rstd1 = vec![0.0; len];
                t.a = vec![0.0; len * d];
                t.q = vec![0.0; rows * d];
                t.k = vec![0.0; len * d];
                t.v = vec![0.0; len * d];
                for p in 0..len {
                    let r = p * d..(p + 1) * d;
                    t.rstd1[p] = layer_norm(params, blk.ln1_g, blk.ln1_b, &x[r.clone()], &mut t.xhat1[r.clone()], &mut t.a[r.clone()]);
                    if p < rows {
                        linear(params, blk.wq, blk.bq, d, d, &t.a[r.clone()], &mut t.q[r.clone()]);
                    }
                    linear(params, blk.wk, blk.bk, d, d, &t.a[r.clone()], &mut t.k[r.clone()]);
                    linear(params, blk.wv, blk.bv, d, d, &t.a[r.clone()], &mut t.v[r]);
                }
            }
            let q_row = |r: usize| -> &[f64] {
                if l == 0 {
                    &cache.q[entries[r] * d..(entries[r] + 1) * d]
                } else {
                    &t.q[r * d..(r + 1) * d]
                }
            };
            let k_row = |p: usize| -> &[f64] {
                if l == 0 {
                    &cache.k[entries[p] * d..(entries[p] + 1) * d]
                } else {
                    &t.k[p * d..(p + 1) * d]
                }
            };
            let v_row = |p: usize| -> &[f64] {
                if l == 0 {
                    &cache.v[entries[p] * d..(entries[p] + 1) * d]
                } else {
                    &t.v[p * d..(p + 1) * d]
                }
            };
            let dh = d / self.heads;
            let scale = 1.0 / math::sqrt(dh as f64);
            let mut probs = vec![0.0; rows * self.heads * len];
            let mut ctx = vec![0.0; rows * d];
            for r in 0..rows {
                let q = q_row(r);
                for h in 0..self.heads {
                    let hs = h * dh..(h + 1) * dh;
                    let pr = &mut probs[(r * self.heads + h) * len..(r * self.heads + h + 1) * len];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..len {
                        pr[j] = dot(&q[hs.clone()], &k_row(j)[hs.clone()]) * scale;
                        max = max.max(pr[j]);
                    }
                    let mut sum = 0.0;
                    for v in pr.iter_mut() {
                        *v = math::exp(*v - max);
                        sum += *v;
                    }
                    let c = &mut ctx[r * d + h * dh..r * d + (h + 1) * dh];
                    for j in 0..len {
                        pr[j] /= sum;
                        axpy(pr[j], &v_row(j)[hs.clone()], c);
                    }
                }
            }
            let mut next = vec![0.0; rows * d];
            t.mask1 = dropout_mask(rng, self.dropout, rows * d);
            t.mask2 = dropout_mask(rng, self.dropout, rows * d);
            t.xhat2 = vec![0.0; rows * d];
            t.rstd2 = vec![0.0; rows];
            t.b = vec![0.0; rows * d];
            t.pre = vec![0.0; rows * self.hidden];
            t.act = vec![0.0; rows * self.hidden];
            let mut attn = vec![0.0; d];
            let mut ff = vec![0.0; d];
            for r in 0..rows {
                let rd = r * d..(r + 1) * d;
                let rh = r * self.hidden..(r + 1) * self.hidden;
                linear(params, blk.wo, blk.bo, d, d, &ctx[rd.clone()], &mut attn);
                if !t.mask1.is_empty() {
                    apply_mask(&t.mask1[rd.clone()], &mut attn);
                }
                let mid: Vec<f64> = x[rd.clone()].iter().zip(&attn).map(|(a, b)| a + b).collect();
                t.rstd2[r] = layer_norm(params, blk.ln2_g, blk.ln2_b, &mid, &mut t.xhat2[rd.clone()], &mut t.b[rd.clone()]);
                linear(params, blk.w1, blk.b1, self.hidden, d, &t.b[rd.clone()], &mut t.pre[rh.clone()]);
                for k in rh.clone() {
                    t.act[k] = gelu(t.pre[k]);
                }
                linear(params, blk.w2, blk.b2, d, self.hidden, &t.act[rh], &mut ff);
                if !t.mask2.is_empty() {
                    apply_mask(&t.mask2[rd.clone()], &mut ff);
                }
                for (i, o) in next[rd].iter_mut().enumerate() {
                    *o = mid[i] + ff[i];
                }
            }
            t.probs = probs;
            t.ctx = ctx;
            blocks.push(t);
            x = next;
        }
        let mut yhat = vec![0.0; d];
        let mut y = vec![0.0; d];
        let rstd_f = layer_norm(params, self.layout.lnf_g, self.layout.lnf_b, &x[..d], &mut yhat, &mut y);
        let mut z = vec![0.0; d];
        linear(params, self.layout.head_w, self.layout.head_b, d, d, &y, &mut z);
        check_finite(&z, "encoder output")?;
        Ok(LineTape { len, entries, blocks, yhat, rstd_f, y, z })
    }

    fn backward_line(&self, params: &[f64], g: &mut [f64], cache: &mut FirstBlockCache, tape: &LineTape, dz: &[f64]) {
        let d = self.d;
        let len = tape.len;
        let lay = &self.layout;
        let mut dy = vec![0.0; d];
        linear_backward(params, g, lay.head_w, lay.head_b, d, d, &tape.y, dz, Some(&mut dy));
        // gradient w.r.t. the output rows of the current block
        let mut dout = vec![0.0; d];
        layer_norm_backward(params, g, lay.lnf_g, lay.lnf_b, &tape.yhat, tape.rstd_f, &dy, &mut dout);
        let dh = d / self.heads;
        let scale = 1.0 / math::sqrt(dh as f64);
        for (l, blk) in lay.blocks.iter().enumerate().rev() {
            let t = &tape.blocks[l];
            let rows = t.rows;
            // residual stream gradient w.r.t. block input, all positions
            let mut din = vec![0.0; len * d];
            let mut dq = vec![0.0; rows * d];
            let mut dk = vec![0.0; len * d];
            let mut dv = vec![0.0; len * d];
            let mut tmp_h = vec![0.0; self.hidden];
            let mut df = vec![0.0; d];
            for r in 0..rows {
                let rd = r * d..(r + 1) * d;
                let rh = r * self.hidden..(r + 1) * self.hidden;
                let mut dmid = dout[rd.clone()].to_vec();
                df.copy_from_slice(&dout[rd.clone()]);
                if !t.mask2.is_empty() {
                    apply_mask(&t.mask2[rd.clone()], &mut df);
                }
                tmp_h.fill(0.0);
                linear_backward(params, g, blk.w2, blk.b2, d, self.hidden, &t.act[rh.clone()], &df, Some(&mut tmp_h));
                for (k, v) in tmp_h.iter_mut().enumerate() {
                    *v *= gelu_derivative(t.pre[rh.start + k]);
                }
                let mut db = vec![0.0; d];
                linear_backward(params, g, blk.w1, blk.b1, self.hidden, d, &t.b[rd.clone()], &tmp_h, Some(&mut db));
                layer_norm_backward(params, g, blk.ln2_g, blk.ln2_b, &t.xhat2[rd.clone()], t.rstd2[r], &db, &mut dmid);
                for i in 0..d {
                    din[r * d + i] += dmid[i];
                }
                if !t.mask1.is_empty() {
                    apply_mask(&t.mask1[rd.clone()], &mut dmid);
                }
                let mut dctx = vec![0.0; d];
                linear_backward(params, g, blk.wo, blk.bo, d, d, &t.ctx[rd.clone()], &dmid, Some(&mut dctx));
                let (q_r, ks, vs): (&[f64], Vec<&[f64]>, Vec<&[f64]>) = if l == 0 {
                    let e = tape.entries[r];
                    (
                        &cache.q[e * d..(e + 1) * d],
                        tape.entries.iter().map(|&e| &cache.k[e * d..(e + 1) * d]).collect(),
                        tape.entries.iter().map(|&e| &cache.v[e * d..(e + 1) * d]).collect(),
                    )
                } else {
                    (&t.q[rd.clone()], t.k.chunks(d).collect(), t.v.chunks(d).collect())
                };
                for h in 0..self.heads {
                    let hs = h * dh..(h + 1) * dh;
                    let pr = &t.probs[(r * self.heads + h) * len..(r * self.heads + h + 1) * len];
                    let dc = &dctx[hs.clone()];
                    let mut dp = vec![0.0; len];
                    let mut s = 0.0;
                    for j in 0..len {
                        dp[j] = dot(dc, &vs[j][hs.clone()]);
                        s += pr[j] * dp[j];
                        axpy(pr[j], dc, &mut dv[j * d + h * dh..j * d + (h + 1) * dh]);
                    }
                    for j in 0..len {
                        let ds = pr[j] * (dp[j] - s) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        axpy(ds, &ks[j][hs.clone()], &mut dq[r * d + h * dh..r * d + (h + 1) * dh]);
                        axpy(ds, &q_r[hs.clone()], &mut dk[j * d + h * dh..j * d + (h + 1) * dh]);
                    }
                }
            }
            if l == 0 {
                for p in 0..len {
                    let e = tape.entries[p];
                    let er = e * d..(e + 1) * d;
                    axpy(1.0, &dk[p * d..(p + 1) * d], &mut cache.dk[er.clone()]);
                    axpy(1.0, &dv[p * d..(p + 1) * d], &mut cache.dv[er.clone()]);
                    if p < rows {
                        axpy(1.0, &dq[p * d..(p + 1) * d], &mut cache.dq[er]);
                    }
                }
                for r in 0..rows {
                    let tok = cache.tok[tape.entries[r]] as usize;
                    let at = lay.embed + tok * d;
                    axpy(self.embed_scale, &din[r * d..(r + 1) * d], &mut g[at..at + d]);
                }
            } else {
                let mut da = vec![0.0; d];
                for p in 0..len {
                    let pd = p * d..(p + 1) * d;
                    da.fill(0.0);
                    if p < rows {
                        linear_backward(params, g, blk.wq, blk.bq, d, d, &t.a[pd.clone()], &dq[pd.clone()], Some(&mut da));
                    }
                    linear_backward(params, g, blk.wk, blk.bk, d, d, &t.a[pd.clone()], &dk[pd.clone()], Some(&mut da));
                    linear_backward(params, g, blk.wv, blk.bv, d, d, &t.a[pd.clone()], &dv[pd.clone()], Some(&mut da));
                    layer_norm_backward(params, g, blk.ln1_g, blk.ln1_b, &t.xhat1[pd.clone()], t.rstd1[p], &da, &mut din[pd]);
                }
            }
            dout = din;
        }
    }

    fn backward_cache(&self, params: &[f64], g: &mut [f64], c: &FirstBlockCache) {
        let d = self.d;
        let blk = &self.layout.blocks[0];
        let mut da = vec![0.0; d];
        let mut dx = vec![0.0; d];
        for e in 0..c.keys.len() {
            let r = e * d..(e + 1) * d;
            da.fill(0.0);
            dx.fill(0.0);
            if c.has_q[e] {
                linear_backward(params, g, blk.wq, blk.bq, d, d, &c.a[r.clone()], &c.dq[r.clone()], Some(&mut da));
            }
            linear_backward(params, g, blk.wk, blk.bk, d, d, &c.a[r.clone()], &c.dk[r.clone()], Some(&mut da));
            linear_backward(params, g, blk.wv, blk.bv, d, d, &c.a[r.clone()], &c.dv[r.clone()], Some(&mut da));
            layer_norm_backward(params, g, blk.ln1_g, blk.ln1_b, &c.xhat[r], c.rstd[e], &da, &mut dx);
            let at = self.layout.embed + c.tok[e] as usize * d;
            axpy(self.embed_scale, &dx, &mut g[at..at + d]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pumodel::vocab::CLS;
    use rand::SeedableRng;

    fn small(layers: usize, dropout: f64) -> (Encoder, Vec<f64>) {
        let cfg = ModelConfig { embed_dim: 8, hidden_dim: 12, n_heads: 2, n_layers: layers, max_len: 6, dropout_rate: dropout, ..Default::default() };
        let enc = Encoder::new(&cfg, 9).unwrap();
        let p = enc.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        (enc, p)
    }

    fn batch() -> Vec<Vec<u32>> {
        vec![vec![CLS, 5, 6, 7, PAD, PAD], vec![CLS, 8, 5, PAD, PAD, PAD], vec![CLS, 5, 6, 7, 8, 6], vec![CLS, PAD, PAD, PAD, PAD, PAD]]
    }

    #[test]
    fn shapes_and_padding_invariance() {
        for layers in [1, 2] {
            let (enc, p) = small(layers, 0.0);
            let b = batch();
            let refs: Vec<&[u32]> = b.iter().map(Vec::as_slice).collect();
            let z = enc.forward(&p, &refs).unwrap();
            assert_eq!(z.len(), 4);
            assert!(z.iter().all(|v| v.len() == 8));
            // same content with fewer trailing pads
            let short: &[u32] = &[CLS, 5, 6, 7];
            let z2 = enc.forward(&p, &[short]).unwrap();
            assert_eq!(z2[0], z[0]);
        }
    }

    #[test]
    fn batch_composition_does_not_matter() {
        let (enc, p) = small(2, 0.0);
        let b = batch();
        let refs: Vec<&[u32]> = b.iter().map(Vec::as_slice).collect();
        let z = enc.forward(&p, &refs).unwrap();
        let rev: Vec<&[u32]> = refs.iter().rev().cloned().collect();
        let zr = enc.forward(&p, &rev).unwrap();
        for i in 0..4 {
            assert_eq!(z[i], zr[3 - i]);
        }
        let dup = enc.forward(&p, &[refs[0], refs[0]]).unwrap();
        assert_eq!(dup[0], dup[1]);
        assert_eq!(dup[0], z[0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (layers, dropout) in [(1, 0.0), (2, 0.0), (1, 0.3)] {
            let (enc, p) = small(layers, dropout);
            let b = batch();
            let refs: Vec<&[u32]> = b.iter().map(Vec::as_slice).collect();
            let labels = [WeakLabel::P, WeakLabel::U, WeakLabel::U, WeakLabel::P];
            let seed = 11;
            let loss = |params: &[f64]| {
                let mut g = vec![0.0; params.len()];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                enc.loss_and_gradient(params, &refs, &labels, 0.4, Some(&mut rng), &mut g).unwrap().0
            };
            let mut grad = vec![0.0; p.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            enc.loss_and_gradient(&p, &refs, &labels, 0.4, Some(&mut rng), &mut grad).unwrap();
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            for i in 0..p.len() {
                let mut pp = p.clone();
                pp[i] += h;
                let up = loss(&pp);
                pp[i] -= 2.0 * h;
                let down = loss(&pp);
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-7);
                worst = worst.max(rel);
            }
            assert!(worst < 1e-4, "layers {} dropout {}: worst relative error {}", layers, dropout, worst);
        }
    }
}
