//! Transformer building blocks: linear, embedding, layer norm, multi-head
//! attention with arbitrary boolean masks, and post-norm encoder/decoder
//! stacks.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::params::{PIdx, ParamSet};
use super::tape::{BoolMat, Id, Tape};
use super::{NnError, Real, TransformerConfig};

/// Per-pass forward context: the tape, injected parameter ids, and the
/// dropout state. Dropout masks draw from `rng` only when `train` is set.
pub struct Fwd<'a, T: Real> {
    pub tape: &'a mut Tape<T>,
    pub ids: &'a [Id],
    pub train: bool,
    pub dropout: f64,
    pub rng: &'a mut ChaCha20Rng,
}

impl<'a, T: Real> Fwd<'a, T> {
    pub fn new(
        tape: &'a mut Tape<T>,
        ids: &'a [Id],
        train: bool,
        dropout: f64,
        rng: &'a mut ChaCha20Rng,
    ) -> Self {
        Fwd { tape, ids, train, dropout, rng }
    }

    #[inline]
    pub fn p(&self, idx: PIdx) -> Id {
        self.ids[idx.0]
    }

    fn maybe_dropout(&mut self, x: Id) -> Id {
        if !self.train || self.dropout == 0.0 {
            return x;
        }
        let keep_prob = 1.0 - self.dropout;
        let scale = T::from(1.0 / keep_prob).unwrap();
        let len = self.tape.data(x).len();
        let mask: Vec<T> = (0..len)
            .map(|_| if self.rng.random_bool(keep_prob) { scale } else { T::zero() })
            .collect();
        self.tape.dropout(x, Rc::new(mask))
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: PIdx,
    pub b: PIdx,
}

impl Linear {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Linear {
            w: ps.add_uniform(format!("{name}.w"), d_in, d_out, rng),
            b: ps.add_zeros(format!("{name}.b"), 1, d_out),
        }
    }

    pub fn forward<T: Real>(&self, f: &mut Fwd<'_, T>, x: Id) -> Id {
        let xw = f.tape.matmul(x, f.p(self.w));
        f.tape.add_bias(xw, f.p(self.b))
    }
}

/// Lookup table mapping ids to learned rows.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: PIdx,
}

impl Embedding {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        entries: usize,
        dim: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Embedding { table: ps.add_uniform(format!("{name}.table"), entries, dim, rng) }
    }

    pub fn forward<T: Real>(&self, f: &mut Fwd<'_, T>, indices: Rc<Vec<usize>>) -> Id {
        f.tape.gather(f.p(self.table), indices)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: PIdx,
    pub beta: PIdx,
}

impl LayerNorm {
    pub fn new<T: Real>(ps: &mut ParamSet<T>, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: ps.add_ones(format!("{name}.gamma"), 1, dim),
            beta: ps.add_zeros(format!("{name}.beta"), 1, dim),
        }
    }

    pub fn forward<T: Real>(&self, f: &mut Fwd<'_, T>, x: Id) -> Id {
        f.tape.layer_norm(x, f.p(self.gamma), f.p(self.beta))
    }
}

/// Which attention weighting a head uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttnKernel {
    /// Exact masked softmax of scaled dot products.
    #[default]
    Softmax,
    /// Kernelized form: weights proportional to `phi(q) . phi(k)` with
    /// `phi(x) = elu(x) + 1`, row-normalized over allowed keys.
    Linear,
}

/// Multi-head attention. Masked key positions receive exactly zero weight;
/// dropout is applied to the attention weights.
#[derive(Debug, Clone)]
pub struct Mha {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub kernel: AttnKernel,
}

impl Mha {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        hidden: usize,
        heads: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Self::with_kernel(ps, name, hidden, heads, AttnKernel::Softmax, rng)
    }

    pub fn with_kernel<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        hidden: usize,
        heads: usize,
        kernel: AttnKernel,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        assert_eq!(hidden % heads, 0, "hidden must divide into heads");
        Mha {
            wq: Linear::new(ps, &format!("{name}.wq"), hidden, hidden, rng),
            wk: Linear::new(ps, &format!("{name}.wk"), hidden, hidden, rng),
            wv: Linear::new(ps, &format!("{name}.wv"), hidden, hidden, rng),
            wo: Linear::new(ps, &format!("{name}.wo"), hidden, hidden, rng),
            heads,
            kernel,
        }
    }

    fn head_weights<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        qh: Id,
        kh: Id,
        mask: &Rc<BoolMat>,
        head_dim: usize,
    ) -> Result<Id, NnError> {
        match self.kernel {
            AttnKernel::Softmax => {
                let scale = T::from(1.0 / (head_dim as f64).sqrt()).unwrap();
                let scores = f.tape.matmul_tb(qh, kh);
                let scaled = f.tape.scale(scores, scale);
                f.tape.masked_softmax(scaled, mask)
            }
            AttnKernel::Linear => {
                let phi_q = f.tape.elu1(qh);
                let phi_k = f.tape.elu1(kh);
                let scores = f.tape.matmul_tb(phi_q, phi_k);
                f.tape.masked_row_norm(scores, mask)
            }
        }
    }

    pub fn forward<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        queries: Id,
        keys_values: Id,
        mask: &Rc<BoolMat>,
    ) -> Result<Id, NnError> {
        let hidden = f.tape.cols(queries);
        let head_dim = hidden / self.heads;

        let q = self.wq.forward(f, queries);
        let k = self.wk.forward(f, keys_values);
        let v = self.wv.forward(f, keys_values);

        let mut head_outputs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = f.tape.slice_cols(q, h * head_dim, head_dim);
            let kh = f.tape.slice_cols(k, h * head_dim, head_dim);
            let vh = f.tape.slice_cols(v, h * head_dim, head_dim);
            let weights = self.head_weights(f, qh, kh, mask, head_dim)?;
            let weights = f.maybe_dropout(weights);
            head_outputs.push(f.tape.matmul(weights, vh));
        }
        let merged = f.tape.concat_cols(&head_outputs);
        Ok(self.wo.forward(f, merged))
    }

    /// Forward pass that also returns the per-head attention weight ids,
    /// used by mask-effectiveness tests.
    pub fn forward_with_weights<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        queries: Id,
        keys_values: Id,
        mask: &Rc<BoolMat>,
    ) -> Result<(Id, Vec<Id>), NnError> {
        let hidden = f.tape.cols(queries);
        let head_dim = hidden / self.heads;
        let q = self.wq.forward(f, queries);
        let k = self.wk.forward(f, keys_values);
        let v = self.wv.forward(f, keys_values);
        let mut head_outputs = Vec::with_capacity(self.heads);
        let mut weight_ids = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = f.tape.slice_cols(q, h * head_dim, head_dim);
            let kh = f.tape.slice_cols(k, h * head_dim, head_dim);
            let vh = f.tape.slice_cols(v, h * head_dim, head_dim);
            let weights = self.head_weights(f, qh, kh, mask, head_dim)?;
            weight_ids.push(weights);
            head_outputs.push(f.tape.matmul(weights, vh));
        }
        let merged = f.tape.concat_cols(&head_outputs);
        Ok((self.wo.forward(f, merged), weight_ids))
    }
}

/// Two-layer GELU feed-forward with dropout on the output.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

impl FeedForward {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        hidden: usize,
        ff: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        FeedForward {
            lin1: Linear::new(ps, &format!("{name}.ff1"), hidden, ff, rng),
            lin2: Linear::new(ps, &format!("{name}.ff2"), ff, hidden, rng),
        }
    }

    pub fn forward<T: Real>(&self, f: &mut Fwd<'_, T>, x: Id) -> Id {
        let h = self.lin1.forward(f, x);
        let h = f.tape.gelu(h);
        let h = self.lin2.forward(f, h);
        f.maybe_dropout(h)
    }
}

/// Post-norm encoder layer: self-attention then feed-forward.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attn: Mha,
    pub ln1: LayerNorm,
    pub ff: FeedForward,
    pub ln2: LayerNorm,
}

impl EncoderLayer {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        config: &TransformerConfig,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let kernel = if config.linear_attention { AttnKernel::Linear } else { AttnKernel::Softmax };
        EncoderLayer {
            attn: Mha::with_kernel(ps, &format!("{name}.attn"), config.hidden, config.heads, kernel, rng),
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), config.hidden),
            ff: FeedForward::new(ps, name, config.hidden, config.ff, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), config.hidden),
        }
    }

    pub fn forward<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        x: Id,
        mask: &Rc<BoolMat>,
    ) -> Result<Id, NnError> {
        let attn = self.attn.forward(f, x, x, mask)?;
        let x = f.tape.add(x, attn);
        let x = self.ln1.forward(f, x);
        let ff = self.ff.forward(f, x);
        let x = f.tape.add(x, ff);
        Ok(self.ln2.forward(f, x))
    }
}

/// Post-norm decoder layer: causal self-attention, optional cross-attention,
/// feed-forward.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_attn: Mha,
    pub ln1: LayerNorm,
    pub cross_attn: Option<(Mha, LayerNorm)>,
    pub ff: FeedForward,
    pub ln2: LayerNorm,
}

impl DecoderLayer {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        config: &TransformerConfig,
        with_cross: bool,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let kernel = if config.linear_attention { AttnKernel::Linear } else { AttnKernel::Softmax };
        DecoderLayer {
            self_attn: Mha::with_kernel(ps, &format!("{name}.self"), config.hidden, config.heads, kernel, rng),
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), config.hidden),
            cross_attn: with_cross.then(|| {
                (
                    Mha::with_kernel(ps, &format!("{name}.cross"), config.hidden, config.heads, kernel, rng),
                    LayerNorm::new(ps, &format!("{name}.lnc"), config.hidden),
                )
            }),
            ff: FeedForward::new(ps, name, config.hidden, config.ff, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), config.hidden),
        }
    }

    pub fn forward<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        x: Id,
        self_mask: &Rc<BoolMat>,
        memory: Option<(Id, &Rc<BoolMat>)>,
    ) -> Result<Id, NnError> {
        let attn = self.self_attn.forward(f, x, x, self_mask)?;
        let x = f.tape.add(x, attn);
        let mut x = self.ln1.forward(f, x);
        if let (Some((cross, ln)), Some((memory, cross_mask))) = (&self.cross_attn, memory) {
            let attended = cross.forward(f, x, memory, cross_mask)?;
            let sum = f.tape.add(x, attended);
            x = ln.forward(f, sum);
        }
        let ff = self.ff.forward(f, x);
        let x = f.tape.add(x, ff);
        Ok(self.ln2.forward(f, x))
    }
}

/// Stack of encoder layers with full (non-causal) self-attention.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub layers: Vec<EncoderLayer>,
}

impl Encoder {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        n_layers: usize,
        config: &TransformerConfig,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Encoder {
            layers: (0..n_layers)
                .map(|i| EncoderLayer::new(ps, &format!("{name}.{i}"), config, rng))
                .collect(),
        }
    }

    pub fn forward<T: Real>(&self, f: &mut Fwd<'_, T>, x: Id) -> Result<Id, NnError> {
        let mask = Rc::new(BoolMat::full(f.tape.rows(x), f.tape.rows(x)));
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(f, h, &mask)?;
        }
        Ok(h)
    }
}

/// Stack of decoder layers with causal self-attention.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub layers: Vec<DecoderLayer>,
}

impl Decoder {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        n_layers: usize,
        config: &TransformerConfig,
        with_cross: bool,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Decoder {
            layers: (0..n_layers)
                .map(|i| DecoderLayer::new(ps, &format!("{name}.{i}"), config, with_cross, rng))
                .collect(),
        }
    }

    pub fn forward<T: Real>(
        &self,
        f: &mut Fwd<'_, T>,
        x: Id,
        memory: Option<(Id, &Rc<BoolMat>)>,
    ) -> Result<Id, NnError> {
        let causal = Rc::new(BoolMat::causal(f.tape.rows(x)));
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(f, h, &causal, memory)?;
        }
        Ok(h)
    }
}

/// Standard sinusoidal positional encoding, one row per position.
pub fn sinusoidal_encoding<T: Real>(rows: usize, dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * dim];
    for pos in 0..rows {
        for i in 0..dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = pos as f64 * freq;
            out[pos * dim + 2 * i] = T::from(angle.sin()).unwrap();
            out[pos * dim + 2 * i + 1] = T::from(angle.cos()).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fwd_ctx<'a>(
        tape: &'a mut Tape<f64>,
        ids: &'a [Id],
        rng: &'a mut ChaCha20Rng,
    ) -> Fwd<'a, f64> {
        Fwd::new(tape, ids, false, 0.0, rng)
    }

    #[test]
    fn attention_rows_sum_to_one_and_masked_weights_are_zero() {
        let mut rng = crate::toy::rng(3);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let mha = Mha::new(&mut ps, "attn", 8, 2, &mut rng);
        let mut tape = Tape::new();
        let ids = ps.inject(&mut tape);

        let x_data: Vec<f64> = (0..5 * 8).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let mask = Rc::new(BoolMat::causal(5));
        let mut rng2 = crate::toy::rng(4);
        let mut f = fwd_ctx(&mut tape, &ids, &mut rng2);
        let x = f.tape.leaf(5, 8, x_data);
        let (_, weights) = mha.forward_with_weights(&mut f, x, x, &mask).unwrap();

        for wid in weights {
            let w = tape.data(wid);
            for i in 0..5 {
                let row_sum: f64 = w[i * 5..(i + 1) * 5].iter().sum();
                assert!((row_sum - 1.0).abs() < 1e-12);
                for j in i + 1..5 {
                    assert_eq!(w[i * 5 + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn attention_matches_dense_oracle_with_full_mask() {
        // Single head, identity-ish tiny case computed directly.
        let mut rng = crate::toy::rng(7);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let mha = Mha::new(&mut ps, "attn", 4, 1, &mut rng);
        let mut tape = Tape::new();
        let ids = ps.inject(&mut tape);
        let x_data: Vec<f64> = (0..3 * 4).map(|i| (i as f64) / 10.0).collect();
        let mask = Rc::new(BoolMat::full(3, 3));
        let mut rng2 = crate::toy::rng(8);
        let mut f = fwd_ctx(&mut tape, &ids, &mut rng2);
        let x = f.tape.leaf(3, 4, x_data.clone());
        let out = mha.forward(&mut f, x, x, &mask).unwrap();

        // Dense oracle: recompute q, k, v, softmax, weighted sum, out proj.
        let gp = |idx: PIdx| ps.get(idx).data.clone();
        let lin = |x: &[f64], w: &[f64], b: &[f64], din: usize, dout: usize| -> Vec<f64> {
            let rows = x.len() / din;
            let mut y = vec![0.0; rows * dout];
            for r in 0..rows {
                for c in 0..dout {
                    let mut acc = b[c];
                    for k in 0..din {
                        acc += x[r * din + k] * w[k * dout + c];
                    }
                    y[r * dout + c] = acc;
                }
            }
            y
        };
        let q = lin(&x_data, &gp(mha.wq.w), &gp(mha.wq.b), 4, 4);
        let k = lin(&x_data, &gp(mha.wk.w), &gp(mha.wk.b), 4, 4);
        let v = lin(&x_data, &gp(mha.wv.w), &gp(mha.wv.b), 4, 4);
        let mut ctx = vec![0.0; 3 * 4];
        for i in 0..3 {
            let mut scores = [0.0f64; 3];
            for j in 0..3 {
                let dot: f64 = (0..4).map(|d| q[i * 4 + d] * k[j * 4 + d]).sum();
                scores[j] = dot / 2.0;
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for j in 0..3 {
                for d in 0..4 {
                    ctx[i * 4 + d] += exps[j] / denom * v[j * 4 + d];
                }
            }
        }
        let expect = lin(&ctx, &gp(mha.wo.w), &gp(mha.wo.b), 4, 4);
        for (a, b) in tape.data(out).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_kernel_matches_softmax_shapes_and_mask_contract() {
        let mut rng = crate::toy::rng(21);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let softmax = Mha::new(&mut ps, "soft", 8, 2, &mut rng);
        let linear =
            Mha { kernel: AttnKernel::Linear, ..softmax.clone() }; // same parameters

        let mut tape = Tape::new();
        let ids = ps.inject(&mut tape);
        let mask = Rc::new(BoolMat::causal(5));
        let x_data: Vec<f64> = (0..5 * 8).map(|i| ((i * 11 % 19) as f64 - 9.0) / 9.0).collect();

        let mut rng2 = crate::toy::rng(0);
        let mut f = fwd_ctx(&mut tape, &ids, &mut rng2);
        let x = f.tape.leaf(5, 8, x_data.clone());
        let (a, _) = softmax.forward_with_weights(&mut f, x, x, &mask).unwrap();
        let (b, weights) = linear.forward_with_weights(&mut f, x, x, &mask).unwrap();

        // Shape equality between the two kernels.
        assert_eq!((tape.rows(a), tape.cols(a)), (tape.rows(b), tape.cols(b)));
        // The kernelized weights still respect the mask and sum to one.
        for wid in weights {
            let w = tape.data(wid);
            for i in 0..5 {
                let sum: f64 = w[i * 5..(i + 1) * 5].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                for j in i + 1..5 {
                    assert_eq!(w[i * 5 + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn linear_kernel_gradients_match_finite_differences() {
        let mut rng = crate::toy::rng(22);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let attn =
            Mha::with_kernel(&mut ps, "lin", 4, 1, AttnKernel::Linear, &mut rng);
        let err = crate::nn::grad_check(&mut ps, |tape, ids| {
            let mut rng = crate::toy::rng(0);
            let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
            let x = f.tape.leaf(3, 4, (0..12).map(|i| ((i * 5 % 7) as f64 - 3.0) / 3.0).collect());
            let mask = Rc::new(BoolMat::causal(3));
            let y = attn.forward(&mut f, x, x, &mask).unwrap();
            let pooled = f.tape.mean_rows(y);
            f.tape.matmul_tb(pooled, pooled)
        });
        assert!(err < 1e-6, "linear attention grad err {err}");
    }

    #[test]
    fn dropout_is_identity_at_eval_time() {
        let mut rng = crate::toy::rng(1);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let ff = FeedForward::new(&mut ps, "ff", 4, 8, &mut rng);
        let mut tape = Tape::new();
        let ids = ps.inject(&mut tape);
        let mut rng_a = crate::toy::rng(10);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.5, &mut rng_a);
        let x = f.tape.leaf(2, 4, vec![0.5; 8]);
        let a = ff.forward(&mut f, x);
        let a_data = tape.data(a).to_vec();

        let mut tape2 = Tape::new();
        let ids2 = ps.inject(&mut tape2);
        let mut rng_b = crate::toy::rng(999);
        let mut f2 = Fwd::new(&mut tape2, &ids2, false, 0.5, &mut rng_b);
        let x2 = f2.tape.leaf(2, 4, vec![0.5; 8]);
        let b = ff.forward(&mut f2, x2);
        assert_eq!(a_data, tape2.data(b));
    }

    #[test]
    fn seeded_dropout_is_deterministic_in_training() {
        let mut rng = crate::toy::rng(1);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let ff = FeedForward::new(&mut ps, "ff", 4, 8, &mut rng);
        let run = |seed: u64| -> Vec<f64> {
            let mut tape = Tape::new();
            let ids = ps.inject(&mut tape);
            let mut rng = crate::toy::rng(seed);
            let mut f = Fwd::new(&mut tape, &ids, true, 0.5, &mut rng);
            let x = f.tape.leaf(2, 4, vec![0.5; 8]);
            let y = ff.forward(&mut f, x);
            tape.data(y).to_vec()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn sinusoidal_encoding_first_row_is_sin0_cos1() {
        let pe = sinusoidal_encoding::<f64>(3, 8);
        for i in 0..4 {
            assert_eq!(pe[2 * i], 0.0);
            assert_eq!(pe[2 * i + 1], 1.0);
        }
        // Different positions differ.
        assert_ne!(&pe[0..8], &pe[8..16]);
    }
}
