use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::ops::{
    add_in_place, apply_mask, attn_bwd, attn_fwd, dropout, ffn_bwd, ffn_fwd, matmul, matmul_at_acc,
    matmul_bt, norm_bwd, norm_fwd, AttnCache, FfnCache, NormCache,
};
use super::params::{grad_of, Layout, Params, Pid};
use super::TokenDistribution;
use crate::error::{Error, Result};
use crate::reserved::{EOS_ID, PAD_ID};
use crate::scalar::Scalar;

/// One training example in id space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub source: Vec<usize>,
    /// Starts with the begin token or a target-side domain tag.
    pub decoder_input: Vec<usize>,
    /// `decoder_input` shifted left by one, ending in `</s>`.
    pub reference: Vec<usize>,
}

impl Example {
    /// `target` excludes the start token, which is passed separately.
    pub fn new(source: Vec<usize>, start: usize, target: &[usize]) -> Self {
        let mut decoder_input = Vec::with_capacity(target.len() + 1);
        decoder_input.push(start);
        decoder_input.extend_from_slice(target);
        let mut reference = target.to_vec();
        reference.push(EOS_ID);
        Example {
            source,
            decoder_input,
            reference,
        }
    }

    pub fn target_tokens(&self) -> usize {
        self.reference.iter().filter(|&&r| r != PAD_ID).count()
    }
}

/// Encoder–decoder transformer with pre-layer normalization and a target
/// embedding shared with the output projection.
#[derive(Clone, Debug)]
pub struct Seq2SeqModel<T> {
    pub(crate) config: ModelConfig,
    pub(crate) params: Params<T>,
    pub(crate) layout: Layout,
    positions: Vec<T>,
}

impl<T: Scalar> PartialEq for Seq2SeqModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

fn sinusoids<T: Scalar>(max_pos: usize, d: usize) -> Vec<T> {
    let mut pe = vec![T::zero(); max_pos * d];
    for pos in 0..max_pos {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            pe[pos * d + 2 * i] = T::of(angle.sin());
            pe[pos * d + 2 * i + 1] = T::of(angle.cos());
        }
    }
    pe
}

struct EncLayerCache<T> {
    n1: NormCache<T>,
    attn: AttnCache<T>,
    drop1: Option<Vec<T>>,
    n2: NormCache<T>,
    ffn: FfnCache<T>,
    drop2: Option<Vec<T>>,
}

struct DecLayerCache<T> {
    n1: NormCache<T>,
    self_attn: AttnCache<T>,
    drop1: Option<Vec<T>>,
    n2: NormCache<T>,
    cross: AttnCache<T>,
    drop2: Option<Vec<T>>,
    n3: NormCache<T>,
    ffn: FfnCache<T>,
    drop3: Option<Vec<T>>,
}

struct EncodeCache<T> {
    emb_drop: Option<Vec<T>>,
    layers: Vec<EncLayerCache<T>>,
    norm: NormCache<T>,
}

struct DecodeCache<T> {
    emb_drop: Option<Vec<T>>,
    layers: Vec<DecLayerCache<T>>,
    norm: NormCache<T>,
    out: Vec<T>,
}

/// Encoder states for one source sentence.
#[derive(Clone, Debug)]
pub struct Encoded<T> {
    states: Vec<T>,
    len: usize,
}

impl<T> Encoded<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl<T: Scalar> Seq2SeqModel<T> {
    /// Deterministic initialization from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (layout, params) = Layout::init::<T>(&config, &mut rng);
        Ok(Self::assemble(config, layout, params))
    }

    pub(crate) fn assemble(config: ModelConfig, layout: Layout, params: Params<T>) -> Self {
        let positions = sinusoids(config.max_positions, config.d_model);
        Seq2SeqModel {
            config,
            params,
            layout,
            positions,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// FNV-1a over the little-endian bytes of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.params.len() * T::DTYPE.width());
        for &v in &self.params.data {
            v.write_le(&mut bytes);
        }
        fnv1a(&bytes)
    }

    /// Same weights in another precision.
    pub fn cast<U: Scalar>(&self) -> Seq2SeqModel<U> {
        let params = Params {
            specs: self.params.specs.clone(),
            data: self.params.data.iter().map(|v| U::of(v.as_f64())).collect(),
        };
        Seq2SeqModel::assemble(self.config.clone(), self.layout.clone(), params)
    }

    fn check_ids(&self, ids: &[usize], vocab: usize) -> Result<()> {
        if ids.len() > self.config.max_positions {
            return Err(Error::TooLong {
                len: ids.len(),
                max: self.config.max_positions,
            });
        }
        match ids.iter().find(|&&i| i >= vocab) {
            Some(&id) => Err(Error::IdOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    fn embed(
        &self,
        table: Pid,
        ids: &[usize],
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<T>, Option<Vec<T>>) {
        let d = self.config.d_model;
        let e = self.params.get(table);
        let scale = T::of((d as f64).sqrt());
        let mut x = vec![T::zero(); ids.len() * d];
        for (i, &id) in ids.iter().enumerate() {
            for c in 0..d {
                x[i * d + c] = e[id * d + c] * scale + self.positions[i * d + c];
            }
        }
        let mask = dropout(&mut x, self.config.dropout, rng);
        (x, mask)
    }

    fn embed_bwd(&self, grads: &mut [T], table: Pid, ids: &[usize], dx: &[T]) {
        let d = self.config.d_model;
        let scale = T::of((d as f64).sqrt());
        let g = grad_of(&self.params.specs, grads, table);
        for (i, &id) in ids.iter().enumerate() {
            for c in 0..d {
                g[id * d + c] += dx[i * d + c] * scale;
            }
        }
    }

    fn encode_inner(
        &self,
        src: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<T>, EncodeCache<T>) {
        let d = self.config.d_model;
        let h = self.config.heads;
        let rate = self.config.dropout;
        let p = &self.params;
        let (mut x, emb_drop) = self.embed(self.layout.src_emb, src, rng.as_deref_mut());
        let mut layers = Vec::with_capacity(self.layout.encoder.len());
        for l in &self.layout.encoder {
            let (hn, n1) = norm_fwd(p, &l.norm1, &x, d);
            let (mut a, attn) = attn_fwd(p, &l.attn, h, &hn, None, false);
            let drop1 = dropout(&mut a, rate, rng.as_deref_mut());
            add_in_place(&mut x, &a);
            let (hn, n2) = norm_fwd(p, &l.norm2, &x, d);
            let (mut f, ffn) = ffn_fwd(p, &l.ffn, &hn);
            let drop2 = dropout(&mut f, rate, rng.as_deref_mut());
            add_in_place(&mut x, &f);
            layers.push(EncLayerCache {
                n1,
                attn,
                drop1,
                n2,
                ffn,
                drop2,
            });
        }
        let (out, norm) = norm_fwd(p, &self.layout.enc_norm, &x, d);
        (
            out,
            EncodeCache {
                emb_drop,
                layers,
                norm,
            },
        )
    }

    fn encode_bwd(&self, grads: &mut [T], src: &[usize], cache: &EncodeCache<T>, dout: &[T]) {
        let d = self.config.d_model;
        let h = self.config.heads;
        let p = &self.params;
        let mut dx = norm_bwd(p, grads, &self.layout.enc_norm, &cache.norm, dout, d);
        for (l, c) in self.layout.encoder.iter().zip(&cache.layers).rev() {
            let mut df = dx.clone();
            apply_mask(&mut df, &c.drop2);
            let dh = ffn_bwd(p, grads, &l.ffn, &c.ffn, &df);
            add_in_place(&mut dx, &norm_bwd(p, grads, &l.norm2, &c.n2, &dh, d));
            let mut da = dx.clone();
            apply_mask(&mut da, &c.drop1);
            let (dh, _) = attn_bwd(p, grads, &l.attn, h, &c.attn, &da);
            add_in_place(&mut dx, &norm_bwd(p, grads, &l.norm1, &c.n1, &dh, d));
        }
        apply_mask(&mut dx, &cache.emb_drop);
        self.embed_bwd(grads, self.layout.src_emb, src, &dx);
    }

    fn decode_inner(
        &self,
        enc: &[T],
        prefix: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<T>, DecodeCache<T>) {
        let d = self.config.d_model;
        let h = self.config.heads;
        let rate = self.config.dropout;
        let p = &self.params;
        let (mut y, emb_drop) = self.embed(self.layout.tgt_emb, prefix, rng.as_deref_mut());
        let mut layers = Vec::with_capacity(self.layout.decoder.len());
        for l in &self.layout.decoder {
            let (hn, n1) = norm_fwd(p, &l.norm1, &y, d);
            let (mut a, self_attn) = attn_fwd(p, &l.self_attn, h, &hn, None, true);
            let drop1 = dropout(&mut a, rate, rng.as_deref_mut());
            add_in_place(&mut y, &a);
            let (hn, n2) = norm_fwd(p, &l.norm2, &y, d);
            let (mut cx, cross) = attn_fwd(p, &l.cross_attn, h, &hn, Some(enc), false);
            let drop2 = dropout(&mut cx, rate, rng.as_deref_mut());
            add_in_place(&mut y, &cx);
            let (hn, n3) = norm_fwd(p, &l.norm3, &y, d);
            let (mut f, ffn) = ffn_fwd(p, &l.ffn, &hn);
            let drop3 = dropout(&mut f, rate, rng.as_deref_mut());
            add_in_place(&mut y, &f);
            layers.push(DecLayerCache {
                n1,
                self_attn,
                drop1,
                n2,
                cross,
                drop2,
                n3,
                ffn,
                drop3,
            });
        }
        let (out, norm) = norm_fwd(p, &self.layout.dec_norm, &y, d);
        let logits = self.project(&out);
        (
            logits,
            DecodeCache {
                emb_drop,
                layers,
                norm,
                out,
            },
        )
    }

    /// Output logits for decoder states `[n, d]`.
    fn project(&self, states: &[T]) -> Vec<T> {
        let d = self.config.d_model;
        let v = self.config.tgt_vocab;
        let n = states.len() / d;
        let mut logits = matmul_bt(states, self.params.get(self.layout.tgt_emb), n, d, v);
        let bias = self.params.get(self.layout.out_bias);
        for row in logits.chunks_mut(v) {
            add_in_place(row, bias);
        }
        logits
    }

    /// Returns the gradient w.r.t. the encoder output.
    fn decode_bwd(
        &self,
        grads: &mut [T],
        prefix: &[usize],
        cache: &DecodeCache<T>,
        dlogits: &[T],
    ) -> Vec<T> {
        let d = self.config.d_model;
        let h = self.config.heads;
        let v = self.config.tgt_vocab;
        let n = prefix.len();
        let p = &self.params;
        let specs = &p.specs;
        matmul_at_acc(
            dlogits,
            &cache.out,
            n,
            v,
            d,
            grad_of(specs, grads, self.layout.tgt_emb),
        );
        {
            let gb = grad_of(specs, grads, self.layout.out_bias);
            for row in dlogits.chunks(v) {
                add_in_place(gb, row);
            }
        }
        let dstates = matmul(dlogits, p.get(self.layout.tgt_emb), n, v, d);
        let mut dy = norm_bwd(p, grads, &self.layout.dec_norm, &cache.norm, &dstates, d);
        let mut denc: Option<Vec<T>> = None;
        for (l, c) in self.layout.decoder.iter().zip(&cache.layers).rev() {
            let mut df = dy.clone();
            apply_mask(&mut df, &c.drop3);
            let dh = ffn_bwd(p, grads, &l.ffn, &c.ffn, &df);
            add_in_place(&mut dy, &norm_bwd(p, grads, &l.norm3, &c.n3, &dh, d));

            let mut dc = dy.clone();
            apply_mask(&mut dc, &c.drop2);
            let (dq, dkv) = attn_bwd(p, grads, &l.cross_attn, h, &c.cross, &dc);
            let dkv = dkv.expect("cross attention has separate keys");
            match denc.as_mut() {
                Some(acc) => add_in_place(acc, &dkv),
                None => denc = Some(dkv),
            }
            add_in_place(&mut dy, &norm_bwd(p, grads, &l.norm2, &c.n2, &dq, d));

            let mut da = dy.clone();
            apply_mask(&mut da, &c.drop1);
            let (dh, _) = attn_bwd(p, grads, &l.self_attn, h, &c.self_attn, &da);
            add_in_place(&mut dy, &norm_bwd(p, grads, &l.norm1, &c.n1, &dh, d));
        }
        apply_mask(&mut dy, &cache.emb_drop);
        self.embed_bwd(grads, self.layout.tgt_emb, prefix, &dy);
        denc.expect("at least one decoder layer")
    }

    pub fn encode(&self, source: &[usize]) -> Result<Encoded<T>> {
        if source.is_empty() {
            return Err(Error::Empty("source sequence"));
        }
        self.check_ids(source, self.config.src_vocab)?;
        let (states, _) = self.encode_inner(source, None);
        Ok(Encoded {
            states,
            len: source.len(),
        })
    }

    fn check_prefix(&self, prefix: &[usize]) -> Result<()> {
        if prefix.is_empty() {
            return Err(Error::Empty("target prefix"));
        }
        self.check_ids(prefix, self.config.tgt_vocab)
    }

    /// Next-token distribution after `prefix`, given encoder states.
    pub fn next_distribution(
        &self,
        enc: &Encoded<T>,
        prefix: &[usize],
    ) -> Result<TokenDistribution> {
        self.check_prefix(prefix)?;
        let (logits, _) = self.decode_inner(&enc.states, prefix, None);
        let v = self.config.tgt_vocab;
        let last = &logits[(prefix.len() - 1) * v..];
        Ok(TokenDistribution::from_logits(last, prefix.len() - 1))
    }

    /// One distribution per prefix position, dropout off.
    pub fn forward(&self, source: &[usize], prefix: &[usize]) -> Result<Vec<TokenDistribution>> {
        let enc = self.encode(source)?;
        self.check_prefix(prefix)?;
        let (logits, _) = self.decode_inner(&enc.states, prefix, None);
        Ok(logits
            .chunks(self.config.tgt_vocab)
            .enumerate()
            .map(|(t, row)| TokenDistribution::from_logits(row, t))
            .collect())
    }

    fn check_example(&self, ex: &Example) -> Result<()> {
        if ex.source.is_empty() {
            return Err(Error::Empty("source sequence"));
        }
        self.check_ids(&ex.source, self.config.src_vocab)?;
        self.check_prefix(&ex.decoder_input)?;
        self.check_ids(&ex.reference, self.config.tgt_vocab)?;
        if ex.reference.len() != ex.decoder_input.len() {
            return Err(Error::LengthMismatch {
                what: "decoder input vs reference",
                left: ex.decoder_input.len(),
                right: ex.reference.len(),
            });
        }
        Ok(())
    }

    /// Summed smoothed cross-entropy of one example and, when `grads` is
    /// given, accumulation of `scale ×` its gradient.
    pub(crate) fn example_loss(
        &self,
        ex: &Example,
        smoothing: f64,
        grads: Option<(&mut [T], T)>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64> {
        self.check_example(ex)?;
        let (enc, enc_cache) = self.encode_inner(&ex.source, rng.as_deref_mut());
        let (mut logits, dec_cache) = self.decode_inner(&enc, &ex.decoder_input, rng);
        let v = self.config.tgt_vocab;
        let eps = T::of(smoothing);
        let off = eps / T::of(v as f64);
        let on = T::one() - eps + off;
        let mut total = T::zero();
        for (row, &r) in logits.chunks_mut(v).zip(&ex.reference) {
            if r == PAD_ID {
                row.iter_mut().for_each(|x| *x = T::zero());
                continue;
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
            let mut loss = T::zero();
            for (j, x) in row.iter_mut().enumerate() {
                let logp = *x - lse;
                let q = if j == r { on } else { off };
                if q != T::zero() {
                    loss -= q * logp;
                }
                // softmax − target, the gradient w.r.t. the logit
                *x = logp.exp() - q;
            }
            total += loss;
        }
        if let Some((grads, scale)) = grads {
            for x in logits.iter_mut() {
                *x *= scale;
            }
            let denc = self.decode_bwd(grads, &ex.decoder_input, &dec_cache, &logits);
            self.encode_bwd(grads, &ex.source, &enc_cache, &denc);
        }
        Ok(total.as_f64())
    }

    /// Token-averaged loss over a batch with dropout off.
    pub fn batch_loss(&self, batch: &[Example], smoothing: f64) -> Result<f64> {
        let tokens: usize = batch.iter().map(Example::target_tokens).sum();
        if tokens == 0 {
            return Err(Error::Empty("batch has no target tokens"));
        }
        let mut sum = 0.0;
        for ex in batch {
            sum += self.example_loss(ex, smoothing, None, None)?;
        }
        Ok(sum / tokens as f64)
    }

    /// Token-averaged loss and its gradient (flat, aligned with
    /// [`Params::data`]). `rng` enables dropout.
    pub fn loss_and_gradient(
        &self,
        batch: &[Example],
        smoothing: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<T>)> {
        let tokens: usize = batch.iter().map(Example::target_tokens).sum();
        if tokens == 0 {
            return Err(Error::Empty("batch has no target tokens"));
        }
        let scale = T::of(1.0 / tokens as f64);
        let mut grads = vec![T::zero(); self.params.len()];
        let mut sum = 0.0;
        for ex in batch {
            sum +=
                self.example_loss(ex, smoothing, Some((&mut grads, scale)), rng.as_deref_mut())?;
        }
        Ok((sum / tokens as f64, grads))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
