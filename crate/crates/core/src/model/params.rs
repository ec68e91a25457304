use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::scalar::Scalar;

/// Index of a tensor in [`Params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Pid(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Zeros,
    Ones,
    Xavier { fan_in: usize, fan_out: usize },
    Normal { std: f64 },
}

/// All trainable tensors in one flat buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub(crate) specs: Vec<ParamSpec>,
    pub(crate) data: Vec<T>,
}

impl<T: Scalar> Params<T> {
    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub(crate) fn get(&self, id: Pid) -> &[T] {
        let s = &self.specs[id.0];
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn by_name(&self, name: &str) -> Option<(&ParamSpec, &[T])> {
        self.specs
            .iter()
            .find(|s| s.name == name)
            .map(|s| (s, &self.data[s.offset..s.offset + s.len()]))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let s = self.specs.iter().find(|s| s.name == name)?;
        let (a, b) = (s.offset, s.offset + s.len());
        Some(&mut self.data[a..b])
    }

    /// Name of the tensor owning flat coordinate `i`.
    pub fn owner(&self, i: usize) -> Option<&ParamSpec> {
        self.specs
            .iter()
            .find(|s| i >= s.offset && i < s.offset + s.len())
    }
}

/// Gradient slice for a tensor inside a flat gradient buffer.
#[inline]
pub(crate) fn grad_of<'a, T>(specs: &[ParamSpec], grads: &'a mut [T], id: Pid) -> &'a mut [T] {
    let s = &specs[id.0];
    &mut grads[s.offset..s.offset + s.len()]
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: Pid,
    pub b: Pid,
    pub din: usize,
    pub dout: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Norm {
    pub gain: Pid,
    pub bias: Pid,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EncoderLayer {
    pub norm1: Norm,
    pub attn: Attention,
    pub norm2: Norm,
    pub ffn: FeedForward,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DecoderLayer {
    pub norm1: Norm,
    pub self_attn: Attention,
    pub norm2: Norm,
    pub cross_attn: Attention,
    pub norm3: Norm,
    pub ffn: FeedForward,
}

/// Where every tensor lives. Derived from the config alone.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub src_emb: Pid,
    /// Shared between decoder input and output projection.
    pub tgt_emb: Pid,
    pub encoder: Vec<EncoderLayer>,
    pub enc_norm: Norm,
    pub decoder: Vec<DecoderLayer>,
    pub dec_norm: Norm,
    pub out_bias: Pid,
}

struct Builder {
    specs: Vec<ParamSpec>,
    inits: Vec<Init>,
    len: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> Pid {
        let spec = ParamSpec {
            name,
            offset: self.len,
            shape,
        };
        self.len += spec.len();
        self.specs.push(spec);
        self.inits.push(init);
        Pid(self.specs.len() - 1)
    }

    fn linear(&mut self, prefix: &str, din: usize, dout: usize) -> Linear {
        let w = self.add(
            format!("{prefix}.weight"),
            vec![din, dout],
            Init::Xavier {
                fan_in: din,
                fan_out: dout,
            },
        );
        let b = self.add(format!("{prefix}.bias"), vec![dout], Init::Zeros);
        Linear { w, b, din, dout }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            gain: self.add(format!("{prefix}.gain"), vec![d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), vec![d], Init::Zeros),
        }
    }

    fn attention(&mut self, prefix: &str, d: usize) -> Attention {
        Attention {
            q: self.linear(&format!("{prefix}.q"), d, d),
            k: self.linear(&format!("{prefix}.k"), d, d),
            v: self.linear(&format!("{prefix}.v"), d, d),
            o: self.linear(&format!("{prefix}.o"), d, d),
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, f: usize) -> FeedForward {
        FeedForward {
            l1: self.linear(&format!("{prefix}.fc1"), d, f),
            l2: self.linear(&format!("{prefix}.fc2"), f, d),
        }
    }
}

impl Layout {
    fn build(cfg: &ModelConfig) -> (Layout, Builder) {
        let d = cfg.d_model;
        let emb_std = (d as f64).powf(-0.5);
        let mut b = Builder {
            specs: Vec::new(),
            inits: Vec::new(),
            len: 0,
        };
        let src_emb = b.add(
            "embed.source".into(),
            vec![cfg.src_vocab, d],
            Init::Normal { std: emb_std },
        );
        let tgt_emb = b.add(
            "embed.target".into(),
            vec![cfg.tgt_vocab, d],
            Init::Normal { std: emb_std },
        );
        let encoder = (0..cfg.layers)
            .map(|i| {
                let p = format!("encoder.{i}");
                EncoderLayer {
                    norm1: b.norm(&format!("{p}.norm1"), d),
                    attn: b.attention(&format!("{p}.self_attn"), d),
                    norm2: b.norm(&format!("{p}.norm2"), d),
                    ffn: b.ffn(&format!("{p}.ffn"), d, cfg.ffn),
                }
            })
            .collect();
        let enc_norm = b.norm("encoder.norm", d);
        let decoder = (0..cfg.layers)
            .map(|i| {
                let p = format!("decoder.{i}");
                DecoderLayer {
                    norm1: b.norm(&format!("{p}.norm1"), d),
                    self_attn: b.attention(&format!("{p}.self_attn"), d),
                    norm2: b.norm(&format!("{p}.norm2"), d),
                    cross_attn: b.attention(&format!("{p}.cross_attn"), d),
                    norm3: b.norm(&format!("{p}.norm3"), d),
                    ffn: b.ffn(&format!("{p}.ffn"), d, cfg.ffn),
                }
            })
            .collect();
        let dec_norm = b.norm("decoder.norm", d);
        let out_bias = b.add("output.bias".into(), vec![cfg.tgt_vocab], Init::Zeros);
        (
            Layout {
                src_emb,
                tgt_emb,
                encoder,
                enc_norm,
                decoder,
                dec_norm,
                out_bias,
            },
            b,
        )
    }

    /// Layout plus tensor specs, no values.
    pub fn specs(cfg: &ModelConfig) -> (Layout, Vec<ParamSpec>) {
        let (layout, b) = Self::build(cfg);
        (layout, b.specs)
    }

    /// Layout plus freshly initialized parameters.
    pub fn init<T: Scalar>(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> (Layout, Params<T>) {
        let (layout, b) = Self::build(cfg);
        let mut data = Vec::with_capacity(b.len);
        for (spec, init) in b.specs.iter().zip(&b.inits) {
            let n = spec.len();
            match *init {
                Init::Zeros => data.extend(std::iter::repeat_n(T::zero(), n)),
                Init::Ones => data.extend(std::iter::repeat_n(T::one(), n)),
                Init::Xavier { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    data.extend((0..n).map(|_| T::of(rng.gen_range(-a..a))));
                }
                Init::Normal { std } => {
                    let dist = Normal::new(0.0, std).expect("positive std");
                    data.extend((0..n).map(|_| T::of(dist.sample(rng))));
                }
            }
        }
        (
            layout,
            Params {
                specs: b.specs,
                data,
            },
        )
    }
}
