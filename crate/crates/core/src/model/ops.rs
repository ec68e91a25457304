//! Dense kernels and per-layer forward/backward passes over row-major
//! `[rows, cols]` buffers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{grad_of, Attention, FeedForward, Linear, Norm, ParamSpec, Params};
use crate::scalar::Scalar;

const LN_EPS: f64 = 1e-5;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a[m,k] · b[k,n]`
pub(crate) fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(a[i * k + p], &b[p * n..(p + 1) * n], row);
        }
    }
    out
}

/// `a[m,k] · b[n,k]ᵀ`
pub(crate) fn matmul_bt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] = dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
    out
}

/// `out[k,n] += a[m,k]ᵀ · b[m,n]`
pub(crate) fn matmul_at_acc<T: Scalar>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [T],
) {
    for i in 0..m {
        let br = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, br, &mut out[p * n..(p + 1) * n]);
            }
        }
    }
}

pub(crate) fn add_in_place<T: Scalar>(x: &mut [T], y: &[T]) {
    for (a, &b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

/// Numerically stable softmax of one row, in place.
pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Inverted dropout mask, or `None` when nothing is dropped.
pub(crate) fn dropout<T: Scalar>(
    x: &mut [T],
    rate: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Option<Vec<T>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= *m;
    }
    Some(mask)
}

pub(crate) fn apply_mask<T: Scalar>(dy: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (v, k) in dy.iter_mut().zip(m) {
            *v *= *k;
        }
    }
}

pub(crate) fn linear_fwd<T: Scalar>(p: &Params<T>, l: &Linear, x: &[T], n: usize) -> Vec<T> {
    let mut y = matmul(x, p.get(l.w), n, l.din, l.dout);
    let b = p.get(l.b);
    for row in y.chunks_mut(l.dout) {
        add_in_place(row, b);
    }
    y
}

/// Accumulates weight/bias gradients and returns the input gradient.
pub(crate) fn linear_bwd<T: Scalar>(
    p: &Params<T>,
    grads: &mut [T],
    l: &Linear,
    x: &[T],
    dy: &[T],
    n: usize,
) -> Vec<T> {
    let specs = &p.specs;
    matmul_at_acc(x, dy, n, l.din, l.dout, grad_of(specs, grads, l.w));
    let gb = grad_of(specs, grads, l.b);
    for row in dy.chunks(l.dout) {
        add_in_place(gb, row);
    }
    matmul_bt(dy, p.get(l.w), n, l.dout, l.din)
}

#[derive(Clone, Debug)]
pub(crate) struct NormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

pub(crate) fn norm_fwd<T: Scalar>(
    p: &Params<T>,
    nrm: &Norm,
    x: &[T],
    d: usize,
) -> (Vec<T>, NormCache<T>) {
    let gain = p.get(nrm.gain);
    let bias = p.get(nrm.bias);
    let n = x.len() / d;
    let dt = T::of(d as f64);
    let eps = T::of(LN_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(n);
    for r in 0..n {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dt;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dt;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for c in 0..d {
            let h = (row[c] - mean) * inv;
            xhat[r * d + c] = h;
            y[r * d + c] = gain[c] * h + bias[c];
        }
    }
    (y, NormCache { xhat, inv_std })
}

pub(crate) fn norm_bwd<T: Scalar>(
    p: &Params<T>,
    grads: &mut [T],
    nrm: &Norm,
    cache: &NormCache<T>,
    dy: &[T],
    d: usize,
) -> Vec<T> {
    let specs: &[ParamSpec] = &p.specs;
    let gain = p.get(nrm.gain);
    let n = dy.len() / d;
    let dt = T::of(d as f64);
    {
        let gg = grad_of(specs, grads, nrm.gain);
        for r in 0..n {
            for c in 0..d {
                gg[c] += dy[r * d + c] * cache.xhat[r * d + c];
            }
        }
    }
    {
        let gb = grad_of(specs, grads, nrm.bias);
        for row in dy.chunks(d) {
            add_in_place(gb, row);
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); d];
    for r in 0..n {
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut sum = T::zero();
        let mut sum_x = T::zero();
        for c in 0..d {
            dxhat[c] = dy[r * d + c] * gain[c];
            sum += dxhat[c];
            sum_x += dxhat[c] * xh[c];
        }
        let scale = cache.inv_std[r] / dt;
        for c in 0..d {
            dx[r * d + c] = scale * (dt * dxhat[c] - sum - xh[c] * sum_x);
        }
    }
    dx
}

#[derive(Clone, Debug)]
pub(crate) struct AttnCache<T> {
    q_in: Vec<T>,
    kv_in: Option<Vec<T>>,
    nq: usize,
    nk: usize,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `[heads, nq, nk]`
    probs: Vec<T>,
    o: Vec<T>,
}

/// Multi-head scaled dot-product attention. `kv_in = None` means
/// self-attention over `q_in`.
pub(crate) fn attn_fwd<T: Scalar>(
    p: &Params<T>,
    a: &Attention,
    heads: usize,
    q_in: &[T],
    kv_in: Option<&[T]>,
    causal: bool,
) -> (Vec<T>, AttnCache<T>) {
    let d = a.q.din;
    let dk = d / heads;
    let nq = q_in.len() / d;
    let kv = kv_in.unwrap_or(q_in);
    let nk = kv.len() / d;
    let q = linear_fwd(p, &a.q, q_in, nq);
    let k = linear_fwd(p, &a.k, kv, nk);
    let v = linear_fwd(p, &a.v, kv, nk);
    let scale = T::of(1.0 / (dk as f64).sqrt());
    let mut probs = vec![T::zero(); heads * nq * nk];
    let mut o = vec![T::zero(); nq * d];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..nq {
            let row = &mut probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            let qi = &q[i * d + off..i * d + off + dk];
            let visible = if causal { (i + 1).min(nk) } else { nk };
            for j in 0..nk {
                row[j] = if j < visible {
                    dot(qi, &k[j * d + off..j * d + off + dk]) * scale
                } else {
                    T::neg_infinity()
                };
            }
            softmax_in_place(row);
            let oi = &mut o[i * d + off..i * d + off + dk];
            for j in 0..visible {
                axpy(row[j], &v[j * d + off..j * d + off + dk], oi);
            }
        }
    }
    let out = linear_fwd(p, &a.o, &o, nq);
    let cache = AttnCache {
        q_in: q_in.to_vec(),
        kv_in: kv_in.map(<[T]>::to_vec),
        nq,
        nk,
        q,
        k,
        v,
        probs,
        o,
    };
    (out, cache)
}

/// Returns `(d q_in, d kv_in)`; for self-attention the second is `None` and
/// the first already holds the full input gradient.
pub(crate) fn attn_bwd<T: Scalar>(
    p: &Params<T>,
    grads: &mut [T],
    a: &Attention,
    heads: usize,
    c: &AttnCache<T>,
    dout: &[T],
) -> (Vec<T>, Option<Vec<T>>) {
    let d = a.q.din;
    let dk = d / heads;
    let (nq, nk) = (c.nq, c.nk);
    let scale = T::of(1.0 / (dk as f64).sqrt());
    let d_o = linear_bwd(p, grads, &a.o, &c.o, dout, nq);
    let mut dq = vec![T::zero(); nq * d];
    let mut dkm = vec![T::zero(); nk * d];
    let mut dv = vec![T::zero(); nk * d];
    let mut dp = vec![T::zero(); nk];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..nq {
            let pr = &c.probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            let doi = &d_o[i * d + off..i * d + off + dk];
            let mut weighted = T::zero();
            for j in 0..nk {
                if pr[j] == T::zero() {
                    dp[j] = T::zero();
                    continue;
                }
                dp[j] = dot(doi, &c.v[j * d + off..j * d + off + dk]);
                weighted += pr[j] * dp[j];
                axpy(pr[j], doi, &mut dv[j * d + off..j * d + off + dk]);
            }
            for j in 0..nk {
                if pr[j] == T::zero() {
                    continue;
                }
                let ds = pr[j] * (dp[j] - weighted) * scale;
                axpy(
                    ds,
                    &c.k[j * d + off..j * d + off + dk],
                    &mut dq[i * d + off..i * d + off + dk],
                );
                axpy(
                    ds,
                    &c.q[i * d + off..i * d + off + dk],
                    &mut dkm[j * d + off..j * d + off + dk],
                );
            }
        }
    }
    let mut dq_in = linear_bwd(p, grads, &a.q, &c.q_in, &dq, nq);
    let kv = c.kv_in.as_deref().unwrap_or(&c.q_in);
    let mut dkv = linear_bwd(p, grads, &a.k, kv, &dkm, nk);
    add_in_place(&mut dkv, &linear_bwd(p, grads, &a.v, kv, &dv, nk));
    if c.kv_in.is_none() {
        add_in_place(&mut dq_in, &dkv);
        (dq_in, None)
    } else {
        (dq_in, Some(dkv))
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FfnCache<T> {
    x: Vec<T>,
    pre: Vec<T>,
    act: Vec<T>,
}

pub(crate) fn ffn_fwd<T: Scalar>(p: &Params<T>, f: &FeedForward, x: &[T]) -> (Vec<T>, FfnCache<T>) {
    let n = x.len() / f.l1.din;
    let pre = linear_fwd(p, &f.l1, x, n);
    let act: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
    let y = linear_fwd(p, &f.l2, &act, n);
    (
        y,
        FfnCache {
            x: x.to_vec(),
            pre,
            act,
        },
    )
}

pub(crate) fn ffn_bwd<T: Scalar>(
    p: &Params<T>,
    grads: &mut [T],
    f: &FeedForward,
    c: &FfnCache<T>,
    dy: &[T],
) -> Vec<T> {
    let n = dy.len() / f.l2.dout;
    let mut dact = linear_bwd(p, grads, &f.l2, &c.act, dy, n);
    for (g, &pre) in dact.iter_mut().zip(&c.pre) {
        if pre <= T::zero() {
            *g = T::zero();
        }
    }
    linear_bwd(p, grads, &f.l1, &c.x, &dact, n)
}
