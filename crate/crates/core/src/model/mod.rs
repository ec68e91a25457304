//! The translation network: configuration, parameters, forward/backward
//! passes, training, checkpoints and gradient checking.

mod checkpoint;
mod config;
mod gradcheck;
mod network;
mod ops;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};
pub use config::{ModelConfig, Tagging};
pub use gradcheck::{gradient_check, GradCheckReport};
pub(crate) use network::fnv1a;
pub use network::{Encoded, Example, Seq2SeqModel};
pub use params::{ParamSpec, Params};
pub use train::{train, NoamSchedule, TrainConfig, TrainState, Trainer};

use crate::error::{Error, Result};
use crate::reserved::PAD_ID;
use crate::scalar::Scalar;

/// Probability vector over the target vocabulary at one decoding step.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDistribution {
    pub probs: Vec<f64>,
    pub position: usize,
}

impl TokenDistribution {
    pub fn new(probs: Vec<f64>, position: usize) -> Self {
        TokenDistribution { probs, position }
    }

    /// Softmax of a logit row, computed in double precision.
    pub fn from_logits<T: Scalar>(logits: &[T], position: usize) -> Self {
        let max = logits
            .iter()
            .map(|v| v.as_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        TokenDistribution { probs, position }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Highest-probability id; ties go to the lowest id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Mean label-smoothed negative log-likelihood over the non-padding
/// positions. The smoothed target puts `1 − ε + ε/V` on the reference and
/// `ε/V` everywhere else.
pub fn loss(
    distributions: &[TokenDistribution],
    reference: &[usize],
    smoothing: f64,
) -> Result<f64> {
    if distributions.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "distributions vs reference",
            left: distributions.len(),
            right: reference.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (dist, &r) in distributions.iter().zip(reference) {
        if r == PAD_ID {
            continue;
        }
        let v = dist.len();
        if r >= v {
            return Err(Error::IdOutOfRange { id: r, vocab: v });
        }
        let off = smoothing / v as f64;
        let on = 1.0 - smoothing + off;
        let mut l = 0.0;
        for (j, &p) in dist.probs.iter().enumerate() {
            let q = if j == r { on } else { off };
            if q > 0.0 {
                l -= q * p.ln();
            }
        }
        total += l;
        count += 1;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}
