use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reserved::RESERVED;

/// Which side of a training pair carries the domain start symbol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tagging {
    #[default]
    None,
    Source,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub dropout: f64,
    pub max_positions: usize,
    pub label_smoothing: f64,
    pub seed: u64,
    #[serde(default)]
    pub tagging: Tagging,
}

impl Default for ModelConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        ModelConfig {
            src_vocab: 64,
            tgt_vocab: 64,
            d_model: 64,
            layers: 2,
            heads: 4,
            ffn: 256,
            dropout: 0.1,
            max_positions: 258,
            label_smoothing: 0.1,
            seed: 1,
            tagging: Tagging::None,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return fail(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            ));
        }
        if !self.d_model.is_multiple_of(2) {
            return fail(format!("d_model {} must be even", self.d_model));
        }
        if self.layers == 0 || self.ffn == 0 {
            return fail("layers and ffn must be positive".into());
        }
        if self.max_positions < 258 {
            return fail(format!(
                "max_positions {} is below 258 (256 tokens plus begin/end)",
                self.max_positions
            ));
        }
        for (name, v) in [("src_vocab", self.src_vocab), ("tgt_vocab", self.tgt_vocab)] {
            if v < RESERVED.len() {
                return fail(format!("{name} {v} cannot hold the reserved tokens"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail(format!(
                "label_smoothing {} outside [0, 1)",
                self.label_smoothing
            ));
        }
        Ok(())
    }

    /// True when two configs produce the same tensor names and shapes.
    pub fn same_shapes(&self, other: &ModelConfig) -> bool {
        self.src_vocab == other.src_vocab
            && self.tgt_vocab == other.tgt_vocab
            && self.d_model == other.d_model
            && self.layers == other.layers
            && self.heads == other.heads
            && self.ffn == other.ffn
            && self.max_positions == other.max_positions
    }
}
