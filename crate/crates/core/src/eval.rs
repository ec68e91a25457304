//! Corpus-level BLEU and whole-system evaluation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::pipeline::Translator;
use crate::scalar::Scalar;
use crate::subword::intl_tokenize;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenization {
    Intl,
    None,
}

impl Tokenization {
    pub fn label(self) -> &'static str {
        match self {
            Tokenization::Intl => "intl",
            Tokenization::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "intl" => Some(Tokenization::Intl),
            "none" => Some(Tokenization::None),
            _ => None,
        }
    }

    fn apply(self, text: &str) -> Vec<String> {
        match self {
            Tokenization::Intl => intl_tokenize(text),
            Tokenization::None => text.split_whitespace().map(str::to_owned).collect(),
        }
    }
}

/// `Exp` halves the pseudo-count for each successive order without matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    None,
    Exp,
}

impl Smoothing {
    pub fn label(self) -> &'static str {
        match self {
            Smoothing::None => "none",
            Smoothing::Exp => "exp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Smoothing::None),
            "exp" => Some(Smoothing::Exp),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub tokenize: Tokenization,
    pub lowercase: bool,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            tokenize: Tokenization::Intl,
            lowercase: false,
            smoothing: Smoothing::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// 0–100.
    pub score: f64,
    /// Ratios in [0, 1], one per order.
    pub precisions: [f64; MAX_ORDER],
    pub matched: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub tokenization: Tokenization,
    pub lowercase: bool,
    pub smoothing: Smoothing,
    /// Text processing applied to hypotheses and references before counting.
    pub preprocessing: String,
}

impl BleuReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Score recomputed from the recorded precisions and brevity penalty.
    pub fn recomputed_score(&self) -> f64 {
        if self.precisions.iter().any(|&p| p <= 0.0) {
            return 0.0;
        }
        let mean_log = self.precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * self.brevity_penalty * mean_log.exp()
    }
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", p * 100.0))
            .collect();
        write!(
            f,
            "BLEU = {:.2} {} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {}) tok:{} case:{} smooth:{}",
            self.score,
            p.join("/"),
            self.brevity_penalty,
            if self.ref_len == 0 { 0.0 } else { self.hyp_len as f64 / self.ref_len as f64 },
            self.hyp_len,
            self.ref_len,
            self.tokenization.label(),
            if self.lowercase { "lc" } else { "mixed" },
            self.smoothing.label(),
        )
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and hypothesis n-gram totals for one sentence pair.
pub fn sentence_stats(
    hyp: &[String],
    reference: &[String],
) -> ([usize; MAX_ORDER], [usize; MAX_ORDER]) {
    let mut matched = [0; MAX_ORDER];
    let mut total = [0; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        total[n - 1] = hyp.len().saturating_sub(n - 1);
        matched[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    (matched, total)
}

/// BLEU from corpus-level sufficient statistics.
pub fn bleu_from_stats(
    matched: [usize; MAX_ORDER],
    total: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
    smoothing: Smoothing,
) -> (f64, [f64; MAX_ORDER], f64) {
    let bp = if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let mut precisions = [0.0; MAX_ORDER];
    if matched.iter().all(|&m| m == 0) {
        return (0.0, precisions, bp);
    }
    let mut pseudo = 1.0;
    for n in 0..MAX_ORDER {
        if total[n] == 0 {
            break;
        }
        precisions[n] = if matched[n] > 0 {
            matched[n] as f64 / total[n] as f64
        } else if smoothing == Smoothing::Exp {
            pseudo *= 2.0;
            1.0 / (pseudo * total[n] as f64)
        } else {
            0.0
        };
    }
    if precisions.contains(&0.0) {
        return (0.0, precisions, bp);
    }
    let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    (100.0 * bp * mean_log.exp(), precisions, bp)
}

/// Corpus BLEU of detokenized hypotheses against single references.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    config: &BleuConfig,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "hypotheses vs references",
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    let prep = |s: &str| {
        if config.lowercase {
            config.tokenize.apply(&s.to_lowercase())
        } else {
            config.tokenize.apply(s)
        }
    };
    let mut matched = [0; MAX_ORDER];
    let mut total = [0; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        let h = prep(h.as_ref());
        let r = prep(r.as_ref());
        let (m, t) = sentence_stats(&h, &r);
        for n in 0..MAX_ORDER {
            matched[n] += m[n];
            total[n] += t[n];
        }
        hyp_len += h.len();
        ref_len += r.len();
    }
    let (score, precisions, brevity_penalty) =
        bleu_from_stats(matched, total, hyp_len, ref_len, config.smoothing);
    let mut preprocessing = String::new();
    if config.lowercase {
        preprocessing.push_str("lowercase > ");
    }
    preprocessing.push_str(&format!("tokenize:{}", config.tokenize.label()));
    Ok(BleuReport {
        score,
        precisions,
        matched,
        total,
        brevity_penalty,
        hyp_len,
        ref_len,
        tokenization: config.tokenize,
        lowercase: config.lowercase,
        smoothing: config.smoothing,
        preprocessing,
    })
}

/// Decoded test set plus its score.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemOutput {
    /// One detokenized line per test pair; empty where decoding failed.
    pub hypotheses: Vec<String>,
    pub references: Vec<String>,
    /// (pair index, message) for every sentence that failed to decode.
    pub failures: Vec<(usize, String)>,
    pub report: BleuReport,
}

impl SystemOutput {
    pub fn hypotheses_text(&self) -> String {
        let mut out = String::new();
        for h in &self.hypotheses {
            out.push_str(h);
            out.push('\n');
        }
        out
    }
}

/// Decodes every test source, detokenizes and scores against the detokenized
/// references. Sources keep whatever tag they carry. Per-sentence decode
/// errors are recorded and scored as empty output.
pub fn evaluate_system<T: Scalar>(
    system: &Translator<T>,
    testset: &Corpus,
    decode: &DecodeConfig,
    bleu: &BleuConfig,
) -> Result<SystemOutput> {
    if testset.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut hypotheses = Vec::with_capacity(testset.len());
    let mut references = Vec::with_capacity(testset.len());
    let mut failures = Vec::new();
    for (i, pair) in testset.pairs.iter().enumerate() {
        references.push(system.detokenize_target(pair.target_body()));
        match system.translate(&pair.source, system.default_start(), decode) {
            Ok(t) => hypotheses.push(t.text),
            Err(e) => {
                log::warn!("sentence {i}: {e}");
                failures.push((i, e.to_string()));
                hypotheses.push(String::new());
            }
        }
    }
    let mut report = corpus_bleu(&hypotheses, &references, bleu)?;
    report.preprocessing = format!("normalize > detokenize > {}", report.preprocessing);
    Ok(SystemOutput {
        hypotheses,
        references,
        failures,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn clipping() {
        let (m, t) = sentence_stats(&toks("the the the the"), &toks("the cat"));
        assert_eq!(m, [1, 0, 0, 0]);
        assert_eq!(t, [4, 3, 2, 1]);
    }

    #[test]
    fn identical_is_exactly_100() {
        let s = ["a b c d e", "the cat sat on the mat ."];
        let r = corpus_bleu(&s, &s, &BleuConfig::default()).unwrap();
        assert_eq!(r.score, 100.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn no_four_gram_is_zero() {
        let r = corpus_bleu(&["a b c d"], &["a b c e"], &BleuConfig::default()).unwrap();
        assert_eq!(r.score, 0.0);
        let smoothed = BleuConfig {
            smoothing: Smoothing::Exp,
            ..BleuConfig::default()
        };
        assert!(
            corpus_bleu(&["a b c d"], &["a b c e"], &smoothed)
                .unwrap()
                .score
                > 0.0
        );
    }

    #[test]
    fn count_mismatch() {
        assert!(corpus_bleu(&["a"], &["a", "b"], &BleuConfig::default()).is_err());
    }
}
