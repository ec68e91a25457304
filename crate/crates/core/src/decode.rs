//! Beam search over an ensemble whose members' next-token distributions are
//! averaged in probability space. Hypotheses are scored as
//! `Σ log p + length_reward × length`, where length counts generated tokens
//! including `</s>`.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DomainTag, TagSide};
use crate::error::{Error, Result};
use crate::model::{Encoded, Seq2SeqModel, Tagging, TokenDistribution};
use crate::reserved::{BOS_ID, EOS_ID, PAD_ID, RESERVED};
use crate::scalar::Scalar;

/// Componentwise mean of the members' distributions.
pub fn ensemble_step(members: &[TokenDistribution]) -> Result<TokenDistribution> {
    let first = members
        .first()
        .ok_or(Error::Empty("ensemble has no members"))?;
    if let Some(bad) = members.iter().find(|d| d.len() != first.len()) {
        return Err(Error::LengthMismatch {
            what: "member distribution sizes",
            left: first.len(),
            right: bad.len(),
        });
    }
    if members.len() == 1 {
        return Ok(first.clone());
    }
    let n = members.len() as f64;
    let probs = (0..first.len())
        .map(|j| members.iter().map(|d| d.probs[j]).sum::<f64>() / n)
        .collect();
    Ok(TokenDistribution::new(probs, first.position))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    /// Generated ids, start token excluded.
    pub tokens: Vec<usize>,
    pub logp: f64,
    pub finished: bool,
}

impl BeamHypothesis {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn score(&self, length_reward: f64) -> f64 {
        self.logp + length_reward * self.len() as f64
    }

    /// Generated ids without the trailing `</s>`.
    pub fn content(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS_ID) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// Higher score first, then shorter, then lexicographically smaller ids.
fn rank(a: &BeamHypothesis, b: &BeamHypothesis, reward: f64) -> Ordering {
    b.score(reward)
        .partial_cmp(&a.score(reward))
        .unwrap_or(Ordering::Equal)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Picks the best hypothesis of a fixed n-best list under `length_reward`.
pub fn rescore(hypotheses: &[BeamHypothesis], length_reward: f64) -> Result<&BeamHypothesis> {
    hypotheses
        .iter()
        .min_by(|a, b| rank(a, b, length_reward))
        .ok_or(Error::Empty("n-best list"))
}

/// First decoder input: the plain begin token or a target-side domain tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartToken {
    Begin,
    Tag(DomainTag),
}

impl StartToken {
    pub fn id(self) -> usize {
        match self {
            StartToken::Begin => BOS_ID,
            StartToken::Tag(t) => t.id(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub length_reward: f64,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 4,
            length_reward: 0.0,
            max_len: 256,
        }
    }
}

/// Models decoded together. All members share the target vocabulary and
/// tagging convention.
#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    members: Vec<Seq2SeqModel<T>>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(members: Vec<Seq2SeqModel<T>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or(Error::Empty("ensemble has no members"))?;
        for m in &members[1..] {
            if m.config().tgt_vocab != first.config().tgt_vocab
                || m.config().src_vocab != first.config().src_vocab
            {
                return Err(Error::ModelMismatch(format!(
                    "vocabulary sizes differ: {}/{} vs {}/{}",
                    m.config().src_vocab,
                    m.config().tgt_vocab,
                    first.config().src_vocab,
                    first.config().tgt_vocab
                )));
            }
            if m.config().tagging != first.config().tagging {
                return Err(Error::ModelMismatch("members use different tagging".into()));
            }
        }
        Ok(Ensemble { members })
    }

    pub fn single(model: Seq2SeqModel<T>) -> Self {
        Ensemble {
            members: vec![model],
        }
    }

    pub fn members(&self) -> &[Seq2SeqModel<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn tagging(&self) -> Tagging {
        self.members[0].config().tagging
    }

    pub fn vocab(&self) -> usize {
        self.members[0].config().tgt_vocab
    }

    fn check_start(&self, start: StartToken) -> Result<()> {
        let target_tagged = self.tagging() == Tagging::Target;
        match start {
            StartToken::Tag(t) if t.side != TagSide::TargetStart => Err(Error::ModelMismatch(
                format!("{t} is a source-side tag and cannot start decoding"),
            )),
            StartToken::Tag(t) if !target_tagged => Err(Error::ModelMismatch(format!(
                "decoding from {t} needs a model trained with target-side tags"
            ))),
            StartToken::Begin if target_tagged => Err(Error::ModelMismatch(
                "model was trained with target-side tags; pass one as the start token".into(),
            )),
            _ => Ok(()),
        }
    }

    fn encode(&self, source: &[usize]) -> Result<Vec<Encoded<T>>> {
        if source.is_empty() {
            return Err(Error::Empty("source sequence"));
        }
        self.members.iter().map(|m| m.encode(source)).collect()
    }

    fn step(&self, encs: &[Encoded<T>], prefix: &[usize]) -> Result<TokenDistribution> {
        let dists = self
            .members
            .iter()
            .zip(encs)
            .map(|(m, e)| m.next_distribution(e, prefix))
            .collect::<Result<Vec<_>>>()?;
        ensemble_step(&dists)
    }
}

/// Ids that may be generated: everything except padding, the begin token
/// and the domain tags.
fn allowed(id: usize) -> bool {
    !(id == PAD_ID || id == BOS_ID || (4..RESERVED.len()).contains(&id))
}

fn top_k(dist: &TokenDistribution, k: usize) -> Vec<(usize, f64)> {
    let mut ids: Vec<usize> = (0..dist.len()).filter(|&i| allowed(i)).collect();
    ids.sort_by(|&a, &b| {
        dist.probs[b]
            .partial_cmp(&dist.probs[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids.truncate(k);
    ids.into_iter().map(|i| (i, dist.probs[i])).collect()
}

fn max_steps<T: Scalar>(ens: &Ensemble<T>, max_len: usize) -> usize {
    // the prefix (start + generated) must fit the position table
    max_len
        .min(ens.members[0].config().max_positions.saturating_sub(1))
        .max(1)
}

/// Greedy argmax decoding.
pub fn greedy<T: Scalar>(
    ensemble: &Ensemble<T>,
    source: &[usize],
    start: StartToken,
    max_len: usize,
) -> Result<BeamHypothesis> {
    ensemble.check_start(start)?;
    let encs = ensemble.encode(source)?;
    let mut prefix = vec![start.id()];
    let mut hyp = BeamHypothesis {
        tokens: Vec::new(),
        logp: 0.0,
        finished: false,
    };
    for _ in 0..max_steps(ensemble, max_len) {
        let dist = ensemble.step(&encs, &prefix)?;
        let (tok, p) = top_k(&dist, 1)[0];
        hyp.tokens.push(tok);
        hyp.logp += p.ln();
        prefix.push(tok);
        if tok == EOS_ID {
            break;
        }
    }
    hyp.finished = true;
    Ok(hyp)
}

/// Final beam, best first. Unfinished hypotheses are closed at `max_len`.
pub fn beam_search_nbest<T: Scalar>(
    ensemble: &Ensemble<T>,
    source: &[usize],
    start: StartToken,
    config: &DecodeConfig,
) -> Result<Vec<BeamHypothesis>> {
    if config.beam_size == 0 {
        return Err(Error::Config("beam size must be at least 1".into()));
    }
    ensemble.check_start(start)?;
    let encs = ensemble.encode(source)?;
    let reward = config.length_reward;
    let steps = max_steps(ensemble, config.max_len);
    let mut beams = vec![BeamHypothesis {
        tokens: Vec::new(),
        logp: 0.0,
        finished: false,
    }];
    for step in 0..steps {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut candidates = Vec::new();
        for b in &beams {
            if b.finished {
                candidates.push(b.clone());
                continue;
            }
            let mut prefix = Vec::with_capacity(b.len() + 1);
            prefix.push(start.id());
            prefix.extend_from_slice(&b.tokens);
            let dist = ensemble.step(&encs, &prefix)?;
            for (tok, p) in top_k(&dist, config.beam_size) {
                let mut tokens = b.tokens.clone();
                tokens.push(tok);
                candidates.push(BeamHypothesis {
                    finished: tok == EOS_ID || step + 1 == steps,
                    tokens,
                    logp: b.logp + p.ln(),
                });
            }
        }
        candidates.sort_by(|a, b| rank(a, b, reward));
        candidates.truncate(config.beam_size);
        beams = candidates;
    }
    for b in &mut beams {
        b.finished = true;
    }
    beams.sort_by(|a, b| rank(a, b, reward));
    Ok(beams)
}

/// Best-scoring finished hypothesis.
pub fn beam_search<T: Scalar>(
    ensemble: &Ensemble<T>,
    source: &[usize],
    start: StartToken,
    config: &DecodeConfig,
) -> Result<BeamHypothesis> {
    Ok(beam_search_nbest(ensemble, source, start, config)?
        .into_iter()
        .next()
        .expect("beam is never empty"))
}

/// Ancestral sampling from the averaged distribution.
pub fn sample<T: Scalar>(
    ensemble: &Ensemble<T>,
    source: &[usize],
    start: StartToken,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BeamHypothesis> {
    ensemble.check_start(start)?;
    let encs = ensemble.encode(source)?;
    let mut prefix = vec![start.id()];
    let mut hyp = BeamHypothesis {
        tokens: Vec::new(),
        logp: 0.0,
        finished: false,
    };
    for _ in 0..max_steps(ensemble, max_len) {
        let dist = ensemble.step(&encs, &prefix)?;
        let mass: f64 = (0..dist.len())
            .filter(|&i| allowed(i))
            .map(|i| dist.probs[i])
            .sum();
        let mut u = rng.gen::<f64>() * mass;
        let mut tok = EOS_ID;
        for i in (0..dist.len()).filter(|&i| allowed(i)) {
            u -= dist.probs[i];
            tok = i;
            if u <= 0.0 {
                break;
            }
        }
        hyp.tokens.push(tok);
        hyp.logp += dist.probs[tok].ln();
        prefix.push(tok);
        if tok == EOS_ID {
            break;
        }
    }
    hyp.finished = true;
    Ok(hyp)
}
