//! Noisy back-translation: a generator trained in the reverse direction
//! with target-side domain tags writes pseudo-noisy sources for
//! monolingual target text, which then joins the real training data.

use std::fmt;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    mix, reverse_direction, Corpus, Direction, DomainTag, MonoCorpus, Origin, TagSide,
    TaggedSentencePair,
};
use crate::decode::{DecodeConfig, Ensemble, StartToken};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Tagging, TrainConfig};
use crate::pipeline::{
    stage_seed, synthetic_data, train_system, Codec, SyntheticConfig, Translator,
};
use crate::scalar::Scalar;

fn same_direction(expected: &Direction, found: &Direction) -> Result<()> {
    if expected != found {
        return Err(Error::DirectionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Reverses both corpora, puts `<clean_s>` / `<noisy_s>` in front of the
/// new targets and mixes them.
pub fn build_generator_corpus(clean: Corpus, noisy: Corpus, seed: u64) -> Result<Corpus> {
    same_direction(&clean.direction, &noisy.direction)?;
    let clean = reverse_direction(clean).tagged(DomainTag::CLEAN_TARGET)?;
    let noisy = reverse_direction(noisy).tagged(DomainTag::NOISY_TARGET)?;
    mix(vec![clean, noisy], seed)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenerationMode {
    Beam(DecodeConfig),
    Sample { max_len: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub kept: usize,
    pub dropped_empty: usize,
}

/// Decodes every monolingual sentence starting from `tag` and pairs the
/// output with the original sentence in the final translation direction.
/// Empty outputs are dropped and counted.
pub fn generate_pseudo_sources<T: Scalar>(
    generator: &Translator<T>,
    mono: &MonoCorpus,
    tag: DomainTag,
    mode: &GenerationMode,
) -> Result<(Corpus, GenerationReport)> {
    if tag.side != TagSide::TargetStart {
        return Err(Error::Tagging(format!("{tag} is not a target-side tag")));
    }
    if generator.ensemble.tagging() != Tagging::Target {
        return Err(Error::ModelMismatch(
            "the generator was not trained with target-side tags".into(),
        ));
    }
    let gen_dir = &generator.codec.direction;
    if mono.language != gen_dir.source {
        return Err(Error::DirectionMismatch {
            expected: gen_dir.source.clone(),
            found: mono.language.clone(),
        });
    }
    let start = StartToken::Tag(tag);
    let mut rng = match mode {
        GenerationMode::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        GenerationMode::Beam(_) => None,
    };
    let mut pairs = Vec::with_capacity(mono.len());
    let mut report = GenerationReport {
        requested: mono.len(),
        ..GenerationReport::default()
    };
    for (i, sentence) in mono.sentences.iter().enumerate() {
        let out = match (mode, rng.as_mut()) {
            (GenerationMode::Sample { max_len, .. }, Some(rng)) => {
                generator.sample(sentence, start, *max_len, rng)?
            }
            (GenerationMode::Beam(cfg), _) => generator.translate(sentence, start, cfg)?,
            _ => unreachable!("sampling always has a generator"),
        };
        if out.words.is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        pairs.push(TaggedSentencePair::new(
            out.words,
            sentence.clone(),
            Origin::SyntheticBacktranslated,
        ));
        if (i + 1) % 1000 == 0 {
            info!("generated {} of {}", i + 1, mono.len());
        }
    }
    report.kept = pairs.len();
    if report.dropped_empty > 0 {
        warn!("{} empty pseudo-sources dropped", report.dropped_empty);
    }
    Ok((Corpus::from_pairs(gen_dir.reversed(), pairs), report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssemblyMode {
    /// Plain concatenation, no tags.
    Insensitive,
    /// `<clean>` on clean pairs, `<noisy>` on noisy and synthetic pairs.
    Sensitive,
}

impl AssemblyMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "insensitive" => Some(AssemblyMode::Insensitive),
            "sensitive" => Some(AssemblyMode::Sensitive),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AssemblyMode::Insensitive => "insensitive",
            AssemblyMode::Sensitive => "sensitive",
        }
    }
}

/// Final training corpus: clean, noisy and synthetic pairs, tagged per
/// `mode`, shuffled with `seed`.
pub fn assemble_training_set(
    clean: &Corpus,
    noisy: &Corpus,
    synthetic: &Corpus,
    mode: AssemblyMode,
    seed: u64,
) -> Result<Corpus> {
    same_direction(&clean.direction, &noisy.direction)?;
    same_direction(&clean.direction, &synthetic.direction)?;
    let parts = match mode {
        AssemblyMode::Insensitive => vec![clean.clone(), noisy.clone(), synthetic.clone()],
        AssemblyMode::Sensitive => vec![
            clean.clone().tagged(DomainTag::CLEAN_SOURCE)?,
            noisy.clone().tagged(DomainTag::NOISY_SOURCE)?,
            synthetic.clone().tagged(DomainTag::NOISY_SOURCE)?,
        ],
    };
    mix(parts, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringConfig {
    pub synthetic: SyntheticConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub merges: usize,
    pub seed: u64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        SteeringConfig {
            synthetic: SyntheticConfig::default(),
            model: ModelConfig {
                d_model: 32,
                heads: 2,
                ffn: 64,
                dropout: 0.0,
                label_smoothing: 0.0,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                steps: 600,
                batch_size: 16,
                lr_factor: 0.5,
                warmup: 100,
                checkpoint_every: 0,
                ..TrainConfig::default()
            },
            decode: DecodeConfig {
                beam_size: 1,
                length_reward: 0.0,
                max_len: 32,
            },
            merges: 50,
            seed: 1,
        }
    }
}

/// Fractions of held-out decodes whose letter case matches each domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub held_out: usize,
    /// Generator started from `<clean_s>`.
    pub tagged_clean: f64,
    /// Generator started from `<noisy_s>`.
    pub tagged_noisy: f64,
    /// Tag-blind model, one seeded sample per source.
    pub blind_clean: f64,
    pub blind_noisy: f64,
    /// Tag-blind model, search decoding.
    pub blind_search_clean: f64,
    pub blind_search_noisy: f64,
    pub generator_loss: f64,
    pub blind_loss: f64,
}

impl SteeringReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for SteeringReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "held-out sources: {}", self.held_out)?;
        writeln!(f, "| model | clean match | noisy match |")?;
        writeln!(f, "|---|---:|---:|")?;
        let pct = |x: f64| format!("{:.1}%", 100.0 * x);
        writeln!(
            f,
            "| tagged generator | {} | {} |",
            pct(self.tagged_clean),
            pct(self.tagged_noisy)
        )?;
        writeln!(
            f,
            "| tag-blind, sampled | {} | {} |",
            pct(self.blind_clean),
            pct(self.blind_noisy)
        )?;
        writeln!(
            f,
            "| tag-blind, search | {} | {} |",
            pct(self.blind_search_clean),
            pct(self.blind_search_noisy)
        )
    }
}

fn final_loss(
    model: &crate::model::Seq2SeqModel<f32>,
    codec: &Codec,
    corpus: &Corpus,
) -> Result<f64> {
    let (examples, _) = codec.examples(corpus, crate::corpus::MAX_LEN)?;
    model.batch_loss(&examples, 0.0)
}

/// Trains a target-tagged generator and a tag-blind model on the same toy
/// corpus and measures how often the requested domain style comes out.
pub fn run_tag_steering_experiment(config: &SteeringConfig) -> Result<SteeringReport> {
    let data = synthetic_data(&config.synthetic)?;
    let tagged = build_generator_corpus(
        data.clean.clone(),
        data.noisy.clone(),
        stage_seed(config.seed, "steering/mix"),
    )?;
    let blind = tagged.clone().untagged_all();
    let codec = Codec::learn(&blind, config.merges)?;
    let train_cfg = |stage: &str| TrainConfig {
        seed: stage_seed(config.seed, stage),
        ..config.train.clone()
    };
    let model_cfg = |stage: &str| ModelConfig {
        seed: stage_seed(config.seed, stage),
        ..config.model.clone()
    };

    let (_, gen) = train_system(
        &tagged,
        Some(codec.clone()),
        config.merges,
        &model_cfg("steering/gen-init"),
        &train_cfg("steering/gen-train"),
    )?;
    let generator_loss = final_loss(&gen, &codec, &tagged)?;
    let (_, blind_model) = train_system(
        &blind,
        Some(codec.clone()),
        config.merges,
        &model_cfg("steering/blind-init"),
        &train_cfg("steering/blind-train"),
    )?;
    let blind_loss = final_loss(&blind_model, &codec, &blind)?;

    let gen = Translator::new(codec.clone(), Ensemble::single(gen))?;
    let blind_model = Translator::new(codec, Ensemble::single(blind_model))?;
    let (clean_case, noisy_case) = (config.synthetic.clean_case, config.synthetic.noisy_case);
    let n = data.held_out.len();
    if n == 0 {
        return Err(Error::Empty("held-out sources"));
    }
    let mut counts = [0usize; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(config.seed, "steering/sample"));
    for src in &data.held_out {
        let c = gen.translate(
            src,
            StartToken::Tag(DomainTag::CLEAN_TARGET),
            &config.decode,
        )?;
        let z = gen.translate(
            src,
            StartToken::Tag(DomainTag::NOISY_TARGET),
            &config.decode,
        )?;
        let s = blind_model.sample(src, StartToken::Begin, config.decode.max_len, &mut rng)?;
        let b = blind_model.translate(src, StartToken::Begin, &config.decode)?;
        let hits = [
            clean_case.matches(&c.words),
            noisy_case.matches(&z.words),
            clean_case.matches(&s.words),
            noisy_case.matches(&s.words),
            clean_case.matches(&b.words),
            noisy_case.matches(&b.words),
        ];
        for (count, hit) in counts.iter_mut().zip(hits) {
            *count += usize::from(hit);
        }
    }
    let frac = |i: usize| counts[i] as f64 / n as f64;
    Ok(SteeringReport {
        held_out: n,
        tagged_clean: frac(0),
        tagged_noisy: frac(1),
        blind_clean: frac(2),
        blind_noisy: frac(3),
        blind_search_clean: frac(4),
        blind_search_noisy: frac(5),
        generator_loss,
        blind_loss,
    })
}
