//! Glue between text and ids, a translator wrapper around ensembles, the
//! synthetic corpora used for desk experiments and the four-system
//! comparison.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use log::info;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtrans::{
    assemble_training_set, build_generator_corpus, generate_pseudo_sources, AssemblyMode,
    GenerationMode,
};
use crate::corpus::{
    Corpus, Direction, DomainTag, MonoCorpus, Origin, Sentence, Split, TagSide, TaggedSentencePair,
    MAX_LEN,
};
use crate::decode::{beam_search_nbest, BeamHypothesis, DecodeConfig, Ensemble, StartToken};
use crate::error::{Error, Result};
use crate::eval::{evaluate_system, BleuConfig};
use crate::kv::KvFile;
use crate::model::{self, Example, ModelConfig, Seq2SeqModel, Tagging, TrainConfig};
use crate::reserved::{self, EOS_ID};
use crate::scalar::Scalar;
use crate::subword::{decode_bpe, learn_bpe, Detokenizer, SubwordModel};

/// Derives an independent seed for a named stage from the top-level seed.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(stage.as_bytes());
    model::fnv1a(&bytes)
}

/// Which side carries tags in a corpus. Mixed conventions are an error.
pub fn tagging_of(corpus: &Corpus) -> Result<Tagging> {
    let mut seen = None;
    for p in &corpus.pairs {
        let t = match p.tag {
            None => Tagging::None,
            Some(tag) if tag.side == TagSide::SourceStart => Tagging::Source,
            Some(_) => Tagging::Target,
        };
        match seen {
            None => seen = Some(t),
            Some(s) if s != t => {
                return Err(Error::Tagging(
                    "corpus mixes tagged and untagged pairs or both tag sides".into(),
                ))
            }
            _ => {}
        }
    }
    Ok(seen.unwrap_or(Tagging::None))
}

/// Source- and target-side subword models for one translation direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codec {
    pub source: SubwordModel,
    pub target: SubwordModel,
    pub direction: Direction,
}

impl Codec {
    /// Learns one merge list per side from the untagged sentence bodies.
    pub fn learn(corpus: &Corpus, merges: usize) -> Result<Self> {
        let src: Vec<&[String]> = corpus.pairs.iter().map(|p| p.source_body()).collect();
        let tgt: Vec<&[String]> = corpus.pairs.iter().map(|p| p.target_body()).collect();
        let src: Vec<Vec<&String>> = src.iter().map(|s| s.iter().collect()).collect();
        let tgt: Vec<Vec<&String>> = tgt.iter().map(|s| s.iter().collect()).collect();
        Ok(Codec {
            source: learn_bpe(&src, merges)?,
            target: learn_bpe(&tgt, merges)?,
            direction: corpus.direction.clone(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.source
            .save(&dir.join("source.merges"), &dir.join("source.vocab"))?;
        self.target
            .save(&dir.join("target.merges"), &dir.join("target.vocab"))?;
        let meta = format!(
            "source_lang = {}\ntarget_lang = {}\n",
            self.direction.source, self.direction.target
        );
        let path = dir.join("codec.cfg");
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = KvFile::read(&dir.join("codec.cfg"))?;
        meta.check_keys(&["source_lang", "target_lang"])?;
        let lang = |k: &str| {
            meta.get(k)
                .map(str::to_owned)
                .ok_or_else(|| Error::Config(format!("codec.cfg lacks {k:?}")))
        };
        Ok(Codec {
            source: SubwordModel::load(&dir.join("source.merges"), &dir.join("source.vocab"))?,
            target: SubwordModel::load(&dir.join("target.merges"), &dir.join("target.vocab"))?,
            direction: Direction::new(lang("source_lang")?, lang("target_lang")?),
        })
    }

    /// Model configuration with this codec's vocabulary sizes.
    pub fn model_config(&self, base: &ModelConfig, tagging: Tagging) -> ModelConfig {
        ModelConfig {
            src_vocab: self.source.vocab_size(),
            tgt_vocab: self.target.vocab_size(),
            tagging,
            ..base.clone()
        }
    }

    /// Source ids: optional source tag, subwords, then `</s>`.
    pub fn encode_source<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        let body = match tokens
            .first()
            .and_then(|t| DomainTag::from_surface(t.as_ref()))
        {
            Some(tag) if tag.side == TagSide::SourceStart => {
                ids.push(tag.id());
                &tokens[1..]
            }
            Some(tag) => {
                return Err(Error::Tagging(format!(
                    "{tag} cannot start a source sequence"
                )))
            }
            None => tokens,
        };
        ids.extend(self.source.apply_ids(body));
        ids.push(EOS_ID);
        Ok(ids)
    }

    /// Start token and subword ids of a target sentence.
    pub fn encode_target<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(usize, Vec<usize>)> {
        match tokens
            .first()
            .and_then(|t| DomainTag::from_surface(t.as_ref()))
        {
            Some(tag) if tag.side == TagSide::TargetStart => {
                Ok((tag.id(), self.target.apply_ids(&tokens[1..])))
            }
            Some(tag) => Err(Error::Tagging(format!(
                "{tag} cannot start a target sequence"
            ))),
            None => Ok((reserved::BOS_ID, self.target.apply_ids(tokens))),
        }
    }

    /// Training examples. Pairs with more than `max_len` subwords on either
    /// side (tag excluded) are skipped and counted.
    pub fn examples(&self, corpus: &Corpus, max_len: usize) -> Result<(Vec<Example>, usize)> {
        let mut out = Vec::with_capacity(corpus.len());
        let mut skipped = 0;
        for p in &corpus.pairs {
            let src = self.encode_source(&p.source)?;
            let (start, tgt) = self.encode_target(&p.target)?;
            let tagged = (4..reserved::RESERVED.len()).contains(&src[0]);
            let src_body = src.len() - 1 - usize::from(tagged);
            if src_body > max_len || tgt.len() > max_len {
                skipped += 1;
                continue;
            }
            out.push(Example::new(src, start, &tgt));
        }
        Ok((out, skipped))
    }

    /// Target words (still tokenized) for generated ids.
    pub fn decode_target(&self, ids: &[usize]) -> Sentence {
        let text = decode_bpe(&self.target.ids_to_tokens(ids));
        text.split_whitespace().map(str::to_owned).collect()
    }
}

/// Learns a codec if none is given, trains one model and returns both.
pub fn train_system(
    corpus: &Corpus,
    codec: Option<Codec>,
    merges: usize,
    base: &ModelConfig,
    train: &TrainConfig,
) -> Result<(Codec, Seq2SeqModel<f32>)> {
    let codec = match codec {
        Some(c) => c,
        None => Codec::learn(corpus, merges)?,
    };
    let config = codec.model_config(base, tagging_of(corpus)?);
    let (examples, skipped) = codec.examples(corpus, MAX_LEN)?;
    if skipped > 0 {
        log::warn!("{skipped} pairs longer than {MAX_LEN} subwords were skipped");
    }
    let mut model = Seq2SeqModel::new(config)?;
    let state = model::train(&mut model, &examples, train.clone())?;
    if let Some(&(step, loss)) = state.loss_curve.last() {
        info!(
            "trained {step} steps on {} examples, last loss {loss:.4}",
            examples.len()
        );
    }
    Ok((codec, model))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Translation {
    pub hypothesis: BeamHypothesis,
    /// Tokenized output words.
    pub words: Sentence,
    /// Detokenized output.
    pub text: String,
}

/// An ensemble plus the codec that maps text to its ids.
#[derive(Clone, Debug)]
pub struct Translator<T> {
    pub codec: Codec,
    pub ensemble: Ensemble<T>,
    pub start: StartToken,
    detok: Detokenizer,
}

impl<T: Scalar> Translator<T> {
    pub fn new(codec: Codec, ensemble: Ensemble<T>) -> Result<Self> {
        let m = ensemble.members()[0].config();
        if m.src_vocab != codec.source.vocab_size() || m.tgt_vocab != codec.target.vocab_size() {
            return Err(Error::ModelMismatch(format!(
                "model vocabularies {}/{} do not match the codec's {}/{}",
                m.src_vocab,
                m.tgt_vocab,
                codec.source.vocab_size(),
                codec.target.vocab_size()
            )));
        }
        let detok = Detokenizer::new(&codec.direction.target);
        Ok(Translator {
            codec,
            ensemble,
            start: StartToken::Begin,
            detok,
        })
    }

    pub fn with_start(mut self, start: StartToken) -> Self {
        self.start = start;
        self
    }

    pub fn default_start(&self) -> StartToken {
        self.start
    }

    pub fn detokenize_target<S: AsRef<str>>(&self, words: &[S]) -> String {
        self.detok.detokenize(words)
    }

    fn finish(&self, hypothesis: BeamHypothesis) -> Translation {
        let words = self.codec.decode_target(hypothesis.content());
        let text = self.detok.detokenize(&words);
        Translation {
            hypothesis,
            words,
            text,
        }
    }

    /// Best-first n-best list for one tokenized source sentence.
    pub fn translate_nbest<S: AsRef<str>>(
        &self,
        source: &[S],
        start: StartToken,
        config: &DecodeConfig,
    ) -> Result<Vec<Translation>> {
        let ids = self.codec.encode_source(source)?;
        Ok(beam_search_nbest(&self.ensemble, &ids, start, config)?
            .into_iter()
            .map(|h| self.finish(h))
            .collect())
    }

    pub fn translate<S: AsRef<str>>(
        &self,
        source: &[S],
        start: StartToken,
        config: &DecodeConfig,
    ) -> Result<Translation> {
        Ok(self
            .translate_nbest(source, start, config)?
            .into_iter()
            .next()
            .expect("beam is never empty"))
    }

    pub fn sample<S: AsRef<str>>(
        &self,
        source: &[S],
        start: StartToken,
        max_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Translation> {
        let ids = self.codec.encode_source(source)?;
        let h = crate::decode::sample(&self.ensemble, &ids, start, max_len, rng)?;
        Ok(self.finish(h))
    }
}

/// Formats one n-best entry as `index ||| text ||| logp ||| length`.
pub fn nbest_line(index: usize, t: &Translation) -> String {
    format!(
        "{index} ||| {} ||| {:.6} ||| {}",
        t.text,
        t.hypothesis.logp,
        t.hypothesis.len()
    )
}

/// Letter case that marks a synthetic domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStyle {
    Lower,
    Upper,
}

impl CaseStyle {
    pub fn apply(self, word: &str) -> String {
        match self {
            CaseStyle::Lower => word.to_lowercase(),
            CaseStyle::Upper => word.to_uppercase(),
        }
    }

    /// Non-empty and every cased letter in this style.
    pub fn matches<S: AsRef<str>>(self, words: &[S]) -> bool {
        let mut letters = words
            .iter()
            .flat_map(|w| w.as_ref().chars())
            .filter(|c| c.is_alphabetic())
            .peekable();
        if letters.peek().is_none() {
            return false;
        }
        letters.all(|c| match self {
            CaseStyle::Lower => !c.is_uppercase(),
            CaseStyle::Upper => !c.is_lowercase(),
        })
    }
}

/// Parameters of the toy bilingual task. The "foreign" side spells every
/// target word backwards; the clean and noisy domains differ only in
/// letter case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub lexicon_size: usize,
    /// Target sentences; each appears once per domain.
    pub train_sentences: usize,
    pub mono_sentences: usize,
    pub test_sentences: usize,
    pub held_out_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub clean_case: CaseStyle,
    pub noisy_case: CaseStyle,
    pub source_lang: String,
    pub target_lang: String,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            lexicon_size: 16,
            train_sentences: 400,
            mono_sentences: 200,
            test_sentences: 50,
            held_out_sentences: 200,
            min_words: 2,
            max_words: 5,
            clean_case: CaseStyle::Lower,
            noisy_case: CaseStyle::Upper,
            source_lang: "fr".into(),
            target_lang: "en".into(),
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub clean: Corpus,
    pub noisy: Corpus,
    /// Target-language sentences for back-translation.
    pub mono: MonoCorpus,
    /// Noisy-domain test pairs, untagged.
    pub test: Corpus,
    /// Target-language sentences unseen in training.
    pub held_out: Vec<Sentence>,
    pub config: SyntheticConfig,
}

impl SyntheticConfig {
    pub fn foreign(&self, words: &[String], case: CaseStyle) -> Sentence {
        words
            .iter()
            .map(|w| case.apply(&w.chars().rev().collect::<String>()))
            .collect()
    }

    pub fn direction(&self) -> Direction {
        Direction::new(self.source_lang.clone(), self.target_lang.clone())
    }
}

fn lexicon(size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let syllables = rng.gen_range(1..=2);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Builds the toy corpora. Train, mono, test and held-out sentences are
/// pairwise distinct.
pub fn synthetic_data(config: &SyntheticConfig) -> Result<SyntheticData> {
    if config.lexicon_size == 0 || config.min_words == 0 || config.min_words > config.max_words {
        return Err(Error::Config(
            "synthetic lexicon and sentence lengths must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lex = lexicon(config.lexicon_size, &mut rng);
    let wanted = config.train_sentences
        + config.mono_sentences
        + config.test_sentences
        + config.held_out_sentences;
    let mut seen = HashSet::new();
    let mut sentences = Vec::with_capacity(wanted);
    let mut attempts = 0usize;
    while sentences.len() < wanted {
        attempts += 1;
        if attempts > wanted * 1000 {
            return Err(Error::Config(format!(
                "cannot draw {wanted} distinct sentences from a {}-word lexicon",
                config.lexicon_size
            )));
        }
        let n = rng.gen_range(config.min_words..=config.max_words);
        let s: Sentence = (0..n)
            .map(|_| lex[rng.gen_range(0..lex.len())].clone())
            .collect();
        if seen.insert(s.clone()) {
            sentences.push(s);
        }
    }
    let mut rest = sentences.into_iter();
    let mut take = |n: usize| -> Vec<Sentence> { rest.by_ref().take(n).collect() };
    let train = take(config.train_sentences);
    let mono = take(config.mono_sentences);
    let test = take(config.test_sentences);
    let held_out = take(config.held_out_sentences);

    let dir = config.direction();
    let pairs = |sents: &[Sentence], case: CaseStyle, origin: Origin| -> Vec<TaggedSentencePair> {
        sents
            .iter()
            .map(|s| TaggedSentencePair::new(config.foreign(s, case), s.clone(), origin))
            .collect()
    };
    Ok(SyntheticData {
        clean: Corpus::from_pairs(
            dir.clone(),
            pairs(&train, config.clean_case, Origin::CleanParallel),
        ),
        noisy: Corpus::from_pairs(
            dir.clone(),
            pairs(&train, config.noisy_case, Origin::NoisyParallel),
        ),
        mono: MonoCorpus::new(config.target_lang.clone(), mono),
        test: Corpus::from_pairs(dir, pairs(&test, config.noisy_case, Origin::NoisyParallel))
            .with_split(Split::Test),
        held_out,
        config: config.clone(),
    })
}

impl SyntheticData {
    /// Writes `clean.*`, `noisy.*`, `mono.*`, `test.*` and `heldout.*` with
    /// language suffixes.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (s, t) = (&self.config.source_lang, &self.config.target_lang);
        for (name, c) in [
            ("clean", &self.clean),
            ("noisy", &self.noisy),
            ("test", &self.test),
        ] {
            c.write(
                &dir.join(format!("{name}.{s}")),
                &dir.join(format!("{name}.{t}")),
                None,
            )?;
        }
        let lines =
            |sents: &[Sentence]| -> String { sents.iter().map(|x| x.join(" ") + "\n").collect() };
        let mono = dir.join(format!("mono.{t}"));
        fs::write(&mono, lines(&self.mono.sentences)).map_err(|e| Error::io(&mono, e))?;
        let held = dir.join(format!("heldout.{t}"));
        fs::write(&held, lines(&self.held_out)).map_err(|e| Error::io(&held, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub bleu: BleuConfig,
    pub merges: usize,
    /// Members in the ensemble row, counting the back-translation system.
    pub ensemble_size: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            bleu: BleuConfig::default(),
            merges: 200,
            ensemble_size: 2,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub system: String,
    pub training_pairs: usize,
    pub bleu: f64,
    pub bleu_lowercase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub test_pairs: usize,
    pub synthetic_kept: usize,
    pub synthetic_dropped: usize,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "| system | training pairs | BLEU | BLEU (lowercased) |")?;
        writeln!(f, "|---|---:|---:|---:|")?;
        for r in &self.rows {
            writeln!(
                f,
                "| {} | {} | {:.2} | {:.2} |",
                r.system, r.training_pairs, r.bleu, r.bleu_lowercase
            )?;
        }
        Ok(())
    }
}

fn train_with_seed(
    corpus: &Corpus,
    codec: &Codec,
    cfg: &ExperimentConfig,
    stage: &str,
) -> Result<Seq2SeqModel<f32>> {
    let model = ModelConfig {
        seed: stage_seed(cfg.seed, &format!("{stage}/init")),
        ..cfg.model.clone()
    };
    let train = TrainConfig {
        seed: stage_seed(cfg.seed, &format!("{stage}/train")),
        checkpoint_path: None,
        ..cfg.train.clone()
    };
    info!("training {stage} on {} pairs", corpus.len());
    Ok(train_system(corpus, Some(codec.clone()), cfg.merges, &model, &train)?.1)
}

fn score<T: Scalar>(
    translator: &Translator<T>,
    test: &Corpus,
    cfg: &ExperimentConfig,
) -> Result<(f64, f64)> {
    let cased = evaluate_system(translator, test, &cfg.decode, &cfg.bleu)?;
    let lc = BleuConfig {
        lowercase: true,
        ..cfg.bleu
    };
    let lower = crate::eval::corpus_bleu(&cased.hypotheses, &cased.references, &lc)?;
    Ok((cased.report.score, lower.score))
}

/// Compares domain-insensitive mixing, domain-sensitive mixing, sensitive
/// mixing plus noisy back-translation, and an ensemble on top of that, all
/// scored on the noisy test set.
pub fn experiment(
    clean: &Corpus,
    noisy: &Corpus,
    mono: &MonoCorpus,
    test: &Corpus,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if cfg.ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be at least 1".into()));
    }
    let (clean, noisy) = (clean.clone(), noisy.clone());
    let empty = Corpus::new(clean.direction.clone());
    let mut rows = Vec::new();

    // the generator and its pseudo-sources come first so every final
    // system shares one codec learned on all final-direction text
    let gen_corpus = build_generator_corpus(
        clean.clone(),
        noisy.clone(),
        stage_seed(cfg.seed, "generator/mix"),
    )?;
    let gen_codec = Codec::learn(&gen_corpus, cfg.merges)?;
    let generator = train_with_seed(&gen_corpus, &gen_codec, cfg, "generator")?;
    let generator = Translator::new(gen_codec, Ensemble::single(generator))?;
    let mode = GenerationMode::Beam(DecodeConfig {
        length_reward: 0.0,
        ..cfg.decode
    });
    let (synthetic, gen_report) =
        generate_pseudo_sources(&generator, mono, DomainTag::NOISY_TARGET, &mode)?;

    let insensitive = assemble_training_set(
        &clean,
        &noisy,
        &empty,
        AssemblyMode::Insensitive,
        stage_seed(cfg.seed, "mix/insensitive"),
    )?;
    let sensitive = assemble_training_set(
        &clean,
        &noisy,
        &empty,
        AssemblyMode::Sensitive,
        stage_seed(cfg.seed, "mix/sensitive"),
    )?;
    let augmented = assemble_training_set(
        &clean,
        &noisy,
        &synthetic,
        AssemblyMode::Sensitive,
        stage_seed(cfg.seed, "mix/augmented"),
    )?;
    let codec = Codec::learn(&augmented, cfg.merges)?;

    let tagged_test = test
        .clone()
        .untagged_all()
        .tagged(DomainTag::NOISY_SOURCE)?;
    let plain_test = test.clone().untagged_all();

    let m = train_with_seed(&insensitive, &codec, cfg, "insensitive")?;
    let t = Translator::new(codec.clone(), Ensemble::single(m))?;
    let (b, bl) = score(&t, &plain_test, cfg)?;
    rows.push(ExperimentRow {
        system: "mix, domain-insensitive".into(),
        training_pairs: insensitive.len(),
        bleu: b,
        bleu_lowercase: bl,
    });

    let m = train_with_seed(&sensitive, &codec, cfg, "sensitive")?;
    let t = Translator::new(codec.clone(), Ensemble::single(m))?;
    let (b, bl) = score(&t, &tagged_test, cfg)?;
    rows.push(ExperimentRow {
        system: "mix, domain-sensitive".into(),
        training_pairs: sensitive.len(),
        bleu: b,
        bleu_lowercase: bl,
    });

    let mut members = vec![train_with_seed(&augmented, &codec, cfg, "augmented/0")?];
    let t = Translator::new(codec.clone(), Ensemble::single(members[0].clone()))?;
    let (b, bl) = score(&t, &tagged_test, cfg)?;
    rows.push(ExperimentRow {
        system: "+ noisy back-translation".into(),
        training_pairs: augmented.len(),
        bleu: b,
        bleu_lowercase: bl,
    });

    for i in 1..cfg.ensemble_size {
        members.push(train_with_seed(
            &augmented,
            &codec,
            cfg,
            &format!("augmented/{i}"),
        )?);
    }
    let t = Translator::new(codec, Ensemble::new(members)?)?;
    let (b, bl) = score(&t, &tagged_test, cfg)?;
    rows.push(ExperimentRow {
        system: format!("+ ensemble of {}", cfg.ensemble_size),
        training_pairs: augmented.len(),
        bleu: b,
        bleu_lowercase: bl,
    });

    Ok(ExperimentReport {
        rows,
        test_pairs: test.len(),
        synthetic_kept: gen_report.kept,
        synthetic_dropped: gen_report.dropped_empty,
    })
}
