use tagmt::corpus::{Corpus, Direction, DomainTag, Origin, TaggedSentencePair};
use tagmt::decode::{DecodeConfig, Ensemble, StartToken};
use tagmt::eval::{evaluate_system, BleuConfig};
use tagmt::model::{ModelConfig, Tagging, TrainConfig};
use tagmt::pipeline::{
    experiment, nbest_line, stage_seed, synthetic_data, tagging_of, train_system, CaseStyle, Codec,
    ExperimentConfig, SyntheticConfig, Translator,
};
use tagmt::reserved::{BOS_ID, EOS_ID};
use tagmt::{Error, Model};

fn small_model() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        heads: 2,
        ffn: 32,
        layers: 1,
        dropout: 0.0,
        label_smoothing: 0.0,
        ..ModelConfig::default()
    }
}

fn short_training() -> TrainConfig {
    TrainConfig {
        steps: 30,
        batch_size: 8,
        warmup: 10,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

fn toy_corpus() -> Corpus {
    let data = synthetic_data(&SyntheticConfig {
        train_sentences: 40,
        ..SyntheticConfig::default()
    })
    .unwrap();
    data.clean
}

#[test]
fn stage_seeds_differ_by_stage_and_seed() {
    assert_eq!(stage_seed(1, "a"), stage_seed(1, "a"));
    assert_ne!(stage_seed(1, "a"), stage_seed(1, "b"));
    assert_ne!(stage_seed(1, "a"), stage_seed(2, "a"));
}

#[test]
fn tagging_convention_is_detected() {
    let c = toy_corpus();
    assert_eq!(tagging_of(&c).unwrap(), Tagging::None);
    assert_eq!(
        tagging_of(&c.clone().tagged(DomainTag::NOISY_SOURCE).unwrap()).unwrap(),
        Tagging::Source
    );
    assert_eq!(
        tagging_of(&c.clone().tagged(DomainTag::CLEAN_TARGET).unwrap()).unwrap(),
        Tagging::Target
    );
    let mut mixed = c.clone();
    mixed.pairs[0] =
        tagmt::corpus::tag_pair(mixed.pairs[0].clone(), DomainTag::CLEAN_SOURCE).unwrap();
    assert!(matches!(tagging_of(&mixed), Err(Error::Tagging(_))));
}

#[test]
fn codec_encodes_tags_in_place_of_the_begin_token() {
    let c = toy_corpus().tagged(DomainTag::NOISY_SOURCE).unwrap();
    let codec = Codec::learn(&c, 20).unwrap();
    let p = &c.pairs[0];
    let src = codec.encode_source(&p.source).unwrap();
    assert_eq!(src[0], DomainTag::NOISY_SOURCE.id());
    assert_eq!(*src.last().unwrap(), EOS_ID);
    let (start, body) = codec.encode_target(&p.target).unwrap();
    assert_eq!(start, BOS_ID);
    assert_eq!(codec.decode_target(&body), p.target);

    let (start, _) = codec.encode_target(&["<noisy_s>", "x"]).unwrap();
    assert_eq!(start, DomainTag::NOISY_TARGET.id());
    assert!(codec.encode_source(&["<noisy_s>", "x"]).is_err());
    assert!(codec.encode_target(&["<noisy>", "x"]).is_err());
}

#[test]
fn codec_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let codec = Codec::learn(&toy_corpus(), 25).unwrap();
    codec.save(dir.path()).unwrap();
    assert_eq!(Codec::load(dir.path()).unwrap(), codec);
}

#[test]
fn examples_filter_counts_subwords_not_words() {
    let long_word = "abcdefgh".repeat(4);
    let pairs = vec![
        TaggedSentencePair::from_text("ab cd", "ef", Origin::CleanParallel),
        TaggedSentencePair::from_text(&long_word, "ef", Origin::CleanParallel),
    ];
    let c = Corpus::from_pairs(Direction::new("fr", "en"), pairs)
        .tagged(DomainTag::CLEAN_SOURCE)
        .unwrap();
    let codec = Codec::learn(&c, 0).unwrap();
    // one word, 32 characters, no merges: 32 subwords
    let (kept, skipped) = codec.examples(&c, 31).unwrap();
    assert_eq!((kept.len(), skipped), (1, 1));
    let (kept, skipped) = codec.examples(&c, 32).unwrap();
    assert_eq!((kept.len(), skipped), (2, 0));
}

#[test]
fn translator_checks_vocabulary_against_codec() {
    let codec = Codec::learn(&toy_corpus(), 10).unwrap();
    let wrong = Model::new(small_model()).unwrap();
    assert!(matches!(
        Translator::new(codec, Ensemble::single(wrong)),
        Err(Error::ModelMismatch(_))
    ));
}

#[test]
fn evaluation_is_deterministic_and_reports_failures() {
    let corpus = toy_corpus();
    let (codec, model) =
        train_system(&corpus, None, 20, &small_model(), &short_training()).unwrap();
    let t = Translator::new(codec, Ensemble::single(model)).unwrap();
    let decode = DecodeConfig {
        beam_size: 2,
        length_reward: 0.0,
        max_len: 10,
    };
    let test = Corpus::from_pairs(corpus.direction.clone(), corpus.pairs[..5].to_vec());
    let a = evaluate_system(&t, &test, &decode, &BleuConfig::default()).unwrap();
    let b = evaluate_system(&t, &test, &decode, &BleuConfig::default()).unwrap();
    assert_eq!(a.hypotheses_text(), b.hypotheses_text());
    assert_eq!(a.hypotheses.len(), 5);
    assert!(a.failures.is_empty());
    assert!(a
        .report
        .preprocessing
        .starts_with("normalize > detokenize > "));

    let empty = Corpus::new(corpus.direction.clone());
    assert!(matches!(
        evaluate_system(&t, &empty, &decode, &BleuConfig::default()),
        Err(Error::Empty(_))
    ));

    // a target-side tag on a source is a per-sentence failure, not fatal
    let mut bad = test.clone();
    bad.pairs[1].source.insert(0, "<noisy_s>".into());
    let out = evaluate_system(&t, &bad, &decode, &BleuConfig::default()).unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].0, 1);
    assert_eq!(out.hypotheses[1], "");
}

#[test]
fn nbest_lines_follow_the_exchange_format() {
    let corpus = toy_corpus();
    let (codec, model) =
        train_system(&corpus, None, 20, &small_model(), &short_training()).unwrap();
    let t = Translator::new(codec, Ensemble::single(model)).unwrap();
    let config = DecodeConfig {
        beam_size: 3,
        length_reward: 0.0,
        max_len: 8,
    };
    let list = t
        .translate_nbest(&corpus.pairs[0].source, StartToken::Begin, &config)
        .unwrap();
    for h in &list {
        let line = nbest_line(7, h);
        let fields: Vec<&str> = line.split(" ||| ").collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "7");
        assert_eq!(fields[1], h.text);
        assert!((fields[2].parse::<f64>().unwrap() - h.hypothesis.logp).abs() < 1e-6);
        assert_eq!(fields[3].parse::<usize>().unwrap(), h.hypothesis.len());
    }
}

#[test]
fn synthetic_domains_share_sources_and_differ_in_case() {
    let cfg = SyntheticConfig::default();
    let data = synthetic_data(&cfg).unwrap();
    assert_eq!(data.clean.len(), cfg.train_sentences);
    for (c, n) in data.clean.pairs.iter().zip(&data.noisy.pairs) {
        assert_eq!(c.target, n.target);
        assert!(CaseStyle::Lower.matches(&c.source));
        assert!(CaseStyle::Upper.matches(&n.source));
    }
    assert_eq!(data, synthetic_data(&cfg).unwrap());
    let too_many = SyntheticConfig {
        lexicon_size: 2,
        max_words: 2,
        ..cfg
    };
    assert!(synthetic_data(&too_many).is_err());
}

#[test]
fn experiment_reports_four_systems() {
    let data = synthetic_data(&SyntheticConfig {
        train_sentences: 40,
        mono_sentences: 20,
        test_sentences: 8,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let cfg = ExperimentConfig {
        model: small_model(),
        train: short_training(),
        decode: DecodeConfig {
            beam_size: 1,
            length_reward: 0.0,
            max_len: 10,
        },
        merges: 20,
        ensemble_size: 2,
        ..ExperimentConfig::default()
    };
    let r = experiment(&data.clean, &data.noisy, &data.mono, &data.test, &cfg).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert_eq!(r.test_pairs, 8);
    assert_eq!(r.rows[0].training_pairs, 80);
    assert_eq!(r.rows[2].training_pairs, 80 + r.synthetic_kept);
    assert_eq!(r.synthetic_kept + r.synthetic_dropped, 20);
    let table = r.to_string();
    assert_eq!(
        table
            .lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| system"))
            .count(),
        4
    );
    assert_eq!(
        r,
        experiment(&data.clean, &data.noisy, &data.mono, &data.test, &cfg).unwrap()
    );
}
