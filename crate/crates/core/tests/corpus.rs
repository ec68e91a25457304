use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use tagmt::corpus::{
    corpus_stats, filter_by_length, load_monolingual, load_parallel, load_tagged_parallel,
    load_with_origins, mix, mix_upsampled, reverse_direction, tag_pair, Corpus, Direction,
    DomainTag, Origin, Split, StatsReport, StatsRow, TaggedSentencePair, MAX_LEN,
};
use tagmt::Error;

fn en_fr() -> Direction {
    Direction::new("en", "fr")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn toy(n: usize, origin: Origin) -> Corpus {
    let pairs = (0..n)
        .map(|i| TaggedSentencePair::from_text(&format!("s{i} a"), &format!("t{i} b"), origin))
        .collect();
    Corpus::from_pairs(en_fr(), pairs)
}

#[test]
fn loads_aligned_files_and_drops_blank_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s", "Hello  world\n\nthird line\nfour\n");
    let t = write(dir.path(), "t", "Bonjour\nvide\n   \nquatre\n");
    let (c, report) = load_parallel(&s, &t, Origin::CleanParallel, en_fr()).unwrap();
    assert_eq!(report.lines, 4);
    assert_eq!(report.kept, 2);
    assert_eq!(report.dropped_empty, 2);
    assert_eq!(c.pairs[0].source, vec!["Hello", "world"]);
    assert_eq!(c.pairs[1].target, vec!["quatre"]);
    assert!(c
        .pairs
        .iter()
        .all(|p| p.tag.is_none() && p.origin == Origin::CleanParallel));
}

#[test]
fn misaligned_files_name_both_paths_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "a.en", "1\n2\n3\n");
    let t = write(dir.path(), "a.fr", "1\n2\n");
    let err = load_parallel(&s, &t, Origin::CleanParallel, en_fr()).unwrap_err();
    assert!(matches!(
        err,
        Error::Alignment {
            source_lines: 3,
            target_lines: 2,
            ..
        }
    ));
    let msg = err.to_string();
    assert!(msg.contains("a.en") && msg.contains("a.fr"));
}

#[test]
fn reserved_tokens_in_raw_text_are_contamination() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["hi <noisy> there", "</s>", "<clean_s> hi", "a <pad>"] {
        let s = write(dir.path(), "s", &format!("ok\n{bad}\n"));
        let t = write(dir.path(), "t", "ok\nok\n");
        let err = load_parallel(&s, &t, Origin::CleanParallel, en_fr()).unwrap_err();
        match err {
            Error::Contamination { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }
}

#[test]
fn tagged_loader_accepts_leading_tags_only() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s", "<noisy> a b\nc\n");
    let t = write(dir.path(), "t", "x\n<clean_s> y\n");
    let (c, _) = load_tagged_parallel(&s, &t, Origin::NoisyParallel, en_fr()).unwrap();
    assert_eq!(c.pairs[0].tag, Some(DomainTag::NOISY_SOURCE));
    assert_eq!(c.pairs[0].source_body(), ["a", "b"]);
    assert_eq!(c.pairs[1].tag, Some(DomainTag::CLEAN_TARGET));

    let wrong_side = write(dir.path(), "w", "<clean_s> a\n");
    let one = write(dir.path(), "o", "x\n");
    assert!(matches!(
        load_tagged_parallel(&wrong_side, &one, Origin::NoisyParallel, en_fr()),
        Err(Error::Contamination { .. })
    ));
    let middle = write(dir.path(), "m", "a <noisy>\n");
    assert!(load_tagged_parallel(&middle, &one, Origin::NoisyParallel, en_fr()).is_err());
}

#[test]
fn origins_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = toy(3, Origin::CleanParallel);
    c.pairs[1].origin = Origin::SyntheticBacktranslated;
    let c = Corpus {
        pairs: c
            .pairs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if i == 2 {
                    tag_pair(p, DomainTag::NOISY_SOURCE).unwrap()
                } else {
                    p
                }
            })
            .collect(),
        ..c
    };
    let (s, t, o) = (
        dir.path().join("s"),
        dir.path().join("t"),
        dir.path().join("o"),
    );
    c.write(&s, &t, Some(&o)).unwrap();
    let (back, _) = load_with_origins(&s, &t, &o, en_fr()).unwrap();
    assert_eq!(back.pairs, c.pairs);
}

#[test]
fn monolingual_load_drops_blank_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m", "one two\n\n  \nthree\n");
    let m = load_monolingual(&p, "en").unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m.language, "en");
}

#[test]
fn tagging_puts_the_symbol_at_position_zero_of_its_side() {
    let p = TaggedSentencePair::from_text("a b", "c", Origin::NoisyParallel);
    let s = tag_pair(p.clone(), DomainTag::NOISY_SOURCE).unwrap();
    assert_eq!(s.source, vec!["<noisy>", "a", "b"]);
    assert_eq!(s.target, vec!["c"]);
    let t = tag_pair(p.clone(), DomainTag::CLEAN_TARGET).unwrap();
    assert_eq!(t.target, vec!["<clean_s>", "c"]);
    assert_eq!(t.target_body(), ["c"]);
    assert_eq!(s.clone().untagged(), p);
    assert!(matches!(
        tag_pair(s, DomainTag::CLEAN_SOURCE),
        Err(Error::Tagging(_))
    ));
}

#[test]
fn tag_is_injective_across_the_four_symbols() {
    let p = TaggedSentencePair::from_text("a", "b", Origin::CleanParallel);
    let tags = [
        DomainTag::CLEAN_SOURCE,
        DomainTag::NOISY_SOURCE,
        DomainTag::CLEAN_TARGET,
        DomainTag::NOISY_TARGET,
    ];
    let tagged: Vec<_> = tags
        .iter()
        .map(|&t| tag_pair(p.clone(), t).unwrap())
        .collect();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(i == j, tagged[i] == tagged[j]);
        }
        assert_eq!(DomainTag::from_surface(tags[i].surface()), Some(tags[i]));
        assert_eq!(tags[i].id(), 4 + i);
    }
}

#[test]
fn reverse_is_an_involution_on_untagged_corpora() {
    let c = toy(5, Origin::NoisyParallel).with_split(Split::Valid);
    let r = reverse_direction(c.clone());
    assert_eq!(r.direction, Direction::new("fr", "en"));
    assert_eq!(r.pairs[0].source, c.pairs[0].target);
    assert_eq!(reverse_direction(r), c);
}

#[test]
fn reverse_drops_tags() {
    let c = toy(2, Origin::CleanParallel)
        .tagged(DomainTag::CLEAN_SOURCE)
        .unwrap();
    let r = reverse_direction(c);
    assert!(r.pairs.iter().all(|p| p.tag.is_none()));
    assert!(r
        .pairs
        .iter()
        .all(|p| !p.target.iter().any(|t| t.starts_with('<'))));
}

#[test]
fn length_filter_boundary() {
    let long = |n: usize| vec!["w".to_owned(); n];
    let pairs = vec![
        TaggedSentencePair::new(long(MAX_LEN), long(1), Origin::CleanParallel),
        TaggedSentencePair::new(long(MAX_LEN + 1), long(1), Origin::CleanParallel),
        TaggedSentencePair::new(long(1), long(MAX_LEN + 1), Origin::CleanParallel),
    ];
    let c = Corpus::from_pairs(en_fr(), pairs)
        .tagged(DomainTag::NOISY_SOURCE)
        .unwrap();
    let (kept, removed) = filter_by_length(c, MAX_LEN);
    assert_eq!(removed, 2);
    assert_eq!(kept.len(), 1);
    // the tag does not count towards the limit
    assert_eq!(kept.pairs[0].source.len(), MAX_LEN + 1);
}

#[test]
fn mix_is_a_seeded_permutation_of_the_concatenation() {
    let a = toy(30, Origin::CleanParallel);
    let b = toy(20, Origin::NoisyParallel);
    let m1 = mix(vec![a.clone(), b.clone()], 11).unwrap();
    let m2 = mix(vec![a.clone(), b.clone()], 11).unwrap();
    let m3 = mix(vec![a.clone(), b.clone()], 12).unwrap();
    assert_eq!(m1, m2);
    assert_ne!(m1.pairs, m3.pairs);
    assert_eq!(m1.len(), 50);

    let mut want: HashMap<TaggedSentencePair, usize> = HashMap::new();
    for p in a.pairs.iter().chain(&b.pairs) {
        *want.entry(p.clone()).or_default() += 1;
    }
    let mut got: HashMap<TaggedSentencePair, usize> = HashMap::new();
    for p in &m1.pairs {
        *got.entry(p.clone()).or_default() += 1;
    }
    assert_eq!(got, want);
}

#[test]
fn upsampling_repeats_each_corpus() {
    let a = toy(3, Origin::CleanParallel);
    let b = toy(2, Origin::NoisyParallel);
    let m = mix_upsampled(vec![a, b], &[1, 4], 0).unwrap();
    let noisy = m
        .pairs
        .iter()
        .filter(|p| p.origin == Origin::NoisyParallel)
        .count();
    assert_eq!((m.len(), noisy), (11, 8));
    assert!(mix_upsampled(vec![toy(1, Origin::CleanParallel)], &[1, 2], 0).is_err());
}

#[test]
fn mix_rejects_mismatched_directions() {
    let a = toy(1, Origin::CleanParallel);
    let b = reverse_direction(toy(1, Origin::CleanParallel));
    assert!(matches!(
        mix(vec![a, b], 0),
        Err(Error::DirectionMismatch { .. })
    ));
    assert!(matches!(mix(vec![], 0), Err(Error::Empty(_))));
}

#[test]
fn stats_count_rows_and_splits() {
    let mut c = toy(4, Origin::CleanParallel);
    c.pairs[3].origin = Origin::SyntheticBacktranslated;
    let mut report = corpus_stats(&c);
    report.add_corpus(&toy(2, Origin::NoisyParallel).with_split(Split::Test));
    assert_eq!(report.count(StatsRow::Clean, Split::Train), 3);
    assert_eq!(report.count(StatsRow::Synthetic, Split::Train), 1);
    assert_eq!(report.count(StatsRow::Noisy, Split::Test), 2);
    assert_eq!(report.count(StatsRow::Noisy, Split::Valid), 0);
    assert_eq!(report.total(), 6);
    let kv = report.to_kv();
    assert!(kv.contains("train.clean=3\n"));
    assert!(kv.contains("test.noisy=2\n"));
    assert!(kv.ends_with("total=6\n"));
    let back: StatsReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

proptest! {
    #[test]
    fn untag_inverts_tag(src in prop::collection::vec("[a-z]{1,5}", 1..6), tgt in prop::collection::vec("[a-z]{1,5}", 1..6), which in 0usize..4) {
        let tag = [DomainTag::CLEAN_SOURCE, DomainTag::NOISY_SOURCE, DomainTag::CLEAN_TARGET, DomainTag::NOISY_TARGET][which];
        let p = TaggedSentencePair::new(src, tgt, Origin::CleanParallel);
        let t = tag_pair(p.clone(), tag).unwrap();
        prop_assert_eq!(t.source_body(), p.source.as_slice());
        prop_assert_eq!(t.target_body(), p.target.as_slice());
        prop_assert_eq!(t.untagged(), p);
    }
}
