//! Parallel and monolingual corpora: loading, domain tagging, direction
//! reversal, length filtering, seeded mixing and dataset accounting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reserved;
use crate::subword::PunctNormalizer;

pub type Sentence = Vec<String>;

/// Default bound used by [`filter_by_length`].
pub const MAX_LEN: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Clean,
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagSide {
    SourceStart,
    TargetStart,
}

/// A domain start symbol. There are exactly four of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DomainTag {
    pub kind: DomainKind,
    pub side: TagSide,
}

impl DomainTag {
    pub const CLEAN_SOURCE: DomainTag = DomainTag::new(DomainKind::Clean, TagSide::SourceStart);
    pub const NOISY_SOURCE: DomainTag = DomainTag::new(DomainKind::Noisy, TagSide::SourceStart);
    pub const CLEAN_TARGET: DomainTag = DomainTag::new(DomainKind::Clean, TagSide::TargetStart);
    pub const NOISY_TARGET: DomainTag = DomainTag::new(DomainKind::Noisy, TagSide::TargetStart);

    pub const fn new(kind: DomainKind, side: TagSide) -> Self {
        DomainTag { kind, side }
    }

    pub fn surface(self) -> &'static str {
        match (self.kind, self.side) {
            (DomainKind::Clean, TagSide::SourceStart) => reserved::CLEAN_SRC,
            (DomainKind::Noisy, TagSide::SourceStart) => reserved::NOISY_SRC,
            (DomainKind::Clean, TagSide::TargetStart) => reserved::CLEAN_TGT,
            (DomainKind::Noisy, TagSide::TargetStart) => reserved::NOISY_TGT,
        }
    }

    pub fn from_surface(token: &str) -> Option<Self> {
        [
            Self::CLEAN_SOURCE,
            Self::NOISY_SOURCE,
            Self::CLEAN_TARGET,
            Self::NOISY_TARGET,
        ]
        .into_iter()
        .find(|t| t.surface() == token)
    }

    pub fn id(self) -> usize {
        reserved::reserved_id(self.surface()).expect("tags are reserved")
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    CleanParallel,
    NoisyParallel,
    SyntheticBacktranslated,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::CleanParallel => "clean",
            Origin::NoisyParallel => "noisy",
            Origin::SyntheticBacktranslated => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(Origin::CleanParallel),
            "noisy" => Some(Origin::NoisyParallel),
            "synthetic" => Some(Origin::SyntheticBacktranslated),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub source: String,
    pub target: String,
}

impl Direction {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Direction {
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        Direction::new(self.target.clone(), self.source.clone())
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedSentencePair {
    pub source: Sentence,
    pub target: Sentence,
    pub tag: Option<DomainTag>,
    pub origin: Origin,
}

impl TaggedSentencePair {
    pub fn new(source: Sentence, target: Sentence, origin: Origin) -> Self {
        TaggedSentencePair {
            source,
            target,
            tag: None,
            origin,
        }
    }

    /// Convenience constructor from whitespace-separated text.
    pub fn from_text(source: &str, target: &str, origin: Origin) -> Self {
        Self::new(split_ws(source), split_ws(target), origin)
    }

    /// Tokens excluding a leading tag.
    pub fn source_body(&self) -> &[String] {
        match self.tag {
            Some(t) if t.side == TagSide::SourceStart => &self.source[1..],
            _ => &self.source,
        }
    }

    pub fn target_body(&self) -> &[String] {
        match self.tag {
            Some(t) if t.side == TagSide::TargetStart => &self.target[1..],
            _ => &self.target,
        }
    }

    /// Removes the position-0 tag, if any.
    pub fn untagged(mut self) -> Self {
        if let Some(tag) = self.tag.take() {
            match tag.side {
                TagSide::SourceStart => {
                    self.source.remove(0);
                }
                TagSide::TargetStart => {
                    self.target.remove(0);
                }
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub pairs: Vec<TaggedSentencePair>,
    pub direction: Direction,
    pub split: Split,
}

impl Corpus {
    pub fn new(direction: Direction) -> Self {
        Corpus {
            pairs: Vec::new(),
            direction,
            split: Split::Train,
        }
    }

    pub fn from_pairs(direction: Direction, pairs: Vec<TaggedSentencePair>) -> Self {
        Corpus {
            pairs,
            direction,
            split: Split::Train,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Removes every position-0 tag.
    pub fn untagged_all(self) -> Self {
        let pairs = self
            .pairs
            .into_iter()
            .map(TaggedSentencePair::untagged)
            .collect();
        Corpus { pairs, ..self }
    }

    /// Tags every pair, failing on the first already-tagged one.
    pub fn tagged(self, tag: DomainTag) -> Result<Self> {
        let pairs = self
            .pairs
            .into_iter()
            .map(|p| tag_pair(p, tag))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { pairs, ..self })
    }

    /// Writes `source_path`, `target_path` and, when given, a sidecar with one
    /// origin label per line.
    pub fn write(
        &self,
        source_path: &Path,
        target_path: &Path,
        origin_path: Option<&Path>,
    ) -> Result<()> {
        let mut src = String::new();
        let mut tgt = String::new();
        let mut org = String::new();
        for p in &self.pairs {
            src.push_str(&p.source.join(" "));
            src.push('\n');
            tgt.push_str(&p.target.join(" "));
            tgt.push('\n');
            org.push_str(p.origin.label());
            org.push('\n');
        }
        write_file(source_path, src.as_bytes())?;
        write_file(target_path, tgt.as_bytes())?;
        if let Some(path) = origin_path {
            write_file(path, org.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoCorpus {
    pub sentences: Vec<Sentence>,
    pub language: String,
}

impl MonoCorpus {
    pub fn new(language: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        MonoCorpus {
            sentences,
            language: language.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Bookkeeping from a load: how many lines were read and how many dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub kept: usize,
    pub dropped_empty: usize,
}

pub(crate) fn split_ws(text: &str) -> Sentence {
    text.split_whitespace().map(str::to_owned).collect()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Normalizes and tokenizes one raw line, rejecting reserved tokens. When
/// `allow_leading_tag` is set a domain tag may occupy position 0 and is
/// returned separately.
fn tokenize_line(
    normalizer: &PunctNormalizer,
    raw: &str,
    path: &Path,
    line: usize,
    allow_leading_tag: bool,
) -> Result<(Sentence, Option<DomainTag>)> {
    let text = normalizer.normalize(raw);
    let tokens = split_ws(&text);
    let mut tag = None;
    for (i, tok) in tokens.iter().enumerate() {
        if reserved::is_reserved(tok) {
            match DomainTag::from_surface(tok) {
                Some(t) if i == 0 && allow_leading_tag => tag = Some(t),
                _ => {
                    return Err(Error::Contamination {
                        path: path.to_owned(),
                        line,
                        token: tok.clone(),
                    })
                }
            }
        }
    }
    Ok((tokens, tag))
}

fn load_pairs(
    source_path: &Path,
    target_path: &Path,
    origin: Origin,
    direction: Direction,
    allow_tags: bool,
) -> Result<(Corpus, LoadReport)> {
    let src_lines = read_lines(source_path)?;
    let tgt_lines = read_lines(target_path)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::Alignment {
            source_path: source_path.to_owned(),
            target_path: target_path.to_owned(),
            source_lines: src_lines.len(),
            target_lines: tgt_lines.len(),
        });
    }
    let src_norm = PunctNormalizer::new(&direction.source);
    let tgt_norm = PunctNormalizer::new(&direction.target);
    let mut report = LoadReport {
        lines: src_lines.len(),
        ..Default::default()
    };
    let mut pairs = Vec::with_capacity(src_lines.len());
    for (i, (s, t)) in src_lines.iter().zip(&tgt_lines).enumerate() {
        let (source, stag) = tokenize_line(&src_norm, s, source_path, i + 1, allow_tags)?;
        let (target, ttag) = tokenize_line(&tgt_norm, t, target_path, i + 1, allow_tags)?;
        let stag = stag.filter(|t| t.side == TagSide::SourceStart);
        let ttag = ttag.filter(|t| t.side == TagSide::TargetStart);
        let tag = match (stag, ttag) {
            (Some(_), Some(_)) => {
                return Err(Error::Tagging(format!(
                    "line {} carries tags on both sides",
                    i + 1
                )))
            }
            (a, b) => a.or(b),
        };
        // a wrong-side tag is contamination
        for (toks, path) in [(&source, source_path), (&target, target_path)] {
            if let Some(t) = toks.first().and_then(|t| DomainTag::from_surface(t)) {
                if Some(t) != tag {
                    return Err(Error::Contamination {
                        path: path.to_owned(),
                        line: i + 1,
                        token: t.surface().to_owned(),
                    });
                }
            }
        }
        let pair = TaggedSentencePair {
            source,
            target,
            tag,
            origin,
        };
        if pair.source_body().is_empty() || pair.target_body().is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        pairs.push(pair);
    }
    report.kept = pairs.len();
    Ok((Corpus::from_pairs(direction, pairs), report))
}

/// Loads an aligned pair of untagged raw text files.
pub fn load_parallel(
    source_path: &Path,
    target_path: &Path,
    origin: Origin,
    direction: Direction,
) -> Result<(Corpus, LoadReport)> {
    load_pairs(source_path, target_path, origin, direction, false)
}

/// Like [`load_parallel`] but accepts a domain tag at position 0 of either
/// side, as written by [`Corpus::write`] after tagging.
pub fn load_tagged_parallel(
    source_path: &Path,
    target_path: &Path,
    origin: Origin,
    direction: Direction,
) -> Result<(Corpus, LoadReport)> {
    load_pairs(source_path, target_path, origin, direction, true)
}

/// Loads a corpus together with its origin sidecar.
pub fn load_with_origins(
    source_path: &Path,
    target_path: &Path,
    origin_path: &Path,
    direction: Direction,
) -> Result<(Corpus, LoadReport)> {
    let labels = read_lines(origin_path)?;
    let src_lines = read_lines(source_path)?;
    if labels.len() != src_lines.len() {
        return Err(Error::Alignment {
            source_path: source_path.to_owned(),
            target_path: origin_path.to_owned(),
            source_lines: src_lines.len(),
            target_lines: labels.len(),
        });
    }
    let (mut corpus, report) = load_pairs(
        source_path,
        target_path,
        Origin::CleanParallel,
        direction,
        true,
    )?;
    if report.dropped_empty > 0 {
        return Err(Error::Tagging(format!(
            "{} empty lines in a corpus with an origin sidecar",
            report.dropped_empty
        )));
    }
    for (i, (pair, label)) in corpus.pairs.iter_mut().zip(&labels).enumerate() {
        pair.origin = Origin::parse(label.trim()).ok_or_else(|| Error::Parse {
            path: origin_path.to_owned(),
            line: i + 1,
            message: format!("unknown origin {label:?}"),
        })?;
    }
    Ok((corpus, report))
}

/// Loads one sentence per line, dropping blank lines.
pub fn load_monolingual(path: &Path, language: &str) -> Result<MonoCorpus> {
    let normalizer = PunctNormalizer::new(language);
    let mut sentences = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let (tokens, _) = tokenize_line(&normalizer, line, path, i + 1, false)?;
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    Ok(MonoCorpus::new(language, sentences))
}

/// Inserts the tag token at position 0 of the side the tag belongs to. The
/// tag takes over the start-of-sequence role for that side.
pub fn tag_pair(pair: TaggedSentencePair, tag: DomainTag) -> Result<TaggedSentencePair> {
    let already = pair.tag.is_some()
        || pair
            .source
            .first()
            .is_some_and(|t| reserved::is_reserved(t))
        || pair
            .target
            .first()
            .is_some_and(|t| reserved::is_reserved(t));
    if already {
        return Err(Error::Tagging(format!(
            "pair is already tagged, refusing to add {tag}"
        )));
    }
    let mut pair = pair;
    let side = match tag.side {
        TagSide::SourceStart => &mut pair.source,
        TagSide::TargetStart => &mut pair.target,
    };
    side.insert(0, tag.surface().to_owned());
    pair.tag = Some(tag);
    Ok(pair)
}

/// Swaps source and target of every pair and the direction labels. Tags are
/// dropped; re-tag after reversing.
pub fn reverse_direction(corpus: Corpus) -> Corpus {
    let pairs = corpus
        .pairs
        .into_iter()
        .map(|p| {
            let p = p.untagged();
            TaggedSentencePair {
                source: p.target,
                target: p.source,
                tag: None,
                origin: p.origin,
            }
        })
        .collect();
    Corpus {
        pairs,
        direction: corpus.direction.reversed(),
        split: corpus.split,
    }
}

/// Drops pairs whose source or target (tag excluded) is longer than
/// `max_len`. Returns the filtered corpus and the number removed.
pub fn filter_by_length(corpus: Corpus, max_len: usize) -> (Corpus, usize) {
    let before = corpus.pairs.len();
    let pairs: Vec<_> = corpus
        .pairs
        .into_iter()
        .filter(|p| p.source_body().len() <= max_len && p.target_body().len() <= max_len)
        .collect();
    let removed = before - pairs.len();
    (
        Corpus {
            pairs,
            direction: corpus.direction,
            split: corpus.split,
        },
        removed,
    )
}

/// Concatenates corpora and shuffles with a seeded generator.
pub fn mix(corpora: Vec<Corpus>, seed: u64) -> Result<Corpus> {
    let factors = vec![1; corpora.len()];
    mix_upsampled(corpora, &factors, seed)
}

/// [`mix`] with each corpus repeated `factors[i]` times before shuffling.
pub fn mix_upsampled(corpora: Vec<Corpus>, factors: &[usize], seed: u64) -> Result<Corpus> {
    if factors.len() != corpora.len() {
        return Err(Error::LengthMismatch {
            what: "upsampling factors vs corpora",
            left: factors.len(),
            right: corpora.len(),
        });
    }
    let mut iter = corpora.into_iter().zip(factors.iter().copied());
    let Some((first, f0)) = iter.next() else {
        return Err(Error::Empty("mix needs at least one corpus"));
    };
    let direction = first.direction.clone();
    let split = first.split;
    let mut pairs = Vec::new();
    for _ in 0..f0 {
        pairs.extend(first.pairs.iter().cloned());
    }
    for (c, f) in iter {
        if c.direction != direction {
            return Err(Error::DirectionMismatch {
                expected: direction.to_string(),
                found: c.direction.to_string(),
            });
        }
        for _ in 0..f {
            pairs.extend(c.pairs.iter().cloned());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    Ok(Corpus {
        pairs,
        direction,
        split,
    })
}

/// Row of a dataset statistics table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsRow {
    Clean,
    Monolingual,
    Noisy,
    Synthetic,
}

impl StatsRow {
    pub fn label(self) -> &'static str {
        match self {
            StatsRow::Clean => "clean",
            StatsRow::Monolingual => "monolingual",
            StatsRow::Noisy => "noisy",
            StatsRow::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            StatsRow::Clean,
            StatsRow::Monolingual,
            StatsRow::Noisy,
            StatsRow::Synthetic,
        ]
        .into_iter()
        .find(|x| x.label() == s)
    }

    fn of(origin: Origin) -> Self {
        match origin {
            Origin::CleanParallel => StatsRow::Clean,
            Origin::NoisyParallel => StatsRow::Noisy,
            Origin::SyntheticBacktranslated => StatsRow::Synthetic,
        }
    }
}

/// Width of one bucket in [`StatsReport::length_histogram`].
pub const LENGTH_BUCKET: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    /// Keyed by (row, split).
    pub counts: BTreeMap<StatsRow, BTreeMap<Split, usize>>,
    /// Bucket lower bound (multiples of [`LENGTH_BUCKET`]) of the longer side → pairs.
    pub length_histogram: BTreeMap<usize, usize>,
}

impl StatsReport {
    pub fn count(&self, row: StatsRow, split: Split) -> usize {
        self.counts
            .get(&row)
            .and_then(|m| m.get(&split))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn add_corpus(&mut self, corpus: &Corpus) {
        for p in &corpus.pairs {
            *self
                .counts
                .entry(StatsRow::of(p.origin))
                .or_default()
                .entry(corpus.split)
                .or_insert(0) += 1;
            let len = p.source_body().len().max(p.target_body().len());
            *self
                .length_histogram
                .entry(len / LENGTH_BUCKET * LENGTH_BUCKET)
                .or_insert(0) += 1;
        }
    }

    pub fn add_mono(&mut self, mono: &MonoCorpus, split: Split) {
        *self
            .counts
            .entry(StatsRow::Monolingual)
            .or_default()
            .entry(split)
            .or_insert(0) += mono.len();
        for s in &mono.sentences {
            *self
                .length_histogram
                .entry(s.len() / LENGTH_BUCKET * LENGTH_BUCKET)
                .or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &StatsReport) {
        for (row, m) in &other.counts {
            for (split, n) in m {
                *self
                    .counts
                    .entry(*row)
                    .or_default()
                    .entry(*split)
                    .or_insert(0) += n;
            }
        }
        for (b, n) in &other.length_histogram {
            *self.length_histogram.entry(*b).or_insert(0) += n;
        }
    }

    /// Flat `key=value` lines, stable order.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (row, m) in &self.counts {
            for (split, n) in m {
                out.push_str(&format!("{}.{}={}\n", split.label(), row.label(), n));
            }
        }
        for (b, n) in &self.length_histogram {
            out.push_str(&format!("length.{}-{}={}\n", b, b + LENGTH_BUCKET - 1, n));
        }
        out.push_str(&format!("total={}\n", self.total()));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut r = StatsReport::default();
    r.add_corpus(corpus);
    r
}
