//! Byte-pair encoding with the `@@` continuation convention.
//!
//! Learning works on a word-frequency table. Every word starts as a
//! sequence of characters whose last symbol carries the end-of-word marker;
//! the most frequent adjacent pair is merged until the requested number of
//! merges is reached or no pair occurs at least twice. Frequency ties go to
//! the lexicographically smallest pair.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reserved::{self, RESERVED, UNK, UNK_ID};

pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION: &str = "@@";
const MERGES_HEADER: &str = "#version: 0.2";

pub type Pair = (String, String);

/// Ordered merge list plus the symbol vocabulary derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordModel {
    merges: Vec<Pair>,
    ranks: HashMap<Pair, usize>,
    vocab: HashMap<String, usize>,
    tokens: Vec<String>,
}

/// Splits a word into its initial symbols.
pub fn initial_symbols(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = syms.last_mut() {
        last.push_str(END_OF_WORD);
    }
    syms
}

/// Merges every non-overlapping occurrence of `pair`, scanning left to right.
pub fn merge_symbols(symbols: &[String], pair: (&str, &str)) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

fn add_pairs(counts: &mut HashMap<Pair, i64>, symbols: &[String], freq: i64) {
    for w in symbols.windows(2) {
        *counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += freq;
    }
}

fn word_frequencies<S: AsRef<str>>(corpus: &[Vec<S>]) -> BTreeMap<String, i64> {
    let mut freqs = BTreeMap::new();
    for sentence in corpus {
        for w in sentence {
            *freqs.entry(w.as_ref().to_owned()).or_insert(0) += 1;
        }
    }
    freqs
}

/// Learns `num_merges` merges (fewer if pairs run out) from whitespace
/// tokenized sentences.
pub fn learn_bpe<S: AsRef<str>>(corpus: &[Vec<S>], num_merges: usize) -> Result<SubwordModel> {
    let freqs = word_frequencies(corpus);
    if freqs.is_empty() {
        return Err(Error::Empty("BPE training corpus has no words"));
    }
    let alphabet: BTreeSet<char> = freqs.keys().flat_map(|w| w.chars()).collect();
    let mut words: Vec<(Vec<String>, i64)> = freqs
        .iter()
        .map(|(w, f)| (initial_symbols(w), *f))
        .collect();

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut index: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (wi, (syms, f)) in words.iter().enumerate() {
        add_pairs(&mut counts, syms, *f);
        for w in syms.windows(2) {
            index
                .entry((w[0].clone(), w[1].clone()))
                .or_default()
                .insert(wi);
        }
    }

    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let best = counts
            .iter()
            .filter(|(_, c)| **c > 0)
            .max_by_key(|(p, c)| (**c, Reverse(*p)))
            .map(|(p, c)| (p.clone(), *c));
        let Some((pair, count)) = best else { break };
        if count < 2 {
            break;
        }
        let mut affected: Vec<usize> = index
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for wi in affected {
            let (syms, f) = &words[wi];
            let f = *f;
            let merged = merge_symbols(syms, (&pair.0, &pair.1));
            if merged.len() == syms.len() {
                continue;
            }
            add_pairs(&mut counts, syms, -f);
            add_pairs(&mut counts, &merged, f);
            for w in merged.windows(2) {
                index
                    .entry((w[0].clone(), w[1].clone()))
                    .or_default()
                    .insert(wi);
            }
            words[wi].0 = merged;
        }
        counts.retain(|_, c| *c != 0);
        merges.push(pair);
    }
    Ok(SubwordModel::from_parts(merges, &alphabet))
}

/// Output surface of a symbol at a given position of its word.
fn surface(symbol: &str) -> String {
    match symbol.strip_suffix(END_OF_WORD) {
        Some(body) => body.to_owned(),
        None => format!("{symbol}{CONTINUATION}"),
    }
}

impl SubwordModel {
    /// Builds the vocabulary: reserved tokens first, then both surfaces of
    /// every alphabet character, then the surface of every merge result.
    pub fn from_parts(merges: Vec<Pair>, alphabet: &BTreeSet<char>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut vocab: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let mut push = |s: String, tokens: &mut Vec<String>| {
            if !vocab.contains_key(&s) {
                vocab.insert(s.clone(), tokens.len());
                tokens.push(s);
            }
        };
        for c in alphabet {
            push(format!("{c}{CONTINUATION}"), &mut tokens);
            push(c.to_string(), &mut tokens);
        }
        for (l, r) in &merges {
            push(surface(&format!("{l}{r}")), &mut tokens);
        }
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        SubwordModel {
            merges,
            ranks,
            vocab,
            tokens,
        }
    }

    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Symbols of one word after applying merges greedily by rank.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms = initial_symbols(word);
        while syms.len() > 1 {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            syms = merge_symbols(&syms, (l, r));
        }
        syms
    }

    /// Segments a whitespace-tokenized sentence into subword tokens. Symbols
    /// outside the vocabulary become `<unk>`.
    pub fn apply<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<String> {
        let mut out = Vec::new();
        for word in sentence {
            for sym in self.segment_word(word.as_ref()) {
                let s = surface(&sym);
                if reserved::is_reserved(&s) || !self.vocab.contains_key(&s) {
                    out.push(UNK.to_owned());
                } else {
                    out.push(s);
                }
            }
        }
        out
    }

    pub fn apply_ids<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<usize> {
        self.apply(sentence)
            .iter()
            .map(|t| self.token_id(t))
            .collect()
    }

    pub fn ids_to_tokens(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK).to_owned())
            .collect()
    }

    pub fn merges_text(&self) -> String {
        let mut s = String::from(MERGES_HEADER);
        s.push('\n');
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l} {r}");
        }
        s
    }

    pub fn vocab_text(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "{t}\t{i}");
        }
        s
    }

    pub fn save(&self, merges_path: &Path, vocab_path: &Path) -> Result<()> {
        fs::write(merges_path, self.merges_text()).map_err(|e| Error::io(merges_path, e))?;
        fs::write(vocab_path, self.vocab_text()).map_err(|e| Error::io(vocab_path, e))
    }

    /// Reads a merge file and its vocabulary file. Ids come from the
    /// vocabulary file.
    pub fn load(merges_path: &Path, vocab_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
        let mut merges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("#version") {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_owned(), r.to_owned()))
                }
                _ => {
                    return Err(Error::Parse {
                        path: merges_path.to_owned(),
                        line: i + 1,
                        message: format!("expected `left right`, got {line:?}"),
                    })
                }
            }
        }
        let text = fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse {
                path: vocab_path.to_owned(),
                line: i + 1,
                message,
            };
            let (sym, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err("expected `symbol<TAB>id`".into()))?;
            let id: usize = id
                .parse()
                .map_err(|_| parse_err(format!("bad id {id:?}")))?;
            if id != tokens.len() {
                return Err(parse_err(format!(
                    "ids must be dense, expected {}",
                    tokens.len()
                )));
            }
            if id < RESERVED.len() && sym != RESERVED[id] {
                return Err(parse_err(format!(
                    "id {id} is reserved for {}",
                    RESERVED[id]
                )));
            }
            tokens.push(sym.to_owned());
        }
        if tokens.len() < RESERVED.len() {
            return Err(Error::Parse {
                path: vocab_path.to_owned(),
                line: tokens.len(),
                message: "vocabulary lacks the reserved tokens".into(),
            });
        }
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Ok(SubwordModel {
            merges,
            ranks,
            vocab,
            tokens,
        })
    }
}

/// Joins subword tokens back into text, dropping reserved tokens.
pub fn decode_bpe<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for t in tokens {
        let t = t.as_ref();
        if reserved::is_reserved(t) {
            continue;
        }
        match t.strip_suffix(CONTINUATION) {
            Some(body) => out.push_str(body),
            None => {
                out.push_str(t);
                out.push(' ');
            }
        }
    }
    out.truncate(out.trim_end().len());
    out
}
