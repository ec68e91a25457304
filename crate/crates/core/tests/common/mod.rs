//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use tagmt::subword::{initial_symbols, merge_symbols, Pair};

/// Recounts every adjacent pair from scratch at each iteration.
pub fn brute_force_merges(words: &[(&str, i64)], num_merges: usize) -> Vec<Pair> {
    let mut segs: Vec<(Vec<String>, i64)> = words
        .iter()
        .map(|(w, f)| (initial_symbols(w), *f))
        .collect();
    let mut merges = Vec::new();
    for _ in 0..num_merges {
        let mut counts: HashMap<Pair, i64> = HashMap::new();
        for (s, f) in &segs {
            for w in s.windows(2) {
                *counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += f;
            }
        }
        let best = counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some((pair, count)) = best else { break };
        if count < 2 {
            break;
        }
        for (s, _) in &mut segs {
            *s = merge_symbols(s, (&pair.0, &pair.1));
        }
        merges.push(pair);
    }
    merges
}

/// Counts every n-gram occurrence by scanning, with no hashing.
pub fn occurrences(tokens: &[&str], gram: &[&str]) -> usize {
    if tokens.len() < gram.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| &tokens[i..i + gram.len()] == gram)
        .count()
}

/// Plain corpus BLEU over whitespace tokens, written from the definition.
pub fn oracle_bleu(hyps: &[String], refs: &[String]) -> f64 {
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut hl, mut rl) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        let h: Vec<&str> = h.split_whitespace().collect();
        let r: Vec<&str> = r.split_whitespace().collect();
        hl += h.len();
        rl += r.len();
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            total[n - 1] += h.len() - n + 1;
            let mut seen: Vec<&[&str]> = Vec::new();
            for i in 0..=h.len() - n {
                let g = &h[i..i + n];
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                matched[n - 1] += occurrences(&h, g).min(occurrences(&r, g));
            }
        }
    }
    if (0..4).any(|n| matched[n] == 0) {
        return 0.0;
    }
    let bp = if hl >= rl {
        1.0
    } else {
        (1.0 - rl as f64 / hl as f64).exp()
    };
    let logs: f64 = (0..4)
        .map(|n| (matched[n] as f64 / total[n] as f64).ln())
        .sum();
    100.0 * bp * (logs / 4.0).exp()
}

fn random_sentence(rng: &mut ChaCha8Rng, vocab: &[&str]) -> String {
    let len = rng.gen_range(1..12);
    (0..len)
        .map(|_| *vocab.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A reference plus a hypothesis made from it by a few random edits.
pub fn random_corpus(seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = ["a", "b", "c", "d", "e", "f", "the", "cat"];
    let n = rng.gen_range(1..8);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..n {
        let r = random_sentence(&mut rng, &vocab);
        let mut h: Vec<&str> = r.split(' ').collect();
        for _ in 0..rng.gen_range(0..4) {
            match rng.gen_range(0..3) {
                0 if !h.is_empty() => {
                    let i = rng.gen_range(0..h.len());
                    h.remove(i);
                }
                1 => {
                    let i = rng.gen_range(0..=h.len());
                    h.insert(i, vocab.choose(&mut rng).unwrap());
                }
                _ if !h.is_empty() => {
                    let i = rng.gen_range(0..h.len());
                    h[i] = vocab.choose(&mut rng).unwrap();
                }
                _ => {}
            }
        }
        hyps.push(h.join(" "));
        refs.push(r);
    }
    (hyps, refs)
}
