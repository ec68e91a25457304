//! Agreement with the reference implementations (sacremoses, sacrebleu).
//! The fixture file is produced by `fixtures/generate.py`.

use serde_json::Value;
use tagmt::eval::{corpus_bleu, BleuConfig, Smoothing, Tokenization};
use tagmt::subword::{intl_tokenize, Detokenizer, PunctNormalizer};

fn fixtures() -> Value {
    let text = include_str!("fixtures/reference.json");
    serde_json::from_str(text).expect("fixture file parses")
}

fn s(v: &Value) -> &str {
    v.as_str().expect("string field")
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .expect("array field")
        .iter()
        .map(|x| s(x).to_owned())
        .collect()
}

#[test]
fn normalizer_matches_sacremoses() {
    let f = fixtures();
    let mut failures = Vec::new();
    for case in f["normalize"].as_array().unwrap() {
        let got = PunctNormalizer::new(s(&case["lang"])).normalize(s(&case["input"]));
        // our normalizer also trims the line
        let want = s(&case["output"]).trim();
        if got != want {
            failures.push(format!(
                "[{}] {:?}: got {got:?}, want {want:?}",
                s(&case["lang"]),
                s(&case["input"])
            ));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn detokenizer_matches_sacremoses() {
    let f = fixtures();
    let mut failures = Vec::new();
    for case in f["detokenize"].as_array().unwrap() {
        let tokens = strings(&case["tokens"]);
        let got = Detokenizer::new(s(&case["lang"])).detokenize(&tokens);
        let want = s(&case["output"]);
        if got != want {
            failures.push(format!(
                "[{}] {:?}: got {got:?}, want {want:?}",
                s(&case["lang"]),
                tokens.join(" ")
            ));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn intl_tokenizer_matches_sacrebleu() {
    let f = fixtures();
    for case in f["intl"].as_array().unwrap() {
        assert_eq!(
            intl_tokenize(s(&case["input"])),
            strings(&case["tokens"]),
            "input {:?}",
            s(&case["input"])
        );
    }
}

#[test]
fn bleu_matches_sacrebleu() {
    let f = fixtures();
    for case in f["bleu"].as_array().unwrap() {
        let config = BleuConfig {
            tokenize: Tokenization::Intl,
            lowercase: case["lowercase"].as_bool().unwrap(),
            smoothing: Smoothing::parse(s(&case["smooth"])).unwrap(),
        };
        let hyps = strings(&case["hypotheses"]);
        let refs = strings(&case["references"]);
        let r = corpus_bleu(&hyps, &refs, &config).unwrap();
        let want = case["score"].as_f64().unwrap();
        assert!(
            (r.score - want).abs() < 1e-9,
            "{hyps:?} vs {refs:?} {config:?}: {} != {want}",
            r.score
        );
        let counts: Vec<usize> = case["counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let totals: Vec<usize> = case["totals"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        assert_eq!(r.matched.to_vec(), counts);
        assert_eq!(r.total.to_vec(), totals);
        assert_eq!(r.hyp_len as u64, case["sys_len"].as_u64().unwrap());
        assert_eq!(r.ref_len as u64, case["ref_len"].as_u64().unwrap());
        assert!((r.brevity_penalty - case["bp"].as_f64().unwrap()).abs() < 1e-12);
    }
}
