//! Punctuation normalization with the same rule table as Moses'
//! `normalize-punctuation.perl` (sacremoses defaults: penn, quote/comma and
//! number normalization on).

use regex::Regex;

const NBSP: &str = "\u{00A0}";

fn extra_whitespace() -> Vec<(String, String)> {
    [
        (r"\r", ""),
        (r"\(", " ("),
        (r"\)", ") "),
        (r" +", " "),
        (r"\) ([.!:?;,])", ")${1}"),
        (r"\( ", "("),
        (r" \)", ")"),
        (r"(\d) %", "${1}%"),
        (r" :", ":"),
        (r" ;", ";"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

fn rules_for(lang: &str) -> Vec<(String, String)> {
    let mut rules = extra_whitespace();
    let owned = |v: &[(&str, &str)]| -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    };
    // penn
    rules.extend(owned(&[("`", "'"), ("''", " \" ")]));
    rules.extend(owned(&[
        ("„", "\""),
        ("“", "\""),
        ("”", "\""),
        ("–", "-"),
        ("—", " - "),
        (" +", " "),
        ("´", "'"),
        ("([a-zA-Z])‘([a-zA-Z])", "${1}'${2}"),
        ("([a-zA-Z])’([a-zA-Z])", "${1}'${2}"),
        ("‘", "'"),
        ("‚", "'"),
        ("’", "'"),
        ("''", "\""),
        ("´´", "\""),
        ("…", "..."),
    ]));
    // French quotes
    rules.extend(
        [
            (format!("{NBSP}«{NBSP}"), "\""),
            (format!("«{NBSP}"), "\""),
            ("«".to_string(), "\""),
            (format!("{NBSP}»{NBSP}"), "\""),
            (format!("{NBSP}»"), "\""),
            ("»".to_string(), "\""),
        ]
        .into_iter()
        .map(|(a, b)| (a, b.to_string())),
    );
    // pseudo-spaces
    rules.extend(
        [
            (format!("{NBSP}%"), "%"),
            (format!("nº{NBSP}"), "nº "),
            (format!("{NBSP}:"), ":"),
            (format!("{NBSP}ºC"), " ºC"),
            (format!("{NBSP}cm"), " cm"),
            (format!("{NBSP}\\?"), "?"),
            (format!("{NBSP}\\!"), "!"),
            (format!("{NBSP};"), ";"),
            (format!(",{NBSP}"), ", "),
            (" +".to_string(), " "),
        ]
        .into_iter()
        .map(|(a, b)| (a, b.to_string())),
    );
    match lang {
        "en" => rules.extend(owned(&[(r#""([,.]+)"#, "${1}\"")])),
        "de" | "es" | "fr" => rules.extend(owned(&[
            (r#",""#, "\","),
            (r#"(\.+)"(\s*[^<])"#, "\"${1}${2}"),
        ])),
        _ => {}
    }
    let digits = if matches!(lang, "de" | "es" | "cz" | "cs" | "fr") {
        "${1},${2}"
    } else {
        "${1}.${2}"
    };
    rules.push((format!(r"(\d){NBSP}(\d)"), digits.to_string()));
    rules
}

/// Language-aware punctuation normalizer.
#[derive(Clone, Debug)]
pub struct PunctNormalizer {
    rules: Vec<(Regex, String)>,
}

impl PunctNormalizer {
    pub fn new(lang: &str) -> Self {
        let rules = rules_for(lang)
            .into_iter()
            .map(|(pat, rep)| (Regex::new(&pat).expect("static pattern"), rep))
            .collect();
        PunctNormalizer { rules }
    }

    pub fn normalize(&self, text: &str) -> String {
        if untouched(text) {
            return text.to_owned();
        }
        let mut s = text.to_owned();
        for (re, rep) in &self.rules {
            if let std::borrow::Cow::Owned(next) = re.replace_all(&s, rep.as_str()) {
                s = next;
            }
        }
        s.trim().to_owned()
    }
}

/// True when no rule can fire and trimming is a no-op.
fn untouched(text: &str) -> bool {
    text.bytes().all(|b| {
        b.is_ascii()
            && !matches!(
                b,
                b'\r' | b'(' | b')' | b'%' | b':' | b';' | b'`' | b'\'' | b'"'
            )
    }) && !text.contains("  ")
        && text.trim() == text
}

/// English punctuation normalization.
pub fn normalize(text: &str) -> String {
    PunctNormalizer::new("en").normalize(text)
}
