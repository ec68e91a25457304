//! Moses-style detokenization: re-attaches punctuation, quotes and
//! contractions to their neighbours.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

struct DetokRules {
    currency: Regex,
    punct: Regex,
    open_quote: Regex,
    double_quotes: Regex,
    fr_spaced: Regex,
    multi_space: Regex,
}

fn rules() -> &'static DetokRules {
    static RULES: OnceLock<DetokRules> = OnceLock::new();
    RULES.get_or_init(|| DetokRules {
        currency: Regex::new(r"^[\p{Sc}(\[{¿¡]+$").unwrap(),
        punct: Regex::new(r"^[,.?!:;\\%}\])]+$").unwrap(),
        open_quote: Regex::new(r#"^['"„“`]+$"#).unwrap(),
        double_quotes: Regex::new(r"^[„“”]+$").unwrap(),
        fr_spaced: Regex::new(r"^[?!:;\\%]$").unwrap(),
        multi_space: Regex::new(r" {2,}").unwrap(),
    })
}

const XML_UNESCAPES: [(&str, &str); 11] = [
    ("&bar;", "|"),
    ("&#124;", "|"),
    ("&lt;", "<"),
    ("&gt;", ">"),
    ("&bra;", "["),
    ("&ket;", "]"),
    ("&quot;", "\""),
    ("&apos;", "'"),
    ("&#91;", "["),
    ("&#93;", "]"),
    ("&amp;", "&"),
];

fn starts_alpha(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_alphabetic)
}

fn is_english_contraction(s: &str) -> bool {
    let mut it = s.chars();
    it.next() == Some('\'') && it.next().is_some_and(char::is_alphabetic)
}

fn is_french_contraction(s: &str) -> bool {
    let mut it = s.chars().rev();
    it.next() == Some('\'') && it.next().is_some_and(char::is_alphabetic)
}

/// Detokenizer for one language (`en`, `fr`, `it`, `ga` get their
/// contraction rules; anything else uses the language-independent rules).
#[derive(Clone, Debug)]
pub struct Detokenizer {
    lang: String,
}

impl Detokenizer {
    pub fn new(lang: &str) -> Self {
        Detokenizer {
            lang: lang.to_owned(),
        }
    }

    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let r = rules();
        let joined: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        let mut text = format!(" {} ", joined.join(" ")).replace(" @-@ ", "-");
        for (from, to) in XML_UNESCAPES {
            text = text.replace(from, to);
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let lang = self.lang.as_str();

        let mut quote_counts: HashMap<String, usize> = HashMap::new();
        let mut prepend = " ";
        let mut out = String::new();
        for (i, &tok) in tokens.iter().enumerate() {
            if r.currency.is_match(tok) {
                out.push_str(prepend);
                out.push_str(tok);
                prepend = "";
            } else if r.punct.is_match(tok) {
                if lang == "fr" && r.fr_spaced.is_match(tok) {
                    out.push(' ');
                }
                out.push_str(tok);
                prepend = " ";
            } else if lang == "en" && i > 0 && is_english_contraction(tok) {
                out.push_str(tok);
                prepend = " ";
            } else if matches!(lang, "fr" | "it" | "ga")
                && i + 2 <= tokens.len()
                && is_french_contraction(tok)
                && tokens.get(i + 1).is_some_and(|n| starts_alpha(n))
            {
                out.push_str(prepend);
                out.push_str(tok);
                prepend = "";
            } else if r.open_quote.is_match(tok) {
                let key = if r.double_quotes.is_match(tok) {
                    "\"".to_owned()
                } else {
                    tok.to_owned()
                };
                let count = quote_counts.entry(key).or_insert(0);
                if (*count).is_multiple_of(2) {
                    if lang == "en" && tok == "'" && i > 0 && tokens[i - 1].ends_with('s') {
                        // possessive: "the Jones' house"
                        out.push_str(tok);
                        prepend = " ";
                    } else {
                        out.push_str(prepend);
                        out.push_str(tok);
                        prepend = "";
                        *count += 1;
                    }
                } else {
                    out.push_str(tok);
                    prepend = " ";
                    *count += 1;
                }
            } else {
                out.push_str(prepend);
                out.push_str(tok);
                prepend = " ";
            }
        }
        r.multi_space.replace_all(&out, " ").trim().to_owned()
    }
}

/// English detokenization.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    Detokenizer::new("en").detokenize(tokens)
}
