use std::sync::OnceLock;

use regex::Regex;

struct IntlRules {
    nondigit_punct: Regex,
    punct_nondigit: Regex,
    symbol: Regex,
}

fn rules() -> &'static IntlRules {
    static RULES: OnceLock<IntlRules> = OnceLock::new();
    RULES.get_or_init(|| IntlRules {
        nondigit_punct: Regex::new(r"(\P{N})(\p{P})").unwrap(),
        punct_nondigit: Regex::new(r"(\p{P})(\P{N})").unwrap(),
        symbol: Regex::new(r"(\p{S})").unwrap(),
    })
}

/// Language-independent tokenization used for BLEU: punctuation is split off
/// unless it sits between digits, and every symbol becomes its own token.
pub fn intl_tokenize(text: &str) -> Vec<String> {
    let r = rules();
    let s = r.nondigit_punct.replace_all(text, "${1} ${2} ");
    let s = r.punct_nondigit.replace_all(&s, " ${1} ${2}");
    let s = r.symbol.replace_all(&s, " ${1} ");
    s.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(intl_tokenize("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert!(intl_tokenize("").is_empty());
    }

    #[test]
    fn keeps_numbers_together() {
        assert_eq!(intl_tokenize("pi is 3.14."), ["pi", "is", "3.14."]);
        assert_eq!(intl_tokenize("1,000 $5"), ["1,000", "$", "5"]);
    }
}
