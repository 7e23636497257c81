//! Tokenization helpers shared by the style scorers and entity extraction.

/// A word token: original spelling plus lowercase and lemma forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub raw: String,
    pub lower: String,
    pub lemma: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Split into sentences on `.`, `!`, `?` and line breaks, then into word
/// tokens. Sentences without words are dropped.
pub(crate) fn sentences(text: &str) -> Vec<Vec<Token>> {
    text.split(['.', '!', '?', '\n'])
        .map(words)
        .filter(|s| !s.is_empty())
        .collect()
}

pub(crate) fn words(text: &str) -> Vec<Token> {
    text.split(|c: char| !is_word_char(c))
        .map(|w| w.trim_matches(|c| c == '\'' || c == '\u{2019}'))
        .filter(|w| !w.is_empty())
        .map(|w| {
            let lower = w.replace('\u{2019}', "'").to_lowercase();
            Token {
                raw: w.to_string(),
                lemma: lemma(&lower),
                lower,
            }
        })
        .collect()
}

/// Conservative plural stripping.
pub(crate) fn lemma(lower: &str) -> String {
    if let Some(stem) = lower.strip_suffix("'s") {
        return stem.to_string();
    }
    if lower.chars().count() <= 3 {
        return lower.to_string();
    }
    if let Some(stem) = lower.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "ches", "shes", "xes", "zes"] {
        if lower.ends_with(suffix) {
            return lower[..lower.len() - 2].to_string();
        }
    }
    if ["ss", "us", "is"].iter().any(|s| lower.ends_with(s)) {
        return lower.to_string();
    }
    lower.strip_suffix('s').unwrap_or(lower).to_string()
}

/// Canonical form of a lexicon phrase: lemmas joined by single spaces.
pub(crate) fn canonical_phrase(phrase: &str) -> Vec<String> {
    words(phrase).into_iter().map(|t| t.lemma).collect()
}

/// Greedy longest-first, non-overlapping phrase matches over lemmas.
/// Returns `(start, len)` spans.
pub(crate) fn match_phrases(tokens: &[Token], lexicon: &[Vec<String>]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let best = lexicon
            .iter()
            .filter(|p| {
                !p.is_empty() && i + p.len() <= tokens.len() && p.iter().zip(&tokens[i..]).all(|(a, t)| *a == t.lemma)
            })
            .map(Vec::len)
            .max();
        match best {
            Some(n) => {
                spans.push((i, n));
                i += n;
            }
            None => i += 1,
        }
    }
    spans
}

/// Vowel-group syllable estimate, at least one per word.
pub(crate) fn syllables(lower: &str) -> usize {
    let chars: Vec<char> = lower.chars().filter(|c| c.is_alphabetic()).collect();
    if chars.is_empty() {
        return 1;
    }
    let vowel = |c: char| "aeiouy".contains(c);
    let mut count = 0;
    let mut prev = false;
    for &c in &chars {
        let v = vowel(c);
        if v && !prev {
            count += 1;
        }
        prev = v;
    }
    let n = chars.len();
    if count > 1 && chars[n - 1] == 'e' && !(n >= 2 && chars[n - 2] == 'l') {
        count -= 1;
    }
    count.max(1)
}
