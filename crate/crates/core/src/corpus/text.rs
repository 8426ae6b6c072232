//! Text normalization, trie-driven tokenization and fixed-length preprocessing.

use std::collections::HashSet;
use std::sync::OnceLock;

use super::trie::TokenTrie;

/// Reserved token used for padding. It never survives normalization, so it
/// cannot collide with a real token, and it embeds to the zero vector.
pub const PAD_TOKEN: &str = "<pad>";

/// Sequence length for titles fed to the document encoders.
pub const TITLE_LEN: usize = 14;
/// Sequence length for first paragraphs fed to the document encoders.
pub const CONTENT_LEN: usize = 100;

/// English function words removed from contents before encoding.
pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "either",
    "else",
    "ever",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "however",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "may",
    "me",
    "might",
    "more",
    "most",
    "must",
    "my",
    "myself",
    "neither",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "ought",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "shall",
    "she",
    "should",
    "since",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "though",
    "through",
    "thus",
    "to",
    "too",
    "under",
    "until",
    "up",
    "upon",
    "us",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "whether",
    "which",
    "while",
    "who",
    "whom",
    "whose",
    "why",
    "will",
    "with",
    "within",
    "without",
    "would",
    "yet",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopword_set().contains(token)
}

/// Lowercases, deletes apostrophes and turns every other non-alphanumeric
/// character into a word break. Returns the resulting words.
pub fn normalize_words(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cleaned.extend(ch.to_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' {
            continue;
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Normalized form of a title used as a lookup key.
pub fn normalize_title(text: &str) -> String {
    normalize_words(text).join(" ")
}

/// Greedy left-to-right longest-match segmentation. Multi-word trie entries
/// become single tokens joined by a space; unmatched words pass through.
pub fn tokenize(text: &str, trie: &TokenTrie) -> Vec<String> {
    let words = normalize_words(text);
    let mut tokens = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let len = trie.longest_match(&words[i..]).unwrap_or(1);
        tokens.push(words[i..i + len].join(" "));
        i += len;
    }
    tokens
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextKind {
    Title,
    Content,
}

impl TextKind {
    pub fn default_len(self) -> usize {
        match self {
            TextKind::Title => TITLE_LEN,
            TextKind::Content => CONTENT_LEN,
        }
    }
}

/// Fixed-length token sequence plus the number of leading real tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Padded {
    pub tokens: Vec<String>,
    pub valid_length: usize,
}

/// Pads or truncates to the standard length for `kind`.
pub fn preprocess(tokens: &[String], kind: TextKind) -> Padded {
    preprocess_to(tokens, kind, kind.default_len())
}

/// Stopwords are dropped from contents only; titles keep every token.
pub fn preprocess_to(tokens: &[String], kind: TextKind, len: usize) -> Padded {
    let mut out: Vec<String> = tokens
        .iter()
        .filter(|t| kind == TextKind::Title || !is_stopword(t))
        .take(len)
        .cloned()
        .collect();
    let valid_length = out.len();
    out.resize(len, PAD_TOKEN.to_owned());
    Padded {
        tokens: out,
        valid_length,
    }
}
