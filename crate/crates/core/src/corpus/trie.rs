use std::collections::HashMap;

use super::text::normalize_words;

#[derive(Clone, Debug, Default)]
struct Node {
    children: HashMap<String, usize>,
    terminal: bool,
}

/// Prefix tree over words. Each inserted entry is a normalized word sequence,
/// so a multi-word title like "german army" is a path of length two.
#[derive(Clone, Debug)]
pub struct TokenTrie {
    nodes: Vec<Node>,
    entries: usize,
}

impl Default for TokenTrie {
    fn default() -> Self {
        Self::new()
    }
}

impl TokenTrie {
    pub fn new() -> Self {
        TokenTrie {
            nodes: vec![Node::default()],
            entries: 0,
        }
    }

    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut trie = Self::new();
        for entry in entries {
            trie.insert(entry.as_ref());
        }
        trie
    }

    /// Inserts a raw entry; returns false if it normalizes to nothing.
    pub fn insert(&mut self, entry: &str) -> bool {
        let words = normalize_words(entry);
        if words.is_empty() {
            return false;
        }
        let mut node = 0;
        for word in words {
            node = match self.nodes[node].children.get(&word) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[node].children.insert(word, next);
                    next
                }
            };
        }
        if !self.nodes[node].terminal {
            self.nodes[node].terminal = true;
            self.entries += 1;
        }
        true
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn contains(&self, entry: &str) -> bool {
        let words = normalize_words(entry);
        !words.is_empty() && self.longest_match(&words) == Some(words.len())
    }

    /// Number of leading words forming the longest inserted entry.
    pub fn longest_match<S: AsRef<str>>(&self, words: &[S]) -> Option<usize> {
        let mut node = 0;
        let mut best = None;
        for (i, word) in words.iter().enumerate() {
            match self.nodes[node].children.get(word.as_ref()) {
                Some(&next) => node = next,
                None => break,
            }
            if self.nodes[node].terminal {
                best = Some(i + 1);
            }
        }
        best
    }
}
