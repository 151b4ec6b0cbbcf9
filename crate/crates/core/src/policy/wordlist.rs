//! Dictionary wordlists backed by a byte-level prefix trie.

use std::io::{self, BufRead};
use std::path::Path;

#[derive(Debug, Default)]
struct TrieNode {
    children: std::collections::BTreeMap<u8, u32>,
    terminal: bool,
}

#[derive(Debug, Default)]
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn new() -> Self {
        Trie { nodes: vec![TrieNode::default()] }
    }

    fn insert(&mut self, word: &[u8]) {
        let mut node = 0usize;
        for &b in word {
            node = match self.nodes[node].children.get(&b) {
                Some(&next) => next as usize,
                None => {
                    let next = self.nodes.len() as u32;
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].children.insert(b, next);
                    next as usize
                }
            };
        }
        self.nodes[node].terminal = true;
    }

    fn contains(&self, word: &[u8]) -> bool {
        let mut node = 0usize;
        for &b in word {
            match self.nodes[node].children.get(&b) {
                Some(&next) => node = next as usize,
                None => return false,
            }
        }
        self.nodes[node].terminal
    }
}

/// A case-insensitive word set for dictionary policy checks.
///
/// Lookups are case-insensitive: both stored words and queried strings are
/// ASCII-lowercased. Equality compares the normalized word sets, so two
/// wordlists built from the same words are equal regardless of input order.
#[derive(Debug)]
pub struct Wordlist {
    words: Vec<String>,
    trie: Trie,
}

impl Wordlist {
    pub fn from_words(words: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        let mut normalized: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim_end_matches('\r').to_ascii_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        let mut trie = Trie::new();
        for word in &normalized {
            trie.insert(word.as_bytes());
        }
        Wordlist { words: normalized, trie }
    }

    /// Reads one word per line; blank lines are skipped.
    pub fn from_reader(reader: impl BufRead) -> io::Result<Self> {
        let lines = reader.lines().collect::<io::Result<Vec<String>>>()?;
        Ok(Self::from_words(lines))
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(io::BufReader::new(file))
    }

    pub fn contains(&self, word: &str) -> bool {
        if word.is_ascii() {
            self.trie.contains(word.to_ascii_lowercase().as_bytes())
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl PartialEq for Wordlist {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
    }
}

impl Eq for Wordlist {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_is_case_insensitive() {
        let list = Wordlist::from_words(["Password", "monkey", "DRAGON"]);
        assert!(list.contains("password"));
        assert!(list.contains("PASSWORD"));
        assert!(list.contains("dragon"));
        assert!(list.contains("Monkey"));
        assert!(!list.contains("monkeys"));
        assert!(!list.contains("monke"));
        assert!(!list.contains(""));
    }

    #[test]
    fn equality_ignores_order_and_duplicates() {
        let a = Wordlist::from_words(["alpha", "beta", "beta"]);
        let b = Wordlist::from_words(["BETA", "alpha"]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn prefix_of_a_word_is_not_a_member() {
        let list = Wordlist::from_words(["passwords"]);
        assert!(!list.contains("password"));
        assert!(list.contains("passwords"));
    }

    #[test]
    fn reader_skips_blank_lines_and_crlf() {
        let list = Wordlist::from_reader("alpha\r\n\r\nbeta\n".as_bytes()).unwrap();
        assert_eq!(list.words(), ["alpha", "beta"]);
    }
}
