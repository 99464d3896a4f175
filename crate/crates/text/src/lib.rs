//! Deterministic word-level text/token mapping shared by the language model
//! and the lexical side of evaluation.
//!
//! Tokenization lowercases, splits alphanumeric runs, and keeps each
//! punctuation mark as its own token. The first six ids are reserved for
//! special tokens; everything else is assigned by descending frequency with
//! lexicographic tie-breaks, so two builds over the same corpus are
//! identical.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const IMG: u32 = 4;
pub const SEP: u32 = 5;

pub const SPECIAL_TOKENS: [&str; 6] = ["<pad>", "<bos>", "<eos>", "<unk>", "<img>", "<sep>"];

/// Hard cap on encoded sequence length.
pub const MAX_SEQUENCE_TOKENS: usize = 2048;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("max_size must be at least {}, got {0}", SPECIAL_TOKENS.len() + 1)]
    MaxSizeTooSmall(usize),
    #[error("malformed vocab file: {0}")]
    MalformedVocab(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TextError>;

fn is_kept_punct(c: char) -> bool {
    matches!(c, '.' | ',' | ':' | ';' | '?' | '!' | '(' | ')' | '/' | '-')
}

/// Lowercased word/punctuation token stream.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if is_kept_punct(c) {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Fixed bijection between token strings and ids, specials first.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocab {
    /// Most frequent corpus tokens, ties broken lexicographically.
    pub fn build(corpus: &[String], max_size: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        if max_size <= SPECIAL_TOKENS.len() {
            return Err(TextError::MaxSizeTooSmall(max_size));
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for text in corpus {
            for tok in tokenize(text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - SPECIAL_TOKENS.len());

        let mut id_to_token: Vec<String> =
            SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(ranked.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(id_to_token))
    }

    fn from_tokens(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { token_to_id, id_to_token }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    /// Token ids for `text`; unknown words become [`UNK`]. Output is capped
    /// at [`MAX_SEQUENCE_TOKENS`].
    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text)
            .into_iter()
            .take(MAX_SEQUENCE_TOKENS)
            .map(|tok| self.token_to_id.get(&tok).copied().unwrap_or(UNK))
            .collect()
    }

    /// Text for `ids`, joining with spaces and attaching punctuation to the
    /// preceding word. Structural specials are dropped; unknowns render as
    /// `<unk>`.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == PAD || id == BOS || id == EOS || id == IMG || id == SEP {
                continue;
            }
            let tok = self.token_of(id).unwrap_or(SPECIAL_TOKENS[UNK as usize]);
            let is_punct = tok.len() == 1 && tok.chars().all(is_kept_punct);
            if !out.is_empty() && !is_punct {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }

    /// One token per line; the line number is the id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tok in &self.id_to_token {
            let _ = writeln!(out, "{tok}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        if tokens.len() < SPECIAL_TOKENS.len() {
            return Err(TextError::MalformedVocab(format!(
                "only {} lines, need the {} specials",
                tokens.len(),
                SPECIAL_TOKENS.len()
            )));
        }
        for (i, expected) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens[i] != *expected {
                return Err(TextError::MalformedVocab(format!(
                    "line {i} is {:?}, expected {expected:?}",
                    tokens[i]
                )));
            }
        }
        Ok(Self::from_tokens(tokens))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(corpus: &[&str], max: usize) -> Vocab {
        let owned: Vec<String> = corpus.iter().map(|s| s.to_string()).collect();
        Vocab::build(&owned, max).unwrap()
    }

    #[test]
    fn keeps_most_frequent_tokens() {
        let v = build(&["a a b"], 10);
        assert!(v.id_of("a").is_some());
        assert!(v.id_of("b").is_some());
        assert_eq!(v.len(), 8);
        assert_eq!(v.token_of(SEP), Some("<sep>"));
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let v = build(&["zebra zebra apple banana banana"], 10);
        // zebra and banana tie at 2; banana sorts first.
        assert_eq!(v.id_of("banana"), Some(6));
        assert_eq!(v.id_of("zebra"), Some(7));
        assert_eq!(v.id_of("apple"), Some(8));
    }

    #[test]
    fn truncates_to_max_size() {
        let v = build(&["a b c d e f g h"], 9);
        assert_eq!(v.len(), 9);
        assert_eq!(v.id_of("a"), Some(6));
        assert_eq!(v.id_of("c"), Some(8));
        assert_eq!(v.id_of("d"), None);
    }

    #[test]
    fn rejects_empty_corpus_and_tiny_max() {
        assert!(matches!(Vocab::build(&[], 10), Err(TextError::EmptyCorpus)));
        let corpus = vec!["a".to_string()];
        assert!(matches!(Vocab::build(&corpus, 6), Err(TextError::MaxSizeTooSmall(6))));
    }

    #[test]
    fn empty_text_round_trips() {
        let v = build(&["a"], 10);
        let ids = v.encode("");
        assert!(ids.is_empty());
        assert_eq!(v.decode(&ids), "");
    }

    #[test]
    fn in_vocab_text_round_trips_to_normalized_form() {
        let v = build(&["the heart size is within normal limits ."], 30);
        let text = "The heart size is within normal limits.";
        let round = v.decode(&v.encode(text));
        assert_eq!(round, "the heart size is within normal limits.");
        // Idempotent on already-normalized text.
        assert_eq!(v.decode(&v.encode(&round)), round);
    }

    #[test]
    fn oov_maps_to_single_unk() {
        let v = build(&["clear lungs"], 10);
        let ids = v.encode("clear pneumothorax lungs");
        assert_eq!(ids.iter().filter(|&&id| id == UNK).count(), 1);
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn no_id_exceeds_vocab_size() {
        let v = build(&["alpha beta gamma delta"], 8);
        for text in ["alpha beta", "unseen words here", "Gamma, delta!"] {
            for id in v.encode(text) {
                assert!((id as usize) < v.len());
            }
        }
    }

    #[test]
    fn rebuild_is_deterministic() {
        let corpus: Vec<String> = (0..200)
            .map(|i| {
                format!(
                    "report {} shows finding {} with severity {}",
                    i % 17,
                    (i * 7) % 23,
                    (i * 13) % 5
                )
            })
            .collect();
        let a = Vocab::build(&corpus, 64).unwrap();
        let b = Vocab::build(&corpus, 64).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build(&["no acute cardiopulmonary abnormality ."], 20);
        let text = v.to_text();
        let loaded = Vocab::from_text(&text).unwrap();
        assert_eq!(loaded.to_text(), text);
        assert!(Vocab::from_text("a\nb\n").is_err());
    }

    #[test]
    fn encode_caps_sequence_length() {
        let v = build(&["word"], 8);
        let long = "word ".repeat(3000);
        assert_eq!(v.encode(&long).len(), MAX_SEQUENCE_TOKENS);
    }
}
