//! Rule-based sentence splitting and word tokenization.
//!
//! Words are segmented at Unicode word boundaries and lowercased. A sentence
//! ends at every terminal punctuation mark (`.`, `!`, `?` and their common
//! Unicode variants). The splitter has no abbreviation list, so `"Mr. Smith"`
//! is split after `"Mr."`.

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizeConfig {
    /// Keep punctuation-only tokens instead of dropping them.
    pub keep_punctuation: bool,
    pub lowercase: bool,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        Self {
            keep_punctuation: false,
            lowercase: true,
        }
    }
}

const TERMINALS: [char; 7] = ['.', '!', '?', '…', '。', '！', '？'];

fn is_terminal(segment: &str) -> bool {
    let mut chars = segment.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if TERMINALS.contains(&c))
}

/// Split `text` into sentences of tokens. Never yields an empty token or an
/// empty sentence.
pub fn tokenize(text: &str, config: &TokenizeConfig) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current: Vec<String> = Vec::new();
    // A run of terminal marks closes the sentence once the next token starts.
    let mut pending_break = false;
    // Some word-joining characters (e.g. U+202F) are whitespace; split on them.
    let pieces = text
        .split_word_bounds()
        .flat_map(|s| s.split(char::is_whitespace))
        .filter(|s| !s.is_empty());
    for segment in pieces {
        let terminal = is_terminal(segment);
        if !terminal && pending_break {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            pending_break = false;
        }
        pending_break |= terminal;
        let is_word = segment.chars().any(char::is_alphanumeric);
        if is_word || config.keep_punctuation {
            current.push(if config.lowercase {
                segment.to_lowercase()
            } else {
                segment.to_owned()
            });
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}
