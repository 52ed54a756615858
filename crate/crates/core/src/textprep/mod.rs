//! Text cleaning and word tokenization.
//!
//! The cleaning pipeline runs five steps in a fixed order:
//! HTML removal, lowercasing, accent folding, contraction expansion and
//! special-character removal. The output alphabet is `[a-z0-9 ]`.

mod contractions;
mod html;

use std::fmt;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub use contractions::{contraction_table, expand_contractions, ContractionTable, CONTRACTIONS_JSON};
pub use html::strip_html;

/// Text that went through [`preprocess`]: lowercase ASCII letters, digits
/// and single spaces, no leading or trailing whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CleanText(String);

impl CleanText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Checks the clean-text invariants, returning `None` if `text` violates them.
    pub fn from_clean(text: &str) -> Option<Self> {
        let alphabet_ok = text
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b' ');
        let spacing_ok = !text.starts_with(' ') && !text.ends_with(' ') && !text.contains("  ");
        (alphabet_ok && spacing_ok).then(|| Self(text.to_owned()))
    }
}

impl fmt::Display for CleanText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered list of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence, dropping empty tokens and splitting any token that
    /// contains whitespace.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            tokens
                .into_iter()
                .flat_map(|t| {
                    t.as_ref()
                        .split_whitespace()
                        .map(str::to_owned)
                        .collect::<Vec<_>>()
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Joins tokens with single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    pub(crate) fn from_slice(tokens: &[String]) -> Self {
        Self(tokens.to_vec())
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// NFKD-decomposes `text` and drops combining marks, so `café` becomes `cafe`.
pub fn fold_accents(text: &str) -> String {
    text.nfkd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Replaces every character outside `[a-z0-9]` and whitespace with a space,
/// collapses whitespace runs and trims.
pub fn remove_special_chars(text: &str) -> String {
    let replaced: String = text
        .chars()
        .map(|c| {
            if c.is_ascii_lowercase() || c.is_ascii_digit() {
                c
            } else {
                ' '
            }
        })
        .collect();
    collapse_whitespace(&replaced)
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Full cleaning pipeline. The result may be empty.
pub fn preprocess(text: &str) -> CleanText {
    let text = strip_html(text);
    let text = text.to_lowercase();
    let text = fold_accents(&text);
    let text = expand_contractions(&text);
    CleanText(remove_special_chars(&text))
}

/// Splits clean text on single spaces.
pub fn tokenize(clean: &CleanText) -> TokenSequence {
    TokenSequence(
        clean
            .as_str()
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_accents_examples() {
        assert_eq!(fold_accents("café"), "cafe");
        assert_eq!(fold_accents("naïve"), "naive");
        assert_eq!(fold_accents("abc"), "abc");
        assert_eq!(fold_accents("Ångström"), "Angstrom");
    }

    #[test]
    fn special_chars_examples() {
        assert_eq!(remove_special_chars("price: $5!"), "price 5");
        assert_eq!(remove_special_chars("c++ & go"), "c go");
        assert_eq!(remove_special_chars(""), "");
        assert_eq!(remove_special_chars("  a\t\nb  "), "a b");
    }

    #[test]
    fn preprocess_examples() {
        assert_eq!(preprocess("<p>They’re Café-goers!</p>").as_str(), "they are cafe goers");
        assert_eq!(preprocess("HELLO").as_str(), "hello");
        assert_eq!(preprocess("<br/>").as_str(), "");
    }

    #[test]
    fn tokenize_examples() {
        let toks = tokenize(&CleanText::from_clean("a b c").unwrap());
        assert_eq!(toks.tokens(), ["a", "b", "c"]);
        assert!(tokenize(&CleanText::default()).is_empty());
    }

    #[test]
    fn clean_text_validation() {
        assert!(CleanText::from_clean("ok 12").is_some());
        assert!(CleanText::from_clean(" lead").is_none());
        assert!(CleanText::from_clean("a  b").is_none());
        assert!(CleanText::from_clean("Upper").is_none());
    }

    #[test]
    fn token_sequence_splits_whitespace() {
        let seq = TokenSequence::new(["a b", "", "c"]);
        assert_eq!(seq.tokens(), ["a", "b", "c"]);
    }
}
