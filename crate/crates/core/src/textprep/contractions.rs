use std::collections::HashMap;
use std::sync::OnceLock;

/// The shipped contraction table as a JSON object of lowercase
/// contraction → expansion.
pub const CONTRACTIONS_JSON: &str = include_str!("../../data/contractions.json");

/// Lowercase contraction → expansion map.
#[derive(Debug, Clone)]
pub struct ContractionTable {
    map: HashMap<String, String>,
}

impl ContractionTable {
    pub fn from_json(json: &str) -> serde_json::Result<Self> {
        let map: HashMap<String, String> = serde_json::from_str(json)?;
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.map.get(word).map(String::as_str)
    }

    /// Replaces contractions in `text` (expected lowercase). Curly
    /// apostrophes are normalized to `'` first.
    ///
    /// Words are maximal runs of `[a-z0-9']`. A word is looked up whole, so
    /// the longest table entry always wins (`can't've` before `can't`). If
    /// the whole word is unknown, surrounding quote marks are trimmed and the
    /// core looked up again.
    pub fn expand(&self, text: &str) -> String {
        let text: String = text
            .chars()
            .map(|c| if matches!(c, '\u{2019}' | '\u{2018}') { '\'' } else { c })
            .collect();
        let mut out = String::with_capacity(text.len() + 16);
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if is_word_char(c) {
                word_start.get_or_insert(i);
            } else {
                if let Some(start) = word_start.take() {
                    self.push_word(&text[start..i], &mut out);
                }
                out.push(c);
            }
        }
        if let Some(start) = word_start {
            self.push_word(&text[start..], &mut out);
        }
        out
    }

    fn push_word(&self, word: &str, out: &mut String) {
        if !word.contains('\'') {
            out.push_str(word);
            return;
        }
        if let Some(exp) = self.get(word) {
            out.push_str(exp);
            return;
        }
        let candidates = [
            word.trim_end_matches('\''),
            word.trim_start_matches('\''),
            word.trim_matches('\''),
        ];
        for core in candidates {
            if core.is_empty() || core.len() == word.len() {
                continue;
            }
            if let Some(exp) = self.get(core) {
                let start = word.find(core).expect("core is a substring of word");
                out.push_str(&word[..start]);
                out.push_str(exp);
                out.push_str(&word[start + core.len()..]);
                return;
            }
        }
        out.push_str(word);
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\''
}

/// The table shipped with the crate.
pub fn contraction_table() -> &'static ContractionTable {
    static TABLE: OnceLock<ContractionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        ContractionTable::from_json(CONTRACTIONS_JSON).expect("shipped contraction table is valid JSON")
    })
}

/// Expands contractions using the shipped table.
pub fn expand_contractions(text: &str) -> String {
    contraction_table().expand(text)
}
