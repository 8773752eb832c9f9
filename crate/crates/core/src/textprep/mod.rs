//! Text preprocessing for both model families.
//!
//! Bag-of-words models see `strip_emojis -> remove_punctuation ->
//! whitespace_tokenize -> lemmatize_english`. The transformer path only
//! rewrites emojis as their names and leaves the rest to the subword
//! tokenizer.

pub mod bpe;
mod emoji;
mod lemma;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

pub use bpe::{decode, encode, train_bpe, SubwordVocabulary, TokenIdSequence, SPECIAL_TOKENS};
pub use emoji::{
    convert_emojis, convert_emojis_with_diagnostics, strip_emojis, strip_emojis_with_diagnostics,
    EmojiDiagnostics, EmojiTable,
};
pub use lemma::{lemmatize_english, lemmatize_word};
pub(crate) use bpe::hex as hex_digest;

/// Whitespace-free, non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Empty strings are dropped.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSequence(tokens.into_iter().map(Into::into).filter(|t| !t.is_empty()).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn whitespace_tokenize(text: &str) -> TokenSequence {
    TokenSequence::new(text.split_whitespace())
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

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Replace every `P*` character with a space, then collapse whitespace.
pub fn remove_punctuation(text: &str) -> String {
    let spaced: String = text.chars().map(|c| if is_punctuation(c) { ' ' } else { c }).collect();
    collapse_whitespace(&spaced)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Classical,
    Transformer,
}

impl std::str::FromStr for Regime {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "classical" => Ok(Regime::Classical),
            "transformer" => Ok(Regime::Transformer),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown preprocessing regime {other:?} (expected classical or transformer)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalOptions {
    /// Lowercase ASCII letters before lemmatizing. Other scripts are untouched.
    pub lowercase_ascii: bool,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        ClassicalOptions { lowercase_ascii: true }
    }
}

/// Bag-of-words preprocessing: emojis and punctuation removed, English words
/// lemmatized.
pub fn classical_tokens(text: &str, table: &EmojiTable, options: ClassicalOptions) -> TokenSequence {
    let mut text = remove_punctuation(&strip_emojis(text, table));
    if options.lowercase_ascii {
        text.make_ascii_lowercase();
    }
    lemmatize_english(&whitespace_tokenize(&text))
}

pub fn transformer_text(text: &str, table: &EmojiTable) -> String {
    convert_emojis(text, table)
}

/// Apply a regime and return text suitable for writing back to a TSV.
pub fn preprocess(text: &str, regime: Regime, table: &EmojiTable, options: ClassicalOptions) -> String {
    match regime {
        Regime::Classical => classical_tokens(text, table, options).join(" "),
        Regime::Transformer => transformer_text(text, table),
    }
}
