//! Bag-of-words vocabulary and sparse count vectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::TokenSequence;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
    min_frequency: usize,
}

/// Sorted `(index, count)` pairs over a vocabulary of size `dimension`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseCountVector {
    entries: Vec<(usize, u32)>,
    dimension: usize,
}

impl SparseCountVector {
    /// Validates ordering, bounds and positivity.
    pub fn new(mut entries: Vec<(usize, u32)>, dimension: usize) -> Result<Self> {
        entries.sort_unstable();
        let sorted = entries.windows(2).all(|w| w[0].0 < w[1].0);
        if !sorted || entries.iter().any(|&(i, c)| i >= dimension || c == 0) {
            return Err(Error::InvalidArgument(
                "sparse entries need distinct in-range indices and positive counts".into(),
            ));
        }
        Ok(SparseCountVector { entries, dimension })
    }

    pub fn from_dense(counts: &[u32]) -> Self {
        SparseCountVector {
            entries: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c))
                .collect(),
            dimension: counts.len(),
        }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn get(&self, index: usize) -> u32 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut dense = vec![0; self.dimension];
        for &(i, c) in &self.entries {
            dense[i] = c;
        }
        dense
    }

    pub fn scaled(&self, factor: u32) -> Self {
        SparseCountVector {
            entries: self.entries.iter().map(|&(i, c)| (i, c * factor)).collect(),
            dimension: self.dimension,
        }
    }

    pub(crate) fn check_dimension(&self, expected: usize) -> Result<()> {
        if self.dimension != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dimension,
            });
        }
        Ok(())
    }
}

/// Vocabulary of tokens occurring at least `min_frequency` times in the
/// training documents, indexed in first-occurrence order.
pub fn build_vocabulary(train_docs: &[TokenSequence], min_frequency: usize) -> Result<BowVocabulary> {
    if train_docs.iter().all(TokenSequence::is_empty) {
        return Err(Error::InvalidArgument("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for token in train_docs.iter().flat_map(TokenSequence::iter) {
        let count = counts.entry(token).or_insert(0);
        if *count == 0 {
            order.push(token);
        }
        *count += 1;
    }
    let index_to_token: Vec<String> = order
        .into_iter()
        .filter(|t| counts[t] >= min_frequency.max(1))
        .map(str::to_string)
        .collect();
    Ok(BowVocabulary::from_tokens(index_to_token, min_frequency))
}

/// Count in-vocabulary tokens; unknown tokens are dropped.
pub fn vectorize(vocab: &BowVocabulary, tokens: &TokenSequence) -> SparseCountVector {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for token in tokens.iter() {
        if let Some(&i) = vocab.token_to_index.get(token) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, u32)> = counts.into_iter().collect();
    entries.sort_unstable();
    SparseCountVector {
        entries,
        dimension: vocab.len(),
    }
}

impl BowVocabulary {
    fn from_tokens(index_to_token: Vec<String>, min_frequency: usize) -> Self {
        let token_to_index = index_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        BowVocabulary {
            token_to_index,
            index_to_token,
            min_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    /// `token<TAB>index` lines in index order.
    pub fn to_text(&self) -> String {
        self.index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{t}\t{i}\n"))
            .collect()
    }

    /// SHA-256 of the text form.
    pub fn fingerprint(&self) -> String {
        crate::textprep::hex_digest(&Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn from_text(content: &str, path: &Path) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in content.lines().enumerate() {
            let parsed = line
                .split_once('\t')
                .and_then(|(t, i)| i.parse::<usize>().ok().map(|i| (t, i)));
            match parsed {
                Some((token, index)) if index == tokens.len() && !token.is_empty() => tokens.push(token.to_string()),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: n + 1,
                        message: format!("expected token<TAB>{}", tokens.len()),
                    })
                }
            }
        }
        let vocab = BowVocabulary::from_tokens(tokens, 1);
        if vocab.token_to_index.len() != vocab.index_to_token.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "duplicate token".into(),
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BowVocabulary::from_text(&content, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&[&str]]) -> Vec<TokenSequence> {
        raw.iter().map(|d| TokenSequence::new(d.iter().copied())).collect()
    }

    #[test]
    fn min_frequency_filters() {
        let vocab = build_vocabulary(&docs(&[&["a", "b"], &["a"]]), 2).unwrap();
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.index("a"), Some(0));
        assert_eq!(vocab.index("b"), None);
        let vocab = build_vocabulary(&docs(&[&["x"]]), 1).unwrap();
        assert_eq!(vocab.index("x"), Some(0));
    }

    #[test]
    fn first_occurrence_order() {
        let vocab = build_vocabulary(&docs(&[&["c", "a"], &["b", "a", "c"]]), 1).unwrap();
        assert_eq!((0..3).map(|i| vocab.token(i).unwrap()).collect::<Vec<_>>(), ["c", "a", "b"]);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(build_vocabulary(&docs(&[&[], &[]]), 1).is_err());
        assert!(build_vocabulary(&[], 1).is_err());
    }

    #[test]
    fn counts_and_oov() {
        let vocab = build_vocabulary(&docs(&[&["a", "b"]]), 1).unwrap();
        let v = vectorize(&vocab, &TokenSequence::new(["a", "a", "b"]));
        assert_eq!(v.entries(), [(0, 2), (1, 1)]);
        let oov = vectorize(&vocab, &TokenSequence::new(["z", "q"]));
        assert!(oov.entries().is_empty());
        assert_eq!(oov.dimension(), 2);
    }

    #[test]
    fn text_round_trip() {
        let vocab = build_vocabulary(&docs(&[&["മല", "b", "c"]]), 1).unwrap();
        let back = BowVocabulary::from_text(&vocab.to_text(), Path::new("v")).unwrap();
        assert_eq!(back.to_text(), vocab.to_text());
        assert_eq!(back.fingerprint(), vocab.fingerprint());
        assert!(BowVocabulary::from_text("a\t1\n", Path::new("v")).is_err());
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseCountVector::new(vec![(1, 2), (0, 1)], 3).is_ok());
        assert!(SparseCountVector::new(vec![(1, 2), (1, 1)], 3).is_err());
        assert!(SparseCountVector::new(vec![(3, 1)], 3).is_err());
        assert!(SparseCountVector::new(vec![(0, 0)], 3).is_err());
    }

    proptest! {
        #[test]
        fn sum_equals_in_vocab_tokens(
            train in prop::collection::vec(prop::collection::vec("[a-f]", 0..6), 1..6),
            doc in prop::collection::vec("[a-h]", 0..20),
        ) {
            let train: Vec<TokenSequence> = train.into_iter().map(TokenSequence::new).collect();
            prop_assume!(train.iter().any(|d| !d.is_empty()));
            let vocab = build_vocabulary(&train, 1).unwrap();
            let tokens = TokenSequence::new(doc.clone());
            let v = vectorize(&vocab, &tokens);
            let expected = doc.iter().filter(|t| vocab.index(t).is_some()).count() as u64;
            prop_assert_eq!(v.total(), expected);
            prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));

            let mut reversed = doc;
            reversed.reverse();
            prop_assert_eq!(vectorize(&vocab, &TokenSequence::new(reversed)), v);
        }
    }
}
